"""Whole-model recovery: per-layer candidate sets chained into full structures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from ..cnn import CnnModel, FeatureMapShape
from ..errors import NoCandidates, NoPoolSolution, RecoveryFailed, TruncatedTrace
from ..trace import OS, WS, LayerTrace
from .layers import (CandidateStructure, FcCandidate, LayerKind, candidate_from_dict, identify_layer_type,
                     recover_conv_os, recover_conv_ws, recover_fc, recover_pooling)

Candidate = CandidateStructure | FcCandidate


@dataclass
class RecoveryReport:
    layers: list[list[Candidate]]
    structures: list[list[Candidate]]
    audit: list[dict] = field(default_factory=list)
    ambiguous: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "layers": [[c.to_dict() for c in cands] for cands in self.layers],
            "structures": [[c.to_dict() for c in s] for s in self.structures],
            "audit": self.audit,
            "ambiguous": self.ambiguous,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecoveryReport":
        return cls([[candidate_from_dict(c) for c in cands] for cands in d.get("layers", [])],
                   [[candidate_from_dict(c) for c in s] for s in d.get("structures", [])],
                   list(d.get("audit", [])), list(d.get("ambiguous", [])))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RecoveryReport":
        return cls.from_dict(json.loads(text))


def structure_to_model(structure: Sequence[Candidate], first_ifmap: FeatureMapShape,
                       name: str = "recovered") -> CnnModel:
    return CnnModel(name, first_ifmap, tuple(c.to_layer() for c in structure))


def _observed_ow(tr: LayerTrace, dataflow: str) -> int:
    # WS: the GB sees psum traffic only; final outputs are the surplus of writes over reads
    return tr.psum_w - tr.psum_r if dataflow == WS else tr.O_w


def _recover_conv(tr: LayerTrace, ifmap: FeatureMapShape, cfg, dataflow: str, O_w: int, audit: list):
    if dataflow == WS:
        return recover_conv_ws(tr.W_r, O_w, tr.series("w"), tr.series("i"), ifmap.X, ifmap.Y, ifmap.C,
                               cfg, tr.series("o"), audit)
    if dataflow == OS:
        addrs = tr.first_two_weight_addrs
        if addrs is None:
            raise TruncatedTrace(f"layer {tr.layer_index}: first two weight addresses missing")
        return recover_conv_os(tr.W_r, O_w, tr.series("o"), addrs[0], addrs[1], ifmap.X, ifmap.Y, ifmap.C,
                               cfg, audit)
    raise ValueError(f"unknown dataflow {dataflow!r}")


def recover_layer(tr: LayerTrace, ifmap: FeatureMapShape, cfg, dataflow: str) -> tuple[list[Candidate], list[dict], bool]:
    """Candidates for one layer given one hypothesised ifmap: (candidates, audit, ambiguous)."""
    O_w = _observed_ow(tr, dataflow)
    kind = identify_layer_type(tr.W_r, tr.I_r, O_w, O_w, tr.dram_writes)
    audit: list[dict] = []
    if kind is LayerKind.FC:
        fc = recover_fc(tr.W_r, tr.I_r, O_w)
        # a pointwise Conv on a 1x1 ifmap produces the same identity
        ambiguous = ifmap.X == 1 and ifmap.Y == 1
        return [FcCandidate(fc.in_neurons, fc.out_neurons)], audit, ambiguous
    try:
        convs = _recover_conv(tr, ifmap, cfg, dataflow, O_w, audit)
    except NoCandidates:
        return [], audit, False
    if kind is LayerKind.CONV:
        return convs, audit, False
    out = []
    for c in convs:
        try:
            p = recover_pooling(tr.dram_writes, c.Xo, c.Yo, c.K)
        except NoPoolSolution as e:
            audit.append({"R": c.R, "K": c.K, "st": c.st, "pd": c.pd, "check": "pooling", "reason": str(e)})
            continue
        out.append(CandidateStructure(c.R, c.K, c.C, c.st, c.pd, c.X, c.Y, c.Xo, c.Yo, p.R, p.st))
    return out, audit, False


def flatten(layers: Sequence[Sequence[Candidate]], first_ifmap: FeatureMapShape) -> list[list[Candidate]]:
    """Every path through the layered candidate DAG whose shapes chain."""
    paths: list[list[Candidate]] = []

    def walk(j: int, prev: FeatureMapShape, path: list[Candidate]):
        if j == len(layers):
            paths.append(list(path))
            return
        for c in layers[j]:
            if c.accepts(prev):
                path.append(c)
                walk(j + 1, c.output, path)
                path.pop()

    walk(0, first_ifmap, [])
    return paths


def recover_model(traces: Sequence[LayerTrace], first_ifmap: FeatureMapShape, cfg, dataflow: str) -> RecoveryReport:
    memo: dict[tuple[int, FeatureMapShape], tuple[list[Candidate], list[dict], bool]] = {}
    layers: list[list[Candidate]] = []
    audit: list[dict] = []
    ambiguous: list[int] = []
    ifmaps = [first_ifmap]
    for j, tr in enumerate(traces):
        cands: list[Candidate] = []
        for ifmap in ifmaps:
            key = (j, ifmap)
            if key not in memo:
                memo[key] = recover_layer(tr, ifmap, cfg, dataflow)
            found, sub, amb = memo[key]
            audit.extend({"layer": j, "ifmap": str(ifmap), **a} for a in sub)
            if amb and j not in ambiguous:
                ambiguous.append(j)
            cands.extend(c for c in found if c not in cands)
        if not cands:
            raise RecoveryFailed(f"layer {j}: no candidate survives for ifmaps "
                                 f"{', '.join(str(f) for f in ifmaps)}", audit)
        layers.append(cands)
        ifmaps = list(dict.fromkeys(c.output for c in cands))
    return RecoveryReport(layers, flatten(layers, first_ifmap), audit, ambiguous)
