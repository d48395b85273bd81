"""Cycle-level model of the WS(m, n) weight-stationary accelerator.

n PE arrays of m PEs each. Every array holds the weights of one filter; a
pass pins one filter row chunk for ``g`` consecutive channels and then sweeps
every output position row-major, one position per cycle. Inputs are
multicast to all arrays and forwarded between neighbouring PEs inside a row,
so only the stride-wide fresh strip is read from the global buffer after the
first position of each output row. Each array's adder tree emits one psum per
cycle, one cycle after the MACs (accumulation latency of one cycle).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from typing import Iterator

from .cnn import ConvLayerSpec, FeatureMapShape, conv_output
from .trace import WS, CycleRecord, LayerTrace, take_prefix, first_two_addrs, DEFAULT_MARGIN
from .errors import InvalidGeometry


@dataclass(frozen=True)
class WsConfig:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise InvalidGeometry(f"WS({self.m},{self.n}) needs m, n >= 1")

    def __str__(self):
        return f"WS({self.m},{self.n})"


@dataclass(frozen=True)
class WsMapping:
    g: int             # channels packed side by side in one array pass
    f: int             # row folds
    n_a: int           # arrays active in the first filter group
    chunks: tuple[int, ...]

    @property
    def active_pes(self) -> int:
        return self.g * self.chunks[0]


def ws_mapping(conv: ConvLayerSpec, cfg: WsConfig) -> WsMapping:
    R, m = conv.R, cfg.m
    if R <= m:
        chunks = (R,)
    else:
        chunks = (m,) * (R // m) + ((R % m,) if R % m else ())
    g = max(m // R, 1)
    return WsMapping(g=g, f=len(chunks), n_a=min(cfg.n, conv.K), chunks=chunks)


@dataclass(frozen=True)
class _Pass:
    arrays: int
    channels: int
    chunk: int
    first: bool   # first contribution to every ofmap element of the group
    last: bool    # completes every ofmap element of the group


def _passes(conv: ConvLayerSpec, cfg: WsConfig) -> Iterator[_Pass]:
    mp = ws_mapping(conv, cfg)
    groups = [min(mp.g, conv.C - c0) for c0 in range(0, conv.C, mp.g)]
    for k0 in range(0, conv.K, mp.n_a):
        arrays = min(mp.n_a, conv.K - k0)
        for r in range(conv.R):
            for fi, chunk in enumerate(mp.chunks):
                for gi, channels in enumerate(groups):
                    first = r == 0 and fi == 0 and gi == 0
                    last = r == conv.R - 1 and fi == mp.f - 1 and gi == len(groups) - 1
                    yield _Pass(arrays, channels, chunk, first, last)


def ws_cycles(conv: ConvLayerSpec, ifmap: FeatureMapShape, cfg: WsConfig) -> Iterator[CycleRecord]:
    """Every cycle of the layer, in order."""
    out = conv_output(ifmap, conv)
    Xo, Yo, st = out.X, out.Y, conv.st
    t = 0
    psw_next = o_next = 0
    for p in _passes(conv, cfg):
        row_read = p.channels * p.chunk
        strip_read = p.channels * min(st, p.chunk)
        w_entry = p.arrays * p.channels * p.chunk
        psr = 0 if p.first else p.arrays
        for y in range(Yo):
            for x in range(Xo):
                t += 1
                w = w_entry if (x == 0 and y == 0) else 0
                i = row_read if x == 0 else strip_read
                yield CycleRecord(t, w, i, o_next, psr, psw_next)
                psw_next = p.arrays
                o_next = p.arrays if p.last else 0
    yield CycleRecord(t + 1, 0, 0, o_next, 0, psw_next)


def ws_layer_totals(conv: ConvLayerSpec, ifmap: FeatureMapShape, cfg: WsConfig) -> dict:
    """Aggregate the schedule pass by pass without emitting cycles."""
    out = conv_output(ifmap, conv)
    Xo, Yo, st = out.X, out.Y, conv.st
    W = I = psr = psw = o = cycles = 0
    for p in _passes(conv, cfg):
        n_cyc = Xo * Yo
        cycles += n_cyc
        W += p.arrays * p.channels * p.chunk
        I += Yo * p.channels * (p.chunk + (Xo - 1) * min(st, p.chunk))
        psw += p.arrays * n_cyc
        if not p.first:
            psr += p.arrays * n_cyc
        if p.last:
            o += p.arrays * n_cyc
    return {"W_r": W, "I_r": I, "O_w": o, "psum_r": psr, "psum_w": psw, "total_cycles": cycles + 1}


def ws_closed_forms(conv: ConvLayerSpec, ifmap: FeatureMapShape, cfg: WsConfig) -> dict:
    """Closed-form totals and first-cycle observables of the WS schedule."""
    out = conv_output(ifmap, conv)
    mp = ws_mapping(conv, cfg)
    Xo, Yo = out.X, out.Y
    R, C, K = conv.R, conv.C, conv.K
    ch1 = min(mp.g, C)
    groups_c = ceil(C / mp.g)
    psum_w = groups_c * R * mp.f * Xo * Yo * K
    return {
        "W_r": R * R * C * K,
        "psum_w": psum_w,
        "psum_r": psum_w - Xo * Yo * K,
        "O_w": Xo * Yo * K,
        "total_cycles": ceil(K / mp.n_a) * groups_c * R * mp.f * Xo * Yo + 1,
        "n_a": mp.n_a,
        "i1": ch1 * mp.chunks[0],
        "w1": mp.n_a * ch1 * mp.chunks[0],
        "i2": ch1 * min(conv.st, mp.chunks[0]) if Xo > 1 else None,
        "t_e": Xo + 1,
    }


def simulate_ws_layer(conv: ConvLayerSpec, ifmap: FeatureMapShape, cfg: WsConfig,
                      mode: str = "prefix", margin: int = DEFAULT_MARGIN, layer_index: int = 0,
                      dram_writes: int | None = None) -> LayerTrace:
    totals = ws_layer_totals(conv, ifmap, cfg)
    cycles = ws_cycles(conv, ifmap, cfg)
    if mode == "prefix":
        cycles = take_prefix(cycles, WS, margin)
    elif mode != "full":
        raise ValueError(f"unknown trace mode {mode!r}")
    prefix = tuple(cycles)
    return LayerTrace(layer_index, totals["W_r"], totals["I_r"], totals["O_w"], totals["psum_r"],
                      totals["psum_w"], totals["O_w"] if dram_writes is None else dram_writes,
                      totals["total_cycles"], prefix, first_two_addrs(prefix))
