"""Whole-model simulation: runs every layer on one accelerator and produces the
snooped record stream (boundary signals, DRAM traffic, cycle counts, totals)."""

from __future__ import annotations

from itertools import islice
from math import ceil
from typing import Iterator

from .cnn import CnnModel, FcLayerSpec, FeatureMapShape, LayerSpec, conv_output
from .pooling import observe
from .sim_os import OsConfig, os_cycles, os_layer_totals
from .sim_ws import WsConfig, ws_cycles, ws_layer_totals
from .trace import (OS, WS, DEFAULT_MARGIN, ConfigPhase, CycleRecord, DramRecord, LayerTotals,
                    LayerTrace, Meta, Record, take_prefix)


def make_config(dataflow: str, m: int, n: int):
    if dataflow == WS:
        return WsConfig(m, n)
    if dataflow == OS:
        return OsConfig(m, n)
    raise ValueError(f"unknown dataflow {dataflow!r}")


def fc_cycles(fc: FcLayerSpec, lanes: int, dataflow: str) -> Iterator[CycleRecord]:
    """Dense layer: weights stream input-major, ``lanes`` MACs per cycle; each
    input is read once with its first weight; outputs drain on the last cycle."""
    total = fc.weights
    out = fc.out_neurons
    n_cyc = ceil(total / lanes)
    for t in range(1, n_cyc + 1):
        lo, hi = (t - 1) * lanes, min(t * lanes, total)
        # inputs j whose first weight j*out lies in [lo, hi)
        i = -(-hi // out) - -(-lo // out)
        yield CycleRecord(t, hi - lo, i)
    yield CycleRecord(n_cyc + 1, 0, 0, out, 0, out if dataflow == WS else 0)


def fc_layer_totals(fc: FcLayerSpec, lanes: int, dataflow: str) -> dict:
    return {
        "W_r": fc.weights, "I_r": fc.in_neurons, "O_w": fc.out_neurons,
        "psum_r": 0, "psum_w": fc.out_neurons if dataflow == WS else 0,
        "total_cycles": ceil(fc.weights / lanes) + 1,
    }


def _layer_parts(layer: LayerSpec, ifmap: FeatureMapShape, dataflow: str, cfg):
    """(totals dict, cycle iterator, dram write count)."""
    if isinstance(layer, FcLayerSpec):
        lanes = cfg.m * cfg.n
        return fc_layer_totals(layer, lanes, dataflow), fc_cycles(layer, lanes, dataflow), layer.out_neurons
    ofmap = conv_output(ifmap, layer)
    dram = observe(ofmap, layer).dram_writes
    if dataflow == WS:
        return ws_layer_totals(layer, ifmap, cfg), ws_cycles(layer, ifmap, cfg), dram
    return os_layer_totals(layer, ifmap, cfg), os_cycles(layer, ifmap, cfg), dram


def _cut(cycles: Iterator[CycleRecord], layer: LayerSpec, dataflow: str, mode: str, margin: int):
    if mode == "full":
        return cycles
    if mode != "prefix":
        raise ValueError(f"unknown trace mode {mode!r}")
    if isinstance(layer, FcLayerSpec):
        return islice(cycles, margin)
    return take_prefix(cycles, dataflow, margin)


def simulate_layer(layer: LayerSpec, ifmap: FeatureMapShape, dataflow: str, cfg,
                   mode: str = "prefix", margin: int = DEFAULT_MARGIN, layer_index: int = 0) -> LayerTrace:
    totals, cycles, dram = _layer_parts(layer, ifmap, dataflow, cfg)
    prefix = tuple(_cut(cycles, layer, dataflow, mode, margin))
    return LayerTrace.from_totals(LayerTotals(layer_index, dram_writes=dram, **totals), prefix)


def simulate_model(model: CnnModel, dataflow: str, m: int, n: int, mode: str = "prefix",
                   margin: int = DEFAULT_MARGIN) -> Iterator[Record]:
    """Yield the full snooped stream for one inference of ``model``.

    Global cycle line: each layer gets one load slot (the ifmap DRAM read and,
    on WS, the forwarding-link configuration message) followed by its compute
    cycles; the ofmap DRAM write lands on the layer's last cycle. DRAM is a
    bump allocator, so layer j+1 reads exactly the region layer j wrote.
    """
    cfg = make_config(dataflow, m, n)
    yield Meta(dataflow, m, n, mode, margin)
    g = 0
    in_base = 0
    free = model.input.size
    for j, (layer, ifmap) in enumerate(zip(model.layers, model.ifmaps())):
        g += 1
        if dataflow == WS:
            yield ConfigPhase(g, m * n)
        yield DramRecord("read", in_base, ifmap.size, j, g)
        totals, cycles, dram = _layer_parts(layer, ifmap, dataflow, cfg)
        yield from _cut(cycles, layer, dataflow, mode, margin)
        yield LayerTotals(j, dram_writes=dram, **totals)
        g += totals["total_cycles"]
        yield DramRecord("write", free, dram, j, g)
        in_base, free = free, free + dram
