"""Cycle-level model of the OS(m, n) output-stationary accelerator.

Each PE owns one ofmap element of the current tile (array = ofmap row, PE =
column), so a tile covers up to n rows by m columns of one output channel.
One weight is broadcast per cycle; the column walk inside a filter row steps
by the stride so every PE can take its next input from its right neighbour
and only the edge PE of each array reads the global buffer. Completed
outputs of a tile are written in one burst on the cycle after its last MAC.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from typing import Iterator

from .cnn import ConvLayerSpec, FeatureMapShape, conv_output
from .trace import OS, CycleRecord, LayerTrace, take_prefix, first_two_addrs, DEFAULT_MARGIN
from .errors import InvalidGeometry


@dataclass(frozen=True)
class OsConfig:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise InvalidGeometry(f"OS({self.m},{self.n}) needs m, n >= 1")

    def __str__(self):
        return f"OS({self.m},{self.n})"


@dataclass(frozen=True)
class OsTilePlan:
    tiles_x: int
    tiles_y: int
    cycles_per_tile: int


def os_tile_plan(conv: ConvLayerSpec, ifmap: FeatureMapShape, cfg: OsConfig) -> OsTilePlan:
    out = conv_output(ifmap, conv)
    return OsTilePlan(ceil(out.X / cfg.m), ceil(out.Y / cfg.n), conv.R * conv.R * conv.C)


def weight_addr(conv: ConvLayerSpec, k: int, c: int, y: int, x: int) -> int:
    """Element offset of W[k, c, y, x] in the row-major filter tensor."""
    return ((k * conv.C + c) * conv.R + y) * conv.R + x


def weight_walk(conv: ConvLayerSpec) -> list[tuple[int, int, int, bool]]:
    """Broadcast order within a tile as ``(c, y, x, forwards)``.

    ``forwards`` is True when the step advances the column by exactly the
    stride inside the same filter row, i.e. inputs shift one PE left.
    """
    R, st = conv.R, conv.st
    walk = []
    for c in range(conv.C):
        for y in range(R):
            for s in range(min(st, R)):
                for j, x in enumerate(range(s, R, st)):
                    walk.append((c, y, x, j > 0))
    return walk


def _tiles(out: FeatureMapShape, cfg: OsConfig) -> Iterator[tuple[int, int]]:
    """(active arrays, active PEs per array) for every tile, row-major."""
    for y0 in range(0, out.Y, cfg.n):
        rows = min(cfg.n, out.Y - y0)
        for x0 in range(0, out.X, cfg.m):
            yield rows, min(cfg.m, out.X - x0)


def os_cycles(conv: ConvLayerSpec, ifmap: FeatureMapShape, cfg: OsConfig) -> Iterator[CycleRecord]:
    out = conv_output(ifmap, conv)
    walk = weight_walk(conv)
    tiles = list(_tiles(out, cfg))
    t = 0
    o_next = 0
    for k in range(conv.K):
        for rows, cols in tiles:
            pes = rows * cols
            for c, y, x, fwd in walk:
                t += 1
                addrs = (weight_addr(conv, k, c, y, x),) if t <= 2 else None
                yield CycleRecord(t, 1, rows if fwd else pes, o_next, 0, 0, addrs)
                o_next = 0
            o_next = pes
    yield CycleRecord(t + 1, 0, 0, o_next, 0, 0)


def os_layer_totals(conv: ConvLayerSpec, ifmap: FeatureMapShape, cfg: OsConfig) -> dict:
    """Aggregate the schedule tile by tile without emitting cycles."""
    out = conv_output(ifmap, conv)
    walk = weight_walk(conv)
    n_fwd = sum(1 for *_, fwd in walk if fwd)
    n_full = len(walk) - n_fwd
    W = I = O = 0
    for rows, cols in _tiles(out, cfg):
        W += len(walk)
        I += n_full * rows * cols + n_fwd * rows
        O += rows * cols
    W, I, O = W * conv.K, I * conv.K, O * conv.K
    return {"W_r": W, "I_r": I, "O_w": O, "psum_r": 0, "psum_w": 0, "total_cycles": W + 1}


def os_closed_forms(conv: ConvLayerSpec, ifmap: FeatureMapShape, cfg: OsConfig) -> dict:
    out = conv_output(ifmap, conv)
    plan = os_tile_plan(conv, ifmap, cfg)
    W = plan.tiles_x * plan.tiles_y * plan.cycles_per_tile * conv.K
    return {
        "W_r": W,
        "O_w": out.X * out.Y * conv.K,
        "total_cycles": W + 1,
        "t_e": plan.cycles_per_tile + 1,
    }


def simulate_os_layer(conv: ConvLayerSpec, ifmap: FeatureMapShape, cfg: OsConfig,
                      mode: str = "prefix", margin: int = DEFAULT_MARGIN, layer_index: int = 0,
                      dram_writes: int | None = None) -> LayerTrace:
    totals = os_layer_totals(conv, ifmap, cfg)
    cycles = os_cycles(conv, ifmap, cfg)
    if mode == "prefix":
        cycles = take_prefix(cycles, OS, margin)
    elif mode != "full":
        raise ValueError(f"unknown trace mode {mode!r}")
    prefix = tuple(cycles)
    return LayerTrace(layer_index, totals["W_r"], totals["I_r"], totals["O_w"], 0, 0,
                      totals["O_w"] if dram_writes is None else dram_writes,
                      totals["total_cycles"], prefix, first_two_addrs(prefix))
