"""Random Conv layers for soundness runs, and a per-layer simulate-then-recover check."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .cnn import ConvLayerSpec, FeatureMapShape
from .errors import DataflowScopeError
from .recovery.layers import recover_conv_os, recover_conv_ws
from .simulate import make_config, simulate_layer
from .trace import OS, WS

GRID = ((WS, 4, 4), (WS, 12, 4), (WS, 24, 10), (OS, 4, 4), (OS, 10, 4), (OS, 20, 10))


@dataclass(frozen=True)
class SoundnessCase:
    dataflow: str
    m: int
    n: int
    conv: ConvLayerSpec
    ifmap: FeatureMapShape


def _stride_ok(dataflow: str, R: int, st: int, m: int) -> bool:
    if dataflow == WS:
        # the first filter-row chunk must be wider than the stride, or every
        # cycle of a row reads the same number of inputs and X' is unobservable
        return st < min(R, m)
    # OS reads the stride off consecutive weight addresses, which needs st < R
    return st < R or R == st == 1


def random_case(rng: random.Random, dataflow: str | None = None, max_R: int = 13,
                max_C: int = 128, max_K: int = 512, max_X: int = 64) -> SoundnessCase:
    grid = [g for g in GRID if dataflow in (None, g[0])]
    df, m, n = rng.choice(grid)
    while True:
        R = rng.randint(2, max_R)
        st = rng.randint(1, R)
        if not _stride_ok(df, R, st, m):
            continue
        pd = rng.randint(0, R - 1)
        Xo = rng.randint(2, max(2, (max_X - R + 2 * pd) // st + 1))
        X = (Xo - 1) * st + R - 2 * pd
        if X < 1 or X > max_X:
            continue
        C = rng.randint(1, max_C)
        K = rng.randint(1, max_K)
        return SoundnessCase(df, m, n, ConvLayerSpec(R, C, K, st, pd), FeatureMapShape(X, X, C))


def recover_case(case: SoundnessCase):
    """Simulate one layer (prefix mode) and recover it from its observables."""
    cfg = make_config(case.dataflow, case.m, case.n)
    tr = simulate_layer(case.conv, case.ifmap, case.dataflow, cfg)
    X, Y, C = case.ifmap.X, case.ifmap.Y, case.ifmap.C
    if case.dataflow == WS:
        return recover_conv_ws(tr.W_r, tr.psum_w - tr.psum_r, tr.series("w"), tr.series("i"), X, Y, C, cfg)
    a1, a2 = tr.first_two_weight_addrs
    return recover_conv_os(tr.W_r, tr.O_w, tr.series("o"), a1, a2, X, Y, C, cfg)


def soundness_run(count: int, seed: int, dataflow: str | None = None) -> dict:
    """Fraction of cases whose true parameters survive, and how often they are unique."""
    rng = random.Random(seed)
    sound = unique = 0
    failures = []
    for _ in range(count):
        case = random_case(rng, dataflow)
        truth = (case.conv.R, case.conv.K, case.conv.C, case.conv.st, case.conv.pd)
        try:
            found = recover_case(case)
        except DataflowScopeError as e:
            failures.append((case, str(e)))
            continue
        keys = {(c.R, c.K, c.C, c.st, c.pd) for c in found}
        if truth in keys:
            sound += 1
            unique += len(keys) == 1
        else:
            failures.append((case, f"truth missing from {sorted(keys)}"))
    return {"count": count, "sound": sound, "unique": unique,
            "uniqueness_rate": unique / count if count else 0.0, "failures": failures}

