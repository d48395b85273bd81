"""Brute-force reference schedules for small Conv layers.

Enumerates every MAC event and derives per-cycle traffic from literal
coordinate sets: an input is read from the global buffer only if it is not
already held in the same PE array from the previous cycle of the same output
row (WS) or tile (OS); a weight is read only if it is not already resident; a
psum is read whenever the target ofmap element already carries a partial.
Nothing here reuses the simulators' counting code.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import product

from .cnn import ConvLayerSpec, FeatureMapShape, conv_output
from .errors import TooLarge
from .sim_os import OsConfig
from .sim_ws import WsConfig
from .trace import CycleRecord

MAX_MACS = 10**6


@dataclass(frozen=True)
class MacEvent:
    k: int
    c: int
    y: int
    x: int
    ox: int
    oy: int


def mac_count(conv: ConvLayerSpec, ifmap: FeatureMapShape) -> int:
    out = conv_output(ifmap, conv)
    return conv.R * conv.R * conv.C * out.X * out.Y * conv.K


def _split(total: int, size: int) -> list[range]:
    return [range(a, min(a + size, total)) for a in range(0, total, size)]


def _ws_trace(conv, out, cfg: WsConfig, events: list | None):
    R, C, K, st = conv.R, conv.C, conv.K, conv.st
    # mapping policy: whole filter rows side by side for as many channels as
    # fit; longer rows fold into m-wide pieces; one filter per array
    per_pass = 1 if R > cfg.m else cfg.m // R
    col_pieces = _split(R, cfg.m) if R > cfg.m else [range(R)]
    filter_groups = _split(K, min(cfg.n, K))
    chan_groups = _split(C, per_pass)

    full = R * R * C
    contributions = defaultdict(int)
    resident = set()
    rows = []  # per compute cycle: (w, i, psr, psw_next, o_next)
    for ks in filter_groups:
        for r in range(R):
            for cols in col_pieces:
                for cs in chan_groups:
                    pinned = {(k, c, r, x) for k in ks for c in cs for x in cols}
                    w_new = len(pinned - resident)
                    resident = pinned
                    for oy in range(out.Y):
                        held = set()
                        for ox in range(out.X):
                            need = {(c, oy * st + r, ox * st + x) for c in cs for x in cols}
                            i_new = len(need - held)
                            held = need
                            psr = finals = 0
                            for k in ks:
                                key = (k, oy, ox)
                                if contributions[key]:
                                    psr += 1
                                contributions[key] += len(cs) * len(cols)
                                if contributions[key] == full:
                                    finals += 1
                                if events is not None:
                                    events.extend(MacEvent(k, c, r, x, ox, oy) for c in cs for x in cols)
                            rows.append((w_new, i_new, psr, len(ks), finals))
                            w_new = 0
    return rows


def _os_trace(conv, out, cfg: OsConfig, events: list | None):
    R, C, K, st = conv.R, conv.C, conv.K, conv.st
    # broadcast order: channel, filter row, then columns grouped by their
    # residue modulo the stride
    order = sorted(product(range(C), range(R), range(R)), key=lambda e: (e[0], e[1], e[2] % st, e[2]))
    rows = []
    for k in range(K):
        for ys in _split(out.Y, cfg.n):
            for xs in _split(out.X, cfg.m):
                held = {oy: set() for oy in ys}
                macs = defaultdict(int)
                for step, (c, y, x) in enumerate(order):
                    i_new = 0
                    for oy in ys:
                        need = {(c, oy * st + y, ox * st + x) for ox in xs}
                        i_new += len(need - held[oy])
                        held[oy] = need
                    for oy, ox in product(ys, xs):
                        macs[(oy, ox)] += 1
                        if events is not None:
                            events.append(MacEvent(k, c, y, x, ox, oy))
                    done = sum(1 for v in macs.values() if v == R * R * C) if step == len(order) - 1 else 0
                    addr = ((k * C + c) * R + y) * R + x
                    rows.append((len({(k, c, y, x)}), i_new, addr, done))
    return rows


def brute_force_trace(conv: ConvLayerSpec, ifmap: FeatureMapShape, accel, events: list | None = None,
                      limit: int = MAX_MACS) -> list[CycleRecord]:
    """Every cycle of the layer under ``accel`` (a WsConfig or OsConfig).

    Pass a list as ``events`` to also collect every MacEvent.
    """
    macs = mac_count(conv, ifmap)
    if macs > limit:
        raise TooLarge(f"{macs} MACs exceeds oracle limit {limit}")
    out = conv_output(ifmap, conv)
    records = []
    if isinstance(accel, WsConfig):
        rows = _ws_trace(conv, out, accel, events)
        psw_prev = o_prev = 0
        for t, (w, i, psr, psw_next, o_next) in enumerate(rows, 1):
            records.append(CycleRecord(t, w, i, o_prev, psr, psw_prev))
            psw_prev, o_prev = psw_next, o_next
        records.append(CycleRecord(len(rows) + 1, 0, 0, o_prev, 0, psw_prev))
    elif isinstance(accel, OsConfig):
        rows = _os_trace(conv, out, accel, events)
        o_prev = 0
        for t, (w, i, addr, done) in enumerate(rows, 1):
            records.append(CycleRecord(t, w, i, o_prev, 0, 0, (addr,) if t <= 2 else None))
            o_prev = done
        records.append(CycleRecord(len(rows) + 1, 0, 0, o_prev, 0, 0))
    else:
        raise TypeError(f"unsupported accelerator config {accel!r}")
    return records
