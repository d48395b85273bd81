"""Split a snooped record stream into per-layer segments.

Two independent signals delimit layers: the forwarding-link configuration
message sent before each layer, and a read-after-write on DRAM when a layer
loads the region its predecessor just wrote. The very first DRAM read (the
host-provided image) opens the first segment for the RAW detector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..errors import BoundaryUndetectable, MalformedTrace
from ..trace import (BoundaryEvent, ConfigPhase, CycleRecord, DramRecord, LayerTotals, LayerTrace,
                     Meta, Record, first_two_addrs)


@dataclass(frozen=True)
class Segment:
    index: int
    start: int
    end: int
    records: tuple


def config_events(records: Sequence[Record]) -> list[BoundaryEvent]:
    return [BoundaryEvent("config_phase", r.cycle, r.payload)
            for r in records if isinstance(r, ConfigPhase)]


def raw_events(records: Sequence[Record]) -> list[BoundaryEvent]:
    """Boundary per DRAM read that overlaps an earlier write (plus the first read)."""
    writes: list[DramRecord] = []
    events = []
    for r in records:
        if not isinstance(r, DramRecord):
            continue
        if r.dir == "write":
            writes.append(r)
        elif not events or any(r.overlaps(w) for w in writes):
            events.append(BoundaryEvent("raw_dependency", r.cycle, r.base_addr))
    return events


def _last_cycle(records: Sequence[Record]) -> int:
    cycles = [r.cycle for r in records if isinstance(r, (DramRecord, ConfigPhase))]
    return max(cycles, default=0)


def _is_opener(r: Record, kind: str, writes: list) -> bool:
    if kind == "config_phase":
        return isinstance(r, ConfigPhase)
    if isinstance(r, DramRecord) and r.dir == "read":
        return not writes or any(r.overlaps(w) for w in writes)
    return False


def identify_layer_boundaries(records: Iterable[Record]) -> list[Segment]:
    """Segment the stream; with both signals present their spans must agree."""
    records = list(records)
    cfg = config_events(records)
    raw = raw_events(records)
    if not cfg and not raw:
        raise BoundaryUndetectable("trace carries neither config_phase nor DRAM records")
    if cfg and raw and [e.cycle for e in cfg] != [e.cycle for e in raw]:
        raise MalformedTrace(f"config-phase boundaries {[e.cycle for e in cfg]} disagree with "
                             f"RAW boundaries {[e.cycle for e in raw]}")
    events = cfg or raw
    kind = events[0].kind

    groups: list[list] = []
    writes: list[DramRecord] = []
    for r in records:
        if isinstance(r, Meta):
            continue
        opener = _is_opener(r, kind, writes)
        if isinstance(r, DramRecord) and r.dir == "write":
            writes.append(r)
        if opener:
            groups.append([])
        elif not groups:
            raise MalformedTrace(f"record before the first boundary: {r}")
        groups[-1].append(r)

    last = _last_cycle(records)
    segments = []
    for j, (ev, recs) in enumerate(zip(events, groups)):
        end = events[j + 1].cycle - 1 if j + 1 < len(events) else last
        segments.append(Segment(j, ev.cycle, end, tuple(recs)))
    return segments


def segment_trace(seg: Segment) -> LayerTrace:
    totals = [r for r in seg.records if isinstance(r, LayerTotals)]
    if len(totals) != 1:
        raise MalformedTrace(f"segment {seg.index}: expected one layer_totals record, got {len(totals)}")
    cycles = [r for r in seg.records if isinstance(r, CycleRecord)]
    writes = [r for r in seg.records if isinstance(r, DramRecord) and r.dir == "write"]
    tot = totals[0]
    dram = sum(w.count for w in writes) if writes else tot.dram_writes
    return LayerTrace(seg.index, tot.W_r, tot.I_r, tot.O_w, tot.psum_r, tot.psum_w, dram,
                      tot.total_cycles, tuple(cycles), first_two_addrs(cycles))


def split_layers(records: Iterable[Record]) -> tuple[Meta | None, list[LayerTrace]]:
    records = list(records)
    meta = next((r for r in records if isinstance(r, Meta)), None)
    return meta, [segment_trace(s) for s in identify_layer_boundaries(records)]
