"""Side-channel observables and their JSON-lines stream format.

A trace file is a sequence of JSON objects, one per line, each carrying a
``type`` key. Cycle indices inside ``cycle``/``cycle_rle`` records are 1-based
and local to the layer that the preceding boundary signal opened; everything
else (``config_phase``, ``dram``) uses the global cycle line.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

from .errors import EncodingError, MalformedTrace, TruncatedTrace

WS = "ws"
OS = "os"
DATAFLOWS = (WS, OS)

DEFAULT_MARGIN = 8


@dataclass(frozen=True)
class CycleRecord:
    t: int
    w: int = 0
    i: int = 0
    o: int = 0
    psr: int = 0
    psw: int = 0
    w_addrs: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.t < 1:
            raise EncodingError(f"cycle index must be >= 1, got {self.t}")
        if min(self.w, self.i, self.o, self.psr, self.psw) < 0:
            raise EncodingError(f"negative count in {self}")
        if self.w_addrs is not None and len(self.w_addrs) != self.w:
            raise EncodingError(f"cycle {self.t}: {len(self.w_addrs)} addresses for {self.w} weight reads")

    def counts(self) -> tuple[int, int, int, int, int]:
        return self.w, self.i, self.o, self.psr, self.psw


@dataclass(frozen=True)
class Meta:
    dataflow: str
    m: int
    n: int
    mode: str = "prefix"
    margin: int = DEFAULT_MARGIN


@dataclass(frozen=True)
class ConfigPhase:
    cycle: int
    payload: int


@dataclass(frozen=True)
class DramRecord:
    dir: str
    base_addr: int
    count: int
    layer_index: int
    cycle: int

    @property
    def end_addr(self) -> int:
        return self.base_addr + self.count

    def overlaps(self, other: "DramRecord") -> bool:
        return self.base_addr < other.end_addr and other.base_addr < self.end_addr


@dataclass(frozen=True)
class LayerTotals:
    layer_index: int
    W_r: int
    I_r: int
    O_w: int
    psum_r: int
    psum_w: int
    dram_writes: int
    total_cycles: int


@dataclass(frozen=True)
class BoundaryEvent:
    kind: str  # "raw_dependency" | "config_phase"
    cycle: int
    detail: int


@dataclass(frozen=True)
class LayerTrace:
    layer_index: int
    W_r: int
    I_r: int
    O_w: int
    psum_r: int
    psum_w: int
    dram_writes: int
    total_cycles: int
    cycle_prefix: tuple[CycleRecord, ...] = ()
    first_two_weight_addrs: tuple[int, int] | None = None

    @classmethod
    def from_totals(cls, totals: LayerTotals, cycles: Sequence[CycleRecord]) -> "LayerTrace":
        return cls(totals.layer_index, totals.W_r, totals.I_r, totals.O_w, totals.psum_r,
                   totals.psum_w, totals.dram_writes, totals.total_cycles,
                   tuple(cycles), first_two_addrs(cycles))

    @property
    def totals(self) -> LayerTotals:
        return LayerTotals(self.layer_index, self.W_r, self.I_r, self.O_w, self.psum_r,
                           self.psum_w, self.dram_writes, self.total_cycles)

    def series(self, name: str) -> list[int]:
        """Per-cycle array ``w``/``i``/``o``/... as a 0-based list (index t-1)."""
        return [getattr(c, name) for c in self.cycle_prefix]


Record = Union[Meta, ConfigPhase, DramRecord, CycleRecord, LayerTotals]


def first_two_addrs(cycles: Sequence[CycleRecord]) -> tuple[int, int] | None:
    addrs = []
    for c in cycles[:2]:
        if not c.w_addrs:
            return None
        addrs.append(c.w_addrs[0])
    return tuple(addrs) if len(addrs) == 2 else None


# -- targeted event ---------------------------------------------------------

def _event_index(cycles: Sequence[CycleRecord], dataflow: str) -> int | None:
    if not cycles:
        return None
    if dataflow == WS:
        i1 = cycles[0].i
        for c in cycles[1:]:
            if c.i == i1:
                return c.t
        return None
    if dataflow == OS:
        for c in cycles:
            if c.o > 0:
                return c.t
        return None
    raise ValueError(f"unknown dataflow {dataflow!r}")


def targeted_event_cycle(trace: LayerTrace | Sequence[CycleRecord], dataflow: str) -> int:
    """t_e: first repeat of the cycle-1 input-read count (WS) or first output write (OS)."""
    cycles = trace.cycle_prefix if isinstance(trace, LayerTrace) else trace
    t = _event_index(cycles, dataflow)
    if t is None:
        raise TruncatedTrace(f"{dataflow} targeted event not found in {len(cycles)}-cycle prefix")
    return t


def take_prefix(cycles: Iterable[CycleRecord], dataflow: str, margin: int = DEFAULT_MARGIN) -> Iterator[CycleRecord]:
    """Pass cycles through up to and including t_e + margin."""
    stop = None
    i1 = None
    for c in cycles:
        yield c
        if stop is None:
            if dataflow == WS:
                if i1 is None:
                    i1 = c.i
                elif c.i == i1:
                    stop = c.t + margin
            elif c.o > 0:
                stop = c.t + margin
        if stop is not None and c.t >= stop:
            return


# -- JSONL codec ------------------------------------------------------------

def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _cycle_dict(c: CycleRecord) -> dict:
    d = {"type": "cycle", "t": c.t, "w": c.w, "i": c.i, "o": c.o, "psr": c.psr, "psw": c.psw}
    if c.w_addrs is not None:
        d["w_addrs"] = list(c.w_addrs)
    return d


def _record_dict(r) -> dict:
    if isinstance(r, Meta):
        return {"type": "meta", "dataflow": r.dataflow, "m": r.m, "n": r.n,
                "mode": r.mode, "margin": r.margin}
    if isinstance(r, ConfigPhase):
        return {"type": "config_phase", "cycle": r.cycle, "payload": r.payload}
    if isinstance(r, DramRecord):
        return {"type": "dram", "dir": r.dir, "addr": r.base_addr, "count": r.count,
                "layer": r.layer_index, "cycle": r.cycle}
    if isinstance(r, LayerTotals):
        return {"type": "layer_totals", "layer": r.layer_index, "W_r": r.W_r, "I_r": r.I_r,
                "O_w": r.O_w, "psum_r": r.psum_r, "psum_w": r.psum_w,
                "dram_writes": r.dram_writes, "total_cycles": r.total_cycles}
    raise EncodingError(f"cannot encode {type(r).__name__}")


def encode_trace(records: Iterable[Record]) -> Iterator[str]:
    """Yield JSONL lines (newline-terminated). Runs of identical, address-free,
    consecutive cycles collapse into one ``cycle_rle`` line."""
    run_start = None  # first CycleRecord of the pending run
    run_len = 0
    last_t = 0

    def flush():
        if run_start is None:
            return None
        if run_len == 1:
            return _dumps(_cycle_dict(run_start)) + "\n"
        d = {"type": "cycle_rle", "t0": run_start.t, "count": run_len, "w": run_start.w,
             "i": run_start.i, "o": run_start.o, "psr": run_start.psr, "psw": run_start.psw}
        return _dumps(d) + "\n"

    for r in records:
        if isinstance(r, CycleRecord):
            if r.t <= last_t:
                raise EncodingError(f"cycle {r.t} follows cycle {last_t}")
            if (run_start is not None and r.w_addrs is None and run_start.w_addrs is None
                    and r.t == last_t + 1 and r.counts() == run_start.counts()):
                run_len += 1
            else:
                line = flush()
                if line:
                    yield line
                run_start, run_len = r, 1
            last_t = r.t
            continue
        line = flush()
        if line:
            yield line
        run_start, run_len = None, 0
        if isinstance(r, LayerTotals):
            last_t = 0
        yield _dumps(_record_dict(r)) + "\n"
    line = flush()
    if line:
        yield line


def _parse(d: dict) -> Iterator[Record]:
    kind = d.get("type")
    if kind == "cycle":
        addrs = d.get("w_addrs")
        yield CycleRecord(d["t"], d["w"], d["i"], d["o"], d["psr"], d["psw"],
                          tuple(addrs) if addrs is not None else None)
    elif kind == "cycle_rle":
        t0 = d["t0"]
        for k in range(d["count"]):
            yield CycleRecord(t0 + k, d["w"], d["i"], d["o"], d["psr"], d["psw"])
    elif kind == "meta":
        yield Meta(d["dataflow"], d["m"], d["n"], d.get("mode", "prefix"), d.get("margin", DEFAULT_MARGIN))
    elif kind == "config_phase":
        yield ConfigPhase(d["cycle"], d["payload"])
    elif kind == "dram":
        yield DramRecord(d["dir"], d["addr"], d["count"], d["layer"], d["cycle"])
    elif kind == "layer_totals":
        yield LayerTotals(d["layer"], d["W_r"], d["I_r"], d["O_w"], d["psum_r"], d["psum_w"],
                          d["dram_writes"], d["total_cycles"])
    else:
        raise MalformedTrace(f"unknown record type {kind!r}")


def decode_trace(lines: Iterable[str]) -> Iterator[Record]:
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedTrace(f"line {lineno}: {exc}") from None
        try:
            yield from _parse(d)
        except KeyError as exc:
            raise MalformedTrace(f"line {lineno}: missing field {exc}") from None


def write_trace(path, records: Iterable[Record]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(encode_trace(records))


def read_trace(path) -> Iterator[Record]:
    with open(path, encoding="utf-8") as fh:
        yield from decode_trace(fh)


def encode_to_string(records: Iterable[Record]) -> str:
    buf = io.StringIO()
    buf.writelines(encode_trace(records))
    return buf.getvalue()
