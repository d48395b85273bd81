"""Per-layer recovery: layer typing, Conv (WS and OS), FC and pooling."""

from __future__ import annotations

import enum
from dataclasses import dataclass, asdict
from fractions import Fraction
from math import ceil, floor, isqrt
from typing import Sequence

from ..cnn import ConvLayerSpec, FcLayerSpec, FeatureMapShape, PoolSpec, padding_for, pool_dim
from ..errors import MalformedTrace, NoCandidates, NoPoolSolution, NotAnFcLayer, TruncatedTrace


class LayerKind(str, enum.Enum):
    FC = "fc"
    CONV = "conv"
    CONV_POOL = "conv+pool"


@dataclass(frozen=True)
class CandidateStructure:
    R: int
    K: int
    C: int
    st: int
    pd: int
    X: int
    Y: int
    Xo: int
    Yo: int
    R_pool: int | None = None
    st_pool: int | None = None

    @property
    def ifmap(self) -> FeatureMapShape:
        return FeatureMapShape(self.X, self.Y, self.C)

    @property
    def output(self) -> FeatureMapShape:
        """Shape passed on to the next layer (after pooling, if any)."""
        if self.R_pool is None:
            return FeatureMapShape(self.Xo, self.Yo, self.K)
        return FeatureMapShape(int(pool_dim(self.Xo, self.R_pool, self.st_pool)),
                               int(pool_dim(self.Yo, self.R_pool, self.st_pool)), self.K)

    def accepts(self, prev: FeatureMapShape) -> bool:
        return self.ifmap == prev

    def to_layer(self) -> ConvLayerSpec:
        pool = PoolSpec(self.R_pool, self.st_pool) if self.R_pool is not None else None
        return ConvLayerSpec(self.R, self.C, self.K, self.st, self.pd, pool)

    def to_dict(self) -> dict:
        return {"type": "conv", **asdict(self)}


@dataclass(frozen=True)
class FcCandidate:
    in_neurons: int
    out_neurons: int

    @property
    def output(self) -> FeatureMapShape:
        return FeatureMapShape(1, 1, self.out_neurons)

    def accepts(self, prev: FeatureMapShape) -> bool:
        return prev.size == self.in_neurons

    def to_layer(self) -> FcLayerSpec:
        return FcLayerSpec(self.in_neurons, self.out_neurons)

    def to_dict(self) -> dict:
        return {"type": "fc", "in": self.in_neurons, "out": self.out_neurons}


def candidate_from_dict(d: dict):
    if d["type"] == "fc":
        return FcCandidate(d["in"], d["out"])
    fields = {k: v for k, v in d.items() if k != "type"}
    return CandidateStructure(**fields)


def _as_int(q) -> int | None:
    q = Fraction(q)
    return q.numerator if q.denominator == 1 else None


def _show(q) -> int | float:
    q = Fraction(q)
    # non-integral values are shown truncated to one decimal
    return q.numerator if q.denominator == 1 else floor(q * 10) / 10


# -- layer type ---------------------------------------------------------------

def identify_layer_type(W_r: int, I_r: int, O_w: int, gb_writes: int, dram_writes: int) -> LayerKind:
    if min(W_r, I_r, O_w, gb_writes) <= 0:
        raise MalformedTrace(f"zero totals: W_r={W_r} I_r={I_r} O_w={O_w} gb={gb_writes}")
    if W_r == I_r * O_w:
        return LayerKind.FC
    if dram_writes < gb_writes:
        return LayerKind.CONV_POOL
    return LayerKind.CONV


def recover_fc(W_r: int, I_r: int, O_w: int) -> FcLayerSpec:
    if W_r != I_r * O_w:
        raise NotAnFcLayer(f"W_r={W_r} != I_r*O_w={I_r * O_w}")
    return FcLayerSpec(I_r, O_w)


# -- Conv on WS -----------------------------------------------------------------

def weight_count_solutions(W_r: int, C: int) -> list[tuple[int, int]]:
    """Integer (R, K) with R*R*C*K == W_r, ascending in R.

    Pointwise filters (R = 1) are only proposed when no larger R fits.
    """
    if W_r <= 0 or W_r % C:
        return []
    q = W_r // C
    H = [(R, q // (R * R)) for R in range(2, isqrt(q) + 1) if q % (R * R) == 0]
    return H or [(1, q)]


def ws_event(i: Sequence[int]) -> int:
    """1-based cycle of the first repeat of i[1]."""
    for t in range(1, len(i)):
        if i[t] == i[0]:
            return t + 1
    raise TruncatedTrace(f"no repeat of i[1]={i[0] if i else None} in {len(i)}-cycle prefix")


def _reject(audit, R, K, check, reason, **extra):
    audit.append({"R": R, "K": K, "check": check, "reason": reason, **extra})


def recover_conv_ws(W_r: int, O_w: int, w: Sequence[int], i: Sequence[int], X: int, Y: int, C: int,
                    cfg, o: Sequence[int] | None = None, audit: list | None = None) -> list[CandidateStructure]:
    """Candidate Conv parameters from WS observables.

    ``w``/``i`` are the per-cycle weight/input read counts from cycle 1;
    ``O_w`` is psum writes minus psum reads. Every rejected (R, K) lands in
    ``audit`` with the name of the check it failed.
    """
    audit = [] if audit is None else audit
    if len(i) < 2 or len(w) < 1 or i[0] <= 0:
        raise TruncatedTrace("WS recovery needs at least two cycles with input reads")
    t_e = ws_event(i)
    n_a = _as_int(Fraction(w[0], i[0]))
    if n_a is None or n_a < 1:
        raise NoCandidates(f"w[1]/i[1] = {w[0]}/{i[0]} is not an array count", audit)
    active = w[0] // n_a
    Xo = t_e - 1
    H = weight_count_solutions(W_r, C)
    found = []
    for R, K in H:
        if R <= active and active % R:
            _reject(audit, R, K, "active_pes", f"{active} active PEs not a multiple of R")
            continue
        ch = min(max(cfg.m // R, 1), C)
        if Xo == 1:
            # no in-row forwarding cycle: stride cannot come from i[2]
            pd = padding_for(X, 1, R, 1)
            if _as_int(pd) is None or not 0 <= pd < R:
                _reject(audit, R, K, "padding", "padding not an integer in [0, R)", pd=_show(pd))
                continue
            pd = int(pd)
            Yo = _as_int(Fraction(O_w, K))
            if Yo is None or Yo < 1:
                _reject(audit, R, K, "output_count", "O_w not a multiple of K")
                continue
            span = Y - R + 2 * pd
            if Yo == 1:
                st = 1 if span == 0 else None  # stride unobservable; canonical 1
            else:
                st = _as_int(Fraction(span, Yo - 1)) if span > 0 else None
            if st is None or not 1 <= st <= R:
                _reject(audit, R, K, "output_count", "no stride reproduces O_w along Y")
                continue
            found.append(CandidateStructure(R, K, C, st, pd, X, Y, 1, Yo))
            continue
        st_q = Fraction(i[1], ch)
        st = _as_int(st_q)
        if st is None or st < 1 or st > R:
            _reject(audit, R, K, "stride", "stride not an integer in [1, R]", st=_show(st_q), channels=ch)
            continue
        pd_q = padding_for(X, Xo, R, st)
        pd = _as_int(pd_q)
        if pd is None or not 0 <= pd < R:
            _reject(audit, R, K, "padding", "padding not an integer in [0, R)", st=st, pd=_show(pd_q))
            continue
        Yo_q = Fraction(Y - R + 2 * pd, st) + 1
        Yo = _as_int(Yo_q)
        if Yo is None or Yo < 1:
            _reject(audit, R, K, "ofmap_height", "ofmap height not a positive integer", st=st, pd=pd)
            continue
        if O_w != Xo * Yo * K:
            _reject(audit, R, K, "output_count", f"X'*Y'*K = {Xo * Yo * K} != O_w", st=st, pd=pd)
            continue
        found.append(CandidateStructure(R, K, C, st, pd, X, Y, Xo, Yo))
    if not found:
        raise NoCandidates(f"no WS candidate for W_r={W_r}, C={C} (|H|={len(H)})", audit)
    return found


# -- Conv on OS -----------------------------------------------------------------

def os_event(o: Sequence[int]) -> int:
    for t, v in enumerate(o, 1):
        if v > 0:
            return t
    raise TruncatedTrace(f"no output write in {len(o)}-cycle prefix")


def recover_conv_os(W_r: int, O_w: int, o: Sequence[int], addr1: int, addr2: int, X: int, Y: int,
                    C: int, cfg, audit: list | None = None) -> list[CandidateStructure]:
    """Candidate Conv parameters from OS observables, scanning the padding.

    Each rejected padding is logged with its check: ``ofmap_size`` when X'/Y'
    are not integers, ``filter_count`` when K is not a positive integer or
    the tile count identity fails.
    """
    audit = [] if audit is None else audit
    t_e = os_event(o)
    q = Fraction(t_e - 1, C)
    R = isqrt(int(q)) if q.denominator == 1 else 0
    if R < 1 or R * R != q:
        audit.append({"check": "filter_size", "reason": f"R^2*C = {t_e - 1} has no integer R for C={C}"})
        raise NoCandidates(f"t_e - 1 = {t_e - 1} is not R^2*{C}", audit)
    st = abs(addr1 - addr2)
    if st < 1:
        raise NoCandidates("first two weight reads share an address", audit)
    found = []
    for pd in range(R):
        Xo_q = Fraction(X - R + 2 * pd, st) + 1
        Yo_q = Fraction(Y - R + 2 * pd, st) + 1
        Xo, Yo = _as_int(Xo_q), _as_int(Yo_q)
        if Xo is None or Yo is None or Xo < 1 or Yo < 1:
            audit.append({"R": R, "st": st, "pd": pd, "check": "ofmap_size", "Xo": _show(Xo_q), "Yo": _show(Yo_q),
                          "reason": "ofmap size not a positive integer"})
            continue
        K_q = Fraction(O_w, Xo * Yo)
        K = _as_int(K_q)
        tiles = ceil(Xo / cfg.m) * ceil(Yo / cfg.n)
        if K is None or K < 1 or W_r != tiles * R * R * C * K:
            audit.append({"R": R, "st": st, "pd": pd, "check": "filter_count", "Xo": Xo, "Yo": Yo, "K": _show(K_q),
                          "reason": "K not a positive integer or tile count mismatch"})
            continue
        found.append(CandidateStructure(R, K, C, st, pd, X, Y, Xo, Yo))
    if not found:
        raise NoCandidates(f"no OS candidate for R={R}, st={st}", audit)
    return found


# -- pooling --------------------------------------------------------------------

def recover_pooling(N_pool: int, Xo: int, Yo: int, K: int) -> PoolSpec:
    """Smallest window first, least overlap first; first match wins."""
    per_channel = Fraction(N_pool, K)
    for R_pool in range(2, Xo + 1):
        if R_pool > Yo:
            break
        for st_pool in range(R_pool, 0, -1):
            xp = pool_dim(Xo, R_pool, st_pool)
            yp = pool_dim(Yo, R_pool, st_pool)
            if xp.denominator != 1 or yp.denominator != 1:
                continue
            if per_channel == xp * yp:
                return PoolSpec(R_pool, st_pool)
    raise NoPoolSolution(f"no pooling window maps {Xo}x{Yo}x{K} to {N_pool} outputs")
