"""Fused pooling module: turns a Conv layer's GB output stream into DRAM writes."""

from __future__ import annotations

from dataclasses import dataclass

from .cnn import ConvLayerSpec, FeatureMapShape, PoolSpec, pooled_shape


@dataclass(frozen=True)
class PoolingObservation:
    gb_output_writes: int
    dram_writes: int


def apply_pooling(ofmap: FeatureMapShape, pool: PoolSpec) -> tuple[FeatureMapShape, int]:
    """Pooled shape and N_pool, the number of pooled elements written to DRAM."""
    pooled = pooled_shape(ofmap, pool)
    return pooled, pooled.size


def observe(ofmap: FeatureMapShape, conv: ConvLayerSpec) -> PoolingObservation:
    if conv.pool is None:
        return PoolingObservation(ofmap.size, ofmap.size)
    _, n_pool = apply_pooling(ofmap, conv.pool)
    return PoolingObservation(ofmap.size, n_pool)
