"""CNN layer types and the convolution geometry every other module relies on."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Union

from .errors import InvalidGeometry


@dataclass(frozen=True)
class FeatureMapShape:
    X: int
    Y: int
    C: int

    def __post_init__(self):
        for name in ("X", "Y", "C"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise InvalidGeometry(f"feature map {name} must be a positive integer, got {v!r}")

    @property
    def size(self) -> int:
        return self.X * self.Y * self.C

    def __str__(self):
        return f"{self.X}x{self.Y}x{self.C}"

    @classmethod
    def parse(cls, text: str) -> "FeatureMapShape":
        """Parse ``XxYxC`` (e.g. ``227x227x3``)."""
        parts = text.lower().split("x")
        if len(parts) != 3:
            raise InvalidGeometry(f"expected XxYxC, got {text!r}")
        return cls(*(int(p) for p in parts))


@dataclass(frozen=True)
class PoolSpec:
    R: int
    st: int
    kind: str = "max"

    def __post_init__(self):
        if self.R < 2:
            raise InvalidGeometry(f"pool window must be >= 2, got {self.R}")
        if not 1 <= self.st <= self.R:
            raise InvalidGeometry(f"pool stride must be in [1, {self.R}], got {self.st}")
        if self.kind not in ("max", "average"):
            raise InvalidGeometry(f"unknown pool kind {self.kind!r}")


@dataclass(frozen=True)
class ConvLayerSpec:
    R: int
    C: int
    K: int
    st: int = 1
    pd: int = 0
    pool: PoolSpec | None = None

    def __post_init__(self):
        if self.R < 1 or self.C < 1 or self.K < 1:
            raise InvalidGeometry(f"R, C, K must be >= 1: {self}")
        if not 1 <= self.st <= self.R:
            raise InvalidGeometry(f"stride {self.st} outside [1, R={self.R}]")
        if not 0 <= self.pd < self.R:
            raise InvalidGeometry(f"padding {self.pd} outside [0, R={self.R})")

    @property
    def weights(self) -> int:
        return self.R * self.R * self.C * self.K


@dataclass(frozen=True)
class FcLayerSpec:
    in_neurons: int
    out_neurons: int

    def __post_init__(self):
        if self.in_neurons < 1 or self.out_neurons < 1:
            raise InvalidGeometry(f"FC sizes must be >= 1: {self}")

    @property
    def weights(self) -> int:
        return self.in_neurons * self.out_neurons


LayerSpec = Union[ConvLayerSpec, FcLayerSpec]


def ofmap_dim(X: int, R: int, Pd: int, St: int) -> int:
    """Output width of a convolution along one axis."""
    if St < 1:
        raise InvalidGeometry(f"stride must be >= 1, got {St}")
    num = X - R + 2 * Pd
    if num < 0:
        raise InvalidGeometry(f"filter {R} larger than padded input {X}+2*{Pd}")
    if num % St:
        raise InvalidGeometry(f"({X} - {R} + 2*{Pd}) not divisible by stride {St}")
    return num // St + 1


def pool_dim(Xo: int, R_pool: int, st_pool: int) -> Fraction:
    """Pooled width as an exact rational; the caller decides what non-integral means."""
    return Fraction(Xo - R_pool, st_pool) + 1


def padding_for(X: int, Xo: int, R: int, St) -> Fraction:
    """Invert the output-width relation for the padding (may be non-integral)."""
    return Fraction(St * (Xo - 1) - X + R, 2)


def conv_output(ifmap: FeatureMapShape, conv: ConvLayerSpec) -> FeatureMapShape:
    """Unpooled ofmap {X', Y', K}."""
    if ifmap.C != conv.C:
        raise InvalidGeometry(f"layer expects C={conv.C}, ifmap has C={ifmap.C}")
    return FeatureMapShape(
        ofmap_dim(ifmap.X, conv.R, conv.pd, conv.st),
        ofmap_dim(ifmap.Y, conv.R, conv.pd, conv.st),
        conv.K,
    )


def pooled_shape(ofmap: FeatureMapShape, pool: PoolSpec) -> FeatureMapShape:
    if ofmap.X < pool.R or ofmap.Y < pool.R:
        raise InvalidGeometry(f"pool window {pool.R} larger than ofmap {ofmap}")
    xs = pool_dim(ofmap.X, pool.R, pool.st)
    ys = pool_dim(ofmap.Y, pool.R, pool.st)
    if xs.denominator != 1 or ys.denominator != 1:
        raise InvalidGeometry(f"pool {pool.R}/{pool.st} does not tile ofmap {ofmap}")
    return FeatureMapShape(int(xs), int(ys), ofmap.C)


def ofmap_shape(ifmap: FeatureMapShape, conv: ConvLayerSpec) -> tuple[FeatureMapShape, FeatureMapShape | None]:
    """Return ``(ofmap, pooled)``; ``pooled`` is None when the layer has no pooling."""
    out = conv_output(ifmap, conv)
    pooled = pooled_shape(out, conv.pool) if conv.pool is not None else None
    return out, pooled


def layer_output(ifmap: FeatureMapShape, layer: LayerSpec) -> FeatureMapShape:
    """Shape handed to the next layer (after pooling; FC outputs are 1x1xN)."""
    if isinstance(layer, FcLayerSpec):
        if ifmap.size != layer.in_neurons:
            raise InvalidGeometry(f"FC expects {layer.in_neurons} inputs, previous layer gives {ifmap.size}")
        return FeatureMapShape(1, 1, layer.out_neurons)
    out, pooled = ofmap_shape(ifmap, layer)
    return pooled or out


@dataclass(frozen=True)
class CnnModel:
    name: str
    input: FeatureMapShape
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        # validates the chain eagerly
        self.ifmaps()

    def ifmaps(self) -> list[FeatureMapShape]:
        """Input shape of every layer, in order."""
        shapes = []
        cur = self.input
        for layer in self.layers:
            shapes.append(cur)
            cur = layer_output(cur, layer)
        return shapes

    def counts(self) -> tuple[int, int, int]:
        conv = [l for l in self.layers if isinstance(l, ConvLayerSpec)]
        fc = [l for l in self.layers if isinstance(l, FcLayerSpec)]
        return len(conv), sum(1 for l in conv if l.pool is not None), len(fc)


def layer_to_dict(layer: LayerSpec) -> dict:
    if isinstance(layer, FcLayerSpec):
        return {"type": "fc", "in": layer.in_neurons, "out": layer.out_neurons}
    pool = None
    if layer.pool is not None:
        pool = {"R": layer.pool.R, "st": layer.pool.st, "kind": layer.pool.kind}
    return {"type": "conv", "R": layer.R, "C": layer.C, "K": layer.K,
            "st": layer.st, "pd": layer.pd, "pool": pool}


def layer_from_dict(d: dict) -> LayerSpec:
    kind = d.get("type")
    if kind == "fc":
        return FcLayerSpec(int(d["in"]), int(d["out"]))
    if kind != "conv":
        raise InvalidGeometry(f"unknown layer type {kind!r}")
    if "R" not in d:
        # rectangular filters (Rx/Ry) are not modelled
        raise InvalidGeometry(f"conv layer needs a square filter size R: {d}")
    pool = d.get("pool")
    if pool is not None:
        pool = PoolSpec(int(pool["R"]), int(pool["st"]), pool.get("kind", "max"))
    return ConvLayerSpec(int(d["R"]), int(d["C"]), int(d["K"]),
                         int(d.get("st", 1)), int(d.get("pd", 0)), pool)


def model_to_dict(model: CnnModel) -> dict:
    return {
        "name": model.name,
        "input": [model.input.X, model.input.Y, model.input.C],
        "layers": [layer_to_dict(l) for l in model.layers],
    }


def model_from_dict(d: dict) -> CnnModel:
    X, Y, C = d["input"]
    return CnnModel(d["name"], FeatureMapShape(int(X), int(Y), int(C)),
                    tuple(layer_from_dict(l) for l in d["layers"]))


def load_model(path) -> CnnModel:
    return model_from_dict(json.loads(Path(path).read_text()))
