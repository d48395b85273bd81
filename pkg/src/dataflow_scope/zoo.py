"""Built-in benchmark models: LeNet-5, AlexNet (single tower) and VGG-16 (config D)."""

from __future__ import annotations

from .cnn import CnnModel, ConvLayerSpec as Conv, FcLayerSpec as Fc, FeatureMapShape, PoolSpec
from .errors import UnknownModel

_P2 = PoolSpec(2, 2)
_P3 = PoolSpec(3, 2)


def _lenet() -> CnnModel:
    return CnnModel("lenet", FeatureMapShape(32, 32, 1), (
        Conv(5, 1, 6, 1, 0, _P2),
        Conv(5, 6, 16, 1, 0, _P2),
        Conv(5, 16, 120, 1, 0),
        Fc(120, 84),
        Fc(84, 10),
    ))


def _alexnet() -> CnnModel:
    return CnnModel("alexnet", FeatureMapShape(227, 227, 3), (
        Conv(11, 3, 96, 4, 0, _P3),
        Conv(5, 96, 256, 1, 2, _P3),
        Conv(3, 256, 384, 1, 1),
        Conv(3, 384, 384, 1, 1),
        Conv(3, 384, 256, 1, 1, _P3),
        Fc(9216, 4096),
        Fc(4096, 4096),
        Fc(4096, 1000),
    ))


def _vgg16() -> CnnModel:
    layers = []
    c = 3
    for width, reps in ((64, 2), (128, 2), (256, 3), (512, 3), (512, 3)):
        for j in range(reps):
            layers.append(Conv(3, c, width, 1, 1, _P2 if j == reps - 1 else None))
            c = width
    layers += [Fc(7 * 7 * 512, 4096), Fc(4096, 4096), Fc(4096, 1000)]
    return CnnModel("vgg16", FeatureMapShape(224, 224, 3), tuple(layers))


_ZOO = {"lenet": _lenet, "alexnet": _alexnet, "vgg16": _vgg16}

ZOO_NAMES = tuple(_ZOO)


def zoo_model(name: str) -> CnnModel:
    try:
        return _ZOO[name.lower()]()
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; known: {', '.join(_ZOO)}") from None
