from itertools import islice

import pytest
from hypothesis import given, settings, strategies as st

from dataflow_scope.cnn import ConvLayerSpec, FeatureMapShape, conv_output
from dataflow_scope.sim_os import OsConfig, os_closed_forms, os_cycles, os_layer_totals, os_tile_plan, simulate_os_layer
from dataflow_scope.trace import OS, targeted_event_cycle
from dataflow_scope.zoo import zoo_model

from _gen import small_layer, small_os

ALEX = zoo_model("alexnet")
ALEX_CONVS = [(l, f) for l, f in zip(ALEX.layers, ALEX.ifmaps()) if isinstance(l, ConvLayerSpec)]


def test_alexnet_conv1_os_10_4():
    tr = simulate_os_layer(*ALEX_CONVS[0], OsConfig(10, 4))
    assert (tr.W_r, tr.O_w, tr.total_cycles) == (2927232, 290400, 2927233)
    assert targeted_event_cycle(tr, OS) == 364
    a1, a2 = tr.first_two_weight_addrs
    assert abs(a1 - a2) == 4
    assert tr.cycle_prefix[1].i == 4


def test_alexnet_conv2_and_conv5_closed_forms():
    cf2 = os_closed_forms(*ALEX_CONVS[1], OsConfig(10, 4))
    assert (cf2["W_r"], cf2["O_w"], cf2["t_e"]) == (12902400, 186624, 2401)
    assert cf2["W_r"] == 3 * 7 * 25 * 96 * 256
    cf5 = os_closed_forms(*ALEX_CONVS[4], OsConfig(10, 4))
    assert (cf5["W_r"], cf5["O_w"]) == (7077888, 43264)


def test_figure_example_2x2x2_on_os_4_1():
    cyc = list(islice(os_cycles(ConvLayerSpec(2, 2, 1), FeatureMapShape(5, 5, 2), OsConfig(4, 1)), 2))
    assert (cyc[0].i, cyc[1].i) == (4, 1)


def test_single_output_layer():
    conv, ifmap = ConvLayerSpec(4, 2, 1), FeatureMapShape(4, 4, 2)
    plan = os_tile_plan(conv, ifmap, OsConfig(4, 4))
    assert (plan.tiles_x, plan.tiles_y) == (1, 1)
    tot = os_layer_totals(conv, ifmap, OsConfig(4, 4))
    assert tot["W_r"] == 32 and tot["O_w"] == 1


def _check(conv, ifmap, cfg):
    out = conv_output(ifmap, conv)
    tot = os_layer_totals(conv, ifmap, cfg)
    cf = os_closed_forms(conv, ifmap, cfg)
    plan = os_tile_plan(conv, ifmap, cfg)
    assert tot["W_r"] == cf["W_r"] == plan.tiles_x * plan.tiles_y * conv.R ** 2 * conv.C * conv.K
    assert tot["O_w"] == cf["O_w"] and tot["O_w"] // conv.K == out.X * out.Y
    assert tot["total_cycles"] == cf["total_cycles"] == tot["W_r"] + 1
    assert tot["psum_r"] == tot["psum_w"] == 0
    tr = simulate_os_layer(conv, ifmap, cfg)
    assert targeted_event_cycle(tr, OS) == conv.R ** 2 * conv.C + 1 == cf["t_e"]
    assert all(c.o == 0 for c in tr.cycle_prefix[:conv.R ** 2 * conv.C])
    if conv.st < conv.R:
        a1, a2 = tr.first_two_weight_addrs
        assert abs(a1 - a2) == conv.st


@settings(max_examples=150, deadline=None)
@given(st.randoms(use_true_random=False))
def test_tile_properties_random(rnd):
    conv, ifmap = small_layer(rnd)
    _check(conv, ifmap, small_os(rnd))


@pytest.mark.parametrize("m, n", [(4, 4), (10, 4), (20, 10)])
@pytest.mark.parametrize("name", ["lenet", "alexnet", "vgg16"])
def test_tile_properties_zoo(name, m, n):
    model = zoo_model(name)
    for layer, ifmap in zip(model.layers, model.ifmaps()):
        if isinstance(layer, ConvLayerSpec):
            _check(layer, ifmap, OsConfig(m, n))


def test_one_weight_per_compute_cycle_and_single_burst():
    conv, ifmap = ConvLayerSpec(3, 2, 3, 2, 1), FeatureMapShape(9, 7, 2)
    cyc = list(os_cycles(conv, ifmap, OsConfig(3, 2)))
    assert all(c.w == 1 for c in cyc[:-1]) and cyc[-1].w == 0
    burst = [c.t for c in cyc if c.o]
    per_tile = conv.R ** 2 * conv.C
    assert burst == [per_tile * k + 1 for k in range(1, len(burst) + 1)]
    assert sum(c.o for c in cyc) == conv_output(ifmap, conv).size
