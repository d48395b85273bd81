import json

import pytest
from hypothesis import given, strategies as st

from dataflow_scope.cnn import ConvLayerSpec, FeatureMapShape
from dataflow_scope.errors import EncodingError, MalformedTrace, TruncatedTrace
from dataflow_scope.sim_os import OsConfig, os_cycles
from dataflow_scope.sim_ws import WsConfig, simulate_ws_layer
from dataflow_scope.simulate import simulate_model
from dataflow_scope.trace import (OS, WS, ConfigPhase, CycleRecord, DramRecord, LayerTotals, Meta, decode_trace,
                                  encode_to_string, encode_trace, read_trace, take_prefix, targeted_event_cycle,
                                  write_trace)
from dataflow_scope.zoo import zoo_model

ALEX_CONV1 = ConvLayerSpec(11, 3, 96, 4, 0)
ALEX_IN = FeatureMapShape(227, 227, 3)


def _decode(text):
    return list(decode_trace(text.splitlines(True)))


def test_rle_collapses_identical_cycles():
    recs = [CycleRecord(t, 0, 1, 0) for t in (5, 6, 7)]
    lines = list(encode_trace(recs))
    assert len(lines) == 1
    d = json.loads(lines[0])
    assert d["type"] == "cycle_rle" and d["t0"] == 5 and d["count"] == 3
    assert (d["w"], d["i"], d["o"]) == (0, 1, 0)
    assert _decode("".join(lines)) == recs


def test_rle_keeps_addressed_cycles_separate():
    recs = [CycleRecord(1, 1, 4, w_addrs=(0,)), CycleRecord(2, 1, 4, w_addrs=(4,)), CycleRecord(3, 1, 4)]
    lines = list(encode_trace(recs))
    assert [json.loads(x)["type"] for x in lines] == ["cycle", "cycle", "cycle"]


def test_empty_layer_is_header_and_totals():
    recs = [Meta(WS, 4, 4), LayerTotals(0, 0, 0, 0, 0, 0, 0, 0)]
    lines = list(encode_trace(recs))
    assert [json.loads(x)["type"] for x in lines] == ["meta", "layer_totals"]
    assert _decode("".join(lines)) == recs


def test_out_of_order_cycles_rejected():
    with pytest.raises(EncodingError):
        list(encode_trace([CycleRecord(3), CycleRecord(2)]))


def test_cycle_index_resets_after_totals():
    recs = [CycleRecord(1, 1), LayerTotals(0, 1, 0, 0, 0, 0, 0, 2), CycleRecord(1, 1)]
    assert _decode(encode_to_string(recs)) == recs


def test_cycle_record_invariants():
    with pytest.raises(EncodingError):
        CycleRecord(0)
    with pytest.raises(EncodingError):
        CycleRecord(1, w=-1)
    with pytest.raises(EncodingError):
        CycleRecord(1, w=2, w_addrs=(1,))


@pytest.mark.parametrize("line", ['{"type":"bogus"}', "not json", '{"type":"cycle","t":1}'])
def test_malformed_lines(line):
    with pytest.raises(MalformedTrace):
        _decode(line + "\n")


counts = st.integers(0, 3)
cycle_body = st.tuples(counts, counts, counts, counts, counts, st.booleans())


@st.composite
def streams(draw):
    out = []
    for layer in range(draw(st.integers(1, 3))):
        out.append(ConfigPhase(layer + 1, 16))
        out.append(DramRecord("read", layer * 10, 10, layer, layer + 1))
        t = 0
        for w, i, o, psr, psw, addr in draw(st.lists(cycle_body, max_size=25)):
            t += draw(st.integers(1, 2))
            addrs = tuple(range(w)) if addr else None
            out.append(CycleRecord(t, w, i, o, psr, psw, addrs))
        out.append(LayerTotals(layer, 1, 2, 3, 4, 5, 6, t + 1))
        out.append(DramRecord("write", layer * 10 + 10, 10, layer, t + 1))
    return [Meta(WS, 4, 4)] + out


@given(streams())
def test_decode_encode_identity(recs):
    assert _decode(encode_to_string(recs)) == recs


@pytest.mark.parametrize("model", ["lenet", "alexnet"])
@pytest.mark.parametrize("dataflow, m, n", [(WS, 12, 4), (OS, 10, 4)])
def test_simulator_stream_roundtrip(model, dataflow, m, n, tmp_path):
    recs = list(simulate_model(zoo_model(model), dataflow, m, n))
    path = tmp_path / "t.jsonl"
    write_trace(path, recs)
    assert list(read_trace(path)) == recs


def test_alexnet_os_conv1_full_trace_slot_count():
    text_lines = encode_trace(os_cycles(ALEX_CONV1, ALEX_IN, OsConfig(10, 4)))
    n = sum(1 for _ in decode_trace(text_lines))
    assert n == 2927233


def test_targeted_event_examples():
    os_prefix = list(take_prefix(os_cycles(ALEX_CONV1, ALEX_IN, OsConfig(10, 4)), OS))
    assert targeted_event_cycle(os_prefix, OS) == 364
    tr = simulate_ws_layer(ConvLayerSpec(5, 96, 256, 1, 2), FeatureMapShape(27, 27, 96), WsConfig(12, 4))
    assert targeted_event_cycle(tr, WS) == 28
    single = simulate_ws_layer(ConvLayerSpec(3, 1, 1), FeatureMapShape(3, 3, 1), WsConfig(4, 1))
    assert targeted_event_cycle(single, WS) == 2


def test_prefix_margin_extends_past_event():
    prefix = list(take_prefix(os_cycles(ALEX_CONV1, ALEX_IN, OsConfig(10, 4)), OS, margin=8))
    assert len(prefix) == 364 + 8


def test_truncated_prefix_raises():
    with pytest.raises(TruncatedTrace):
        targeted_event_cycle([CycleRecord(1, 4, 4), CycleRecord(2, 0, 2)], WS)
    with pytest.raises(TruncatedTrace):
        targeted_event_cycle([CycleRecord(1, 1, 4)], OS)


@pytest.mark.parametrize("dataflow, m, n", [(WS, 4, 4), (OS, 4, 4)])
def test_full_mode_sums_match_totals(dataflow, m, n):
    recs = list(simulate_model(zoo_model("lenet"), dataflow, m, n, mode="full"))
    cycles: list[CycleRecord] = []
    for r in recs:
        if isinstance(r, CycleRecord):
            cycles.append(r)
        elif isinstance(r, LayerTotals):
            assert sum(c.w for c in cycles) == r.W_r
            assert sum(c.i for c in cycles) == r.I_r
            assert sum(c.o for c in cycles) == r.O_w
            assert sum(c.psr for c in cycles) == r.psum_r
            assert sum(c.psw for c in cycles) == r.psum_w
            assert len(cycles) == r.total_cycles
            cycles = []


def test_dram_chaining_overlaps_exactly_consecutive_layers():
    recs = list(simulate_model(zoo_model("alexnet"), OS, 10, 4))
    dram = [r for r in recs if isinstance(r, DramRecord)]
    reads = [r for r in dram if r.dir == "read"]
    writes = [r for r in dram if r.dir == "write"]
    for j, rd in enumerate(reads):
        hits = [w.layer_index for w in writes if rd.overlaps(w)]
        assert hits == ([] if j == 0 else [j - 1])
