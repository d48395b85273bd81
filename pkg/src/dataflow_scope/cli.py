"""Command-line driver: simulate, attack, verify, matrix, fuzz."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .cnn import CnnModel, ConvLayerSpec, FeatureMapShape, load_model
from .errors import DataflowScopeError, RecoveryFailed
from .oracle import brute_force_trace, mac_count, MAX_MACS
from .randomized import GRID, soundness_run
from .recovery import RecoveryReport, recover_model, split_layers
from .sim_os import os_cycles
from .sim_ws import ws_cycles
from .simulate import make_config, simulate_model
from .trace import DEFAULT_MARGIN, OS, WS, read_trace, write_trace
from .zoo import ZOO_NAMES, zoo_model


def _model(args) -> CnnModel:
    if getattr(args, "model_file", None):
        return load_model(args.model_file)
    return zoo_model(args.model)


def oracle_check(model: CnnModel, dataflow: str, cfg, limit: int = MAX_MACS) -> list[str]:
    """Compare simulator cycles with the brute-force schedule for each small Conv layer."""
    lines = []
    for j, (layer, ifmap) in enumerate(zip(model.layers, model.ifmaps())):
        if not isinstance(layer, ConvLayerSpec):
            continue
        if mac_count(layer, ifmap) > limit:
            lines.append(f"layer {j}: skipped (too large for oracle)")
            continue
        sim = list((ws_cycles if dataflow == WS else os_cycles)(layer, ifmap, cfg))
        ref = brute_force_trace(layer, ifmap, cfg, limit=limit)
        verdict = "ok" if sim == ref else "MISMATCH"
        lines.append(f"layer {j}: {verdict} ({len(ref)} cycles)")
    return lines


def cmd_simulate(args) -> int:
    model = _model(args)
    cfg = make_config(args.arch, args.m, args.n)
    write_trace(args.out, simulate_model(model, args.arch, args.m, args.n, args.mode, args.prefix_margin))
    print(f"wrote {args.out}: {model.name} on {args.arch.upper()}({args.m},{args.n}), {args.mode} mode")
    if args.oracle_check:
        lines = oracle_check(model, args.arch, cfg)
        print("\n".join(lines))
        if any("MISMATCH" in ln for ln in lines):
            return 1
    return 0


def attack_file(trace_path, ifmap: FeatureMapShape, arch=None, m=None, n=None) -> RecoveryReport:
    meta, layers = split_layers(read_trace(trace_path))
    arch = arch or (meta.dataflow if meta else None)
    m = m or (meta.m if meta else None)
    n = n or (meta.n if meta else None)
    if arch is None or m is None or n is None:
        raise DataflowScopeError("trace has no meta record; pass --arch, --m and --n")
    return recover_model(layers, ifmap, make_config(arch, m, n), arch)


def cmd_attack(args) -> int:
    ifmap = FeatureMapShape.parse(args.ifmap)
    try:
        report = attack_file(args.trace, ifmap, args.arch, args.m, args.n)
    except RecoveryFailed as e:
        print(f"recovery failed: {e}", file=sys.stderr)
        for a in e.audit:
            print(json.dumps(a, sort_keys=True), file=sys.stderr)
        return 1
    for j, cands in enumerate(report.layers):
        print(f"layer {j}: {len(cands)} candidate(s)")
    if report.ambiguous:
        print(f"ambiguous FC/pointwise layers: {report.ambiguous}")
    print(f"structures: {len(report.structures)}")
    if args.out:
        Path(args.out).write_text(report.dumps(), encoding="utf-8")
    return 0


def _tag(layers, j) -> str:
    kind = "conv" if isinstance(layers[j], ConvLayerSpec) else "fc"
    return f"{kind}{sum(1 for x in layers[:j + 1] if isinstance(x, type(layers[j])))}"


def first_difference(got, want: CnnModel) -> str | None:
    """Name of the first field where the layer list ``got`` departs from ``want``."""
    if len(got) != len(want.layers):
        return f"layer count {len(got)} != {len(want.layers)}"
    names = {"in_neurons": "in", "out_neurons": "out"}
    for j, (a, b) in enumerate(zip(got, want.layers)):
        tag = _tag(want.layers, j)
        if type(a) is not type(b):
            return f"{tag}.type"
        for f in a.__dataclass_fields__:
            if getattr(a, f) != getattr(b, f):
                return f"{tag}.{names.get(f, f)}"
    return None


def verify_report(report: RecoveryReport, model: CnnModel) -> str | None:
    if not report.structures:
        return "no structures"
    if len(report.structures) > 1:
        return f"{len(report.structures)} structures"
    return first_difference([c.to_layer() for c in report.structures[0]], model)


def cmd_verify(args) -> int:
    report = RecoveryReport.loads(Path(args.report).read_text(encoding="utf-8"))
    diff = verify_report(report, _model(args))
    if diff:
        print(f"mismatch: {diff}")
        return 1
    print("match")
    return 0


def run_cell(name: str, arch: str, m: int, n: int, margin: int = DEFAULT_MARGIN) -> tuple[int, bool, str]:
    """simulate -> trace file -> attack -> verify; (structure count, matches truth, note)."""
    model = zoo_model(name)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "trace.jsonl"
        write_trace(path, simulate_model(model, arch, m, n, "prefix", margin))
        try:
            report = attack_file(path, model.input)
        except DataflowScopeError as e:
            return 0, False, str(e)
    diff = verify_report(report, model)
    return len(report.structures), diff is None, diff or ""


def cmd_matrix(args) -> int:
    models = [x for x in args.models.split(",") if x] if args.models else list(ZOO_NAMES)
    grid = [g for g in GRID if args.arch in (None, g[0])]
    cells = [(name, g) for name in models for g in grid]
    workers = int(os.environ.get("DATAFLOW_SCOPE_THREADS", os.cpu_count() or 1))
    with ProcessPoolExecutor(max_workers=max(1, min(workers, len(cells)))) as pool:
        results = list(pool.map(run_cell, *zip(*[(name, *g) for name, g in cells])))
    table = dict(zip(cells, results))
    heads = [f"{a.upper()}({m},{n})" for a, m, n in grid]
    print(",".join(["model"] + heads))
    bad = []
    for name in models:
        row = []
        for g in grid:
            count, ok, note = table[(name, g)]
            row.append(str(count) if ok else f"{count}!")
            if count != 1 or not ok:
                bad.append(f"{name} {g[0].upper()}({g[1]},{g[2]}): {note}")
        print(",".join([name] + row))
    for b in bad:
        print(f"cell failed: {b}", file=sys.stderr)
    return 1 if bad else 0


def cmd_fuzz(args) -> int:
    r = soundness_run(args.count, args.seed, args.arch)
    print(f"sound: {r['sound']}/{r['count']}  unique: {r['unique']}  "
          f"uniqueness rate: {r['uniqueness_rate']:.3f}")
    for case, why in r["failures"][:10]:
        print(f"  {case}: {why}", file=sys.stderr)
    return 0 if r["sound"] == r["count"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dataflow-scope", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a model and write its trace")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", choices=ZOO_NAMES)
    src.add_argument("--model-file")
    s.add_argument("--arch", choices=(WS, OS), required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--mode", choices=("prefix", "full"), default="prefix")
    s.add_argument("--prefix-margin", type=int, default=DEFAULT_MARGIN)
    s.add_argument("--out", required=True)
    s.add_argument("--oracle-check", action="store_true", help="compare small Conv layers with the brute-force oracle")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("attack", help="recover the model structure from a trace file")
    a.add_argument("--trace", required=True)
    a.add_argument("--ifmap", required=True, help="first-layer ifmap as XxYxC")
    a.add_argument("--arch", choices=(WS, OS))
    a.add_argument("--m", type=int)
    a.add_argument("--n", type=int)
    a.add_argument("--out")
    a.set_defaults(func=cmd_attack)

    v = sub.add_parser("verify", help="compare a recovery report with the true model")
    v.add_argument("--report", required=True)
    src = v.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", choices=ZOO_NAMES)
    src.add_argument("--model-file")
    v.set_defaults(func=cmd_verify)

    x = sub.add_parser("matrix", help="structure counts over models and accelerator configs")
    x.add_argument("--models", help="comma-separated zoo names")
    x.add_argument("--arch", choices=(WS, OS))
    x.set_defaults(func=cmd_matrix)

    f = sub.add_parser("fuzz", help="randomized soundness of single-layer recovery")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--count", type=int, default=500)
    f.add_argument("--arch", choices=(WS, OS))
    f.set_defaults(func=cmd_fuzz)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataflowScopeError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
