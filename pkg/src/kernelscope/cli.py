"""Command-line driver: ``kernelscope <command> [-c config.yaml] [overrides]``.

Exit status is 0 on success, 2 when an output location cannot be written and
1 for any other error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import campaign as cp
from .errors import ConfigError, IoFailure, KernelScopeError
from .golden import build_golden
from .gpusim import sampling_decimate
from .presets import event_group
from .traceio import dumps_golden, dumps_trace, ingest_profiler_csv, load, loads_golden, loads_trace
from .validator import validate_trace

OUTPUT_ENV = "KERNELSCOPE_OUT"
DEFAULT_OUTPUT = "kernelscope-out"


def load_config_doc(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        doc = yaml.safe_load(load(path))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: the configuration must be a mapping")
    return doc


def apply_override(doc: dict, assignment: str) -> None:
    """Set a dotted key from ``key.path=value``; the value is parsed as YAML."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    parts = key.split(".")
    node = doc
    for p in parts[:-1]:
        child = node.get(p)
        if child is None:
            child = node[p] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"override {key!r}: {p!r} is not a mapping")
        node = child
    node[parts[-1]] = yaml.safe_load(raw)


def resolve_config(args) -> cp.CampaignConfig:
    doc = load_config_doc(args.config)
    shortcuts = {"presets": args.preset, "seed": args.seed, "workers": args.workers, "mode": args.mode,
                 "group": args.group}
    for key, value in shortcuts.items():
        if value is None:
            continue
        if key == "presets":
            doc.pop("preset", None)
        doc[key] = value
    for assignment in args.set or ():
        apply_override(doc, assignment)
    return cp.CampaignConfig.from_dict(doc)


def output_dir(args, cfg: Optional[cp.CampaignConfig]) -> Path:
    out = args.output or (cfg.output if cfg is not None else None) or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise IoFailure(f"output directory {out} is not writable")
    return path


def write_file(path: Path, data: bytes) -> None:
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def cmd_build_golden(args) -> int:
    cfg = resolve_config(args)
    out = output_dir(args, cfg)
    if args.traces:
        if len(cfg.presets) != 1:
            raise ConfigError("building from trace files needs exactly one preset (for its config table)")
        w = cp.workload(cfg, cfg.presets[0])
        traces = [loads_trace(load(p)) for p in args.traces]
        marker = cp.marker_for(w, cfg.policy)
        for k in cfg.keep_every:
            model = build_golden([sampling_decimate(t, k) for t in traces], marker, w.table, cfg.policy)
            group = _group_name(model.group, cfg)
            _emit_golden(out, w.name, group, k, model)
        return 0
    for name in cfg.presets:
        w = cp.workload(cfg, name)
        for group in cp.campaign_groups(cfg):
            for k, model in zip(cfg.keep_every, cp.build_models(cfg, w, group)):
                _emit_golden(out, name, group, k, model)
    return 0


def _group_name(group, cfg) -> str:
    for name in ("compute", "memory"):
        if event_group(name, cfg.device) == group:
            return name
    return "custom"


def _emit_golden(out: Path, name: str, group: str, k: int, model) -> None:
    path = out / cp.golden_filename(name, group, k)
    write_file(path, dumps_golden(model))
    print(f"{path}: {len(model.refs)} references, {len(model.sequence)} kernels")


def cmd_campaign(args) -> int:
    cfg = resolve_config(args)
    out = output_dir(args, cfg)
    models = {}
    if cfg.mode == "software" and not cfg.golden_dir:
        for name in cfg.presets:
            w = cp.workload(cfg, name)
            for group in cp.campaign_groups(cfg):
                models[(name, group)] = ms = cp.build_models(cfg, w, group)
                for k, m in zip(cfg.keep_every, ms):
                    write_file(out / cp.golden_filename(name, group, k), dumps_golden(m))
    result = cp.run_campaign_config(cfg, models)
    write_file(out / "report.json", result.report_json())
    write_file(out / "verdicts.csv", result.verdicts_csv())
    write_file(out / "plot_data.csv", result.plot_csv())
    for row in result.plot_rows():
        print(f"{row['benchmark']:12s} {row['group']:8s} k={row['keep_every']} {row['attack']:15s} "
              f"tpr={row['tpr'] or 'null':6s} fpr={row['fpr']}")
    return 0


def cmd_noise_study(args) -> int:
    cfg = resolve_config(args)
    out = output_dir(args, cfg)
    rows = cp.noise_study(cfg)
    write_file(out / "noise_study.csv", cp.noise_csv(rows))
    for r in rows:
        print(f"{r['noise']:9s} {r['concurrency']} {r['mean_dtw']:.4f}")
    return 0


def cmd_hwsim(args) -> int:
    cfg = resolve_config(args)
    out = output_dir(args, cfg)
    rows = cp.hwsim_study(cfg)
    write_file(out / "hwsim.csv", cp.hwsim_csv(rows))
    print(f"{len(rows)} runs written to {out / 'hwsim.csv'}")
    return 0


def cmd_ingest(args) -> int:
    cfg = resolve_config(args)
    out = output_dir(args, cfg)
    group_name = "compute" if cfg.group == "auto" else cfg.group
    trace = ingest_profiler_csv(load(args.input), event_group(group_name, cfg.device), cfg.device)
    name = args.name or (Path(args.input).stem + ".trace.csv")
    write_file(out / name, dumps_trace(trace))
    print(f"{out / name}: {len(trace)} samples")
    return 0


def cmd_validate(args) -> int:
    model = loads_golden(load(args.golden))
    trace = loads_trace(load(args.trace))
    v = validate_trace(trace, model)
    doc = {
        "decision": v.decision.value,
        "flagged_kernel": v.flagged_kernel,
        "max_consecutive_rejections": v.max_consecutive_rejections,
        "diagnostics": list(v.diagnostics),
        "segments": [{"kernel": m.kernel_ordinal, "config_id": m.config_id, "coefficient": m.correlation,
                      "lag": m.lag, "matched": m.matched} for m in v.per_segment],
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.output or os.environ.get(OUTPUT_ENV):
        write_file(output_dir(args, None) / "verdict.json", text.encode("utf-8"))
    sys.stdout.write(text)
    return 0


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    p.add_argument("-o", "--output", help=f"output directory (default: ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    if config:
        p.add_argument("-c", "--config", help="YAML configuration document")
        p.add_argument("--preset", action="append", help="workload preset (repeatable); overrides the document")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--mode", choices=cp.MODES)
        p.add_argument("--group", choices=cp.GROUPS)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any document key, e.g. sizes.normal=50 or hwsim.runs=2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kernelscope", description="GPU counter-trace golden-model validation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-golden", help="simulate (or read) golden traces and write golden models")
    _common(p)
    p.add_argument("--traces", nargs="+", help="build from these trace files instead of simulating")
    p.set_defaults(func=cmd_build_golden)

    p = sub.add_parser("campaign", help="TPR/FPR campaign over normal and attack datasets")
    _common(p)
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("noise-study", help="DTW similarity under concurrent-kernel noise")
    _common(p)
    p.set_defaults(func=cmd_noise_study)

    p = sub.add_parser("hwsim", help="hardware validator model: overhead and DTW per run")
    _common(p)
    p.set_defaults(func=cmd_hwsim)

    p = sub.add_parser("ingest", help="convert a profiler CSV export into a trace file")
    _common(p)
    p.add_argument("input")
    p.add_argument("--name", help="output file name (default: <input stem>.trace.csv)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("validate", help="validate one trace file against a golden model file")
    _common(p, config=False)
    p.add_argument("trace")
    p.add_argument("golden")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KernelScopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
