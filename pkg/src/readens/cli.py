"""Command-line front end.

Every stage reads and writes files so each one can be re-run on its own::

    readens train-toy --seed 0 --out-dir run/
    readens fuse --heads run/heads_test_*.jsonl --calibration run/calibration.json --out fused.tsv
    readens aggregate --in fused.tsv --heads run/heads_test_*.jsonl \\
        --calibration run/calibration.json --out docs.tsv --skew skew.json
    readens evaluate --gold run/gold_test.tsv --pred fused.tsv --json report.json

Exit codes: 0 success, 1 data or validation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _accel
from . import decode as dec
from . import desk, levels, metrics, trainer
from .aggregate import AggregationPolicy, aggregate_documents, skew_report
from .errors import ConfigurationError, ParseError, ReadensError, ValidationError
from .fusion import fuse_all
from .records import GoldRecord, doc_key, dump_heads, load_gold, load_heads, write_gold

log = logging.getLogger("readens")


class UsageError(ReadensError):
    """Bad flag combination; exits with status 2."""


# ------------------------------------------------------------------ helpers


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(_jsonable(v) for v in value)
    return value


def _config_dict(args) -> dict:
    skip = {"func", "config", "verbose"}
    return {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in skip}


def write_manifest(path: Path, args, inputs=(), outputs=(), extra=None) -> Path:
    """Sidecar manifest; the only place wall-clock timestamps are written."""
    cfg = _config_dict(args)
    cfg_json = json.dumps(cfg, sort_keys=True)
    manifest = {
        "subcommand": args.command,
        "config": json.loads(cfg_json),
        "config_hash": hashlib.sha256(cfg_json.encode()).hexdigest(),
        "seed": cfg.get("seed"),
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": {str(p): _sha256(Path(p)) for p in outputs if Path(p).exists()},
        "versions": {
            "readens": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "kernel_backend": _accel.BACKEND,
        },
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _manifest_for(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _require_files(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise ValidationError(f"input file not found: {p}")


def _dump_json(obj, path: Path | None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _load_heads_many(paths):
    heads = []
    for p in paths:
        heads.extend(load_heads(p))
    return heads


def _load_calibration(args, heads):
    if any(h.head_kind == "regression" for h in heads) and args.calibration is None:
        raise UsageError("regression heads need --calibration")
    return dec.load_calibration(args.calibration) if args.calibration else {}


def read_fused(path: Path) -> tuple[dict[str, float], dict[str, int]]:
    """Read ``id<TAB>value<TAB>level`` rows written by ``fuse``."""
    values, lvls = {}, {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError("expected 'id<TAB>value<TAB>level'", path, lineno)
            try:
                value, level = float(parts[1]), int(parts[2])
            except ValueError:
                raise ParseError(f"bad number in {line!r}", path, lineno) from None
            if not math.isfinite(value) or level not in levels.BAREC:
                raise ParseError(f"value/level out of range in {line!r}", path, lineno)
            if parts[0] in values:
                raise ParseError(f"duplicate id {parts[0]!r}", path, lineno)
            values[parts[0]], lvls[parts[0]] = value, level
    return values, lvls


def _parse_override(text: str) -> frozenset[int]:
    if not text or text.strip().lower() == "none":
        return frozenset()
    try:
        return frozenset(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--override expects comma-separated levels, got {text!r}")


# -------------------------------------------------------------- subcommands


def cmd_weights(args) -> int:
    _require_files(args.gold)
    gold = load_gold(args.gold, levels.get_scale(args.scale))
    cw = levels.class_weights_from_labels(r.level for r in gold)
    _dump_json(cw.to_dict(), args.out)
    if args.out:
        write_manifest(_manifest_for(args.out), args, [args.gold], [args.out])
    return 0


def cmd_scale(args) -> int:
    src, dst = levels.get_scale(args.src), levels.get_scale(args.dst)
    if args.gold:
        _require_files(args.gold)
        if args.out is None:
            raise UsageError("--gold requires --out")
        records = load_gold(args.gold, src)
        out = []
        for r in records:
            y = levels.scale_label(r.level, src, dst)
            out.append(GoldRecord(r.sentence_id, levels.clamp(
                levels.round_half_away(y), dst.min_level, dst.max_level), r.text))
        write_gold(out, args.out)
        write_manifest(_manifest_for(args.out), args, [args.gold], [args.out])
        return 0
    if not args.values:
        raise UsageError("give label values or --gold")
    rows = []
    for x in args.values:
        y = levels.scale_label(x, src, dst)
        row = {"input": x, "scaled": y}
        if args.round:
            row["rounded"] = levels.clamp(levels.round_half_away(y), dst.min_level, dst.max_level)
        rows.append(row)
    _dump_json({"src": src.name, "dst": dst.name, "labels": rows}, None)
    return 0


def cmd_relabel(args) -> int:
    _require_files(args.source, args.predictions)
    src, dst = levels.SAMER, levels.BAREC
    source = load_gold(args.source, src)
    preds = load_gold(args.predictions, dst)
    pred_level = {r.sentence_id: r.level for r in preds}
    missing = [r.sentence_id for r in source if r.sentence_id not in pred_level]
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise ValidationError(f"{len(missing)} source items lack predictions: {shown}")

    merged, deviations = [], []
    for r in source:
        y = pred_level[r.sentence_id]
        merged.append(GoldRecord(r.sentence_id, y, r.text))
        deviations.append(abs(levels.descale_label(y, src, dst) - r.level))
    write_gold(merged, args.out)
    consistency = levels.verify_roundtrip([r.level for r in source], src, dst, args.margin)
    report = {
        "n": len(merged),
        "margin": args.margin,
        "scale_roundtrip": consistency.to_dict(),
        "prediction_agreement": {
            "max_deviation": max(deviations, default=0.0),
            "mean_deviation": float(np.mean(deviations)) if deviations else 0.0,
            "share_within_margin": (
                sum(d <= args.margin for d in deviations) / len(deviations) if deviations else 1.0
            ),
            "descaled": [levels.descale_label(g.level, src, dst) for g in merged],
        },
    }
    report_path = args.report or args.out.with_name(args.out.name + ".relabel.json")
    _dump_json(report, report_path)
    write_manifest(_manifest_for(args.out), args, [args.source, args.predictions],
                   [args.out, report_path])
    return 0


def _decoded(args):
    _require_files(*args.heads, args.calibration)
    heads = _load_heads_many(args.heads)
    return heads, dec.decode_all(heads, _load_calibration(args, heads))


def cmd_decode(args) -> int:
    _require_files(*args.heads)
    heads = _load_heads_many(args.heads)
    if args.fit_calibration:
        if args.gold is None or args.calibration is None:
            raise UsageError("--fit-calibration needs --gold and --calibration")
        _require_files(args.gold)
        gold = {r.sentence_id: r.level for r in load_gold(args.gold)}
        dec.save_calibration(dec.fit_calibration(heads, gold, args.epsilon), args.calibration)
    else:
        _require_files(args.calibration)
    preds = dec.decode_all(heads, _load_calibration(args, heads))
    if args.out:
        with args.out.open("w", encoding="utf-8") as fh:
            for p in sorted(preds, key=lambda p: (p.sentence_id, p.model_id)):
                fh.write(f"{p.sentence_id}\t{p.model_id}\t{p.kind}\t{p.raw_score!r}\t"
                         f"{p.confidence!r}\t{p.level}\n")
        write_manifest(_manifest_for(args.out), args,
                       [*args.heads, *([args.gold] if args.gold else [])], [args.out])
    return 0


def cmd_fuse(args) -> int:
    strategy = "pair" if args.pair_rule else args.strategy
    _, preds = _decoded(args)
    fused = fuse_all(preds, strategy, args.use_raw)
    with args.out.open("w", encoding="utf-8") as fh:
        for f in fused:
            fh.write(f"{f.sentence_id}\t{f.value!r}\t{f.level}\n")
    write_manifest(_manifest_for(args.out), args,
                   [*args.heads, *([args.calibration] if args.calibration else [])], [args.out])
    return 0


def cmd_aggregate(args) -> int:
    _require_files(getattr(args, "in"))
    values, lvls = read_fused(getattr(args, "in"))
    policy = AggregationPolicy(args.strategy, args.theta, args.override)
    per_model = None
    if args.heads:
        _, preds = _decoded(args)
        per_model = {}
        for p in preds:
            per_model.setdefault(p.model_id, {})[p.sentence_id] = (
                p.raw_score if args.use_raw else float(p.level)
            )
    elif policy.override_levels:
        log.info("no --heads given; the per-model override is skipped")
    docs = aggregate_documents(values, policy, lvls, per_model)
    with args.out.open("w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(f"{d.doc_id}\t{len(d.member_levels)}\t{d.level}\n")
    outputs = [args.out]
    if args.skew:
        _dump_json(skew_report(docs, args.skew_multiple).to_dict(), args.skew)
        outputs.append(args.skew)
    write_manifest(_manifest_for(args.out), args,
                   [getattr(args, "in"), *(args.heads or [])], outputs)
    return 0


def cmd_evaluate(args) -> int:
    _require_files(args.gold, args.pred)
    gold = load_gold(args.gold)
    pred = {r.sentence_id: r.level for r in load_gold(args.pred)}
    missing = [r.sentence_id for r in gold if r.sentence_id not in pred]
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise ValidationError(f"{args.pred}: no prediction for {len(missing)} gold items: {shown}")
    extra = len(pred) - len(gold)
    if extra > 0:
        log.warning("%d predictions have no gold label and are ignored", extra)
    report = metrics.full_report(
        [r.level for r in gold], [pred[r.sentence_id] for r in gold],
        levels.load_collapse_maps(args.collapse),
    )
    print(report.summary())
    if args.json:
        args.json.write_text(report.to_json(), encoding="utf-8")
        write_manifest(_manifest_for(args.json), args, [args.gold, args.pred], [args.json])
    return 0


def cmd_train_toy(args) -> int:
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    bad = [k for k in kinds if k not in trainer.HEAD_KINDS]
    if bad or not kinds:
        raise UsageError(f"--kinds must list some of {trainer.HEAD_KINDS}, got {args.kinds!r}")
    config = trainer.TrainConfig(
        batch_size=args.batch_size,
        base_learning_rate=args.learning_rate,
        lr_multiplier=args.lr_multiplier,
        epochs=args.epochs,
        patience=args.patience,
        use_class_weights=not args.no_class_weights,
        seed=args.seed,
    )
    run = desk.run_desk_ensemble(args.seed, args.n, args.d, args.profile, args.noise,
                                 config, tuple(kinds))
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, split in run.splits.items():
        path = out / f"gold_{name}.tsv"
        write_gold([GoldRecord(s, int(y)) for s, y in zip(split.ids, split.labels)], path)
        written.append(path)
    test = run.splits["test"]
    doc_gold: dict[str, int] = {}
    for sid, y in zip(test.ids, test.labels):
        key = doc_key(sid)
        doc_gold[key] = max(doc_gold.get(key, 0), int(y))
    path = out / "gold_test_docs.tsv"
    write_gold([GoldRecord(k, v) for k, v in sorted(doc_gold.items())], path)
    written.append(path)
    for split_name, by_kind in run.outputs.items():
        for kind, heads in by_kind.items():
            path = out / f"heads_{split_name}_{kind}.jsonl"
            dump_heads(heads, path)
            written.append(path)
    path = out / "calibration.json"
    dec.save_calibration(run.calibration, path)
    written.append(path)
    summary = run.summary()
    summary["curves"] = {k: r.curve for k, r in run.results.items()}
    summary["train_config"] = config.to_dict()
    summary["base_learning_rate"] = config.base_learning_rate
    summary["dataset"] = {"n": args.n, "d": args.d, "profile": args.profile, "noise": args.noise}
    (out / "metrics.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    written.append(out / "metrics.json")
    write_manifest(out / "run_manifest.json", args, [], written,
                   {"final_metrics": run.summary()})
    print(json.dumps(run.summary(), indent=2, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    _require_files(args.json, args.skew)
    try:
        report = metrics.EvalReport.from_json(args.json.read_text(encoding="utf-8"))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{args.json}: not an evaluation report ({exc})") from None
    print(report.summary())
    if args.confusion:
        print("confusion (rows gold 1..19, cols pred 1..19):")
        for i, row in enumerate(report.confusion, 1):
            print(f"{i:>3} " + " ".join(f"{v:>4}" for v in row))
    if args.skew:
        skew = json.loads(args.skew.read_text(encoding="utf-8"))
        print(f"document predictions: {skew['n']}")
        print("zero coverage: " + (", ".join(map(str, skew["zero_coverage"])) or "none"))
        print("over-represented: " + (", ".join(map(str, skew["over_represented"])) or "none"))
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="readens", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"readens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", type=Path, help="JSON file of option values (flags given on the command line win)")
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(func=func)
        return p

    p = add("weights", cmd_weights, "inverse-frequency class weights of a gold file")
    p.add_argument("--gold", type=Path, required=True)
    p.add_argument("--scale", choices=sorted(levels.SCALES), default="barec")
    p.add_argument("--out", type=Path)

    p = add("scale", cmd_scale, "min-max re-scale labels between ordinal scales")
    p.add_argument("values", nargs="*", type=float)
    p.add_argument("--src", choices=sorted(levels.SCALES), default="samer")
    p.add_argument("--dst", choices=sorted(levels.SCALES), default="barec")
    p.add_argument("--round", action="store_true", help="also report the rounded level")
    p.add_argument("--gold", type=Path, help="re-scale every label of a TSV file instead")
    p.add_argument("--out", type=Path)

    p = add("relabel", cmd_relabel, "replace SAMER labels with BAREC-scale model predictions")
    p.add_argument("--source", type=Path, required=True, help="TSV on the SAMER 3-6 scale")
    p.add_argument("--predictions", type=Path, required=True, help="prediction TSV on the 1-19 scale")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--report", type=Path)
    p.add_argument("--margin", type=float, default=0.5)

    def heads_opts(p, required=True):
        p.add_argument("--heads", type=Path, nargs="+", required=required)
        p.add_argument("--calibration", type=Path)

    p = add("decode", cmd_decode, "decode head outputs to (score, level, confidence)")
    heads_opts(p)
    p.add_argument("--fit-calibration", action="store_true",
                   help="fit regression calibration against --gold and write it to --calibration")
    p.add_argument("--gold", type=Path)
    p.add_argument("--epsilon", type=float, default=dec.DEFAULT_EPSILON)
    p.add_argument("--out", type=Path)

    p = add("fuse", cmd_fuse, "confidence-weighted fusion of several models")
    heads_opts(p)
    p.add_argument("--strategy", choices=("weighted", "pair"), default="weighted")
    p.add_argument("--pair-rule", action="store_true", help="shorthand for --strategy pair")
    p.add_argument("--use-raw", action="store_true", help="fuse raw scores instead of integer levels")
    p.add_argument("--out", type=Path, required=True)

    p = add("aggregate", cmd_aggregate, "sentence -> document aggregation with skew fixes")
    p.add_argument("--in", type=Path, required=True, help="fused TSV from 'fuse'")
    heads_opts(p, required=False)
    p.add_argument("--strategy", choices=("max", "mean-ceil", "mean-floor"), default="max")
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--override", type=_parse_override, default=frozenset({16, 17}))
    p.add_argument("--use-raw", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--skew", type=Path, help="write the skew report JSON here")
    p.add_argument("--skew-multiple", type=float, default=3.0)

    p = add("evaluate", cmd_evaluate, "QWK / Acc19/7/5/3 / +-1 Acc19 / Dist report")
    p.add_argument("--gold", type=Path, required=True)
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--collapse", type=Path, help="directory of collapse-map TSVs")
    p.add_argument("--json", type=Path)

    p = add("train-toy", cmd_train_toy, "train CE/MSE/CORAL toy heads and emit their outputs")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--profile", choices=("uniform", "two-peak"), default="two-peak")
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--kinds", default="ce,mse,coral")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=2e-5)
    p.add_argument("--lr-multiplier", type=float, default=1e3)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--patience", type=int, default=1)
    p.add_argument("--no-class-weights", action="store_true")
    p.add_argument("--out-dir", type=Path, required=True)

    p = add("report", cmd_report, "print a saved evaluation report")
    p.add_argument("--json", type=Path, required=True)
    p.add_argument("--skew", type=Path)
    p.add_argument("--confusion", action="store_true")
    return parser


def _apply_config(parser, argv):
    """Re-parse with values from ``--config`` as defaults, so explicit flags win."""
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read --config {args.config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("--config must hold a JSON object")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "func", "help"):
            parser.error(f"--config: unknown option {key!r} for {args.command}")
        action = known[dest]
        if action.type is Path and value is not None:
            value = [Path(v) for v in value] if isinstance(value, list) else Path(value)
        elif action.type is _parse_override and isinstance(value, (list, str)):
            value = _parse_override(",".join(map(str, value)) if isinstance(value, list) else value)
        defaults[dest] = value
        action.required = False
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"readens {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ReadensError, ConfigurationError) as exc:
        print(f"readens {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"readens {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
