"""Batch-processing command line: annotate, eval, stats, bench, convert.

Settings resolve as flags > environment (KIWI_*) > JSON config file.
Exit codes: 0 success, 2 configuration/input error, 3 backend
unreachable, 4 partial failure (see the run manifest for details).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import evaluation, telemetry
from .align import AnchorConfig
from .backend import Backend, BackendConfig, HttpBackend, make_backend
from .evaluation import DocIdMismatchError, MatchMode
from .formats import (
    BIO_SUFFIX,
    JSON_SUFFIX,
    STANDOFF_SUFFIX,
    bio_to_spans,
    from_json,
    from_standoff,
    spans_to_bio,
    to_json,
    to_standoff,
    tsv_to_bio,
    bio_to_tsv,
)
from .pipeline import annotate_batch
from .schema import AnnotationSet, Document
from .segment import segment
from .spanmark import TEMPLATE_VERSION

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_PARTIAL = 4

ENV_PREFIX = "KIWI_"

_CONFIG_FILE_KEYS = {
    "backend_url": str,
    "api_key": str,
    "batch_size": int,
    "model_name": str,
    "temperature": float,
    "max_output_chars": int,
    "request_timeout": float,
    "max_retries": int,
    "retry_backoff_s": float,
    "anchor_confidence_threshold": float,
    "anchor_max_source_gap": int,
    "anchor_word_snap": bool,
}


class ConfigError(Exception):
    pass


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    out = {}
    for key, value in data.items():
        if key not in _CONFIG_FILE_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        caster = _CONFIG_FILE_KEYS[key]
        try:
            out[key] = caster(value) if not isinstance(value, caster) else value
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    return out


def _setting(flag, env_name: str | None, file_cfg: dict, file_key: str, default, cast):
    if flag is not None:
        return flag
    if env_name:
        raw = os.environ.get(ENV_PREFIX + env_name)
        if raw is not None:
            try:
                return cast(raw)
            except ValueError as exc:
                raise ConfigError(f"bad {ENV_PREFIX}{env_name}: {exc}") from exc
    if file_key in file_cfg:
        return file_cfg[file_key]
    return default


def _resolve_backend_settings(args, file_cfg: dict) -> dict:
    return {
        "backend_url": _setting(
            getattr(args, "backend", None), "BACKEND_URL", file_cfg,
            "backend_url", "", str,
        ),
        "api_key": _setting(None, "API_KEY", file_cfg, "api_key", "", str),
        "batch_size": _setting(
            getattr(args, "batch_size", None), "BATCH_SIZE", file_cfg,
            "batch_size", 100, int,
        ),
        "model_name": _setting(None, None, file_cfg, "model_name", "kiwi", str),
        "temperature": _setting(None, None, file_cfg, "temperature", 0.0, float),
        "max_output_chars": _setting(
            None, None, file_cfg, "max_output_chars", 8192, int
        ),
        "request_timeout": _setting(
            None, None, file_cfg, "request_timeout", 30.0, float
        ),
        "max_retries": _setting(None, None, file_cfg, "max_retries", 3, int),
        "retry_backoff_s": _setting(
            None, None, file_cfg, "retry_backoff_s", 0.5, float
        ),
        "anchor_confidence_threshold": _setting(
            None, None, file_cfg, "anchor_confidence_threshold", 0.7, float
        ),
        "anchor_max_source_gap": _setting(
            None, None, file_cfg, "anchor_max_source_gap", 16, int
        ),
        "anchor_word_snap": _setting(
            None, None, file_cfg, "anchor_word_snap", True, bool
        ),
    }


def _backend_config(settings: dict) -> BackendConfig:
    return BackendConfig(
        endpoint=settings["backend_url"],
        model_name=settings["model_name"],
        temperature=settings["temperature"],
        max_output_chars=settings["max_output_chars"],
        request_timeout=settings["request_timeout"],
        max_retries=settings["max_retries"],
        retry_backoff_s=settings["retry_backoff_s"],
        batch_size=settings["batch_size"],
        api_key=settings["api_key"],
    )


def _anchor_config(settings: dict) -> AnchorConfig:
    return AnchorConfig(
        confidence_threshold=settings["anchor_confidence_threshold"],
        max_source_gap=settings["anchor_max_source_gap"],
        word_snap=settings["anchor_word_snap"],
    )


def _input_documents(input_path: str) -> list[Document]:
    p = Path(input_path)
    if p.is_file():
        files = [p]
    elif p.is_dir():
        files = sorted(p.glob("*.txt"))
        if not files:
            raise ConfigError(f"no .txt files in {input_path}")
    else:
        raise ConfigError(f"input path not found: {input_path}")
    docs = []
    for f in files:
        text = f.read_text(encoding="utf-8")
        doc_id = f.name[: -len(".txt")] if f.name.endswith(".txt") else f.stem
        docs.append(Document(doc_id, text, tuple(segment(text))))
    return docs


def _read_annotation_dir(path: str) -> list[AnnotationSet]:
    p = Path(path)
    if not p.is_dir():
        raise ConfigError(f"annotation directory not found: {path}")
    files = sorted(p.glob(f"*{JSON_SUFFIX}"))
    if not files:
        raise ConfigError(f"no {JSON_SUFFIX} files in {path}")
    return [from_json(f.read_bytes()) for f in files]


def cmd_annotate(args) -> int:
    file_cfg = _load_config_file(args.config)
    settings = _resolve_backend_settings(args, file_cfg)
    docs = _input_documents(args.input)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    gold = None
    if args.re_input == "gold":
        gold_dir = Path(args.gold_dir or args.input)
        if not gold_dir.is_dir():
            raise ConfigError(f"gold directory not found: {gold_dir}")
        gold = []
        for doc in docs:
            gf = gold_dir / f"{doc.id}{JSON_SUFFIX}"
            if gf.is_file():
                gold.append(from_json(gf.read_bytes()))
        if not gold:
            raise ConfigError(f"no gold {JSON_SUFFIX} files found in {gold_dir}")

    url = settings["backend_url"]
    if not url:
        raise ConfigError("no backend configured (use --backend or KIWI_BACKEND_URL)")
    backend_cfg = _backend_config(settings)
    backend: Backend = make_backend(url, backend_cfg)
    if isinstance(backend, HttpBackend) and not backend.ping():
        print(f"backend unreachable: {url}", file=sys.stderr)
        return EXIT_BACKEND

    run = annotate_batch(
        docs,
        backend,
        config=backend_cfg,
        re_input=args.re_input,
        gold=gold,
        anchor=_anchor_config(settings),
    )

    for annotation in run.annotations:
        if args.format == "json":
            (out_dir / f"{annotation.doc_id}{JSON_SUFFIX}").write_bytes(
                to_json(annotation)
            )
        else:
            (out_dir / f"{annotation.doc_id}{STANDOFF_SUFFIX}").write_text(
                to_standoff(annotation), encoding="utf-8"
            )

    resolved = dict(sorted(settings.items()))
    resolved.update({"re_input": args.re_input, "format": args.format, "seed": args.seed})
    config_hash = hashlib.sha256(
        json.dumps(resolved, sort_keys=True).encode()
    ).hexdigest()[:16]
    diag_summary: dict[str, int] = {}
    for d in run.diagnostics:
        diag_summary[d.kind] = diag_summary.get(d.kind, 0) + 1
    manifest = {
        "config_hash": config_hash,
        "backend": backend.describe(),
        "template_version": TEMPLATE_VERSION,
        "seed": args.seed,
        "re_input": args.re_input,
        "format": args.format,
        "documents": [d.id for d in docs],
        "request_counts": run.request_counts,
        "retries": run.retries,
        "failures": [list(f) for f in run.failures],
        "diagnostics": {k: diag_summary[k] for k in sorted(diag_summary)},
        "timings": {k: round(v, 6) for k, v in run.timings.items()},
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

    if run.failures:
        all_backend = all("unreachable" in msg or "Connection" in msg or "error" in msg
                          for _, msg in run.failures)
        if all_backend and len(run.failures) == len(docs):
            return EXIT_BACKEND
        return EXIT_PARTIAL
    return EXIT_OK


def _tasks(arg: str) -> list[str]:
    return ["ner", "re"] if arg == "both" else [arg]


def _modes(arg: str) -> list[MatchMode]:
    if arg == "both":
        return [MatchMode.EXACT, MatchMode.RELAXED]
    return [MatchMode(arg)]


def cmd_eval(args) -> int:
    gold = _read_annotation_dir(args.gold)
    pred = _read_annotation_dir(args.pred)
    compare = _read_annotation_dir(args.compare) if args.compare else None

    reports = []
    significance = []
    try:
        for task in _tasks(args.task):
            for mode in _modes(args.mode):
                reports.append(evaluation.score_corpus(gold, pred, task, mode))
                if compare is not None:
                    sig = evaluation.bootstrap_significance(
                        gold, pred, compare, task, mode,
                        replicates=args.bootstrap, seed=args.seed,
                    )
                    significance.append((task, mode, sig))
    except DocIdMismatchError as exc:
        raise ConfigError(str(exc)) from exc

    if args.json:
        payload = {"reports": [evaluation.report_to_dict(r) for r in reports]}
        if significance:
            payload["significance"] = [
                {
                    "task": task,
                    "mode": mode.value,
                    **evaluation.significance_to_dict(sig),
                }
                for task, mode, sig in significance
            ]
        print(evaluation.dump_json(payload), end="")
    else:
        print(evaluation.report_to_text(reports))
        for task, mode, sig in significance:
            print(
                f"{task}/{mode.value}: U={sig.statistic:.1f} "
                f"p={sig.p_value:.4g} ci95=({sig.ci95[0]:+.4f}, {sig.ci95[1]:+.4f}) "
                f"meanF1 a={sig.mean_f1_a:.3f} b={sig.mean_f1_b:.3f}"
            )
    return EXIT_OK


def cmd_stats(args) -> int:
    sets = _read_annotation_dir(args.input)
    table = evaluation.corpus_stats(sets)
    if args.json:
        payload = {
            "documents": table.documents,
            "main_counts": table.main_counts,
            "relation_counts": table.relation_counts,
        }
        print(evaluation.dump_json(payload), end="")
    else:
        print(evaluation.stats_to_text(table))
    return EXIT_OK


def cmd_bench(args) -> int:
    ledger_path = Path(args.ledger)
    if not ledger_path.is_file():
        raise ConfigError(f"ledger CSV not found: {args.ledger}")
    try:
        samples = telemetry.read_samples_csv(ledger_path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    wall = args.wall_seconds
    if wall is None:
        if len(samples) < 2:
            raise ConfigError("--wall-seconds required with fewer than 2 samples")
        ts = [s.timestamp for s in samples]
        wall = max(ts) - min(ts)
        if wall <= 0:
            raise ConfigError("sample timestamps span zero time; pass --wall-seconds")
    try:
        ledger = telemetry.RunLedger(
            phase=args.phase,
            num_gpus=args.num_gpus,
            wall_seconds=wall,
            notes_processed=args.notes,
            samples=samples,
            epochs=args.epochs,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = telemetry.cost_report(ledger, energy_method=args.energy_method)
    if args.json:
        print(telemetry.report_to_json(report), end="")
    else:
        print(telemetry.report_to_text(report))
    return EXIT_OK


def _doc_for(doc_id: str, text_dir: Path) -> Document:
    tf = text_dir / f"{doc_id}.txt"
    if not tf.is_file():
        raise ConfigError(f"need {tf} for conversion")
    text = tf.read_text(encoding="utf-8")
    return Document(doc_id, text, tuple(segment(text)))


def cmd_convert(args) -> int:
    src, dst = args.from_format, args.to_format
    if src == dst:
        raise ConfigError("--from and --to are the same format")
    in_dir = Path(args.input)
    if not in_dir.is_dir():
        raise ConfigError(f"input directory not found: {args.input}")
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    text_dir = Path(args.text_dir) if args.text_dir else in_dir

    suffix = {"json": JSON_SUFFIX, "brat": STANDOFF_SUFFIX, "bio": BIO_SUFFIX}[src]
    files = sorted(in_dir.glob(f"*{suffix}"))
    if not files:
        raise ConfigError(f"no {suffix} files in {args.input}")

    for f in files:
        doc_id = f.name[: -len(suffix)]
        try:
            if src == "json":
                annotation = from_json(f.read_bytes())
            elif src == "brat":
                doc = _doc_for(doc_id, text_dir)
                annotation = from_standoff(f.read_text(encoding="utf-8"), doc)
            else:  # bio
                doc = _doc_for(doc_id, text_dir)
                mentions = []
                for seq in tsv_to_bio(f.read_text(encoding="utf-8")):
                    mentions.extend(bio_to_spans(seq, doc.text))
                mentions = [
                    type(m)(f"T{i}", m.etype, m.start, m.end, m.surface)
                    for i, m in enumerate(mentions, start=1)
                ]
                annotation = AnnotationSet(doc_id, tuple(mentions), ())
        except ValueError as exc:
            raise ConfigError(f"{f.name}: {exc}") from exc

        if dst == "json":
            (out_dir / f"{doc_id}{JSON_SUFFIX}").write_bytes(to_json(annotation))
        elif dst == "brat":
            (out_dir / f"{doc_id}{STANDOFF_SUFFIX}").write_text(
                to_standoff(annotation), encoding="utf-8"
            )
        else:  # bio
            doc = _doc_for(doc_id, text_dir)
            sequences = []
            for sent in doc.sentences:
                inside = [
                    m
                    for m in annotation.mentions
                    if m.is_main and sent.start <= m.start and m.end <= sent.end
                ]
                sequences.append(spans_to_bio(doc, sent, inside))
            (out_dir / f"{doc_id}{BIO_SUFFIX}").write_text(
                bio_to_tsv(sequences), encoding="utf-8"
            )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kiwi",
        description="Clinical information extraction: annotate, evaluate, convert.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="run the extraction pipeline over notes")
    p.add_argument("--input", required=True, help=".txt file or directory of .txt notes")
    p.add_argument("--output", required=True, help="directory for annotation files")
    p.add_argument("--format", choices=["json", "brat"], default="json")
    p.add_argument("--backend", help="backend URL, or mock:<lexicon.json>")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--re-input", choices=["pipeline", "gold"], default="pipeline",
                   dest="re_input")
    p.add_argument("--gold-dir", dest="gold_dir",
                   help="gold annotations for --re-input gold (default: input dir)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON config file")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--task", choices=["ner", "re", "both"], default="both")
    p.add_argument("--mode", choices=["exact", "relaxed", "both"], default="both")
    p.add_argument("--bootstrap", type=int, default=1000,
                   help="replicates for --compare significance")
    p.add_argument("--compare", help="second prediction dir to test against")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="compute cost metrics from a resource log")
    p.add_argument("--ledger", required=True, help="CSV: timestamp,gpu_id,power_w,mem_gb")
    p.add_argument("--phase", choices=["train", "inference"], default="inference")
    p.add_argument("--num-gpus", type=int, default=1, dest="num_gpus")
    p.add_argument("--wall-seconds", type=float, dest="wall_seconds",
                   help="default: sample timestamp span")
    p.add_argument("--notes", type=int, default=0)
    p.add_argument("--epochs", type=int)
    p.add_argument("--energy-method", choices=["mean", "trapezoid"],
                   default="mean", dest="energy_method")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("convert", help="convert between annotation formats")
    p.add_argument("--from", required=True, choices=["json", "brat", "bio"],
                   dest="from_format")
    p.add_argument("--to", required=True, choices=["json", "brat", "bio"],
                   dest="to_format")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--text-dir", dest="text_dir",
                   help="directory of .txt sources (default: input dir)")
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
