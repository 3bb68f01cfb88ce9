"""Operator command line.

Subcommands wrap the library modules one-to-one; every command echoes its
fully resolved configuration to stderr before doing work, writes data to
stdout or files only, and exits nonzero with a one-line diagnostic on any
domain error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .active_loop import ExperimentConfig, curves_to_csv, run_experiment
from .corpus import Taxonomy, read_corpus
from .errors import ConfigError, ReviewLoopError
from .seqmodel import Hyperparams, LabelVector, gradient_check, init_params
from .service import ServiceConfig, Store
from .synth import SynthSpec, write_synthetic

SIMULATE_PATH_KEYS = {"corpus", "embedding_file", "validation_corpus"}


def _echo_config(label: str, payload: dict) -> None:
    print(f"[reviewloop] resolved {label} config: "
          f"{json.dumps(payload, sort_keys=True)}", file=sys.stderr)


def _load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _open_or_create_store(store_dir: Path, config_path: str | None) -> Store:
    if (store_dir / "state.json").exists():
        if config_path is not None:
            raise ConfigError("store already exists; config cannot be changed")
        return Store.open(store_dir)
    raw = _load_json(config_path) if config_path else {}
    taxonomy_dict = raw.pop("taxonomy", None)
    config = ServiceConfig.from_dict(raw)
    taxonomy = Taxonomy.from_dict(taxonomy_dict) if taxonomy_dict else None
    return Store.create(store_dir, config, taxonomy=taxonomy)


def cmd_ingest(args) -> int:
    store = _open_or_create_store(Path(args.store), args.config)
    _echo_config("service", store.config.to_dict())
    delta = store.ingest_corpus(args.corpus)
    print(json.dumps({"ingested": delta, "counts": store.counts()}))
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec.from_dict(_load_json(args.spec)) if args.spec else SynthSpec()
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    _echo_config("synth", spec.__dict__)
    corpus_path, embedding_path = write_synthetic(spec, args.out)
    print(json.dumps({"corpus": str(corpus_path),
                      "embeddings": str(embedding_path)}))
    return 0


def cmd_simulate(args) -> int:
    raw = _load_json(args.config)
    paths = {k: raw.pop(k) for k in list(raw) if k in SIMULATE_PATH_KEYS}
    if "corpus" not in paths:
        raise ConfigError("simulate config needs a 'corpus' path")
    config = ExperimentConfig.from_dict(raw)
    if args.seed is not None:
        config = replace(config, seeds=(args.seed,))
    resolved = config.to_dict()
    resolved.update(paths)
    _echo_config("simulate", resolved)

    rows = read_corpus(paths["corpus"])
    validation_rows = (read_corpus(paths["validation_corpus"])
                       if "validation_corpus" in paths else None)
    started = time.monotonic()

    def progress(setting, seed, round_idx, round_):
        f1 = round_.eval[config.driver_task].micro_f1
        print(f"[reviewloop] {setting} seed={seed} round={round_idx} "
              f"n={round_.trained_count} {config.driver_task}_f1={f1:.4f}",
              file=sys.stderr)

    curves = run_experiment(config, rows, validation_rows=validation_rows,
                            embedding_file=paths.get("embedding_file"),
                            progress=progress)
    csv_text = curves_to_csv(curves)
    if args.out == "-":
        sys.stdout.write(csv_text)
    else:
        Path(args.out).write_text(csv_text, encoding="utf-8", newline="\n")
    print(f"[reviewloop] simulate finished in {time.monotonic() - started:.1f}s",
          file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    store = _open_or_create_store(Path(args.store), args.config)
    _echo_config("service", store.config.to_dict())
    app = create_app(store, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_eval(args) -> int:
    store = Store.open(Path(args.store))
    _echo_config("service", store.config.to_dict())
    print(json.dumps(store.get_metrics(), sort_keys=True))
    return 0


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    _echo_config("gradcheck", {"models": args.models, "tolerance": args.tolerance,
                               "step": 1e-5})
    worst = 0.0
    for i in range(args.models):
        t = int(rng.integers(1, 5))
        d = int(rng.integers(2, 5))
        h = int(rng.integers(2, 5))
        c = int(rng.integers(1, 4))
        params = init_params(Hyperparams(hidden_size=h), d, c, rng)
        label = LabelVector((rng.uniform(size=c) < 0.5).astype(float),
                            tuple(f"class_{j}" for j in range(c)))
        report = gradient_check(params, (rng.normal(size=(t, d)), label),
                                tolerance=args.tolerance)
        worst = max(worst, report.max_rel_error)
        print(f"model {i}: T={t} D={d} H={h} C={c} "
              f"max_rel_error={report.max_rel_error:.3e} "
              f"({'pass' if report.passed else 'FAIL'})")
    print(f"max relative error over {args.models} models: {worst:.3e}")
    return 0 if worst < args.tolerance else 1


def cmd_export_curve(args) -> int:
    store = Store.open(Path(args.store))
    csv_text = curves_to_csv([store.get_curve()])
    if args.out == "-":
        sys.stdout.write(csv_text)
    else:
        Path(args.out).write_text(csv_text, encoding="utf-8", newline="\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reviewloop",
        description="Active-learning engine for multi-label review classification")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the run seed where one applies")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a JSONL corpus into a store")
    p.add_argument("corpus")
    p.add_argument("--store", required=True)
    p.add_argument("--config", default=None,
                   help="service config JSON (new stores only)")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic corpus + embeddings")
    p.add_argument("--spec", default=None, help="synth spec JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("simulate", help="run the strategy benchmark")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="-", help="curve CSV path or - for stdout")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--store", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", default=None, help="directory with the built frontend")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("eval", help="print latest validation metrics")
    p.add_argument("--store", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--models", type=int, default=5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("export-curve", help="dump the live learning curve as CSV")
    p.add_argument("--store", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_export_curve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ReviewLoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
