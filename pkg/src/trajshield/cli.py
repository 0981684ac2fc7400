"""Command-line entry point: ``trajshield <command> [options]``.

Settings resolve as built-in defaults < ``--config`` file < explicit flags.
Every command writes ``<out>.manifest.json`` next to its primary output.
Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, container
from .data import (DataError, Dataset, atomic_write_text, load_csv, read_vocabulary, split_dataset,
                   summarize, write_csv)
from .geomask import METHOD_ALIASES, METHODS, MaskConfig, mask_dataset
from .report import EvaluationReport, PairingError, comparison_table, evaluate_all, matrix_csv, spatial_table
from .trajgan import (TrainingConfig, VocabularyMismatch, checkpoint_load, checkpoint_save,
                      generate_synthetic, history_csv, train_gan)
from .tul import TulModel, UnknownUserError, train_tul

log = logging.getLogger("trajshield")

THREADS_ENV = "TRAJSHIELD_THREADS"


class UsageError(Exception):
    """Bad flags, config or input paths (exit code 2)."""


# Per-command settings and their defaults. Config-file values are coerced to
# the type of the default; ``None`` defaults are taken as strings.
SPLIT = {"data": None, "vocab": None, "seed": 0, "train_fraction": 2 / 3, "split_seed": 0}
_TC = TrainingConfig()
SETTINGS = {
    "ingest-check": {"data": None, "vocab": None, "train_fraction": 2 / 3, "split_seed": 0},
    "train": {**SPLIT, "epochs": _TC.epochs, "lr": _TC.lr, "batch_size": _TC.batch_size,
              "alpha": _TC.alpha, "beta": _TC.beta, "gamma": _TC.gamma, "c": _TC.c,
              "noise_dim": _TC.noise_dim, "spatial_dim": _TC.spatial_dim, "units": _TC.units},
    "generate": {**SPLIT, "model": None, "split": "test", "noise_seed": 0},
    "mask": {**SPLIT, "split": "test", "method": "random_perturbation", "radius_km": 1.0,
             "sigma_deg": 0.001, "temporal": False, "window_h": 24},
    "tul-train": {**SPLIT, "split": "train", "epochs": 200, "lr": 0.001, "batch_size": 256,
                  "spatial_dim": 64, "units": 100},
    "evaluate": {**SPLIT, "split": "test", "candidate": None, "tul": None, "tul_epochs": 200,
                 "tul_lr": 0.001},
    "report": {"reports": None},
}


# ------------------------------------------------------------------ config

def _coerce(key: str, text: str, default):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {text!r} as {type(default).__name__}") from None
    return text


def read_config(path: str | os.PathLike, command: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Dashes and underscores are interchangeable."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    known = SETTINGS[command]
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "loss_weights":
            out.update(parse_loss_weights(value))
        elif key in known:
            out[key] = _coerce(key, value, known[key])
        else:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r} for {command} "
                             f"(known: {', '.join(sorted(known))})")
    return out


def parse_loss_weights(text: str) -> dict:
    parts = text.split(",")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        values = []
    if len(values) != 4:
        raise UsageError(f"--loss-weights expects four numbers alpha,beta,gamma,c; got {text!r}")
    return dict(zip(("alpha", "beta", "gamma", "c"), values))


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(SETTINGS[args.command])
    if args.config:
        cfg.update(read_config(args.config, args.command))
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "loss_weights", None):
        cfg.update(parse_loss_weights(args.loss_weights))
    return cfg


# ----------------------------------------------------------------- helpers

def _require_file(path, what: str) -> Path:
    if path is None:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _out_path(args) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        raise UsageError(f"output directory does not exist: {out.parent}")
    return out


def _load(cfg: dict, vocabulary=None) -> Dataset:
    path = _require_file(cfg["data"], "--data")
    if vocabulary is None and cfg.get("vocab"):
        vocabulary = read_vocabulary(_require_file(cfg["vocab"], "--vocab"))
    ds = load_csv(path, vocabulary=vocabulary)
    return split_dataset(ds, cfg["train_fraction"], cfg["split_seed"])


def _select(ds: Dataset, split: str):
    if split == "all":
        return list(ds.trajectories)
    return ds.part(split)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(out: Path, command: str, cfg: dict, seeds: dict, inputs: dict, outputs: dict,
                   summary: dict | None, started: float, argv) -> Path:
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": cfg,
        "seeds": seeds,
        "inputs": inputs,
        "outputs": outputs,
        "summary": summary,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "duration_s": round(time.perf_counter() - started, 3),
    }
    path = Path(f"{out}.manifest.json")
    atomic_write_text(path, json.dumps(_jsonable(manifest), indent=2) + "\n")
    return path


@contextlib.contextmanager
def thread_limit():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        yield
        return
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=n):
        yield


# ---------------------------------------------------------------- commands

def cmd_ingest_check(args, cfg):
    ds = _load(cfg)
    summary = summarize(ds)
    text = json.dumps(_jsonable(summary), indent=2) + "\n"
    outputs = {}
    if args.out:
        out = _out_path(args)
        atomic_write_text(out, text)
        outputs["summary"] = out
    sys.stdout.write(text)
    return summary, {}, {"data": cfg["data"]}, outputs, (Path(args.out) if args.out else None)


def cmd_train(args, cfg):
    out = _out_path(args)
    ds = _load(cfg)
    try:
        tc = TrainingConfig(lr=cfg["lr"], epochs=cfg["epochs"], batch_size=cfg["batch_size"],
                            alpha=cfg["alpha"], beta=cfg["beta"], gamma=cfg["gamma"], c=cfg["c"],
                            noise_dim=cfg["noise_dim"], spatial_dim=cfg["spatial_dim"],
                            units=cfg["units"], seed=cfg["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    every = max(1, tc.epochs // 20)

    def progress(row):
        if row["epoch"] % every == 0 or row["epoch"] == tc.epochs:
            log.info("epoch %d d_loss %.4f g_loss %.4f", row["epoch"], row["d_loss"], row["g_loss"])

    ckpt = train_gan(ds, tc, progress=progress)
    checkpoint_save(ckpt, out)
    hist = Path(f"{out}.history.csv")
    atomic_write_text(hist, history_csv(ckpt.history))
    return summarize(ds), {"seed": tc.seed, "split_seed": cfg["split_seed"]}, \
        {"data": cfg["data"]}, {"checkpoint": out, "history": hist}, out


def cmd_generate(args, cfg):
    out = _out_path(args)
    model = _require_file(cfg["model"], "--model")
    ckpt = checkpoint_load(model)
    ds = _load(cfg, vocabulary=ckpt.category_vocab)
    trajs = _select(ds, cfg["split"])
    syn = generate_synthetic(trajs, ckpt, noise_seed=cfg["noise_seed"], category_vocab=ds.category_vocab)
    atomic_write_text(out, write_csv(syn, ds.category_vocab))
    summary = {**summarize(ds), "generated_trajectories": len(syn),
               "generated_points": sum(len(t) for t in syn)}
    return summary, {"noise_seed": cfg["noise_seed"], "split_seed": cfg["split_seed"]}, \
        {"data": cfg["data"], "model": model}, {"synthetic": out}, out


def cmd_mask(args, cfg):
    out = _out_path(args)
    method = METHOD_ALIASES.get(str(cfg["method"]).lower())
    if method is None:
        raise UsageError(f"unknown method {cfg['method']!r}; valid: {', '.join(METHODS)} "
                         f"(aliases: {', '.join(sorted(set(METHOD_ALIASES) - set(METHODS)))})")
    try:
        mc = MaskConfig(method, cfg["radius_km"], cfg["sigma_deg"], bool(cfg["temporal"]),
                        cfg["window_h"], cfg["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ds = _load(cfg)
    masked = mask_dataset(_select(ds, cfg["split"]), mc)
    atomic_write_text(out, write_csv(masked, ds.category_vocab))
    cfg["method"] = method
    return summarize(ds), {"seed": mc.seed, "split_seed": cfg["split_seed"]}, \
        {"data": cfg["data"]}, {"masked": out}, out


def cmd_tul_train(args, cfg):
    out = _out_path(args)
    ds = _load(cfg)
    model = train_tul(_select(ds, cfg["split"]), ds.n_categories, ds.centroid, epochs=cfg["epochs"],
                      lr=cfg["lr"], seed=cfg["seed"], batch_size=cfg["batch_size"],
                      spatial_dim=cfg["spatial_dim"], units=cfg["units"])
    model.save(out)
    return summarize(ds), {"seed": cfg["seed"], "split_seed": cfg["split_seed"]}, \
        {"data": cfg["data"]}, {"tul": out}, out


def _candidates(specs):
    """``NAME=path`` or bare ``path`` (named after the file stem)."""
    if not specs:
        raise UsageError("at least one --candidate is required")
    out = {}
    for spec in specs:
        name, sep, path = spec.partition("=")
        if not sep:
            name, path = Path(spec).stem, spec
        if name in out:
            raise UsageError(f"duplicate candidate name {name!r}")
        out[name] = _require_file(path, f"candidate {name!r}")
    return out


def cmd_evaluate(args, cfg):
    out = _out_path(args)
    cands = _candidates(args.candidate)
    cfg["candidate"] = {k: str(v) for k, v in cands.items()}
    ds = _load(cfg)
    original = _select(ds, cfg["split"])
    if cfg["tul"]:
        tul = TulModel.load(_require_file(cfg["tul"], "--tul"))
    else:
        log.info("no --tul given; training one on the train split")
        tul = train_tul(ds.part("train"), ds.n_categories, ds.centroid, epochs=cfg["tul_epochs"],
                        lr=cfg["tul_lr"], seed=cfg["seed"])
    reports = {}
    for name, path in cands.items():
        cand = load_csv(path, vocabulary=ds.category_vocab)
        reports[name] = evaluate_all(original, list(cand.trajectories), tul, ds.n_categories)
        log.info("%s: ACC@1 %.3f", name, reports[name].acc1)
    payload = {"reports": {k: json.loads(r.to_json()) for k, r in reports.items()},
               "category_vocab": list(ds.category_vocab)}
    atomic_write_text(out, json.dumps(payload, indent=2) + "\n")
    table = Path(f"{out}.table.csv")
    atomic_write_text(table, comparison_table(reports))
    sys.stdout.write(comparison_table(reports))
    return summarize(ds), {"seed": cfg["seed"], "split_seed": cfg["split_seed"]}, \
        {"data": cfg["data"], "candidates": cands, "tul": cfg["tul"]}, {"report": out, "table": table}, out


def cmd_report(args, cfg):
    out = _out_path(args)
    paths = args.reports or []
    if not paths:
        raise UsageError("at least one --reports file is required")
    reports, vocab = {}, None
    for p in paths:
        payload = json.loads(_require_file(p, "report").read_text(encoding="utf-8"))
        vocab = vocab or payload.get("category_vocab")
        for name, rep in payload["reports"].items():
            reports[name] = EvaluationReport(**rep)
    vocab = vocab or [str(i) for i in range(len(next(iter(reports.values())).category_freq))]
    outputs = {"comparison": Path(f"{out}.comparison.csv"), "spatial": Path(f"{out}.spatial.csv"),
               "frequencies": Path(f"{out}.frequencies.csv")}
    atomic_write_text(outputs["comparison"], comparison_table(reports))
    atomic_write_text(outputs["spatial"], spatial_table(reports))
    rows = ["method,kind,bin,count"]
    for name, rep in reports.items():
        rows += [f"{name},hour,{h},{v!r}" for h, v in enumerate(rep.hourly_freq)]
        rows += [f"{name},category,{vocab[k]},{v!r}" for k, v in enumerate(rep.category_freq)]
        mpath = Path(f"{out}.{name}.temporal.csv")
        atomic_write_text(mpath, matrix_csv(np.array(rep.temporal_matrix), vocab))
        outputs[f"temporal_{name}"] = mpath
    atomic_write_text(outputs["frequencies"], "\n".join(rows) + "\n")
    sys.stdout.write(comparison_table(reports))
    return None, {}, {"reports": paths}, outputs, out


COMMANDS = {
    "ingest-check": cmd_ingest_check, "train": cmd_train, "generate": cmd_generate, "mask": cmd_mask,
    "tul-train": cmd_tul_train, "evaluate": cmd_evaluate, "report": cmd_report,
}


# ------------------------------------------------------------------ parser

def _common(p, data=True, seed=True, split=None):
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--out", help="primary output path")
    p.add_argument("-v", "--verbose", action="store_true")
    if data:
        p.add_argument("--data", help="trajectory CSV")
        p.add_argument("--vocab", help="category vocabulary file, one name per line")
        p.add_argument("--train-fraction", type=float)
        p.add_argument("--split-seed", type=int)
    if seed:
        p.add_argument("--seed", type=int)
    if split:
        p.add_argument("--split", choices=("train", "test", "all"), help=f"default {split}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajshield", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="parse a CSV and print its summary")
    _common(p, seed=False)

    p = sub.add_parser("train", help="train the generator/discriminator pair")
    _common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--loss-weights", metavar="A,B,G,C", help="alpha,beta,gamma,c")
    for name in ("alpha", "beta", "gamma", "c"):
        p.add_argument(f"--{name}", type=float, help=argparse.SUPPRESS)
    p.add_argument("--noise-dim", type=int)
    p.add_argument("--spatial-dim", type=int)
    p.add_argument("--units", type=int)

    p = sub.add_parser("generate", help="synthesise one trajectory per input trajectory")
    _common(p, split="test")
    p.add_argument("--model", help="checkpoint from `train`")
    p.add_argument("--noise-seed", type=int)

    p = sub.add_parser("mask", help="geomask a split")
    _common(p, split="test")
    p.add_argument("--method", help=f"{' | '.join(METHODS)} (alias rp)")
    p.add_argument("--radius-km", type=float)
    p.add_argument("--sigma-deg", type=float)
    p.add_argument("--temporal", action="store_const", const=True)
    p.add_argument("--window-h", type=int)

    p = sub.add_parser("tul-train", help="train the trajectory-user linking classifier")
    _common(p, split="train")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--spatial-dim", type=int)
    p.add_argument("--units", type=int)

    p = sub.add_parser("evaluate", help="score candidate CSVs against the original split")
    _common(p, split="test")
    p.add_argument("--candidate", action="append", metavar="[NAME=]CSV")
    p.add_argument("--tul", help="TUL model from `tul-train`; trained on the fly if absent")
    p.add_argument("--tul-epochs", type=int)
    p.add_argument("--tul-lr", type=float)

    p = sub.add_parser("report", help="tables and data series from evaluation reports")
    _common(p, data=False, seed=False)
    p.add_argument("--reports", action="append", metavar="JSON")
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help/--version, 2 for usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    started = time.perf_counter()
    try:
        cfg = resolve(args)
        with thread_limit():
            summary, seeds, inputs, outputs, out = COMMANDS[args.command](args, cfg)
        if out is not None:
            write_manifest(out, args.command, cfg, seeds, inputs, outputs, summary, started, argv)
    except UsageError as exc:
        print(f"trajshield {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, container.ContainerError, VocabularyMismatch, PairingError,
            UnknownUserError, ValueError, OSError) as exc:
        print(f"trajshield {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
