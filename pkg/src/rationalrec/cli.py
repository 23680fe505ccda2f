"""Command-line surface: automaton tools, equivalence checks and training.

Configuration is an INI-style file with one section per concern (see
``DEFAULT_CONFIG``); command-line flags and ``--set section.key=value``
overrides take precedence over the file.  Unknown sections or keys are
rejected.  Runs with an output directory persist a resolved-config snapshot
(``resolved.ini``) that reproduces the run when passed back via
``--config``, plus a ``metrics.csv`` with ``epoch,split,metric,value``
rows.  Exit codes: 0 success, 1 check failure, 2 usage error.

``RATIONALREC_THREADS`` caps the worker count; all built-in work is
sequential (one worker), so any positive value is accepted.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import cells, equiv, gradcheck, harness
from .construct import FAMILIES, WeightTables, build_isan
from .errors import ConfigError, RationalRecError
from .harness import TrainConfig, ingest, metrics_to_csv
from .semiring import from_name
from .wfsa import Wfsa

DEFAULT_CONFIG: dict[str, dict[str, str]] = {
    "run": {"seed": "0", "out": ""},
    "semiring": {"semiring": "real"},
    "cells": {
        "cell": "rrnn_f",
        "output_gate": "auto",  # auto | on | off
        "ngram": "2",
        "lam_mode": "input",
    },
    "harness": {
        "train": "",
        "dev": "",
        "test": "",
        "all": "",
        "layers": "1",
        "hidden": "64",
        "bptt_len": "35",
        "batch_size": "32",
        "optimizer": "sgd",
        "lr": "1.0",
        "l2": "0.0",
        "clip": "5.0",
        "dropout_vertical": "0.0",
        "dropout_recurrent": "0.0",
        "dropout_embedding": "0.0",
        "epochs": "10",
        "patience": "30",
        "lr_patience": "10",
        "num_seeds": "5",
        "mlp_hidden": "0",
        "trials": "20",
    },
}


def worker_cap() -> int:
    """Validated value of RATIONALREC_THREADS (default 1)."""
    raw = os.environ.get("RATIONALREC_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"RATIONALREC_THREADS must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ConfigError(f"RATIONALREC_THREADS must be >= 1, got {cap}")
    return cap


# ----------------------------------------------------------------------
# configuration plumbing
# ----------------------------------------------------------------------

def load_config(path: str | None, overrides: list[str],
                flag_overrides: dict[str, str]) -> dict[str, dict[str, str]]:
    cfg = {section: dict(values) for section, values in DEFAULT_CONFIG.items()}
    if path:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file {path!r} not found")
        for section in parser.sections():
            if section not in cfg:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in cfg[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                cfg[section][key] = value
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in cfg or key not in cfg[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        cfg[section][key] = value
    for dotted, value in flag_overrides.items():
        if value is None:
            continue
        section, key = dotted.split(".", 1)
        cfg[section][key] = str(value)
    return cfg


def write_snapshot(cfg: dict[str, dict[str, str]], out_dir: Path) -> Path:
    parser = configparser.ConfigParser()
    for section in sorted(cfg):
        parser[section] = {k: cfg[section][k] for k in sorted(cfg[section])}
    out_dir.mkdir(parents=True, exist_ok=True)
    snap = out_dir / "resolved.ini"
    with snap.open("w", encoding="utf-8") as fh:
        parser.write(fh)
    return snap


def _parse_bool_auto(value: str) -> bool | None:
    value = value.lower()
    if value == "auto":
        return None
    if value in ("on", "true", "1", "yes"):
        return True
    if value in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"expected auto/on/off, got {value!r}")


def train_config_from(cfg: dict[str, dict[str, str]]) -> TrainConfig:
    h = cfg["harness"]
    c = cfg["cells"]
    try:
        tc = TrainConfig(
            cell=c["cell"],
            layers=int(h["layers"]),
            hidden=int(h["hidden"]),
            bptt_len=int(h["bptt_len"]),
            batch_size=int(h["batch_size"]),
            optimizer=h["optimizer"],
            lr=float(h["lr"]),
            l2=float(h["l2"]),
            clip=float(h["clip"]),
            dropout_vertical=float(h["dropout_vertical"]),
            dropout_recurrent=float(h["dropout_recurrent"]),
            dropout_embedding=float(h["dropout_embedding"]),
            epochs=int(h["epochs"]),
            patience=int(h["patience"]),
            lr_patience=int(h["lr_patience"]),
            seed=int(cfg["run"]["seed"]),
            output_gate=_parse_bool_auto(c["output_gate"]),
            num_seeds=int(h["num_seeds"]),
            ngram=int(c["ngram"]),
            lam_mode=c["lam_mode"],
        )
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return tc.validate()


def _data_files(cfg: dict[str, dict[str, str]]) -> dict[str, str]:
    h = cfg["harness"]
    if h["all"]:
        return {"all": h["all"]}
    files = {split: h[split] for split in ("train", "dev", "test") if h[split]}
    if "train" not in files:
        raise ConfigError("no training data: set harness.train or harness.all")
    return files


def _finish_run(cfg: dict[str, dict[str, str]], metrics: list[tuple]) -> None:
    out = cfg["run"]["out"]
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.csv").write_text(metrics_to_csv(metrics), encoding="utf-8")
        write_snapshot(cfg, out_dir)


# ----------------------------------------------------------------------
# symbol parsing for the score subcommand
# ----------------------------------------------------------------------

def parse_symbols(text: str) -> list[int]:
    """Whitespace-separated symbols: decimal ids or single letters
    (``a`` = 0, ``b`` = 1, ...)."""
    out = []
    for tok in text.split():
        if len(tok) == 1 and tok.isalpha() and tok.islower():
            out.append(ord(tok) - ord("a"))
        else:
            try:
                out.append(int(tok))
            except ValueError:
                raise ConfigError(f"cannot parse input symbol {tok!r}") from None
    return out


# ----------------------------------------------------------------------
# handlers
# ----------------------------------------------------------------------

def _load_automaton(path: str) -> Wfsa:
    return Wfsa.from_text(Path(path).read_text(encoding="utf-8"))


def _cmd_wfsa_score(args) -> int:
    a = _load_automaton(args.automaton)
    score = a.forward(parse_symbols(args.input))
    print(f"{score:g}")
    return 0


def _cmd_wfsa_check(args) -> int:
    _load_automaton(args.automaton)  # from_text validates
    print("OK")
    return 0


def _cmd_wfsa_dot(args) -> int:
    dot = _load_automaton(args.automaton).to_dot()
    if args.out:
        Path(args.out).write_text(dot, encoding="utf-8")
    else:
        print(dot, end="")
    return 0


def _cmd_construct(args) -> int:
    tables = WeightTables.from_json_dict(json.loads(Path(args.tables).read_text(encoding="utf-8")))
    semiring = from_name(args.semiring)
    if args.family == "isan":
        automaton = build_isan(tables, semiring, output_dim=args.output_dim)
    else:
        automaton = FAMILIES[args.family](tables, semiring)
    text = automaton.to_text()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def _cmd_equiv(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst = None
    for trial in range(args.trials):
        params = cells.init_cell_params(args.cell, hidden=args.hidden,
                                        vocab_size=args.vocab, rng=rng,
                                        ngram=args.ngram)
        report = equiv.check_equivalence(args.cell, params, tol=args.tol, rng=rng,
                                         num_strings=args.strings, max_len=args.max_len)
        if worst is None or report.max_abs_diff > worst.max_abs_diff:
            worst = report
    worst = replace(worst, num_strings=args.trials * worst.num_strings)
    print(f"trials         : {args.trials}")
    print(worst.format())
    return 0 if worst.passed else 1


def _cmd_train_lm(args, cfg: dict[str, dict[str, str]]) -> int:
    tc = train_config_from(cfg)
    _, corpus = ingest(_data_files(cfg), mode="lm")
    model, metrics = harness.train_lm(tc, corpus)
    _finish_run(cfg, metrics)
    for epoch, split, metric, value in metrics:
        print(f"epoch {epoch:3d} {split:5s} {metric} {value:.4f}")
    return 0


def _cmd_train_classify(args, cfg: dict[str, dict[str, str]]) -> int:
    tc = train_config_from(cfg)
    _, corpus = ingest(_data_files(cfg), mode="classify")
    report, metrics = harness.train_classifier(tc, corpus)
    _finish_run(cfg, metrics)
    accs = " ".join(f"{a:.4f}" for a in report.test_accuracies)
    print(f"test accuracy per seed: {accs}")
    print(f"test accuracy mean {report.mean_test_accuracy:.4f} "
          f"+/- {report.std_test_accuracy:.4f}")
    return 0


def _cmd_search(args, cfg: dict[str, dict[str, str]]) -> int:
    tc = train_config_from(cfg)
    trials = args.trials if args.trials is not None else int(cfg["harness"]["trials"])
    mode = "classify" if args.task == "classify" else "lm"
    _, corpus = ingest(_data_files(cfg), mode=mode)
    best, results = harness.random_search(tc, corpus, trials)
    rows = [(k, "search", "dev_score", score) for k, (_, score) in enumerate(results)]
    _finish_run(cfg, rows)
    for k, (trial_cfg, score) in enumerate(results):
        print(f"trial {k}: hidden={trial_cfg.hidden} lr={trial_cfg.lr:.2e} "
              f"l2={trial_cfg.l2:.2e} clip={trial_cfg.clip:.2f} score={score:.4f}")
    print(f"best: hidden={best.hidden} lr={best.lr:.6g} l2={best.l2:.6g} "
          f"clip={best.clip:.4g} dropout=({best.dropout_vertical:.3f},"
          f"{best.dropout_recurrent:.3f},{best.dropout_embedding:.3f})")
    return 0


def _cmd_gradcheck(args) -> int:
    results = gradcheck.run_all(seed=args.seed, tol=args.tol)
    ok = True
    for r in results:
        print(r.format())
        ok = ok and r.passed
    return 0 if ok else 1


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rationalrec",
        description="Semiring-generic weighted automata and their recurrent cells.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_wfsa = sub.add_parser("wfsa", help="score, check or render automata")
    wfsa_sub = p_wfsa.add_subparsers(dest="wfsa_command", required=True)
    p_score = wfsa_sub.add_parser("score", help="score an input string")
    p_score.add_argument("--automaton", required=True)
    p_score.add_argument("--input", required=True,
                         help="whitespace-separated symbol ids or letters (a=0)")
    p_score.set_defaults(handler=_cmd_wfsa_score)
    p_check = wfsa_sub.add_parser("check", help="validate an automaton file")
    p_check.add_argument("--automaton", required=True)
    p_check.set_defaults(handler=_cmd_wfsa_check)
    p_dot = wfsa_sub.add_parser("dot", help="render to GraphViz DOT")
    p_dot.add_argument("--automaton", required=True)
    p_dot.add_argument("--out", default=None)
    p_dot.set_defaults(handler=_cmd_wfsa_dot)

    p_construct = sub.add_parser("construct", help="build a named automaton family")
    p_construct.add_argument("--family", required=True, choices=sorted(FAMILIES))
    p_construct.add_argument("--tables", required=True, help="JSON weight tables")
    p_construct.add_argument("--semiring", default="real", choices=["real", "maxplus"])
    p_construct.add_argument("--output-dim", type=int, default=0,
                             help="output dimension (isan only)")
    p_construct.add_argument("--out", default=None)
    p_construct.set_defaults(handler=_cmd_construct)

    p_equiv = sub.add_parser("equiv", help="cell-vs-automaton equivalence check")
    p_equiv.add_argument("--cell", required=True, choices=sorted(cells.CELL_KINDS))
    p_equiv.add_argument("--seed", type=int, default=0)
    p_equiv.add_argument("--trials", type=int, default=10)
    p_equiv.add_argument("--tol", type=float, default=None)
    p_equiv.add_argument("--hidden", type=int, default=4)
    p_equiv.add_argument("--vocab", type=int, default=8)
    p_equiv.add_argument("--strings", type=int, default=20)
    p_equiv.add_argument("--max-len", type=int, default=10)
    p_equiv.add_argument("--ngram", type=int, default=2)
    p_equiv.set_defaults(handler=_cmd_equiv)

    for name, fn in (("train-lm", _cmd_train_lm), ("train-classify", _cmd_train_classify),
                     ("search", _cmd_search)):
        p = sub.add_parser(name, help=f"run {name.replace('-', ' ')}")
        p.add_argument("--config", default=None)
        p.add_argument("--set", action="append", default=[], dest="overrides",
                       metavar="SECTION.KEY=VALUE")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--cell", default=None, choices=sorted(cells.CELL_KINDS))
        p.add_argument("--semiring", default=None, choices=["real", "maxplus"])
        if name == "search":
            p.add_argument("--trials", type=int, default=None)
            p.add_argument("--task", default="classify", choices=["classify", "lm"])
        p.set_defaults(handler=fn, needs_config=True)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--tol", type=float, default=gradcheck.DEFAULT_TOL)
    p_grad.set_defaults(handler=_cmd_gradcheck)

    return parser


def run(argv=None) -> int:
    """Entry point returning the process exit code (0 ok, 1 failed check,
    2 usage error)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        worker_cap()
        if getattr(args, "needs_config", False):
            flag_overrides = {
                "run.seed": args.seed,
                "run.out": args.out,
                "cells.cell": args.cell,
                "semiring.semiring": args.semiring,
            }
            cfg = load_config(args.config, args.overrides, flag_overrides)
            return args.handler(args, cfg)
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RationalRecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
