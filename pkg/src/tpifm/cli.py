"""Command-line entry point: ``tpifm <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 fit did not converge.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import fitting, model, sim, trace
from .errors import ConfigError, InputError, TpifmError, UnsupportedTaskError
from .evaluate import evaluate, format_report, read_conditions_csv
from .params import DELAY_PARAMS, FITTED_TASKS, TASKS, TaskProfile
from .stats import read_ratings_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOCONV = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _record(d: dict) -> str:
    """One JSON object with floats fixed at 4 decimals."""
    parts = []
    for k, v in d.items():
        if isinstance(v, float):
            val = f"{v:.4f}"
        else:
            val = json.dumps(v)
        parts.append(f"{json.dumps(k)}: {val}")
    return "{" + ", ".join(parts) + "}"


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


# -- predict ------------------------------------------------------------------------

def cmd_predict(a) -> int:
    mode = a.mode.replace("-", "_") if a.mode else None
    if a.jnd is not None and mode == "per_task":
        raise UsageError("--jnd cannot be combined with --mode per-task")
    if a.model == "tpifm" and a.task is None and a.jnd is None:
        raise UsageError("tpifm needs --task or --jnd")
    if mode is None:
        mode = "per_task" if a.task is not None and a.task.upper() in DELAY_PARAMS \
            else "generalized"
    if a.stall_count and a.interaction_ms is None:
        raise UsageError("--stall-count needs --interaction-ms")
    prof = None
    if a.task is not None:
        if a.task.upper() not in TASKS:
            raise UsageError(f"unknown task {a.task!r}; use --jnd for custom tasks")
        prof = TASKS[a.task.upper()]
    elif a.jnd is not None:
        prof = TaskProfile("custom", a.jnd)
    try:
        cond = model.ImpairmentCondition(
            a.delay_ms, a.stall_count, a.stall_avg_ms,
            a.interaction_ms if a.interaction_ms is not None else 9000.0,
        )
    except InputError as exc:
        raise UsageError(str(exc)) from None
    out = model.predict(a.model, cond, prof, mode)
    rec = {"model": a.model}
    if a.model == "tpifm":
        rec["task"] = prof.name
        rec["mode"] = mode
    rec.update(qd=out["qd"], qs=out["qs"], rs=out["rs"], score=out["score"])
    print(_record(rec))
    return EXIT_OK


# -- simulate / analyze --------------------------------------------------------------

def cmd_simulate(a) -> int:
    if a.config is not None:
        if a.table is not None or a.index is not None:
            raise UsageError("--config excludes --table/--index")
        cfg = sim.load_config(_read(a.config))
        if a.task is not None:
            raise UsageError("--task only applies to --table")
    else:
        if a.table is None or a.index is None or a.task is None:
            raise UsageError("give --config, or --table with --index and --task")
        table = "delay_levels" if a.table == "delay" else a.table
        cfgs = sim.builtin_scenarios(table, a.task)
        if not 1 <= a.index <= len(cfgs):
            raise UsageError(f"--index must be 1..{len(cfgs)} for table {a.table}")
        cfg = cfgs[a.index - 1]
    if a.seed is not None:
        cfg = sim.with_seed(cfg, a.seed)
    tr = sim.simulate_session(cfg)
    trace.write_trace(tr, a.out)
    art = trace.estimate_art(trace.extract_cycles(tr))
    m = trace.measure_stall_ratio(tr)
    print(_record({"scenario": cfg.scenario, "task": cfg.task.name, "seed": cfg.seed,
                   "delay_ms": cfg.network.e2e_delay_ms, "stalls": m.n_stalls,
                   "art_s": art.mean_s, "rs": m.rs}))
    return EXIT_OK


def cmd_analyze(a) -> int:
    tr = trace.read_trace(a.trace)
    cycles = trace.extract_cycles(tr)
    if a.jnd_mode:
        jnd = trace.estimate_jnd([tr])
        print(_record({"task": tr.metadata.task, "jnd_s": jnd}))
    art = trace.estimate_art(cycles)
    m = trace.measure_stall_ratio(tr)
    print(_record({"task": tr.metadata.task, "scenario": tr.metadata.scenario,
                   "art_mean_s": art.mean_s, "art_sd_s": art.sd_s, "n_cycles": art.n_cycles,
                   "t_s_ms": m.t_s_ms, "t_m_ms": m.t_m_ms, "rs": m.rs,
                   "n_stalls": m.n_stalls}))
    for actor, est in trace.art_by_actor(cycles).items():
        print(_record({"actor": actor, "art_mean_s": est.mean_s, "art_sd_s": est.sd_s,
                       "n_cycles": est.n_cycles}))
    return EXIT_OK


# -- fit -------------------------------------------------------------------------------

def cmd_fit(a) -> int:
    text = _read(a.data)
    if a.form == "weights":
        res = fitting.fit_combined_weights(fitting.read_weights_csv(text))
    elif a.form == "power":
        res = fitting.fit_power_law(fitting.read_xy_csv(text))
    else:
        res = fitting.fit_exp_decay(fitting.read_xy_csv(text))
    rec = res.to_json()
    if a.out:
        with open(a.out, "w", encoding="utf-8") as fh:
            fh.write(rec + "\n")
    print(rec)
    if not res.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK


# -- evaluate / curves ----------------------------------------------------------------

def cmd_evaluate(a) -> int:
    models = tuple(m.strip() for m in a.models.split(",") if m.strip())
    ratings = read_ratings_csv(_read(a.ratings))
    conds = read_conditions_csv(_read(a.conditions))
    sys.stdout.write(format_report(evaluate(ratings, conds, models)))
    return EXIT_OK


def curve_rows(figure: int, tasks) -> list[tuple[str, float, float]]:
    rows = []
    if figure == 5:
        x = np.arange(0, 3001, 10, dtype=np.float64)
    else:
        x = np.round(np.arange(0, 121) * 0.005, 10)
    for name in tasks:
        prof = TASKS[name]
        if name in DELAY_PARAMS:
            dp, sp = model.resolve_params(prof, "per_task")
        else:
            dp, sp = model.resolve_params(prof, "generalized")
        y = model.q_delay_batch(x, dp) if figure == 5 else model.q_stall_batch(x, sp)
        rows.extend((name, float(xi), float(yi)) for xi, yi in zip(x, y))
    return rows


def cmd_curves(a) -> int:
    if a.task.lower() == "all":
        tasks = FITTED_TASKS
    elif a.task.upper() in TASKS:
        tasks = (a.task.upper(),)
    else:
        raise UsageError(f"unknown task {a.task!r}")
    lines = ["task,x,predicted"]
    lines += [f"{t},{x:.4f},{y:.4f}" for t, x, y in curve_rows(a.figure, tasks)]
    text = "\n".join(lines) + "\n"
    if a.out:
        with open(a.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tpifm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("predict", help="score one impairment condition")
    who = s.add_mutually_exclusive_group()
    who.add_argument("--task")
    who.add_argument("--jnd", type=float, help="task JND in seconds")
    s.add_argument("--delay-ms", type=float, default=0.0)
    s.add_argument("--stall-count", type=int, default=0)
    s.add_argument("--stall-avg-ms", type=float, default=0.0)
    s.add_argument("--interaction-ms", type=float)
    s.add_argument("--mode", choices=("per-task", "generalized"))
    s.add_argument("--model", choices=model.MODELS, default="tpifm")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("simulate", help="simulate one session and write its trace")
    s.add_argument("--config")
    s.add_argument("--table", choices=("II", "III", "IV", "delay"))
    s.add_argument("--index", type=int, help="1-based row of the table")
    s.add_argument("--task")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("analyze", help="ART and stall ratio of a trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--jnd-mode", action="store_true")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("fit", help="least-squares fit of one model form")
    s.add_argument("--form", choices=("exp", "power", "weights"), required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("evaluate", help="metrics of each model against rating MOS")
    s.add_argument("--ratings", required=True)
    s.add_argument("--conditions", required=True)
    s.add_argument("--models", default=",".join(model.MODELS))
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("curves", help="dense delay or stall-ratio curves")
    s.add_argument("--figure", type=int, choices=(5, 6), required=True)
    s.add_argument("--task", default="all")
    s.add_argument("--out")
    s.set_defaults(func=cmd_curves)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tpifm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnsupportedTaskError, ConfigError) as exc:
        print(f"tpifm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE if args.command in ("predict", "simulate") else EXIT_DATA
    except TpifmError as exc:
        print(f"tpifm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
