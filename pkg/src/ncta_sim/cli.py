"""Command-line front end.

Configuration errors exit with status 1; I/O and runtime failures exit with 2.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Sequence

from .errors import ModelViolation, PreconditionError
from .export import csv_line, emit_csv, emit_plot_data, fmt, CSV_HEADER
from .harness import SimConfig, SweepRow, make_grid, sweep
from .oracle import CrpInstance, enumerate_crp, verify_against_sim
from .protocols import Algo, SplitPolicy
from .traffic import SystemType

EXIT_CONFIG = 1
EXIT_RUNTIME = 2

DEFAULTS = {
    "type": "2",
    "users": "8",
    "lambda": "1",
    "slots": "5000",
    "reps": "200",
    "seed": "1",
    "split": "det",
    "warmup_frac": "0.1",
    "jobs": "1",
    "trials": "10000",
}


class ConfigError(Exception):
    def __init__(self, problems: Sequence[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass
class CliInvocation:
    subcommand: str
    algos: list[Algo] = field(default_factory=list)
    system_types: list[SystemType] = field(default_factory=list)
    users: list[int] = field(default_factory=list)
    lambdas: list[float] = field(default_factory=list)
    slots: int = 5000
    reps: int = 200
    seed: int = 1
    split: SplitPolicy = SplitPolicy.DETERMINISTIC_HALVES
    warmup_frac: float = 0.1
    jobs: int = 1
    out: Path | None = None
    plot_dir: Path | None = None
    active: list[int] = field(default_factory=list)
    trials: int = 10000

    def grid(self) -> list[SimConfig]:
        return make_grid(self.algos, self.system_types, self.users, self.lambdas, horizon=self.slots,
                         reps=self.reps, seed=self.seed, split=self.split, warmup_frac=self.warmup_frac)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="file of 'key = value' lines; flags win")
    common.add_argument("--type", help="system type: 1, 2 or 1,2")
    common.add_argument("--users", help="user count m (comma list allowed for sweeps)")
    common.add_argument("--lambda", dest="lambda_", metavar="LAMBDA",
                        help="total arrival rate; accepts a comma list or an inclusive min:max:step range")
    common.add_argument("--slots", help="slots per replication")
    common.add_argument("--reps", help="replications per grid point")
    common.add_argument("--seed", help="master seed")
    common.add_argument("--split", help="det or rand")
    common.add_argument("--warmup-frac", dest="warmup_frac", help="leading fraction of slots left out of the metrics")
    common.add_argument("--jobs", help="worker processes")
    common.add_argument("--out", help="CSV output path")
    common.add_argument("--plot-dir", dest="plot_dir", help="directory for plot series and manifest")

    p = _Parser(prog="ncta-sim", description="Slotted multiple-access simulator: NCTA, BTA, modified ALOHA, TDM.")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, hlp in (("run", "simulate one algorithm"), ("sweep", "simulate a grid and write CSV/plot data"),
                      ("compare", "print algorithms side by side on paired traffic")):
        sp = sub.add_parser(name, parents=[common], help=hlp)
        sp.add_argument("--algo", help="one of ncta, bta, aloha, tdm")
        sp.add_argument("--algos", help="comma-separated algorithms")
    op = sub.add_parser("oracle", help="exact CRP length for one collision instance")
    op.add_argument("--config")
    op.add_argument("--protocol", help="ncta or bta")
    op.add_argument("--users")
    op.add_argument("--active", help="comma-separated active user ids")
    op.add_argument("--split")
    op.add_argument("--trials", help="simulated CRPs when cross-checking a random split")
    return p


def read_config_file(path: str) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config file {path}: {exc.strerror}"]) from exc
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([f"{path}:{n}: expected 'key = value'"])
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        values["lambda_" if key == "lambda" else key] = val
    return values


def parse_lambdas(text: str) -> list[float]:
    """Scalar, comma list, or ``min:max:step`` with both ends included, stepped in exact decimals."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("expected min:max:step")
        lo, hi, step = (Decimal(x) for x in parts)
        if step <= 0 or hi < lo:
            raise ValueError("need step > 0 and max >= min")
        out = []
        x = lo
        while x <= hi:
            out.append(float(x))
            x += step
        return out
    return [float(Decimal(x)) for x in text.split(",")]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",")]


def parse_invocation(argv: Sequence[str]) -> CliInvocation:
    """Turn argv into a validated invocation, or raise :class:`ConfigError` listing every problem."""
    ns = build_parser().parse_args(argv)
    raw = {k: v for k, v in vars(ns).items() if v is not None}
    if ns.config:
        for k, v in read_config_file(ns.config).items():
            raw.setdefault(k, v)
    for k, v in DEFAULTS.items():
        raw.setdefault(k if k != "lambda" else "lambda_", v)
    raw.setdefault("lambda_", "1")

    inv = CliInvocation(ns.subcommand)
    problems: list[str] = []

    def take(key: str, conv, check=None, msg=""):
        try:
            val = conv(raw[key])
        except (ValueError, InvalidOperation, KeyError):
            problems.append(f"--{key.rstrip('_').replace('_', '-')}: cannot parse {raw.get(key)!r}")
            return None
        if check is not None and not check(val):
            problems.append(f"--{key.rstrip('_').replace('_', '-')}: {msg} (got {raw[key]})")
            return None
        return val

    known = set(vars(ns)) | {"lambda_"}
    for k in raw:
        if k not in known and k not in DEFAULTS:
            problems.append(f"config key {k!r} is not a known flag")

    inv.split = take("split", lambda s: SplitPolicy(s.strip()), msg="") or inv.split
    if inv.subcommand == "oracle":
        proto = take("protocol", lambda s: Algo(s.strip()), lambda a: a in (Algo.NCTA, Algo.BTA),
                     "must be ncta or bta")
        inv.algos = [proto] if proto else []
        users = take("users", int, lambda v: v >= 1, "must be >= 1")
        inv.users = [users] if users else []
        active = take("active", lambda s: _int_list(s) if s.strip() else [])
        if active is not None:
            if users and not all(0 <= u < users for u in active):
                problems.append(f"--active: ids must lie in [0, {users})")
            elif len(set(active)) != len(active):
                problems.append("--active: duplicate user id")
            inv.active = sorted(active)
        inv.trials = take("trials", int, lambda v: v >= 2, "must be >= 2") or inv.trials
        if problems:
            raise ConfigError(problems)
        return inv

    if "algo" in raw and "algos" in raw:
        problems.append("--algo and --algos are mutually exclusive")
    algos_raw = raw.get("algos", raw.get("algo", "ncta"))
    try:
        algos = [Algo(a.strip()) for a in algos_raw.split(",")]
        if len(set(algos)) != len(algos):
            problems.append(f"--algos: repeated algorithm in {algos_raw!r}")
        elif inv.subcommand == "run" and len(algos) != 1:
            problems.append("run takes exactly one algorithm")
        inv.algos = algos
    except ValueError:
        problems.append(f"--algos: unknown algorithm in {algos_raw!r} (choose from ncta, bta, aloha, tdm)")

    types = take("type", _int_list, lambda v: all(t in (1, 2) for t in v), "must be 1, 2 or 1,2")
    inv.system_types = [SystemType(t) for t in types] if types else []
    users = take("users", _int_list, lambda v: all(u >= 1 for u in v), "must be >= 1")
    inv.users = users or []
    lams = take("lambda_", parse_lambdas, lambda v: all(x >= 0 for x in v), "must be >= 0")
    inv.lambdas = lams or []
    inv.slots = take("slots", int, lambda v: v >= 1, "must be >= 1") or inv.slots
    inv.reps = take("reps", int, lambda v: v >= 1, "must be >= 1") or inv.reps
    seed = take("seed", int, lambda v: v >= 0, "must be >= 0")
    inv.seed = seed if seed is not None else inv.seed
    wf = take("warmup_frac", float, lambda v: 0 <= v < 1, "must be in [0, 1)")
    inv.warmup_frac = wf if wf is not None else inv.warmup_frac
    inv.jobs = take("jobs", int, lambda v: v >= 1, "must be >= 1") or inv.jobs
    if inv.subcommand == "run" and (len(inv.system_types) > 1 or len(inv.users) > 1 or len(inv.lambdas) > 1):
        problems.append("run takes a single --type, --users and --lambda")
    inv.out = Path(raw["out"]) if "out" in raw else None
    inv.plot_dir = Path(raw["plot_dir"]) if "plot_dir" in raw else None
    if problems:
        raise ConfigError(problems)
    return inv


def _print_rows(rows: Sequence[SweepRow], out) -> None:
    print(f"{'algo':6} {'type':>4} {'m':>3} {'lambda':>7} {'throughput':>11} {'ci':>8} {'delay':>9} {'ci':>8}", file=out)
    for r in rows:
        c = r.cfg
        print(f"{c.algo.value:6} {c.system_type.value:>4} {c.m:>3} {fmt(c.lambda_total):>7} "
              f"{fmt(r.throughput):>11} {fmt(r.ci_throughput):>8} {fmt(r.mean_delay) or '-':>9} "
              f"{fmt(r.ci_delay):>8}", file=out)


def _compare_table(rows: Sequence[SweepRow], out) -> None:
    by_key: dict[tuple, dict[Algo, SweepRow]] = {}
    algos: list[Algo] = []
    for r in rows:
        by_key.setdefault((r.cfg.system_type.value, r.cfg.m, r.cfg.lambda_total), {})[r.cfg.algo] = r
        if r.cfg.algo not in algos:
            algos.append(r.cfg.algo)
    head = "type   m  lambda " + " ".join(f"{a.value + ':thr':>10} {a.value + ':D':>9}" for a in algos)
    print(head, file=out)
    for (st, m, lam), cells in sorted(by_key.items()):
        vals = " ".join(f"{fmt(cells[a].throughput):>10} {fmt(cells[a].mean_delay) or '-':>9}" for a in algos)
        print(f"{st:>4} {m:>3} {fmt(lam):>7} {vals}", file=out)


def _run_oracle(inv: CliInvocation, out) -> None:
    inst = CrpInstance(inv.users[0], frozenset(inv.active), inv.algos[0], inv.split)
    res = enumerate_crp(inst)
    if inv.split is SplitPolicy.DETERMINISTIC_HALVES:
        print(f"slots={res.slots} deliveries={res.deliveries}", file=out)
        print("trace=" + " ".join("[" + ",".join(map(str, s)) + "]" for s in res.trace), file=out)
    else:
        print(f"slots={float(res.slots):.6g} deliveries={float(res.deliveries):.6g} "
              f"(exact {res.slots} / {res.deliveries})", file=out)
    print(verify_against_sim(inst, inv.trials), file=out)


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        inv = parse_invocation(argv)
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if inv.subcommand == "oracle":
            _run_oracle(inv, sys.stdout)
            return 0
        if inv.out is not None and not inv.out.parent.is_dir():
            raise FileNotFoundError(f"output directory {inv.out.parent} does not exist")
        rows = sweep(inv.grid(), jobs=inv.jobs)
        if inv.subcommand == "compare":
            _compare_table(rows, sys.stdout)
        elif inv.out is None and inv.subcommand == "sweep":
            print(CSV_HEADER)
            for r in rows:
                print(csv_line(r))
        else:
            _print_rows(rows, sys.stdout)
        if inv.out is not None:
            emit_csv(rows, inv.out)
        if inv.plot_dir is not None:
            emit_plot_data(rows, inv.plot_dir)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ModelViolation, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
