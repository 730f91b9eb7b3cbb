"""CSV and plot-series writers for sweep results."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from .harness import SweepRow
from .protocols import Algo
from .traffic import SystemType

CSV_HEADER = ("algo,system_type,m,lambda,split,seed,reps,horizon,arrivals,delivered,dropped,"
              "throughput,ci_throughput,mean_delay,ci_delay")


def fmt(x: float) -> str:
    """Six significant digits; NaN becomes an empty field."""
    if math.isnan(x):
        return ""
    return f"{x:.6g}"


def csv_line(row: SweepRow) -> str:
    c = row.cfg
    return ",".join([
        c.algo.value, str(c.system_type.value), str(c.m), fmt(c.lambda_total), c.split.value, str(c.seed),
        str(c.reps), str(c.horizon), str(row.arrivals), str(row.delivered), str(row.dropped),
        fmt(row.throughput), fmt(row.ci_throughput), fmt(row.mean_delay), fmt(row.ci_delay),
    ])


def emit_csv(rows: Sequence[SweepRow], path: str | Path) -> Path:
    if not rows:
        raise ValueError("nothing to write")
    path = Path(path)
    ordered = sorted(rows, key=lambda r: r.cfg.sort_key())
    with path.open("w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in ordered:
            fh.write(csv_line(row) + "\n")
    return path


# figure -> (system type, metric, which series belong)
_FIGURES = {
    "fig1": (SystemType.TYPE_I, "throughput", lambda a, m: a is not Algo.TDM and m == 8),
    "fig2": (SystemType.TYPE_I, "delay", lambda a, m: a is not Algo.TDM and m == 8),
    "fig3": (SystemType.TYPE_II, "throughput", lambda a, m: a is not Algo.TDM and m == 8),
    "fig4": (SystemType.TYPE_II, "delay", lambda a, m: a is not Algo.TDM and m == 8),
    "fig5": (SystemType.TYPE_II, "throughput", lambda a, m: a is Algo.NCTA),
    "fig6": (SystemType.TYPE_II, "delay", lambda a, m: a is Algo.NCTA),
}


def emit_plot_data(rows: Sequence[SweepRow], out_dir: str | Path) -> list[Path]:
    """Write one ``lambda value ci`` series per (algo, system type, m, metric) plus ``manifest.tsv``.

    The manifest maps each series to the figure(s) it belongs to so the
    throughput/delay panels can be reassembled by any plotting tool.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple, list[SweepRow]] = defaultdict(list)
    for row in sorted(rows, key=lambda r: r.cfg.sort_key()):
        groups[(row.cfg.algo, row.cfg.system_type, row.cfg.m)].append(row)

    written = []
    manifest = ["figure\tmetric\talgo\tsystem_type\tm\tfile"]
    for (algo, st, m), series in sorted(groups.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value, kv[0][2])):
        for metric in ("throughput", "delay"):
            name = f"{algo.value}_type{st.value}_m{m}_{metric}.dat"
            lines = [f"# {algo.value} system_type={st.value} m={m} {metric}", "# lambda value ci"]
            for r in series:
                val, ci = (r.throughput, r.ci_throughput) if metric == "throughput" else (r.mean_delay, r.ci_delay)
                lines.append(f"{fmt(r.cfg.lambda_total)} {fmt(val) or 'nan'} {fmt(ci) or 'nan'}")
            path = out / name
            path.write_text("\n".join(lines) + "\n")
            written.append(path)
            figs = [f for f, (fst, fmetric, pick) in _FIGURES.items() if fst is st and fmetric == metric and pick(algo, m)]
            for fig in figs or ["-"]:
                manifest.append(f"{fig}\t{metric}\t{algo.value}\t{st.value}\t{m}\t{name}")
    mpath = out / "manifest.tsv"
    mpath.write_text("\n".join(manifest) + "\n")
    written.append(mpath)
    return written
