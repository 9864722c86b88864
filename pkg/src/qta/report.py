"""Benchmark summaries, the results table and SVG tour plots."""
from __future__ import annotations

import hashlib
import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .instances import DistanceMode, Instance

SUMMARY_FIELDS = ("instance", "seed", "cost", "accesses", "hits", "solver", "status")
SUMMARY_MAGIC = "# qta-summary v1"


@dataclass(frozen=True)
class RunRecord:
    instance: str
    seed: int
    cost: float
    accesses: int
    hits: int
    solver: str = "qta"
    status: str = "ok"

    def to_line(self) -> str:
        cost = repr(float(self.cost))
        return "\t".join([self.instance, str(self.seed), cost, str(self.accesses), str(self.hits),
                          self.solver, self.status])

    @classmethod
    def from_line(cls, line: str) -> "RunRecord":
        f = line.rstrip("\n").split("\t")
        if len(f) != len(SUMMARY_FIELDS):
            raise ValueError(f"summary line has {len(f)} fields, expected {len(SUMMARY_FIELDS)}")
        return cls(f[0], int(f[1]), float(f[2]), int(f[3]), int(f[4]), f[5], f[6])


@dataclass(frozen=True)
class ReportRow:
    instance: str
    solver: str
    runs: int
    failures: int
    avg: float
    std: float
    best: float
    avg_accesses: float


def config_hash(config: dict) -> str:
    text = "\n".join(f"{k}={config[k]}" for k in sorted(config))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def write_summary(records: Sequence[RunRecord], config: dict) -> str:
    lines = [f"{SUMMARY_MAGIC} config={config_hash(config)}"]
    lines += [f"# {k}={config[k]}" for k in sorted(config)]
    lines.append("#" + "\t".join(SUMMARY_FIELDS))
    lines += [r.to_line() for r in records]
    return "\n".join(lines) + "\n"


def read_summary(text: str) -> list:
    return [RunRecord.from_line(line) for line in text.splitlines()
            if line.strip() and not line.startswith("#")]


def aggregate(records: Iterable[RunRecord]) -> list:
    groups = {}
    for r in records:
        groups.setdefault((r.instance, r.solver), []).append(r)
    rows = []
    for (inst, solver), rs in groups.items():
        ok = [r for r in rs if r.status == "ok"]
        costs = [r.cost for r in ok]
        if costs:
            rows.append(ReportRow(inst, solver, len(rs), len(rs) - len(ok), statistics.fmean(costs),
                                  statistics.pstdev(costs), min(costs),
                                  statistics.fmean(r.accesses for r in ok)))
        else:
            nan = math.nan
            rows.append(ReportRow(inst, solver, len(rs), len(rs), nan, nan, nan, nan))
    return rows


def _cell(x: float) -> str:
    return "-" if math.isnan(x) else f"{x:.1f}"


def render_table(records: Sequence[RunRecord]) -> str:
    """Plain-text table: one line per instance, a column block per solver."""
    rows = aggregate(records)
    solvers = list(dict.fromkeys(r.solver for r in rows))
    instances = list(dict.fromkeys(r.instance for r in rows))
    by_key = {(r.instance, r.solver): r for r in rows}
    head = f"{'Instance':<12}"
    sub = f"{'':<12}"
    for s in solvers:
        head += f" | {s:<42}"
        sub += f" | {'Avg':>10} {'Std':>8} {'Best':>10} {'AvAcc':>8}   "
    lines = [head.rstrip(), sub.rstrip(), "-" * len(sub.rstrip())]
    for inst in instances:
        line = f"{inst:<12}"
        for s in solvers:
            r = by_key.get((inst, s))
            if r is None:
                line += f" | {'':<42}"
                continue
            cells = f"{_cell(r.avg):>10} {_cell(r.std):>8} {_cell(r.best):>10} {_cell(r.avg_accesses):>8}"
            flag = f" !{r.failures}" if r.failures else "   "
            line += f" | {cells}{flag}"
        lines.append(line.rstrip())
    return "\n".join(lines) + "\n"


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def tour_svg(inst: Instance, tour: Sequence[int], labels: Optional[Sequence[int]] = None,
             size: int = 600, margin: int = 30) -> str:
    """Tour plot: one circle per city, one line per tour edge.

    Edges inside a cluster take the cluster colour; bridges between clusters
    are drawn black and dashed.
    """
    pts = [(float(x), float(y)) for x, y in inst.coords]
    if inst.distance_mode is DistanceMode.TSPLIB_GEO:
        pts = [(lon, lat) for lat, lon in pts]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    span = max(max(xs) - min(xs), max(ys) - min(ys)) or 1.0
    scale = (size - 2 * margin) / span

    def xy(c):
        return (margin + (pts[c][0] - min(xs)) * scale,
                size - margin - (pts[c][1] - min(ys)) * scale)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<title>{inst.name}</title>']
    n = len(tour)
    for k in range(n):
        a, b = tour[k], tour[(k + 1) % n]
        (x1, y1), (x2, y2) = xy(a), xy(b)
        if labels is not None and labels[a] == labels[b]:
            style = f'stroke="{_PALETTE[(labels[a] - 1) % len(_PALETTE)]}" stroke-width="2"'
        else:
            style = 'stroke="black" stroke-width="1.5" stroke-dasharray="5,3"'
        out.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" {style}/>')
    for c in range(inst.n_cities):
        x, y = xy(c)
        fill = _PALETTE[(labels[c] - 1) % len(_PALETTE)] if labels is not None else "white"
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{fill}" stroke="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
