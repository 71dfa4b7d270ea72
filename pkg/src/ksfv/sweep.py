"""Run classification and deterministic parameter sweeps.

Sweep points are expanded to full configurations, executed concurrently up to
max_parallel, and merged by run id after a deterministic sort, so the output
is independent of the degree of parallelism.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .config import run_config_from
from .errors import ConfigError
from .output import fmt
from .solver import RunResult, Termination, run

GLOBAL = "Global"
BLOWUP = "BlowUp"
INCONCLUSIVE = "Inconclusive"

_AXIS_KEY = {
    "alpha": "params.alpha",
    "beta": "params.beta",
    "kappa": "params.kappa",
    "eps": "params.eps",
    "mass": "init.mass",
}


def classify_run(
    result: RunResult, global_factor: float = 10.0, blowup_factor: float = 1e3
) -> str:
    """Sort a finished run into Global / BlowUp / Inconclusive.

    Global: completed, max_u grew less than global_factor, and the max_u trend
    over the final quarter of the run is non-increasing. BlowUp: the cap was
    crossed, or dt underflowed while max_u had grown at least blowup_factor.
    Everything else is inconclusive.
    """
    rows = result.rows
    m0 = max(rows[0].max_u, 1e-300)
    m_end = rows[-1].max_u
    tag = result.termination.tag
    if tag == Termination.BLOWUP:
        return BLOWUP
    if tag == Termination.DT_UNDERFLOW and m_end >= blowup_factor * m0:
        return BLOWUP
    if tag == Termination.COMPLETED and m_end <= global_factor * m0:
        if _trend_nonincreasing(rows):
            return GLOBAL
    return INCONCLUSIVE


def _trend_nonincreasing(rows, rel_drift: float = 1e-6) -> bool:
    t_final = rows[-1].t
    tail = [r for r in rows if r.t >= 0.75 * t_final]
    if len(tail) < 2:
        return True
    ts = np.array([r.t for r in tail])
    ms = np.array([r.max_u for r in tail])
    span = ts[-1] - ts[0]
    if span <= 0.0:
        return True
    A = np.vstack([np.ones(len(ts)), ts]).T
    coef, *_ = np.linalg.lstsq(A, ms, rcond=None)
    drift = coef[1] * span
    return drift <= rel_drift * max(abs(ms[-1]), 1e-300)


@dataclass
class SweepSpec:
    """Axes over {alpha, beta, kappa, eps, mass} applied to a base configuration."""

    axes: List[Tuple[str, List[float]]]
    base: Dict[str, str]
    max_parallel: int = 1
    global_factor: float = 10.0
    blowup_factor: float = 1e3

    def __post_init__(self):
        if not self.axes:
            raise ConfigError("a sweep needs at least one axis")
        for name, values in self.axes:
            if name not in _AXIS_KEY:
                raise ConfigError(
                    f"axis {name!r} not supported (use {sorted(_AXIS_KEY)})"
                )
            if not values:
                raise ConfigError(f"axis {name!r} has no values")
        if self.max_parallel < 1:
            raise ConfigError("max_parallel must be >= 1")

    @property
    def total_runs(self) -> int:
        n = 1
        for _, values in self.axes:
            n *= len(values)
        return n


@dataclass
class SweepRow:
    run_id: int
    point: Dict[str, float]
    classification: str
    termination: str
    t_final: float
    max_u_initial: float
    max_u_final: float
    F_final: float
    result: RunResult = field(repr=False, default=None)


def _run_point(spec: SweepSpec, run_id: int, point: Dict[str, float]) -> SweepRow:
    mapping = dict(spec.base)
    for name, value in point.items():
        mapping[_AXIS_KEY[name]] = fmt(value)
    cfg, _, _ = run_config_from(mapping)
    result = run(cfg)
    rows = result.rows
    return SweepRow(
        run_id,
        point,
        classify_run(result, spec.global_factor, spec.blowup_factor),
        result.termination.tag.value,
        result.termination.t_final,
        rows[0].max_u,
        rows[-1].max_u,
        rows[-1].F,
        result,
    )


def run_sweep(spec: SweepSpec) -> List[SweepRow]:
    """Execute every sweep point; results are ordered by run id regardless of parallelism."""
    names = [name for name, _ in spec.axes]
    points = [
        dict(zip(names, combo))
        for combo in itertools.product(*(values for _, values in spec.axes))
    ]
    if spec.max_parallel == 1:
        rows = [_run_point(spec, i, pt) for i, pt in enumerate(points)]
    else:
        with ThreadPoolExecutor(max_workers=spec.max_parallel) as pool:
            futures = [
                pool.submit(_run_point, spec, i, pt) for i, pt in enumerate(points)
            ]
            rows = [f.result() for f in futures]
    rows.sort(key=lambda r: r.run_id)
    return rows


def sweep_csv(spec: SweepSpec, rows: Sequence[SweepRow]) -> str:
    names = [name for name, _ in spec.axes]
    header = ",".join(
        ["run_id"]
        + names
        + [
            "classification",
            "termination",
            "t_final",
            "max_u_initial",
            "max_u_final",
            "F_final",
        ]
    )
    lines = [header]
    for r in rows:
        lines.append(
            ",".join(
                [str(r.run_id)]
                + [fmt(r.point[name]) for name in names]
                + [
                    r.classification,
                    r.termination,
                    fmt(r.t_final),
                    fmt(r.max_u_initial),
                    fmt(r.max_u_final),
                    fmt(r.F_final),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def sweep_heatmap(spec: SweepSpec, rows: Sequence[SweepRow]):
    """Classification heat map over the first two axes (None if only one axis)."""
    from .output import heatmap_svg

    if len(spec.axes) < 2:
        return None
    (xname, xvals), (yname, yvals) = spec.axes[0], spec.axes[1]
    labels = {}
    for r in rows:
        i = xvals.index(r.point[xname])
        j = yvals.index(r.point[yname])
        labels[(i, j)] = r.classification  # last write wins on collapsed axes
    return heatmap_svg(
        xvals, yvals, labels, "sweep classification", xname, yname
    )
