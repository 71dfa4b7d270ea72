"""Time integration of the regularized system with blow-up detection.

The density u advances by explicit Euler on the conservative flux divergence
plus the growth term; the signal v advances by backward Euler on the screened
heat equation (I + dt(-Lap + 1)) v_new = v_old + dt*u_new, solved by a
tridiagonal factorization. Using u_new (not u_old) on the right keeps the
discrete v-mass law exact. The step size is CFL-limited by the diffusive,
advective, and reaction rates; the collapse of dt doubles as a blow-up signal
alongside the hard max-norm cap.

Positivity is a property of the scheme, not an enforcement: a negative cell
is treated as a numerical failure and terminates the run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg.lapack import dgtsv

from .core import (
    DomainSpec,
    Grid,
    ModelParams,
    State,
    linf,
    make_grid,
    validate_field,
)
from .discrete import grad_faces
from .energy import dissipation, lyapunov
from .errors import ConfigError, NumericsError, ScanAbortedError
from .nonlin import (
    Overrides,
    RatioSpec,
    build_table,
    effective_f,
    effective_phi,
    effective_psi,
)

_RATE_GUARD = 1e-30


class Termination(enum.Enum):
    COMPLETED = "Completed"
    BLOWUP = "BlowUp"
    DT_UNDERFLOW = "DtUnderflow"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class TerminationInfo:
    tag: Termination
    t_final: float
    blowup_estimate: Optional[float] = None


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    dt: float
    mass_u: float
    mass_v: float
    max_u: float
    min_u: float
    F: float
    dissipation_rhs: float
    identity_residual: float


@dataclass
class RunConfig:
    """Full description of one experiment."""

    domain: DomainSpec
    params: ModelParams
    u0: np.ndarray
    v0: np.ndarray
    t_end: float
    cfl: float = 0.4
    dt_max: Optional[float] = None  # defaults to t_end/64
    dt_min: float = 1e-12
    blowup_cap: float = 1e8
    diag_every: int = 1
    overrides: Optional[Overrides] = None
    table_tol: float = 1e-10

    def resolved_dt_max(self) -> float:
        return self.dt_max if self.dt_max is not None else self.t_end / 64.0

    def validate(self, grid: Grid) -> None:
        u0 = validate_field(self.u0, grid, "u0")
        v0 = validate_field(self.v0, grid, "v0")
        if np.min(u0) < 0.0 or np.min(v0) < 0.0:
            raise ConfigError("initial data must be nonnegative")
        if self.t_end <= 0.0:
            raise ConfigError("t_end must be positive")
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigError("cfl must lie in (0, 1]")
        if self.dt_min >= self.resolved_dt_max():
            raise ConfigError("dt_min must be below dt_max")
        if self.diag_every < 1:
            raise ConfigError("diag_every must be >= 1")


@dataclass
class RunResult:
    termination: TerminationInfo
    rows: List[DiagnosticsRow]
    final_state: State
    grid: Grid
    steps: int
    mass_law_residual_u: float  # max over steps, relative
    mass_law_residual_v: float
    min_u_seen: float
    min_v_seen: float
    v_w12_final: float  # (int v^2 + int |grad v|^2)^(1/2), monitoring only
    v_w12_max: float
    probe_states: List[State] = dc_field(default_factory=list)


class _Kernel:
    """Per-run precomputation: effective nonlinearities and grid rate factors."""

    def __init__(self, grid: Grid, p: ModelParams, ov: Optional[Overrides]):
        self.grid = grid
        self.p = p
        self.ov = ov
        self.phi = effective_phi(p, ov)
        self.psi = effective_psi(p, ov)
        self.f = effective_f(p, ov)
        self.phi_override = ov is not None and ov.phi is not None
        self.psi_override = ov is not None and ov.psi is not None
        self.f_override = ov is not None and ov.f is not None
        V = grid.cell_volume
        T = grid.trans
        self.h = grid.h
        self.V = V
        self.T = T
        self.diff_geom = float(np.max((T[:-1] + T[1:]) / V))  # = 2/h^2 on an interval
        self.adv_l = T[:-1] * grid.h / V  # A_j/V_i for the left face of each cell
        self.adv_r = T[1:] * grid.h / V
        self._lip_cache: Dict[Tuple[int, float], float] = {}

    def _lipschitz(self, fn: Callable, umax: float) -> float:
        """Sampled slope bound for an override nonlinearity on [0, bucket >= umax]."""
        bucket = 2.0 ** np.ceil(np.log2(max(umax, 1e-6)))
        key = (id(fn), float(bucket))
        hit = self._lip_cache.get(key)
        if hit is not None:
            return hit
        s = np.linspace(0.0, bucket, 64)
        vals = np.asarray(fn(s), dtype=float)
        lip = 0.0 if vals.shape == () else float(np.max(np.abs(np.diff(vals))) / (s[1] - s[0]))
        self._lip_cache[key] = lip
        return lip

    def rates(self, u: np.ndarray, v: np.ndarray) -> Tuple[float, float, float]:
        p = self.p
        umax = float(np.max(u))
        rate_diff = float(np.max(self.phi(u))) * self.diff_geom

        # donor-respecting drift rate: cell i loses mass across its left face
        # only when the drift there points left, across its right face only
        # when it points right; the positivity bound needs exactly those terms.
        dvf = np.zeros(len(v) + 1)
        dvf[1:-1] = np.diff(v) / self.h
        out_left = np.where(dvf[:-1] < 0.0, -dvf[:-1], 0.0)
        out_right = np.where(dvf[1:] > 0.0, dvf[1:], 0.0)
        geom_dv = self.adv_l * out_left + self.adv_r * out_right
        if self.psi_override:
            rate_adv = self._lipschitz(self.psi, umax) * float(np.max(geom_dv))
        else:
            slope = p.psi_c * p.beta * u ** (p.beta - 1.0)
            rate_adv = float(np.max(slope * geom_dv))

        if self.f_override:
            rate_react = self._lipschitz(self.f, umax)
        else:
            rate_react = (
                p.b * p.kappa * (umax + p.eps) ** (p.kappa - 1.0) if umax > 0.0 else 0.0
            )
        return rate_diff, rate_adv, rate_react

    def dt_bound(self, u: np.ndarray, v: np.ndarray, cfl: float) -> float:
        rate = max(self.rates(u, v))
        return cfl / (rate + _RATE_GUARD)

    def advance(self, u: np.ndarray, v: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        """One IMEX update (no validation; callers check finiteness/positivity)."""
        h = self.h
        du = np.diff(u) / h
        dv = np.diff(v) / h
        u_face = 0.5 * (u[1:] + u[:-1])
        donor = np.where(dv > 0.0, u[:-1], u[1:])
        flux_int = self.phi(u_face) * du - self.psi(donor) * dv  # interior faces only
        af = self.grid.face_area[1:-1] * flux_int
        divergence = (np.concatenate((af, (0.0,))) - np.concatenate(((0.0,), af))) / self.V
        u_new = u + dt * (divergence + self.f(u))
        v_new = _screened_solve(v + dt * u_new, dt, self.grid)
        return u_new, v_new


def _screened_solve(rhs: np.ndarray, dt: float, grid: Grid) -> np.ndarray:
    """Solve (I + dt(-Lap + 1)) v = rhs with Neumann boundaries (tridiagonal)."""
    V = grid.cell_volume
    T = grid.trans
    upper = -dt * T[1:] / V  # coupling of row i to i+1
    lower = -dt * T[:-1] / V  # coupling of row i to i-1
    diag = 1.0 + dt - upper - lower
    _, _, _, x, info = dgtsv(lower[1:], diag, upper[:-1], rhs, 1, 1, 1, 0)
    if info != 0:
        raise NumericsError(f"tridiagonal solve failed (info={info})")
    return x


def cfl_dt(
    state: State,
    grid: Grid,
    p: ModelParams,
    cfl: float,
    ov: Optional[Overrides] = None,
) -> float:
    """Stable explicit step: cfl / max(diffusive, advective, reaction rate).

    The per-cell rates use the actual face areas and cell volumes, so the
    diffusive bound equals cfl*h^2/(2*max phi) on an interval and is tighter
    near the origin of a radial grid. The drift rate is donor-respecting:
    each cell counts only the faces across which it donates mass, weighted by
    its own mobility slope, which is exactly what positivity of the upwind
    update requires. The reaction rate is the growth term's slope bound on
    [0, max u].
    """
    return _Kernel(grid, p, ov).dt_bound(state.u, state.v, cfl)


def step(
    state: State,
    dt: float,
    grid: Grid,
    p: ModelParams,
    ov: Optional[Overrides] = None,
) -> State:
    """One IMEX step: explicit u, implicit v. Raises NumericsError on non-finite values."""
    if dt <= 0.0:
        raise ConfigError("dt must be positive")
    u_new, v_new = _Kernel(grid, p, ov).advance(state.u, state.v, dt)
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
        raise NumericsError(f"non-finite state after step at t={state.t:g}")
    return State(u_new, v_new, state.t + dt)


def steady_signal(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Solve the steady signal equation (-Lap + 1) v = u (used for matched initial data)."""
    V = grid.cell_volume
    T = grid.trans
    upper = -T[1:] / V
    lower = -T[:-1] / V
    diag = 1.0 - upper - lower
    _, _, _, x, info = dgtsv(lower[1:], diag, upper[:-1], np.asarray(u, dtype=float), 1, 1, 1, 0)
    if info != 0:
        raise NumericsError(f"steady signal solve failed (info={info})")
    return x


def _v_w12(v: np.ndarray, grid: Grid) -> float:
    dv = grad_faces(v, grid)
    return float(
        np.sqrt(np.dot(v * v, grid.cell_volume) + np.dot(grid.face_weight, dv * dv))
    )


def run(cfg: RunConfig, probe_times: Optional[Sequence[float]] = None) -> RunResult:
    """March the configured system to t_end or to a termination event.

    Diagnostics are emitted every diag_every steps and at termination. When
    probe_times are given, the step size is clamped so the trajectory lands on
    each probe time exactly and the state there is recorded.
    """
    grid = make_grid(cfg.domain)
    cfg.validate(grid)
    p = cfg.params
    ov = cfg.overrides
    kern = _Kernel(grid, p, ov)
    dt_max = cfg.resolved_dt_max()
    V = grid.cell_volume

    u = np.asarray(cfg.u0, dtype=float).copy()
    v = np.asarray(cfg.v0, dtype=float).copy()
    t = 0.0
    m0 = linf(u)
    s_hi = 10.0 * max(1.0, 2.0 * p.s0, float(np.max(u)))
    table = build_table(
        p, ov.ratio_spec if ov is not None else RatioSpec.model(), s_max=s_hi, tol=cfg.table_tol
    )

    probes: List[float] = (
        sorted(float(x) for x in probe_times) if probe_times is not None else []
    )
    probe_states: List[State] = []
    pi = 0
    while pi < len(probes) and probes[pi] <= 0.0:
        probe_states.append(State(u.copy(), v.copy(), t))
        pi += 1

    def diag_F(uu: np.ndarray, vv: np.ndarray, tt: float) -> float:
        nonlocal table
        table = table.covering(float(np.max(uu)))
        return lyapunov(State(uu, vv, tt), grid, table).F_total

    mass_u = float(np.dot(u, V))
    mass_v = float(np.dot(v, V))
    rows: List[DiagnosticsRow] = [
        DiagnosticsRow(
            0.0, 0.0, mass_u, mass_v, float(np.max(u)), float(np.min(u)),
            diag_F(u, v, 0.0), 0.0, 0.0,
        )
    ]
    w12_max = _v_w12(v, grid)

    mass_res_u = 0.0
    mass_res_v = 0.0
    min_u_seen = float(np.min(u))
    min_v_seen = float(np.min(v))

    steps = 0
    termination: Optional[TerminationInfo] = None
    t_goal = cfg.t_end * (1.0 - 1e-15)

    while t < t_goal:
        dt_c = min(kern.dt_bound(u, v, cfg.cfl), dt_max)
        if dt_c < cfg.dt_min:
            termination = TerminationInfo(Termination.DT_UNDERFLOW, t)
            break
        dt = min(dt_c, cfg.t_end - t)
        if pi < len(probes):
            dt = min(dt, probes[pi] - t)

        will_diag = (steps + 1) % cfg.diag_every == 0
        F_prev = diag_F(u, v, t) if will_diag else None
        f_mass = float(np.dot(kern.f(u), V))

        u_new, v_new = kern.advance(u, v, dt)
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
            termination = TerminationInfo(Termination.NUMERICAL_FAILURE, t)
            break
        min_u_new = float(np.min(u_new))
        min_v_new = float(np.min(v_new))
        if min_u_new < 0.0 or min_v_new < 0.0:
            termination = TerminationInfo(Termination.NUMERICAL_FAILURE, t)
            break
        steps += 1
        t_new = t + dt

        mass_u_new = float(np.dot(u_new, V))
        mass_v_new = float(np.dot(v_new, V))
        mass_res_u = max(
            mass_res_u,
            abs(mass_u_new - mass_u - dt * f_mass) / max(abs(mass_u), 1e-300),
        )
        mass_res_v = max(
            mass_res_v,
            abs(mass_v_new - mass_v - dt * (mass_u_new - mass_v_new))
            / max(abs(mass_v), abs(mass_u_new), 1e-300),
        )
        min_u_seen = min(min_u_seen, min_u_new)
        min_v_seen = min(min_v_seen, min_v_new)

        while pi < len(probes) and t_new >= probes[pi] - 1e-12 * max(1.0, probes[pi]):
            probe_states.append(State(u_new.copy(), v_new.copy(), t_new))
            pi += 1

        max_u = float(np.max(u_new))
        blown = max_u > cfg.blowup_cap and max_u >= 10.0 * m0
        final_step = t_new >= t_goal

        if will_diag or blown or final_step:
            F_now = diag_F(u_new, v_new, t_new)
            v_t = (v_new - v) / dt
            rhs = dissipation(State(u, v, t), v_t, grid, p, table, ov)
            if F_prev is None:
                F_prev = diag_F(u, v, t)
            residual = abs((F_now - F_prev) / dt - rhs)
            w12_max = max(w12_max, _v_w12(v_new, grid))
            rows.append(
                DiagnosticsRow(
                    t_new, dt, mass_u_new, mass_v_new, max_u, min_u_new,
                    F_now, rhs, residual,
                )
            )

        u, v, t = u_new, v_new, t_new
        mass_u, mass_v = mass_u_new, mass_v_new

        if blown:
            termination = TerminationInfo(Termination.BLOWUP, t, blowup_estimate=t - dt)
            break

    state = State(u, v, t)
    if termination is None:
        termination = TerminationInfo(Termination.COMPLETED, t)
    elif termination.tag in (Termination.DT_UNDERFLOW, Termination.NUMERICAL_FAILURE):
        # emit a final row from the last valid state
        if rows[-1].t < t:
            rows.append(
                DiagnosticsRow(
                    t, rows[-1].dt, mass_u, mass_v, float(np.max(u)), float(np.min(u)),
                    diag_F(u, v, t), rows[-1].dissipation_rhs, rows[-1].identity_residual,
                )
            )

    return RunResult(
        termination,
        rows,
        state,
        grid,
        steps,
        mass_res_u,
        mass_res_v,
        min_u_seen,
        min_v_seen,
        _v_w12(v, grid),
        w12_max,
        probe_states,
    )


# ---------------------------------------------------------------------------
# continuous dependence and regularization scans


@dataclass
class DependenceRecord:
    """Sup-norm separation of two runs differing by a delta-sized bump in u0."""

    times: np.ndarray
    separations: np.ndarray
    delta: float
    fitted_rate: float  # C in separation <= K exp(C t) delta
    fitted_prefactor: float
    both_completed: bool


def perturbation_bump(grid: Grid) -> np.ndarray:
    """Fixed smooth bump (max ~1) used to perturb initial data deterministically."""
    xi = grid.centers / grid.spec.extent
    return np.exp(-(((xi - 0.35) / 0.18) ** 2))


def continuous_dependence(
    cfg: RunConfig, delta: float, t_probe: float, n_probe: int = 33
) -> DependenceRecord:
    """Run cfg and a u0-perturbed copy; record sup-norm separation at matched times."""
    if delta < 0.0:
        raise ConfigError("delta must be >= 0")
    if t_probe > cfg.t_end:
        raise ConfigError("t_probe must not exceed t_end")
    grid = make_grid(cfg.domain)
    times = np.linspace(0.0, t_probe, n_probe)
    base = replace(cfg, t_end=t_probe)
    r1 = run(base, probe_times=times)
    bump = perturbation_bump(grid)
    r2 = run(
        replace(base, u0=np.asarray(cfg.u0, dtype=float) + delta * bump),
        probe_times=times,
    )
    k = min(len(r1.probe_states), len(r2.probe_states))
    seps = np.array(
        [linf(r1.probe_states[i].u - r2.probe_states[i].u) for i in range(k)]
    )
    ts = times[:k]
    both = (
        r1.termination.tag == Termination.COMPLETED
        and r2.termination.tag == Termination.COMPLETED
    )
    if delta > 0.0 and np.any(seps > 0.0):
        mask = seps > 0.0
        y = np.log(seps[mask] / delta)
        A = np.vstack([np.ones(int(mask.sum())), ts[mask]]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        prefactor, rate = float(np.exp(coef[0])), float(coef[1])
    else:
        prefactor, rate = 0.0, 0.0
    return DependenceRecord(ts, seps, delta, rate, prefactor, both)


@dataclass
class EpsScanResult:
    """Final states at a probe time for a decreasing regularization sequence."""

    eps_values: List[float]
    states: List[State]
    gaps: List[float]  # sup-norm distance between consecutive eps states
    strictly_decreasing: bool


def epsilon_convergence_scan(
    cfg: RunConfig, eps_list: Sequence[float], t_probe: float
) -> EpsScanResult:
    """Run the same configuration for each eps and compare states at t_probe.

    All runs must complete to the probe time; a blow-up or failure aborts the
    scan with the offending eps attached to the error.
    """
    eps_values = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise ConfigError("eps_list must be strictly decreasing")
    states: List[State] = []
    for e in eps_values:
        cfg_e = replace(cfg, params=replace(cfg.params, eps=e), t_end=t_probe)
        res = run(cfg_e)
        if res.termination.tag != Termination.COMPLETED:
            raise ScanAbortedError(
                f"run with eps={e:g} terminated {res.termination.tag.value} "
                f"at t={res.termination.t_final:g}",
                offender=e,
            )
        states.append(res.final_state)
    gaps = [linf(states[i].u - states[i + 1].u) for i in range(len(states) - 1)]
    decreasing = all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:])) if len(gaps) > 1 else True
    return EpsScanResult(eps_values, states, gaps, decreasing)
