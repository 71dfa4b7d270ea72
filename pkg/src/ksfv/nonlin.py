"""Model nonlinearities and the tabulated energy integrands.

The scalar ingredients are the logarithmic diffusivity ln^alpha(1+u), its
regularized shift ln^alpha(1+u+eps), the power-law drift sensitivity
psi_c*u^beta, and the damped growth term a - b*u^kappa (smoothly cut off for
eps > 0 so it has compact support in u). From the diffusivity/sensitivity
ratio rho the energy machinery tabulates

    Gp(s) = int_s0^s rho(tau) dtau           (derivative of G)
    G(s)  = int_s0^s int_s0^sigma rho(tau) dtau dsigma
    H(s)  = int_s0^s sigma * rho(sigma) dsigma

on a log-spaced knot grid anchored exactly at s0. Nested integrals collapse to
single quadratures via the Cauchy repeated-integral identity, and evaluation
between knots uses quintic Hermite pieces fed with the exact first and second
derivatives at the knots (G' = Gp, G'' = rho, ...), which keeps interpolation
error orders of magnitude below the quadrature tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ModelParams
from .errors import (
    DivergenceError,
    DomainError,
    PreconditionError,
    QuadratureError,
    UsageError,
)
from .quadrature import adaptive_simpson

# ---------------------------------------------------------------------------
# scalar nonlinearities (vectorized over numpy arrays)


def _check_nonneg(u, what: str):
    if np.any(np.asarray(u) < 0):
        raise DomainError(f"{what} is only defined for u >= 0")


def diffusivity(u, p: ModelParams):
    """ln^alpha(1+u); vanishes at u = 0."""
    _check_nonneg(u, "diffusivity")
    return np.log1p(np.asarray(u, dtype=float)) ** p.alpha


def diffusivity_reg(u, p: ModelParams):
    """ln^alpha(1+u+eps); strictly positive for eps > 0, equals diffusivity at eps = 0."""
    _check_nonneg(u, "diffusivity_reg")
    return np.log1p(np.asarray(u, dtype=float) + p.eps) ** p.alpha


def sensitivity(u, p: ModelParams):
    """psi_c * u^beta; the drift mobility of the density."""
    _check_nonneg(u, "sensitivity")
    return p.psi_c * np.asarray(u, dtype=float) ** p.beta


def sensitivity_slope(u, p: ModelParams):
    """d/du of the sensitivity, used for advective CFL bounds."""
    _check_nonneg(u, "sensitivity_slope")
    return p.psi_c * p.beta * np.asarray(u, dtype=float) ** (p.beta - 1.0)


def growth(u, p: ModelParams):
    """Upper-envelope growth term a - b*u^kappa (set a=0 for the lower envelope)."""
    _check_nonneg(u, "growth")
    return p.a - p.b * np.asarray(u, dtype=float) ** p.kappa


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, strictly increasing between."""
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, 1e-12, 1.0 - 1e-12)
    g0 = np.exp(-1.0 / xc)
    g1 = np.exp(-1.0 / (1.0 - xc))
    s = g0 / (g0 + g1)
    return np.where(x <= 0.0, 0.0, np.where(x >= 1.0, 1.0, s))


def growth_cutoff(u, p: ModelParams):
    """Smooth window equal to 1 on [0, 1/(2 eps)] and 0 beyond 1/eps (1 everywhere for eps=0)."""
    u = np.asarray(u, dtype=float)
    if p.eps <= 0.0:
        return np.ones_like(u)
    lo = 1.0 / (2.0 * p.eps)
    hi = 1.0 / p.eps
    return 1.0 - smooth_step((u - lo) / (hi - lo))


def growth_reg(u, p: ModelParams):
    """Compactly supported growth term: (a - b*u^kappa) * cutoff.

    Coincides with growth() on [0, 1/(2 eps)] and vanishes beyond 1/eps; the
    damping band -b u^kappa <= f <= a - b u^kappa therefore holds on the uncut
    region only (no compactly supported function can obey it for all u).
    """
    return growth(u, p) * growth_cutoff(u, p)


def damping_is_weak(p: ModelParams, n: int) -> bool:
    """True when kappa < beta + 2/n, the regime in which damping may fail to prevent blow-up."""
    if n < 1:
        raise PreconditionError(f"dimension must be >= 1, got {n}")
    return p.kappa < p.beta + 2.0 / n


# ---------------------------------------------------------------------------
# diffusivity/sensitivity ratio with override seam


@dataclass(frozen=True)
class RatioSpec:
    """Which ratio feeds the energy integrands: the model's, 1, or a custom callable."""

    kind: str  # "model" | "unit" | "custom"
    fn: Optional[Callable[[float], float]] = None
    fn_prime: Optional[Callable[[float], float]] = None

    @staticmethod
    def model() -> "RatioSpec":
        return RatioSpec("model")

    @staticmethod
    def unit() -> "RatioSpec":
        return RatioSpec("unit")

    @staticmethod
    def custom(fn, fn_prime=None) -> "RatioSpec":
        if fn is None:
            raise UsageError("custom ratio requires a callable defined on (0, inf)")
        return RatioSpec("custom", fn, fn_prime)


def ratio(tau, p: ModelParams, spec: RatioSpec = RatioSpec.model()):
    """Evaluate the active ratio at tau > 0 (the sensitivity vanishes at 0)."""
    arr = np.asarray(tau, dtype=float)
    if np.any(arr <= 0.0):
        raise DomainError("ratio is only defined for tau > 0")
    if spec.kind == "unit":
        return np.ones_like(arr) if arr.shape else 1.0
    if spec.kind == "custom":
        return spec.fn(arr)
    return diffusivity_reg(arr, p) / sensitivity(arr, p)


def _scalar_ratio(p: ModelParams, spec: RatioSpec):
    """Scalar (math-module) ratio and its derivative, for the quadrature hot path."""
    if spec.kind == "unit":
        return (lambda t: 1.0), (lambda t: 0.0)
    if spec.kind == "custom":
        fn = spec.fn
        if spec.fn_prime is not None:
            return fn, spec.fn_prime

        def numeric_prime(t: float) -> float:
            h = 1e-6 * max(abs(t), 1e-12)
            return (fn(t + h) - fn(t - h)) / (2.0 * h)

        return fn, numeric_prime

    alpha, beta, eps, c = p.alpha, p.beta, p.eps, p.psi_c

    def rho(t: float) -> float:
        return math.log1p(t + eps) ** alpha / (c * t ** beta)

    def rho_prime(t: float) -> float:
        L = math.log1p(t + eps)
        phi = L ** alpha
        dphi = alpha * L ** (alpha - 1.0) / (1.0 + t + eps)
        psi = c * t ** beta
        dpsi = c * beta * t ** (beta - 1.0)
        return (dphi * psi - phi * dpsi) / (psi * psi)

    return rho, rho_prime


# ---------------------------------------------------------------------------
# tabulated energy integrands


def _hermite5(x: np.ndarray, knots, y, d1, d2) -> np.ndarray:
    """Piecewise quintic Hermite evaluation with nodal values and two derivatives."""
    idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, len(knots) - 2)
    x0 = knots[idx]
    dx = knots[idx + 1] - x0
    t = (x - x0) / dx
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5
    h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5
    h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5)
    h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5
    h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5
    h21 = 0.5 * (t3 - 2.0 * t4 + t5)
    return (
        y[idx] * h00
        + dx * d1[idx] * h10
        + dx * dx * d2[idx] * h20
        + y[idx + 1] * h01
        + dx * d1[idx + 1] * h11
        + dx * dx * d2[idx + 1] * h21
    )


@dataclass(frozen=True)
class FunctionalTable:
    """Tabulated G, H, Gp with quintic Hermite interpolation between knots.

    Immutable; covering() returns a new, wider table instead of mutating.
    Quadrature error at the knots is <= tol in absolute terms for O(1) values
    (a 1e-14 relative floor applies where the integrands are enormous).
    """

    params: ModelParams
    ratio_spec: RatioSpec
    s0: float
    s_min: float
    s_max: float
    tol: float
    knots_per_decade: int
    knots: np.ndarray
    G_vals: np.ndarray
    H_vals: np.ndarray
    Gp_vals: np.ndarray
    rho_vals: np.ndarray
    rho_prime_vals: np.ndarray

    def _check_range(self, s: np.ndarray):
        if np.any(s > self.s_max * (1.0 + 1e-12)):
            raise UsageError(
                f"evaluation above table range (s_max={self.s_max:g}); use covering() first"
            )
        if np.any(s < self.s_min * (1.0 - 1e-12)):
            raise UsageError(f"evaluation below table range (s_min={self.s_min:g})")

    def g(self, s):
        s = np.asarray(s, dtype=float)
        self._check_range(s)
        return _hermite5(s, self.knots, self.G_vals, self.Gp_vals, self.rho_vals)

    def gp(self, s):
        s = np.asarray(s, dtype=float)
        self._check_range(s)
        return _hermite5(s, self.knots, self.Gp_vals, self.rho_vals, self.rho_prime_vals)

    def h(self, s):
        s = np.asarray(s, dtype=float)
        self._check_range(s)
        hp = self.knots * self.rho_vals
        hpp = self.rho_vals + self.knots * self.rho_prime_vals
        return _hermite5(s, self.knots, self.H_vals, hp, hpp)

    def covering(self, s: float) -> "FunctionalTable":
        """Return a table whose range contains s, doubling s_max as often as needed."""
        if s <= self.s_max:
            return self
        s_max = self.s_max
        while s_max < s:
            s_max *= 2.0
        return build_table(
            self.params,
            self.ratio_spec,
            s_min=self.s_min,
            s_max=s_max,
            tol=self.tol,
            knots_per_decade=self.knots_per_decade,
        )


def _make_knots(s_min: float, s0: float, s_max: float, per_decade: int) -> np.ndarray:
    decades = math.log10(s_max / s_min)
    count = max(int(math.ceil(decades * per_decade)), 8) + 1
    knots = np.geomspace(s_min, s_max, count)
    j = int(np.searchsorted(knots, s0))
    if j > 0 and abs(knots[j - 1] - s0) <= 1e-12 * s0:
        knots[j - 1] = s0
    elif j < len(knots) and abs(knots[j] - s0) <= 1e-12 * s0:
        knots[j] = s0
    else:
        knots = np.insert(knots, j, s0)
    return knots


def build_table(
    p: ModelParams,
    ratio_spec: RatioSpec = RatioSpec.model(),
    s_min: float = 1e-8,
    s_max: float = 100.0,
    tol: float = 1e-10,
    knots_per_decade: int = 48,
) -> FunctionalTable:
    """Tabulate G, H, Gp on log-spaced knots anchored exactly at s0.

    Increments between consecutive knots are single adaptive-Simpson
    quadratures: the nested G integral collapses through
    int_a^b int_a^sigma rho = int_a^b rho(tau) (b - tau) dtau.
    Raises DivergenceError when the quadrature cannot converge (a ratio too
    singular near zero for the requested s_min).
    """
    s0 = p.s0
    if not (0.0 < s_min < s0 < s_max):
        raise PreconditionError(
            f"need 0 < s_min < s0 < s_max, got s_min={s_min}, s0={s0}, s_max={s_max}"
        )
    if tol <= 0.0:
        raise PreconditionError("tol must be positive")

    rho, rho_prime = _scalar_ratio(p, ratio_spec)
    knots = _make_knots(s_min, s0, s_max, knots_per_decade)
    i0 = int(np.argmin(np.abs(knots - s0)))
    nseg = len(knots) - 1
    seg_tol = tol / max(nseg, 1)

    G = np.zeros_like(knots)
    H = np.zeros_like(knots)
    Gp = np.zeros_like(knots)

    try:
        for k in range(i0, len(knots) - 1):
            a, b = knots[k], knots[k + 1]
            Gp[k + 1] = Gp[k] + adaptive_simpson(rho, a, b, seg_tol)
            G[k + 1] = G[k] + Gp[k] * (b - a) + adaptive_simpson(
                lambda t: rho(t) * (b - t), a, b, seg_tol
            )
            H[k + 1] = H[k] + adaptive_simpson(lambda t: t * rho(t), a, b, seg_tol)
        for k in range(i0 - 1, -1, -1):
            a, b = knots[k], knots[k + 1]
            Gp[k] = Gp[k + 1] - adaptive_simpson(rho, a, b, seg_tol)
            G[k] = G[k + 1] - Gp[k + 1] * (b - a) + adaptive_simpson(
                lambda t: rho(t) * (t - a), a, b, seg_tol
            )
            H[k] = H[k + 1] - adaptive_simpson(lambda t: t * rho(t), a, b, seg_tol)
    except QuadratureError as exc:
        verdict = _integrability_verdict(p, ratio_spec)
        raise DivergenceError(f"table quadrature failed ({verdict}): {exc}") from exc

    rho_k = np.array([rho(t) for t in knots])
    rho_p_k = np.array([rho_prime(t) for t in knots])
    for arr in (knots, G, H, Gp, rho_k, rho_p_k):
        arr.flags.writeable = False
    return FunctionalTable(
        p,
        ratio_spec,
        s0,
        float(knots[0]),
        float(knots[-1]),
        tol,
        knots_per_decade,
        knots,
        G,
        H,
        Gp,
        rho_k,
        rho_p_k,
    )


def _integrability_verdict(p: ModelParams, spec: RatioSpec) -> str:
    if spec.kind != "model":
        return "non-model ratio; integrability unknown"
    if p.eps > 0.0:
        low = -p.beta  # rho ~ ln(1+eps)^alpha * tau^-beta near 0
    else:
        low = p.alpha - p.beta
    if low <= -1.0:
        return f"ratio ~ tau^{low:g} near 0: not integrable at 0+"
    return f"ratio ~ tau^{low:g} near 0: integrable at 0+"


# ---------------------------------------------------------------------------
# structural growth conditions


@dataclass(frozen=True)
class ConditionReport:
    """Numeric verdict for a structural inequality over a sampled range."""

    holds: bool
    max_violation: float
    witness: Optional[float] = None
    lhs: Optional[float] = None
    rhs: Optional[float] = None

    def __str__(self):
        tag = "holds" if self.holds else "FAILS"
        w = f" at s={self.witness:g}" if self.witness is not None else ""
        return f"{tag} (max violation {self.max_violation:.3e}{w})"


def _sample_points(table: FunctionalTable, lo: float, samples: int) -> np.ndarray:
    return np.geomspace(lo, table.s_max, samples)


def check_growth_condition(
    table: FunctionalTable,
    n: int,
    k: float,
    exponent: float,
    samples: int = 200,
    rel_tol: float = 1e-9,
) -> ConditionReport:
    """Check G(s) <= k*s*(ln s)^theta (n=2) or G(s) <= k*s^(2-a') (n>=3) on [s0, s_max].

    `exponent` is theta in (0,1) for n=2 and a' > 2/n for n >= 3 (the growth
    exponent, distinct from the diffusivity exponent).
    """
    if samples < 10:
        raise PreconditionError("need at least 10 sample points")
    if n == 2:
        if not (0.0 < exponent < 1.0):
            raise PreconditionError("n=2 requires theta in (0, 1)")
    elif n >= 3:
        if not exponent > 2.0 / n:
            raise PreconditionError(f"n={n} requires exponent > 2/n")
    else:
        raise PreconditionError("dimension must be >= 2")

    lo = max(table.s0, 1.0)
    s = _sample_points(table, lo, samples)
    G = table.g(s)
    if n == 2:
        bound = k * s * np.log(s) ** exponent
    else:
        bound = k * s ** (2.0 - exponent)
    margin = G - bound
    i = int(np.argmax(margin))
    tol = rel_tol * max(1.0, float(np.max(np.abs(G))))
    return ConditionReport(
        holds=bool(margin[i] <= tol),
        max_violation=float(margin[i]),
        witness=float(s[i]),
    )


def check_eps_condition(
    table: FunctionalTable,
    n: int,
    eps_c: float,
    K: float,
    samples: int = 200,
    rel_tol: float = 1e-9,
) -> ConditionReport:
    """Check H(s) <= (n-2-eps_c)/n * G(s) + K*s over [s0, s_max] (n >= 3, s0 > 1)."""
    if n < 3:
        raise PreconditionError("this condition is for n >= 3")
    if not (0.0 < eps_c < 1.0):
        raise PreconditionError("eps_c must lie in (0, 1)")
    if samples < 10:
        raise PreconditionError("need at least 10 sample points")
    if table.s0 <= 1.0:
        raise PreconditionError("condition requires an anchor s0 > 1")
    s = _sample_points(table, table.s0, samples)
    H = table.h(s)
    rhs = (n - 2.0 - eps_c) / n * table.g(s) + K * s
    margin = H - rhs
    i = int(np.argmax(margin))
    tol = rel_tol * max(1.0, float(np.max(np.abs(H))))
    return ConditionReport(
        holds=bool(margin[i] <= tol),
        max_violation=float(margin[i]),
        witness=float(s[i]),
    )


# ---------------------------------------------------------------------------
# override seam for the solver


@dataclass(frozen=True)
class Overrides:
    """Optional replacements for the model nonlinearities (test seam).

    Each callable maps a nonnegative cell array to an array; `ratio_spec`
    controls the table the diagnostics use (keep it consistent with phi/psi).
    """

    phi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    psi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    f: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ratio_spec: RatioSpec = RatioSpec.model()


def effective_phi(p: ModelParams, ov: Optional[Overrides]):
    if ov is not None and ov.phi is not None:
        return ov.phi
    return lambda u: diffusivity_reg(u, p)


def effective_psi(p: ModelParams, ov: Optional[Overrides]):
    if ov is not None and ov.psi is not None:
        return ov.psi
    return lambda u: sensitivity(u, p)


def effective_f(p: ModelParams, ov: Optional[Overrides]):
    if ov is not None and ov.f is not None:
        return ov.f
    return lambda u: growth_reg(u, p)
