import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from scipy.integrate import quad

import ksfv
from ksfv.errors import DomainError, PreconditionError, UsageError
from ksfv.nonlin import (
    Overrides,
    damping_is_weak,
    diffusivity,
    diffusivity_reg,
    growth,
    growth_cutoff,
    growth_reg,
    ratio,
    sensitivity,
    smooth_step,
)

E = math.e


def params(**kw):
    base = dict(alpha=1, beta=1, kappa=2, a=0, b=1, eps=0, s0=1.0, psi_c=1.0)
    base.update(kw)
    return ksfv.ModelParams(**base)


# ---------------------------------------------------------------------------
# scalar nonlinearities


def test_diffusivity_values():
    assert diffusivity(0.0, params(alpha=1)) == 0.0
    assert diffusivity(E - 1.0, params(alpha=1)) == pytest.approx(1.0, rel=1e-15)
    assert diffusivity(E * E - 1.0, params(alpha=3)) == pytest.approx(8.0, rel=1e-14)


def test_diffusivity_reg_values():
    assert diffusivity_reg(0.0, params(alpha=2, eps=E - 1.0)) == pytest.approx(1.0, rel=1e-14)
    u = np.linspace(0, 5, 11)
    assert np.allclose(diffusivity_reg(u, params(alpha=2, eps=0)), diffusivity(u, params(alpha=2)))
    # strictly positive once eps > 0
    assert diffusivity_reg(0.0, params(eps=1e-6)) > 0.0


def test_diffusivity_reg_against_decimal_log():
    getcontext().prec = 50
    expected = float(Decimal(2.5).ln())
    assert diffusivity_reg(1.0, params(alpha=1, eps=0.5)) == pytest.approx(expected, abs=1e-15)


def test_diffusivity_monotone_in_u_and_eps():
    rng = np.random.default_rng(7)
    u = np.sort(rng.uniform(0, 50, 64))
    for alpha in (1.0, 2.5):
        vals = diffusivity(u, params(alpha=alpha))
        assert np.all(np.diff(vals) >= 0)
        lo = diffusivity_reg(u, params(alpha=alpha, eps=0.1))
        hi = diffusivity_reg(u, params(alpha=alpha, eps=0.7))
        assert np.all(hi >= lo)


def test_sensitivity_values():
    assert sensitivity(2.0, params(beta=2)) == 4.0
    assert sensitivity(0.0, params(beta=1.7)) == 0.0
    assert sensitivity(3.0, params(beta=1.5, psi_c=2.0)) == pytest.approx(
        2.0 * 3.0 ** 1.5, rel=1e-15
    )


def test_growth_values():
    p = params(a=2.0, b=1.0, kappa=2)
    assert growth(0.0, p) == 2.0
    assert growth(math.sqrt(2.0), p) == pytest.approx(0.0, abs=1e-15)
    assert growth(3.0, params(a=0, b=1, kappa=2)) == -9.0


def test_negative_density_rejected():
    for fn in (diffusivity, diffusivity_reg, sensitivity, growth):
        with pytest.raises(DomainError):
            fn(-0.1, params())


def test_smooth_step_shape():
    x = np.linspace(-1, 2, 301)
    s = smooth_step(x)
    assert np.all(s[x <= 0] == 0.0)
    assert np.all(s[x >= 1] == 1.0)
    assert np.all(np.diff(s) >= -1e-15)


def test_growth_cutoff_window():
    p = params(eps=0.05, a=1.0, b=1.0, kappa=2)
    lo, hi = 1.0 / (2 * p.eps), 1.0 / p.eps
    u = np.array([0.0, 1.0, lo, 0.5 * (lo + hi), hi, hi + 5.0])
    w = growth_cutoff(u, p)
    assert w[0] == w[1] == w[2] == 1.0
    assert 0.0 < w[3] < 1.0
    assert w[4] == w[5] == 0.0
    # inside the uncut window the damping band holds
    inside = np.linspace(0, lo, 50)
    f = growth_reg(inside, p)
    assert np.all(f <= p.a - p.b * inside ** p.kappa + 1e-12)
    assert np.all(f >= -p.b * inside ** p.kappa - 1e-12)


def test_growth_reg_without_eps_is_plain_growth():
    p = params(a=1.0, b=2.0, kappa=3, eps=0.0)
    u = np.linspace(0, 10, 33)
    assert np.array_equal(growth_reg(u, p), growth(u, p))


def test_damping_threshold():
    assert damping_is_weak(params(beta=2, kappa=2), 2)  # 2 < 3
    assert not damping_is_weak(params(beta=1, kappa=4), 2)
    assert not damping_is_weak(params(beta=3, kappa=3 + 2.0 / 3.0), 3)  # boundary excluded


# ---------------------------------------------------------------------------
# ratio


def test_ratio_unit():
    assert ratio(17.3, params(), ksfv.RatioSpec.unit()) == 1.0


def test_ratio_model_values():
    assert ratio(E - 1.0, params(alpha=1, beta=1), ksfv.RatioSpec.model()) == pytest.approx(
        1.0 / (E - 1.0), rel=1e-15
    )
    getcontext().prec = 50
    expected = float(Decimal("3.1").ln() ** 2 / 4)  # ln(1 + 2 + 0.1)^2 / 2^2
    got = ratio(2.0, params(alpha=2, beta=2, eps=0.1), ksfv.RatioSpec.model())
    assert got == pytest.approx(expected, abs=1e-14)


def test_ratio_domain_error():
    with pytest.raises(DomainError):
        ratio(0.0, params(), ksfv.RatioSpec.model())
    with pytest.raises(DomainError):
        ratio(-1.0, params(), ksfv.RatioSpec.unit())


def test_custom_ratio_requires_callable():
    with pytest.raises(UsageError):
        ksfv.RatioSpec.custom(None)


# ---------------------------------------------------------------------------
# tables


def test_unit_table_closed_forms():
    p = params(s0=1.0)
    t = ksfv.build_table(p, ksfv.RatioSpec.unit(), s_max=10.0)
    assert float(t.g(3.0)) == pytest.approx(2.0, abs=1e-10)
    assert float(t.h(3.0)) == pytest.approx(4.0, abs=1e-10)
    assert float(t.gp(3.0)) == pytest.approx(2.0, abs=1e-10)
    assert float(t.g(1.0)) == 0.0
    assert float(t.h(1.0)) == 0.0
    assert float(t.gp(1.0)) == 0.0


def test_unit_table_random_points():
    p = params(s0=1.0)
    t = ksfv.build_table(p, ksfv.RatioSpec.unit(), s_max=10.0)
    rng = np.random.default_rng(42)
    s = rng.uniform(t.s_min, 10.0, 100)
    assert np.max(np.abs(t.g(s) - 0.5 * (s - 1.0) ** 2)) <= 1e-8
    assert np.max(np.abs(t.h(s) - 0.5 * (s * s - 1.0))) <= 1e-8
    assert np.max(np.abs(t.gp(s) - (s - 1.0))) <= 1e-8


def _nested_simpson_G(rho, s0, s, tol=1e-10):
    """Deliberately naive double quadrature (the independent oracle)."""
    from ksfv.quadrature import adaptive_simpson

    def inner(sigma):
        return adaptive_simpson(rho, s0, sigma, tol * 0.01)

    return adaptive_simpson(inner, s0, s, tol)


def test_model_table_against_nested_simpson():
    p = params(alpha=1, beta=2, eps=0, s0=1.0)
    t = ksfv.build_table(p, ksfv.RatioSpec.model(), s_max=10.0)
    rho = lambda tau: math.log1p(tau) / (tau * tau)
    oracle = _nested_simpson_G(rho, 1.0, 5.0, 1e-10)
    assert float(t.g(5.0)) == pytest.approx(oracle, abs=1e-9)


def test_model_table_spot_checks_cauchy_form():
    # G(s) = int_s0^s rho(tau) (s - tau) dtau collapses the double integral
    p = params(alpha=2, beta=2, eps=0.05, s0=2.0)
    t = ksfv.build_table(p, ksfv.RatioSpec.model(), s_min=1e-6, s_max=50.0)
    rho = lambda tau: math.log1p(tau + 0.05) ** 2 / (tau * tau)
    rng = np.random.default_rng(3)
    for s in rng.uniform(0.01, 50.0, 12):
        g_ref, _ = quad(lambda tau: rho(tau) * (s - tau), 2.0, s, epsabs=1e-13, epsrel=1e-13)
        h_ref, _ = quad(lambda tau: tau * rho(tau), 2.0, s, epsabs=1e-13, epsrel=1e-13)
        gp_ref, _ = quad(rho, 2.0, s, epsabs=1e-13, epsrel=1e-13)
        assert float(t.g(s)) == pytest.approx(g_ref, abs=1e-9)
        assert float(t.h(s)) == pytest.approx(h_ref, abs=1e-9)
        assert float(t.gp(s)) == pytest.approx(gp_ref, abs=1e-9)


def test_table_invariants():
    p = params(alpha=1, beta=2, eps=0.01, s0=1.5)
    t = ksfv.build_table(p, ksfv.RatioSpec.model(), s_max=200.0)
    k = t.knots
    # G nonnegative, zero exactly at s0
    assert np.all(t.G_vals >= -1e-12)
    i0 = int(np.argmin(np.abs(k - 1.5)))
    assert k[i0] == 1.5 and t.G_vals[i0] == 0.0
    # convex above s0: second differences of knot values nonnegative
    above = k >= 1.5
    G = t.G_vals[above]
    kk = k[above]
    second = np.diff(np.diff(G) / np.diff(kk))
    assert np.min(second) >= -1e-10
    # H - s0 * Gp >= 0 for s >= s0 (integrand sigma*rho >= s0*rho there)
    s = np.geomspace(1.5, 200.0, 50)
    assert np.min(t.h(s) - 1.5 * t.gp(s)) >= -1e-9


def test_gp_is_numeric_derivative_of_g():
    p = params(alpha=1, beta=2, eps=0, s0=1.0)
    t = ksfv.build_table(p, ksfv.RatioSpec.model(), s_max=20.0)

    def diff_err(ds):
        s = np.linspace(2.0, 10.0, 17)
        fd = (t.g(s + ds) - t.g(s - ds)) / (2 * ds)
        return float(np.max(np.abs(fd - t.gp(s))))

    e1, e2 = diff_err(0.1), diff_err(0.05)
    assert e1 / e2 > 3.5  # central differences: order 2


def test_table_range_and_covering():
    p = params(s0=1.0)
    t = ksfv.build_table(p, ksfv.RatioSpec.unit(), s_max=10.0)
    with pytest.raises(UsageError):
        t.g(20.0)
    t2 = t.covering(35.0)
    assert t2.s_max >= 35.0
    assert t2 is not t
    assert t.s_max == 10.0  # original untouched
    assert float(t2.g(3.0)) == pytest.approx(2.0, abs=1e-9)
    assert t2.covering(12.0) is t2


def test_build_table_preconditions():
    with pytest.raises(PreconditionError):
        ksfv.build_table(params(s0=1.0), ksfv.RatioSpec.unit(), s_min=2.0, s_max=10.0)
    with pytest.raises(PreconditionError):
        ksfv.build_table(params(s0=1.0), ksfv.RatioSpec.unit(), s_max=0.5)


# ---------------------------------------------------------------------------
# growth conditions


def test_growth_condition_unit_ratio_fails_large_s():
    # quadratic G outruns s (ln s)^theta by s = 1000
    p = params(s0=1.0)
    t = ksfv.build_table(p, ksfv.RatioSpec.unit(), s_max=1e3)
    rep = ksfv.check_growth_condition(t, 2, 1.0, 0.5)
    assert not rep.holds
    assert rep.max_violation > 0


def test_growth_condition_decaying_ratio_holds():
    p = params(s0=1.0)
    spec = ksfv.RatioSpec.custom(lambda t: 1.0 / t ** 2, lambda t: -2.0 / t ** 3)
    t = ksfv.build_table(p, spec, s_max=1e3)
    rep = ksfv.check_growth_condition(t, 2, 1.0, 0.9)
    assert rep.holds


def test_growth_condition_empty_range_holds():
    p = params(s0=1.0)
    t = ksfv.build_table(p, ksfv.RatioSpec.unit(), s_max=1.0 + 1e-9)
    rep = ksfv.check_growth_condition(t, 2, 1.0, 0.5)
    assert rep.holds


def test_growth_condition_preconditions():
    p = params(s0=1.0)
    t = ksfv.build_table(p, ksfv.RatioSpec.unit(), s_max=10.0)
    with pytest.raises(PreconditionError):
        ksfv.check_growth_condition(t, 2, 1.0, 1.5)  # theta out of range
    with pytest.raises(PreconditionError):
        ksfv.check_growth_condition(t, 3, 1.0, 0.5)  # exponent <= 2/3
    with pytest.raises(PreconditionError):
        ksfv.check_growth_condition(t, 2, 1.0, 0.5, samples=5)


def test_eps_condition_examples():
    # the condition demands an anchor above 1
    p = params(s0=1.5)
    t = ksfv.build_table(p, ksfv.RatioSpec.unit(), s_max=10.0)
    # H = (s^2-s0^2)/2 vs 0.375 (s-s0)^2/2 + 10 s: holds on [s0, 10]
    rep = ksfv.check_eps_condition(t, 4, 0.5, 10.0)
    assert rep.holds
    # with K = 0 and eps_c -> 1 the fraction cannot absorb H for large s
    t2 = ksfv.build_table(p, ksfv.RatioSpec.unit(), s_max=1e3)
    rep2 = ksfv.check_eps_condition(t2, 3, 0.99, 0.0)
    assert not rep2.holds


def test_eps_condition_at_anchor_trivially_holds():
    p = params(s0=1.5)
    t = ksfv.build_table(p, ksfv.RatioSpec.unit(), s_max=1.5 + 1e-9)
    rep = ksfv.check_eps_condition(t, 4, 0.5, 10.0)
    assert rep.holds  # 0 <= 0 + K s0


def test_eps_condition_preconditions():
    p = params(s0=0.5)
    t = ksfv.build_table(p, ksfv.RatioSpec.unit(), s_max=10.0)
    with pytest.raises(PreconditionError):
        ksfv.check_eps_condition(t, 4, 0.5, 1.0)  # s0 <= 1
    p2 = params(s0=1.5)
    t2 = ksfv.build_table(p2, ksfv.RatioSpec.unit(), s_max=10.0)
    with pytest.raises(PreconditionError):
        ksfv.check_eps_condition(t2, 2, 0.5, 1.0)  # n < 3


def test_overrides_ratio_consistency():
    ov = Overrides(ratio_spec=ksfv.RatioSpec.unit())
    assert ov.phi is None and ov.psi is None and ov.f is None
