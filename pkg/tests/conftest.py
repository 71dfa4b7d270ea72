"""Shared fixtures: pinned experiment configurations reused across test modules.

The two dichotomy configurations and the damped reference run are session
fixtures because the runs take seconds to minutes; every test that needs a
late-time state or a classification verdict shares the same result object.
"""

import numpy as np
import pytest

import ksfv
from ksfv.families import FamilyParams, concentrated_u
from ksfv.solver import RunConfig, run, steady_signal


def damped_reference_config():
    """Globally existing, strongly damped radial run (drifts to the constant state)."""
    dom = ksfv.DomainSpec(ksfv.BALL, 1.0, 2, 48)
    grid = ksfv.make_grid(dom)
    p = ksfv.ModelParams(alpha=1, beta=1, kappa=4, a=1, b=1, eps=0.01, s0=1.0)
    u0 = 1.0 + 0.2 * np.cos(np.pi * grid.centers / dom.R)
    v0 = steady_signal(u0, grid)
    return RunConfig(dom, p, u0, v0, t_end=20.0, diag_every=200)


def aggregation_config():
    """Weakly damped, strongly drifting radial run that concentrates and blows up.

    kappa=2 < beta + 2/n = 4, so damping cannot balance the drift; the run is
    expected to end in DtUnderflow (dt_min = 1e-10) after the max-norm has
    grown by more than three orders of magnitude.
    """
    dom = ksfv.DomainSpec(ksfv.BALL, 1.0, 2, 256)
    grid = ksfv.make_grid(dom)
    p = ksfv.ModelParams(alpha=1, beta=3, kappa=2, a=0, b=1, eps=1e-3, s0=1.0)
    u0 = concentrated_u(FamilyParams(eta=0.35, beta=3, mass=50.0), grid)
    v0 = steady_signal(u0, grid)
    return RunConfig(
        dom, p, u0, v0, t_end=5.0, dt_min=1e-10, blowup_cap=1e8, diag_every=100
    )


@pytest.fixture(scope="session")
def damped_run():
    return run(damped_reference_config())


@pytest.fixture(scope="session")
def aggregation_run():
    return run(aggregation_config())


@pytest.fixture(scope="session")
def damped_table():
    p = damped_reference_config().params
    return ksfv.build_table(p, ksfv.RatioSpec.model(), s_max=30.0)
