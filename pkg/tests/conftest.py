import os

import numpy as np
import pytest

import fourierlev as fl

# Registry for the acceptance suite: criterion number -> (title, passed, detail).
# Populated by tests/test_acceptance.py, printed in the terminal summary so
# every criterion gets one visible pass/fail line regardless of -v flags.
_ACCEPTANCE: dict = {}


def record_acceptance(number: int, title: str, passed: bool, detail: str = ""):
    _ACCEPTANCE[number] = (title, bool(passed), detail)


@pytest.fixture
def record():
    return record_acceptance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        verdict = "PASS" if passed else "FAIL"
        line = f"criterion {number:2d}: {verdict}  {title}"
        if detail:
            line += f"  [{detail}]"
        tr.write_line(line, green=passed, red=not passed)


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "full_scale: opt-in full-scale runs (set FOURIERLEV_FULL_SCALE=1)")


FULL_SCALE = bool(os.environ.get("FOURIERLEV_FULL_SCALE"))

requires_full_scale = pytest.mark.skipif(
    not FULL_SCALE, reason="set FOURIERLEV_FULL_SCALE=1 to run")


# ---------------------------------------------------------------------------
# Shared Monte Carlo products. Session-scoped because several acceptance
# criteria read different aspects of the same experiment.
# ---------------------------------------------------------------------------

DESK_N = 5400
DESK_DAYS = 50
HORIZON = 0.05


@pytest.fixture(scope="session")
def desk_experiment():
    """50 noisy Heston days at the desk scale, all estimators, tuned."""
    scenario = fl.SimScenario(
        model="heston",
        params=fl.HestonParams(),
        n_steps=DESK_N,
        horizon=HORIZON,
        noise=fl.NoiseConfig(kind="gaussian", ratio=0.8),
    )
    cfg = fl.ExperimentConfig(
        scenario=scenario,
        days=DESK_DAYS,
        seed=0,
        grid=fl.GridSpec(fl.default_m_grid(DESK_N), (1, 2, 3, 4, 5, 6)),
        estimators=("fel", "fel_corrected", "fev", "fevv", "rt",
                    "rt_corrected"),
    )
    return fl.run_table_experiment(cfg)


@pytest.fixture(scope="session")
def gh_tracking():
    """100 noisy generalized-Heston days at the desk scale, daily ratios."""
    scenario = fl.SimScenario(
        model="gen_heston",
        params=fl.GenHestonParams(),
        n_steps=DESK_N,
        horizon=HORIZON,
        noise=fl.NoiseConfig(kind="gaussian", ratio=0.8),
    )
    cfg = fl.ExperimentConfig(
        scenario=scenario,
        days=100,
        seed=0,
        grid=fl.GridSpec(fl.default_m_grid(DESK_N), (1, 2, 3, 4, 5, 6)),
        estimators=("fel", "fel_corrected", "rt", "rt_corrected"),
    )
    return fl.run_rt_tracking(cfg)


@pytest.fixture(scope="session")
def clean_heston_day():
    """One noiseless equidistant Heston day at the desk scale."""
    scenario = fl.SimScenario("heston", fl.HestonParams(), DESK_N, HORIZON,
                              None)
    return scenario.simulate(0, [0])[0]


def random_series(rng, n, horizon=1.0, equidistant=False, scale=1e-2):
    """Small random walk with either jittered or equidistant timestamps."""
    if equidistant:
        t = np.linspace(0.0, horizon, n + 1)
    else:
        t = np.sort(rng.uniform(0.0, horizon, n + 1))
        t[0] = 0.0
        t = np.unique(t)
        while t.size < n + 1:
            extra = rng.uniform(0.0, horizon, n + 1 - t.size)
            t = np.unique(np.concatenate([t, extra]))
    p = np.cumsum(rng.standard_normal(t.size)) * scale
    return fl.TickSeries(t, p, horizon)
