import numpy as np
import pytest

from rdreg._backend import ENV_VAR, HAVE_NUMBA, resolve_backend
from rdreg.plantsim import CrankNicolsonPlan
from rdreg.regulator import run_closed_loop
from rdreg.scenario import observer_init

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="needs both backends")


def test_env_flag_selects_backend(monkeypatch):
    monkeypatch.setenv(ENV_VAR, "numpy")
    assert resolve_backend() == "numpy"
    monkeypatch.setenv(ENV_VAR, "numba")
    assert resolve_backend() == "numba"
    monkeypatch.setenv(ENV_VAR, "auto")
    assert resolve_backend() == "numba"
    monkeypatch.setenv(ENV_VAR, "nonsense")
    with pytest.raises(ValueError):
        resolve_backend()


def test_cn_step_parity_single_step():
    rng = np.random.default_rng(12)
    m, dt, a = 64, 1e-3, 0.7
    w = rng.standard_normal(m + 1)
    src = rng.standard_normal(m + 1)
    outs = {}
    for be in ("numba", "numpy"):
        plan = CrankNicolsonPlan(a, m, dt, backend=be)
        out = np.empty_like(w)
        plan.step(w.copy(), src.copy(), out)
        outs[be] = out
    assert np.abs(outs["numba"] - outs["numpy"]).max() <= 1e-13


def test_closed_loop_parity(paper15):
    sc = paper15
    traces = {}
    for be in ("numba", "numpy"):
        traces[be] = run_closed_loop(
            sc.plant, sc.exo, sc.cert.k_row, sc.cert.l_col,
            sc.cfg.iota, sc.cfg.kappa0, sc.cfg.kappa1, 2.0,
            eps_hat0=observer_init(sc.cfg), backend=be,
        )
    for name in ("y_e", "theta_hat", "u", "norm_eps_hat"):
        gap = np.abs(getattr(traces["numba"], name) - getattr(traces["numpy"], name)).max()
        assert gap <= 1e-9, f"{name} diverged across backends: {gap}"
