import time
from types import SimpleNamespace

import numpy as np
import pytest

from rdreg import bundled_scenario_path
from rdreg.cli import synthesize
from rdreg.modal import build_basis
from rdreg.regeq import build_injection_profile, build_regulator_maps
from rdreg.regulator import run_closed_loop
from rdreg.scenario import build_exo, build_plant, observer_init, parse_config


def _load(name):
    cfg = parse_config(bundled_scenario_path(name))
    model, cert = synthesize(cfg)
    plant = build_plant(cfg)
    exo_spec = build_exo(cfg)
    basis = build_basis(cfg.design_order(), cfg.grid_m)
    injection = build_injection_profile(cert.l_col, basis)
    maps = build_regulator_maps(plant, exo_spec, injection)
    return SimpleNamespace(
        cfg=cfg, model=model, cert=cert, plant=plant, exo=exo_spec,
        basis=basis, injection=injection, maps=maps,
    )


def _run(sc):
    started = time.perf_counter()
    trace = run_closed_loop(
        sc.plant, sc.exo, sc.cert.k_row, sc.cert.l_col,
        sc.cfg.iota, sc.cfg.kappa0, sc.cfg.kappa1, sc.cfg.horizon,
        eps_hat0=observer_init(sc.cfg), maps=sc.maps, record_diagnostics=True,
    )
    trace.wall_clock = time.perf_counter() - started
    return trace


@pytest.fixture(scope="session")
def paper15():
    return _load("paper_a15")


@pytest.fixture(scope="session")
def paper05():
    return _load("paper_a05")


@pytest.fixture(scope="session")
def paper15_run(paper15):
    return _run(paper15)


@pytest.fixture(scope="session")
def paper05_run(paper05):
    return _run(paper05)


def random_symmetric(rng, n, scale=1.0):
    m = rng.standard_normal((n, n)) * scale
    return 0.5 * (m + m.T)


def window_max(t, v, lo, hi):
    mask = (t >= lo) & (t <= hi)
    return float(np.abs(np.asarray(v)[mask]).max())
