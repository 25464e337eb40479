"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with -s to see them live). The two
scenario fixtures run the full 60-second pipelines once per session.
"""

import numpy as np
import pytest

from conftest import window_max

from rdreg.cli import run_scenario
from rdreg.metrics import estimate_decay
from rdreg.numkit import companion_generator, lyap_solve, quad, rotation_generator, sym_eig
from rdreg.numkit import expm2
from rdreg.plantsim import PlantSimulator, quiet_plant
from rdreg.exo import ExoSpec, check_observable
from rdreg.regeq import (
    controller_rhs,
    decoupler_rhs,
    ivp_residual,
    regulator_rhs,
    solve_observer_decoupler,
)
from rdreg.regulator import AdaptiveObserver, run_epsilon_oracle, run_feedforward
from rdreg.synthesis import load_certificate, save_certificate, verify_certificate

from oracles import expm_taylor


def _report(num, ok, detail):
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def _scenario_criteria(num, sc, run):
    head = window_max(run.t, run.y_e, 0.0, 5.0)
    tail = window_max(run.t, run.y_e, 40.0, 60.0)
    theta_err = abs(run.theta_hat[-1] - sc.cfg.omega ** 2)
    w_bound = 10.0 * np.abs(sc.plant.w0).max()
    ok = (
        tail <= 0.05 * head
        and theta_err <= 0.025
        and run.max_abs_w <= w_bound
        and run.wall_clock <= 60.0
    )
    _report(num, ok,
            f"a={sc.cfg.a}: tail/head={tail / head:.2e} (<=0.05), "
            f"|theta_err|={theta_err:.2e} (<=0.025), "
            f"max|w|={run.max_abs_w:.2f} (<={w_bound:.0f}), "
            f"runtime={run.wall_clock:.1f}s (<=60)")


def test_criterion_1_paper_reproduction_a15(paper15, paper15_run):
    _scenario_criteria(1, paper15, paper15_run)


def test_criterion_2_paper_reproduction_a05(paper05, paper05_run):
    _scenario_criteria(2, paper05, paper05_run)


def test_criterion_3_certification_soundness(paper15, paper05, tmp_path):
    oks, details = [], []
    for sc in (paper15, paper05):
        path = tmp_path / f"cert_a{sc.cfg.a}.txt"
        save_certificate(sc.cert, path)
        report = verify_certificate(load_certificate(path))
        pd_ok = min(report.min_eig_p1, report.min_eig_s, report.min_eig_r) >= 1e-8
        oks.append(report.ok and report.margin_phi <= -1e-8
                   and report.margin_observer <= -1e-8 and pd_ok)
        details.append(f"a={sc.cfg.a}: phi={report.margin_phi:.2e}, obs={report.margin_observer:.2e}")
    _report(3, all(oks), "; ".join(details) + " (independent re-check from file)")


def test_criterion_4_transformation_equivalence(paper15):
    sc = paper15
    horizon = 20.0
    ff = run_feedforward(sc.plant, sc.exo, sc.maps, sc.cert.k_row, horizon, record_eps=True)
    eps0 = sc.plant.w0 - sc.maps.gamma.values @ sc.exo.p0
    oracle = run_epsilon_oracle(sc.cfg.a, sc.cfg.tau, sc.cfg.grid_m, sc.cfg.dt,
                                sc.cert.k_row, sc.maps.ff_row, sc.exo, eps0, horizon,
                                record_eps=True)
    gap = float(np.abs(ff.eps_grids - oracle.eps_grids).max())
    _report(4, gap <= 1e-3, f"sup-norm transform gap over [0,20] = {gap:.2e} (<=1e-3)")


def test_criterion_5_observer_and_control_decay(paper15, paper15_run):
    sc, run = paper15, paper15_run
    obs_rate = estimate_decay(run.t, run.diagnostics["norm_eps_tilde"], (0.5, 4.0))
    gap_rate = estimate_decay(run.t, run.diagnostics["u_gap"], (2.0, 55.0), envelope=True)
    ok = obs_rate >= 0.5 * sc.cfg.delta and gap_rate > 0.0
    _report(5, ok,
            f"observer-error rate {obs_rate:.2f} (>= {0.5 * sc.cfg.delta}); "
            f"control-gap rate {gap_rate:.3f} (> 0)")


def test_criterion_6_function_equation_residuals(paper15, paper05):
    oks, notes = [], []
    for sc in (paper15, paper05):
        maps, inj, m = sc.maps, sc.injection, sc.cfg.grid_m
        r_gamma = ivp_residual(maps.gamma.values,
                               regulator_rhs(maps.gamma, sc.cfg.a, sc.exo.g_matrix,
                                             sc.plant.d1_nodes), m)
        r_g = ivp_residual(maps.g.values, decoupler_rhs(maps.g, sc.cfg.a, sc.cfg.omega,
                                                        inj.values), m)
        r_f = ivp_residual(maps.f.values, controller_rhs(maps.f, sc.cfg.a, inj.values), m)
        b_g = max(
            np.abs(maps.g.derivs[0]).max(),
            np.abs(maps.g.derivs[-1] + np.array([1.0, 0.0]) @ expm2(
                rotation_generator(sc.cfg.omega), -sc.cfg.tau)).max(),
        )
        ident = np.abs(maps.g.values @ np.linalg.inv(maps.harmonic.transform)
                       - maps.f.values).max()
        oks.append(max(r_gamma, r_g, r_f) <= 1e-6 and b_g <= 1e-8 and ident <= 1e-6)
        notes.append(f"a={sc.cfg.a}: resid={max(r_gamma, r_g, r_f):.1e}, "
                     f"bnd={b_g:.1e}, map-identity={ident:.1e}")
    for omega in (0.1, 0.5, 1.0, 5.0):
        sol = solve_observer_decoupler(paper15.cfg.a, omega, paper15.cfg.tau,
                                       paper15.injection, paper15.cfg.grid_m)
        oks.append(check_observable(omega, sol.g0))
    _report(6, all(oks), "; ".join(notes) + "; observability at omega in {0.1,0.5,1,5}")


def test_criterion_7_adaptive_observer_suite():
    dt, horizon = 1e-3, 100.0
    oks, notes = [], []
    for omega in (0.3, 0.5, 1.0):
        obs = AdaptiveObserver(0.5, 5.0, 10.0)
        for k in range(int(round(horizon / dt))):
            t = k * dt
            obs.step(np.cos(omega * t), np.cos(omega * (t + dt)), dt)
        theta = omega ** 2
        rel = abs(obs.theta - theta) / theta
        oks.append(rel <= 0.10)
        notes.append(f"w={omega}: rel err {rel:.1e}")
    idle = AdaptiveObserver(0.5, 5.0, 10.0)
    for _ in range(2000):
        idle.step(0.0, 0.0, dt)
    zero_ok = (idle.xi, idle.chi1, idle.phi, idle.theta) == (0.0, 0.0, 0.0, 0.0)
    oks.append(zero_ok)
    _report(7, all(oks), "; ".join(notes) + f"; zero-input stays exactly zero: {zero_ok}")


def test_criterion_8_numerical_kernels():
    rng = np.random.default_rng(2024)
    m = rng.standard_normal((8, 8))
    m = 0.5 * (m + m.T)
    w, v = sym_eig(m)
    eig_err = np.abs((v * w) @ v.T - m).max() / np.linalg.norm(m)

    sc_mat = companion_generator(0.25)
    expm_err = np.abs(expm2(sc_mat, 0.2) - expm_taylor(sc_mat, 0.2)).max()

    a = rng.standard_normal((3, 3))
    a -= (np.linalg.eigvals(a).real.max() + 1.0) * np.eye(3)
    q = lyap_solve(a, np.eye(3))
    lyap_err = np.abs(a.T @ q + q @ a + np.eye(3)).max()

    x = np.linspace(0.0, 1.0, 101)
    simpson_err = abs(quad(x ** 3) - 0.25)

    spec = quiet_plant(0.0, 0.0, 100, 1e-3, w0=1.0 + np.cos(2.0 * np.pi * x))
    sim = PlantSimulator(spec, ExoSpec.canonical(1.0, np.zeros(2), np.zeros(2)))
    state = sim.initial_state()
    drift = 0.0
    prev = quad(state.w)
    for _ in range(200):
        state = sim.step_plant(state, 0.0)
        cur = quad(state.w)
        drift = max(drift, abs(cur - prev))
        prev = cur

    ok = (eig_err <= 1e-9 and expm_err <= 1e-12 and lyap_err <= 1e-9
          and simpson_err <= 1e-13 and drift <= 1e-10)
    _report(8, ok,
            f"eig {eig_err:.1e} (<=1e-9); expm {expm_err:.1e} (<=1e-12); "
            f"lyap {lyap_err:.1e} (<=1e-9); simpson-cubic {simpson_err:.1e}; "
            f"mass drift {drift:.1e}/step (<=1e-10)")


def test_criterion_9_byte_identical_runs(paper15, tmp_path):
    outs = []
    for run_dir in ("first", "second"):
        run_scenario(paper15.cfg, tmp_path / run_dir)
        outs.append(tmp_path / run_dir)
    same_trace = (outs[0] / "trace.csv").read_bytes() == (outs[1] / "trace.csv").read_bytes()
    same_cert = (outs[0] / "certificate.txt").read_bytes() == (outs[1] / "certificate.txt").read_bytes()
    _report(9, same_trace and same_cert,
            f"trace bytes identical: {same_trace}; certificate bytes identical: {same_cert}")
