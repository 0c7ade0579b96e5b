"""Acceptance criteria, one test each; every test prints a PASS/FAIL line
with the measured value (shown even without ``-s``)."""
import math
import time

import numpy as np
import pytest

from apcsim.ode import OdeRun, conservation_report, integrate
from apcsim.validate import check_diffusion_oracle, check_divergence_builtin, zero_transport_difference
from test_ode import observed_order


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:>2}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        return ok
    return emit


def test_01_ode_conservation(report):
    start = time.perf_counter()
    traj = integrate(OdeRun(t1=250.0, dt=0.01, method="rk4"))
    elapsed = time.perf_counter() - start
    drift = conservation_report(traj)
    ok = drift <= 1e-10 and elapsed < 5.0
    assert report(1, "ODE conservation", ok, f"max drift {drift:.2e} (<= 1e-10), {elapsed:.2f} s (< 5 s)")


def test_02_pde_positivity(builtin_runs, report):
    res = builtin_runs["scenario1"]
    g = res.config.geometry
    assert (g.nx, g.ny, res.config.control.cfl_safety, res.final.t) == (100, 50, 0.5, 250.0)
    ok = res.min_value >= -1e-12 and res.wall_time < 300
    assert report(2, "PDE positivity", ok,
                  f"min density {res.min_value:.3e} (>= -1e-12), {res.wall_time:.1f} s (< 300 s)")


def test_03_mass_bounded_and_monotone(builtin_runs, report):
    res = builtin_runs["scenario1"]
    U = res.column("U")
    ok = U.min() >= 0 and U.max() <= 1 + 1e-12 and res.max_mass_increase <= 1e-14
    assert report(3, "L1 bound and monotonicity", ok,
                  f"U in [{U.min():.4g}, {U.max():.15g}], max step increase {res.max_mass_increase:.2e} "
                  f"(<= 1e-14)")


def test_04_ledger_closure(builtin_runs, report):
    led = builtin_runs["scenario1"].ledger
    err = led.closure_error()
    ok = err <= 1e-10
    assert report(4, "Ledger closure", ok,
                  f"interior {led.interior_mass:.6f} + outflow {led.exit_outflow_cum:.6f} + mortality "
                  f"{led.mortality_cum:.3g} vs 1: relative error {err:.2e} (<= 1e-10)")


def test_05_zero_transport_oracle(report):
    diff = zero_transport_difference()
    assert report(5, "Zero-transport oracle", diff <= 1e-6, f"max |PDE - ODE| at t=10: {diff:.2e} (<= 1e-6)")


def test_06_diffusion_oracle(report):
    c = check_diffusion_oracle(trials=100)
    assert report(6, "Diffusion dense-matrix oracle", c.passed, f"max error {c.value:.2e} over 100 grids (<= 1e-14)")


def test_07_alert_then_panic_dominance(builtin_runs, report):
    res = builtin_runs["scenario1"]
    t, U1, U2, U3 = (res.column(k) for k in ("t", "U1", "U2", "U3"))
    early = np.nonzero((U1 > U2) & (t > 0) & (t <= 50))[0]
    t_star = t[early[0]] if len(early) else math.nan
    ok = len(early) > 0 and U2[-1] > U3[-1]
    detail = (f"t*={t_star:g}: U1={U1[early[0]]:.4f} > U2={U2[early[0]]:.4f}; " if len(early) else "no t* found; ")
    assert report(7, "Alert first, panic over control at t=250", ok,
                  detail + f"U2(250)={U2[-1]:.4f} > U3(250)={U3[-1]:.4f}")


def test_08_exit_congestion_ordering(builtin_runs, report):
    peak = {k: r.peak_exit_density(2) for k, r in builtin_runs.items()}
    p1, p2, p3 = peak["scenario1"], peak["scenario2"], peak["scenario3"]
    ok = p1 >= p2 >= p3
    assert report(8, "Exit congestion S1 >= S2 >= S3", ok,
                  f"peak panic density near exit at t=250: {p1:.3e}, {p2:.3e}, {p3:.3e}")


def test_09_direction_divergence(report):
    c = check_divergence_builtin()
    assert report(9, "Direction field divergence", c.passed, f"max div {c.value:.3e} (<= 1e-8); {c.detail}")


def test_10_rk4_order(report):
    order = observed_order("rk4")
    assert report(10, "RK4 order", 3.7 <= order <= 4.3, f"observed order {order:.3f} (in [3.7, 4.3])")
