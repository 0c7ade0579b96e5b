import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from apcsim.errors import ConfigError
from apcsim.kinetics import (BehaviorParams, Ramp, TransitionSchedule, imitation_F, imitation_G,
                             imitation_H, reaction_rhs, reaction_rhs_pde, xi, zeta)

P = BehaviorParams()
density = st.floats(0.0, 1.0, allow_nan=False)

# (rho1, rho2, rho3, F, G, H) for the default rates, from 40-digit mpmath
IMITATION_ORACLE = [
    (0.3, 0.2, 0.1, 0.0017892466277671196111, 0.012863607476206154624, -0.0087742511310163981452),
    (0.05, 0.6, 0.25, 0.0072003502250349456998, 0.020849363349797711534, -0.076085619442979426486),
    (0.0, 0.4, 0.4, 0.0, 0.0, -0.0079800249999220700684),
    (0.7, 0.0, 0.01, 8.5452521968419189381e-7, 0.0, 0.0),
    (0.125, 0.125, 0.125, 0.0046501499952382464049, 0.0054251749944446208057, -0.00077502499920637440081),
]


def test_default_rates():
    assert (P.b1, P.b2, P.b3, P.b4, P.c1, P.c2) == (0.1, 0.2, 0.001, 0.001, 0.1, 0.4)
    assert (P.alpha13, P.alpha12, P.alpha23, P.alpha32) == (0.6, 0.7, 0.6, 0.7)
    assert (P.delta1, P.delta2, P.delta3) == (0.0, 0.0, 0.0)
    assert P.epsilon == 1e-3


def test_xi_values():
    assert xi(0.0) == 0.0
    assert xi(1.0) == 0.5
    assert xi(3.0) == pytest.approx(0.9)
    np.testing.assert_allclose(xi(np.array([0.0, 1.0, 2.0])), [0.0, 0.5, 0.8])


@given(st.floats(0.0, 1e6))
def test_xi_bounded(w):
    assert 0.0 <= xi(w) <= 1.0


@given(st.floats(0.0, 1e3), st.floats(0.0, 1e3))
def test_xi_monotone(a, b):
    lo, hi = sorted((a, b))
    assert xi(lo) <= xi(hi)


def test_zeta_ramp():
    assert zeta(0.5, 1, 3) == 0.0
    assert zeta(1, 1, 3) == 0.0
    assert zeta(2, 1, 3) == pytest.approx(0.5)
    assert zeta(3, 1, 3) == 1.0
    assert zeta(100, 20, 70) == 1.0
    with pytest.raises(ValueError):
        zeta(1.0, 2.0, 2.0)


@given(st.floats(-10, 100), st.floats(-10, 100))
def test_zeta_monotone(a, b):
    lo, hi = sorted((a, b))
    assert zeta(lo, 20, 70) <= zeta(hi, 20, 70)


def test_ramp_kinds():
    assert Ramp.constant(0.3)(12.0) == 0.3
    r = Ramp.smoothstep(20, 70)
    assert r(45) == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        Ramp("linear")
    with pytest.raises(ConfigError):
        Ramp.constant(1.5)
    with pytest.raises(ConfigError):
        Ramp.smoothstep(3, 1)


@pytest.mark.parametrize("r1, r2, r3, F, G, H", IMITATION_ORACLE)
def test_imitation_terms_match_extended_precision(r1, r2, r3, F, G, H):
    assert imitation_F(r1, r3, P) == pytest.approx(F, rel=1e-14, abs=1e-300)
    assert imitation_G(r1, r2, P) == pytest.approx(G, rel=1e-14, abs=1e-300)
    assert imitation_H(r2, r3, P) == pytest.approx(H, rel=1e-14, abs=1e-300)


@given(density, density)
def test_imitation_rates_nonnegative(a, b):
    assert imitation_F(a, b, P) >= 0
    assert imitation_G(a, b, P) >= 0


@given(density)
def test_imitation_h_balanced(r):
    # equal populations: control wins only if alpha23 > alpha32
    assert imitation_H(r, r, P) <= 0


def test_negative_inputs_clamped():
    assert imitation_F(-0.1, 0.5, P) == 0.0
    assert imitation_G(0.5, -1e-9, P) == 0.0


def rhs_by_hand(s, gam, phi, p):
    """Term-by-term rates written from the compartment flow diagram."""
    r1, r2, r3, r4, r5, _ = s
    F = imitation_F(r1, r3, p)
    G = imitation_G(r1, r2, p)
    H = imitation_H(r2, r3, p)
    flows = {  # (source, destination): rate ; index 5 collects deaths
        (3, 0): gam * r4, (0, 2): p.b1 * r1 + F, (0, 1): p.b2 * r1 + G,
        (2, 0): p.b3 * r3, (1, 0): p.b4 * r2, (1, 2): p.c1 * r2 + H, (2, 1): p.c2 * r3,
        (2, 4): phi * r3, (0, 5): p.delta1 * r1, (1, 5): p.delta2 * r2, (2, 5): p.delta3 * r3,
    }
    out = np.zeros(6)
    for (a, b), rate in flows.items():
        out[a] -= rate
        out[b] += rate
    return out


@given(st.lists(density, min_size=6, max_size=6), st.floats(0, 1), st.floats(0, 1),
       st.floats(0, 0.1))
def test_rhs_matches_flow_diagram(s, gam, phi, delta):
    p = P.replace(delta1=delta, delta2=2 * delta, delta3=delta / 2)
    sched = TransitionSchedule(Ramp.constant(gam), Ramp.constant(phi))
    np.testing.assert_allclose(reaction_rhs(0.0, s, sched, p), rhs_by_hand(s, gam, phi, p),
                               rtol=1e-12, atol=1e-15)


@given(st.lists(density, min_size=6, max_size=6), st.floats(0, 0.2))
def test_rates_sum_to_zero(s, delta):
    p = P.replace(delta1=delta, delta2=delta, delta3=delta)
    sched = TransitionSchedule(Ramp.smoothstep(1, 3), Ramp.smoothstep(20, 70))
    f = reaction_rhs(30.0, s, sched, p)
    assert abs(math.fsum(f)) <= 1e-15


@given(st.lists(density, min_size=6, max_size=6), st.integers(0, 5))
def test_quasi_positive(s, k):
    # an empty compartment cannot be drained
    s = list(s)
    s[k] = 0.0
    sched = TransitionSchedule(Ramp.constant(1.0), Ramp.constant(0.5))
    assert reaction_rhs(0.0, s, sched, P.replace(delta1=0.1))[k] >= 0.0


def test_pde_rates_match_ode_per_cell():
    rng = np.random.default_rng(3)
    rho = rng.uniform(0, 0.5, size=(5, 4, 3))
    sched = TransitionSchedule(Ramp.smoothstep(1, 3), Ramp.smoothstep(20, 70))
    got = reaction_rhs_pde(25.0, rho, sched, P)
    for j in range(4):
        for i in range(3):
            want = reaction_rhs(25.0, list(rho[:, j, i]) + [0.0], sched, P)[:5]
            np.testing.assert_allclose(got[:, j, i], want, rtol=1e-15, atol=1e-18)


def test_wrong_lengths_rejected():
    with pytest.raises(ValueError):
        reaction_rhs(0.0, [0.0] * 5, TransitionSchedule(), P)
    with pytest.raises(ValueError):
        reaction_rhs_pde(0.0, np.zeros((6, 2)), TransitionSchedule(), P)


@pytest.mark.parametrize("bad", [dict(b1=-0.1), dict(c2=float("nan")), dict(epsilon=0.0),
                                 dict(epsilon=0.5)])
def test_param_validation(bad):
    with pytest.raises(ConfigError):
        BehaviorParams(**bad)


def test_large_epsilon_warns():
    with pytest.warns(UserWarning, match="epsilon"):
        BehaviorParams(epsilon=0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        BehaviorParams(epsilon=0.01)
