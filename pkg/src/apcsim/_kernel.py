"""Compiled multi-step driver for the finite-volume update.

Performs exactly the arithmetic of :func:`apcsim.solver.step`, fused
into one pass per step so that long runs avoid per-step Python and
temporary-array overhead.  Equivalence with the numpy path is covered by
the test suite.
"""
import numba
import numpy as np

from .kinetics import reaction_terms

_terms = numba.njit(cache=True, inline="always")(reaction_terms)

# stats slots
OUTFLOW, MORTALITY, CLIPPED, CLIP_COUNT, CLAMP_COUNT, NEG_INPUTS, MIN_VALUE, MAX_DU, FAIL_STEP, FAIL_VALUE, \
    MASS = range(11)
N_STATS = 11

_OPEN, _WALL, _EXIT = 0, 1, 2


@numba.njit(cache=True)
def _mass(rho):
    # Neumaier compensated sum: step-to-step mass changes are compared
    # at the 1e-14 level, below the error of a naive running sum
    total = 0.0
    comp = 0.0
    for v in rho.ravel():
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp


@numba.njit(cache=True)
def advance(rho, buf, fx, fy, active, kind_x, kind_y, ufx, ufy, d, v2max, v3max, clamp, vout,
            rates, dt, dx, dy, gammas, phis, clip_tol, abort_tol):
    """Advance ``rho`` in place by ``len(gammas)`` steps.

    ``gammas``/``phis`` hold the schedule values at the start of each
    step.  Returns ``(steps_done, stats)``; on abort ``steps_done`` is the
    index of the failing step and ``rho`` holds the last good state.
    """
    ns, ny, nx = rho.shape
    b1, b2, b3, b4, c1, c2, m1, m2, m3, a13, a12, a23, a32, eps = rates
    area = dx * dy
    stats = np.zeros(N_STATS)
    stats[MIN_VALUE] = np.inf
    stats[MAX_DU] = -np.inf
    stats[FAIL_STEP] = -1.0

    mass_old = _mass(rho) * area
    V = np.zeros((2, ny, nx))

    for n in range(gammas.shape[0]):
        gam = gammas[n]
        ph = phis[n]
        exit_rate = 0.0
        for j in range(ny):
            for i in range(nx):
                tot = 0.0
                for s in range(ns):
                    tot += rho[s, j, i]
                    if rho[s, j, i] < 0.0:
                        stats[NEG_INPUTS] += 1
                slack = 1.0 - tot
                if clamp and slack < 0.0:
                    slack = 0.0
                    if active[j, i]:
                        stats[CLAMP_COUNT] += 1
                V[0, j, i] = v2max * slack
                V[1, j, i] = v3max * slack

        # vertical faces
        for s in range(ns):
            for j in range(ny):
                for i in range(nx + 1):
                    k = kind_x[j, i]
                    if k == _OPEN:
                        f = -d[s] * (rho[s, j, i] - rho[s, j, i - 1]) / dx
                        if s == 1 or s == 2:
                            aL = V[s - 1, j, i - 1] * ufx[j, i]
                            aR = V[s - 1, j, i] * ufx[j, i]
                            f += max(aL, 0.0) * rho[s, j, i - 1] + min(aR, 0.0) * rho[s, j, i]
                        fx[s, j, i] = f
                    elif k == _EXIT:
                        if i == 0:
                            fx[s, j, i] = -rho[s, j, 0] * vout[s]
                            exit_rate += rho[s, j, 0] * vout[s] * dy
                        else:
                            fx[s, j, i] = rho[s, j, nx - 1] * vout[s]
                            exit_rate += rho[s, j, nx - 1] * vout[s] * dy
                    else:
                        fx[s, j, i] = 0.0
        # horizontal faces
        for s in range(ns):
            for j in range(ny + 1):
                for i in range(nx):
                    k = kind_y[j, i]
                    if k == _OPEN:
                        f = -d[s] * (rho[s, j, i] - rho[s, j - 1, i]) / dy
                        if s == 1 or s == 2:
                            aL = V[s - 1, j - 1, i] * ufy[j, i]
                            aR = V[s - 1, j, i] * ufy[j, i]
                            f += max(aL, 0.0) * rho[s, j - 1, i] + min(aR, 0.0) * rho[s, j, i]
                        fy[s, j, i] = f
                    elif k == _EXIT:
                        if j == 0:
                            fy[s, j, i] = -rho[s, 0, i] * vout[s]
                            exit_rate += rho[s, 0, i] * vout[s] * dx
                        else:
                            fy[s, j, i] = rho[s, ny - 1, i] * vout[s]
                            exit_rate += rho[s, ny - 1, i] * vout[s] * dx
                    else:
                        fy[s, j, i] = 0.0

        mort = 0.0
        low = np.inf
        for j in range(ny):
            for i in range(nx):
                if not active[j, i]:
                    for s in range(ns):
                        buf[s, j, i] = 0.0
                    continue
                r1 = max(rho[0, j, i], 0.0)
                r2 = max(rho[1, j, i], 0.0)
                r3 = max(rho[2, j, i], 0.0)
                r4 = max(rho[3, j, i], 0.0)
                r5 = max(rho[4, j, i], 0.0)
                R = _terms(r1, r2, r3, r4, r5, gam, ph,
                           b1, b2, b3, b4, c1, c2, m1, m2, m3, a13, a12, a23, a32, eps)
                mort += m1 * r1 + m2 * r2 + m3 * r3
                for s in range(ns):
                    div = (fx[s, j, i + 1] - fx[s, j, i]) / dx + (fy[s, j + 1, i] - fy[s, j, i]) / dy
                    v = rho[s, j, i] + dt * (-div + R[s])
                    buf[s, j, i] = v
                    if v != v or abs(v) == np.inf:
                        low = np.nan
                    elif v < low:
                        low = v

        if not np.isfinite(low) or low < abort_tol:
            stats[FAIL_STEP] = n
            stats[FAIL_VALUE] = low
            return n, stats
        if low < stats[MIN_VALUE]:
            stats[MIN_VALUE] = low

        for s in range(ns):
            for j in range(ny):
                for i in range(nx):
                    v = buf[s, j, i]
                    if v < 0.0 and v >= -clip_tol:
                        stats[CLIPPED] -= v * area
                        stats[CLIP_COUNT] += 1
                        v = 0.0
                    rho[s, j, i] = v
        mass_new = _mass(rho) * area
        stats[OUTFLOW] += dt * exit_rate
        stats[MORTALITY] += dt * (mort * area)
        if mass_new - mass_old > stats[MAX_DU]:
            stats[MAX_DU] = mass_new - mass_old
        mass_old = mass_new
    stats[MASS] = mass_old
    return gammas.shape[0], stats
