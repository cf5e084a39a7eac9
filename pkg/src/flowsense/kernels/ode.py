"""Adaptive Dormand-Prince 5(4) integrator for the sensor kinetics.

One source serves both backends: with numba enabled the functions below are
jit-compiled; otherwise they run as plain Python.  Two right-hand sides are
multiplexed through ``which``:

    which = 0   compartment state, 9 entries:  [a, B, C, D, S, W, X, Y, Z]
    which = 1   state + sensitivity, 18 entries: the above followed by
                [da/dA, dB/dA, ..., dZ/dA]

``a`` is the depleted near-surface analyte concentration; the outer
(bulk) concentration A enters through the transport exchange term.
Parameters arrive packed in a flat float64 array (see ``pack_params``)
so the compiled signature stays simple.

Step control: embedded 4th-order error estimate, RMS norm against
atol + rtol*|y|, safety 0.9, growth clamped to [0.2, 5].  Dense output is
cubic Hermite on the accepted step.  Status codes: 0 ok, 1 step
underflow, 2 non-finite state, 3 step budget exhausted.
"""

import numpy as np

from ..backend import njit

# parameter pack layout
P_H0 = 0       # inner-compartment height, m
P_GAMMA = 1    # diffusion constant, m^2/s
P_AOUT = 2     # outer-compartment concentration, mol/m^3
P_F = 3        # f1..f7  -> indices 3..9
P_R = 10       # r1..r7  -> indices 10..16
N_PARAMS = 17

# Dormand-Prince coefficients
_C2, _C3, _C4, _C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
_A21 = 0.2
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


def pack_params(h0: float, gamma: float, a_outer: float, rates) -> np.ndarray:
    par = np.empty(N_PARAMS)
    par[P_H0] = h0
    par[P_GAMMA] = gamma
    par[P_AOUT] = a_outer
    par[P_F:P_F + 7] = rates.forward()
    par[P_R:P_R + 7] = rates.backward()
    return par


@njit(cache=True)
def _rhs(which, y, par, M, rw, out):
    h0 = par[P_H0]
    gamma = par[P_GAMMA]
    A = par[P_AOUT]
    f1, f2, f3, f4, f5, f6, f7 = (par[P_F], par[P_F + 1], par[P_F + 2], par[P_F + 3],
                                  par[P_F + 4], par[P_F + 5], par[P_F + 6])
    r1, r2, r3, r4, r5, r6, r7 = (par[P_R], par[P_R + 1], par[P_R + 2], par[P_R + 3],
                                  par[P_R + 4], par[P_R + 5], par[P_R + 6])
    a = y[0]
    B = y[1]; C = y[2]; D = y[3]; S = y[4]; W = y[5]; X = y[6]; Yc = y[7]; Z = y[8]

    rw[0] = f1 * a * B - r1 * W
    rw[1] = f2 * a * C - r2 * X
    rw[2] = f3 * W * C - r3 * Yc
    rw[3] = f4 * X * B - r4 * Yc
    rw[4] = f5 * C * S - r5 * D
    rw[5] = f6 * a * D - r6 * Z
    rw[6] = f7 * X * S - r7 * Z

    qdotu = f1 * B + f2 * C + f6 * D
    pdotu = r1 * W + r2 * X + r6 * Z
    exch = gamma / (h0 * h0)
    out[0] = exch * (A - a) - (a * qdotu - pdotu) / h0
    for i in range(8):
        acc = 0.0
        for j in range(7):
            acc += M[i, j] * rw[j]
        out[1 + i] = acc

    if which == 1:
        sa = y[9]
        sB = y[10]; sC = y[11]; sD = y[12]; sS = y[13]
        sW = y[14]; sX = y[15]; sY = y[16]; sZ = y[17]
        # directional derivative of the rate vector along (sa, su)
        rw[0] = f1 * (a * sB + sa * B) - r1 * sW
        rw[1] = f2 * (a * sC + sa * C) - r2 * sX
        rw[2] = f3 * (W * sC + sW * C) - r3 * sY
        rw[3] = f4 * (X * sB + sX * B) - r4 * sY
        rw[4] = f5 * (C * sS + sC * S) - r5 * sD
        rw[5] = f6 * (a * sD + sa * D) - r6 * sZ
        rw[6] = f7 * (X * sS + sX * S) - r7 * sZ
        qdotsu = f1 * sB + f2 * sC + f6 * sD
        pdotsu = r1 * sW + r2 * sX + r6 * sZ
        out[9] = exch * (1.0 - sa) - (sa * qdotu + a * qdotsu - pdotsu) / h0
        for i in range(8):
            acc = 0.0
            for j in range(7):
                acc += M[i, j] * rw[j]
            out[10 + i] = acc


@njit(cache=True)
def _hermite(theta, h, y0, y1, f0, f1, out):
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + theta
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    for i in range(y0.shape[0]):
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i]


@njit(cache=True)
def integrate_kinetics(which, y0, t_end, ts, par, M, rtol, atol, max_dt, max_steps, out):
    """Advance the system from t=0 to t_end, Hermite-sampling at ``ts``.

    ``ts`` must be sorted ascending within [0, t_end]; ``out`` has shape
    (len(ts), len(y0)).  Returns (status, t_reached).
    """
    n = y0.shape[0]
    y = y0.copy()
    ynew = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    ytmp = np.empty(n)
    rw = np.empty(7)

    t = 0.0
    isamp = 0
    nsamp = ts.shape[0]
    while isamp < nsamp and ts[isamp] <= t:
        for i in range(n):
            out[isamp, i] = y[i]
        isamp += 1

    _rhs(which, y, par, M, rw, k1)

    # initial step from the scaled magnitudes of y and f
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol[i] + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (k1[i] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if d0 < 1e-12 or d1 < 1e-12:
        h = 1e-6 * t_end
    else:
        h = 0.01 * d0 / d1
    if max_dt > 0.0 and h > max_dt:
        h = max_dt
    if h > t_end:
        h = t_end
    if h <= 0.0:
        h = 1e-6 * t_end

    steps = 0
    while t < t_end:
        if steps >= max_steps:
            return 3, t
        steps += 1
        if max_dt > 0.0 and h > max_dt:
            h = max_dt
        if t + h > t_end:
            h = t_end - t
        if h <= 1e-14 * max(1.0, abs(t)):
            return 1, t

        for i in range(n):
            ytmp[i] = y[i] + h * _A21 * k1[i]
        _rhs(which, ytmp, par, M, rw, k2)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        _rhs(which, ytmp, par, M, rw, k3)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        _rhs(which, ytmp, par, M, rw, k4)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        _rhs(which, ytmp, par, M, rw, k5)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                  + _A64 * k4[i] + _A65 * k5[i])
        _rhs(which, ytmp, par, M, rw, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                                  + _B5 * k5[i] + _B6 * k6[i])
        _rhs(which, ynew, par, M, rw, k7)

        finite = True
        errnorm = 0.0
        for i in range(n):
            if not np.isfinite(ynew[i]):
                finite = False
                break
            err = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i]
                       + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
            ya = abs(y[i])
            yb = abs(ynew[i])
            sc = atol[i] + rtol * (ya if ya > yb else yb)
            errnorm += (err / sc) ** 2
        if not finite:
            h *= 0.2
            continue
        errnorm = np.sqrt(errnorm / n)

        if errnorm <= 1.0:
            tnew = t + h
            while isamp < nsamp and ts[isamp] <= tnew:
                theta = (ts[isamp] - t) / h
                _hermite(theta, h, y, ynew, k1, k7, out[isamp])
                isamp += 1
            t = tnew
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]  # first-same-as-last
            if errnorm < 1e-300:
                fac = 5.0
            else:
                fac = 0.9 * errnorm ** -0.2
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
            h *= fac
        else:
            fac = 0.9 * errnorm ** -0.2
            if fac < 0.2:
                fac = 0.2
            elif fac > 1.0:
                fac = 1.0
            h *= fac

    while isamp < nsamp:  # samples at exactly t_end
        for i in range(n):
            out[isamp, i] = y[i]
        isamp += 1
    return 0, t
