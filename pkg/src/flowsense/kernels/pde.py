"""Method-of-lines kernels for the chamber advection-diffusion problem.

State layout (flat float64 vector):

    [ A interior, row-major: i = 1..P-1, j = 1..Q-1, index (i-1)*(Q-1)+(j-1) ]
    [ surface species: 8 per sensor node, nodes in ascending i within sensor ]

Boundary values are eliminated through the closures (inlet Dirichlet,
zero-gradient outlet/ceiling, reactive or insulating floor) inside the
right-hand side, so only interior A values and surface species are state.

The advection difference is selectable: ``relaxed=0`` uses the one-sided
downstream difference (A[i+1]-A[i])/dy, which keeps the semi-discrete
system quasi-positive only under dy < gamma/vbar; ``relaxed=1`` uses
upstream differencing (A[i]-A[i-1])/dy, quasi-positive unconditionally.

Time stepping is an embedded Bogacki-Shampine 3(2) pair with the step
capped by the diffusion CFL bound supplied by the caller.  The loop
kernels are the numba path (compiled nogil so independent solves can run
on threads); ``rhs_numpy`` is the vectorized fallback used when
FLOWSENSE_NUMBA=0.
"""

import numpy as np

from ..backend import NUMBA_ENABLED, njit


@njit(cache=True, nogil=True, fastmath=True)
def rhs_loop(y, out, a0buf, P, Q, dy, dz, gamma, a_inlet, vj, relaxed,
             surf_i, q8, p8, fw, rv, M):
    nQ = Q - 1
    nint = (P - 1) * nQ
    dzg = dz / gamma
    cyy = gamma / (dy * dy)
    czz = gamma / (dz * dz)
    inv_dy = 1.0 / dy

    # floor closure: default insulating (ghost = first interior row) ...
    for i in range(1, P):
        a0buf[i] = y[(i - 1) * nQ]
    # ... overridden on sensor nodes by the reactive balance, and the
    # surface ODEs advanced with that reconstructed wall concentration
    nsurf = surf_i.shape[0]
    for s in range(nsurf):
        i = surf_i[s]
        base = nint + 8 * s
        qu = 0.0
        pu = 0.0
        for c in range(8):
            qu += q8[c] * y[base + c]
            pu += p8[c] * y[base + c]
        a0 = (y[(i - 1) * nQ] + dzg * pu) / (1.0 + dzg * qu)
        a0buf[i] = a0

        B = y[base + 0]; C = y[base + 1]; D = y[base + 2]; S = y[base + 3]
        W = y[base + 4]; X = y[base + 5]; Yc = y[base + 6]; Z = y[base + 7]
        r0 = fw[0] * a0 * B - rv[0] * W
        r1 = fw[1] * a0 * C - rv[1] * X
        r2 = fw[2] * W * C - rv[2] * Yc
        r3 = fw[3] * X * B - rv[3] * Yc
        r4 = fw[4] * C * S - rv[4] * D
        r5 = fw[5] * a0 * D - rv[5] * Z
        r6 = fw[6] * X * S - rv[6] * Z
        for c in range(8):
            out[base + c] = (M[c, 0] * r0 + M[c, 1] * r1 + M[c, 2] * r2
                             + M[c, 3] * r3 + M[c, 4] * r4 + M[c, 5] * r5
                             + M[c, 6] * r6)

    for i in range(1, P):
        row = (i - 1) * nQ
        first_i = i == 1
        last_i = i == P - 1

        # j = 1 (floor ghost from a0buf)
        k = row
        c = y[k]
        left = a_inlet if first_i else y[k - nQ]
        right = c if last_i else y[k + nQ]
        adv = (c - left) if relaxed == 1 else (right - c)
        out[k] = (cyy * (left - 2.0 * c + right)
                  + czz * (a0buf[i] - 2.0 * c + y[k + 1])
                  - adv * vj[1] * inv_dy)

        # j = 2 .. Q-2 (pure interior)
        if first_i:
            if relaxed == 1:
                for j in range(2, Q - 1):
                    k = row + j - 1
                    c = y[k]
                    out[k] = (cyy * (a_inlet - 2.0 * c + y[k + nQ])
                              + czz * (y[k - 1] - 2.0 * c + y[k + 1])
                              - (c - a_inlet) * vj[j] * inv_dy)
            else:
                for j in range(2, Q - 1):
                    k = row + j - 1
                    c = y[k]
                    out[k] = (cyy * (a_inlet - 2.0 * c + y[k + nQ])
                              + czz * (y[k - 1] - 2.0 * c + y[k + 1])
                              - (y[k + nQ] - c) * vj[j] * inv_dy)
        elif last_i:
            if relaxed == 1:
                for j in range(2, Q - 1):
                    k = row + j - 1
                    c = y[k]
                    out[k] = (cyy * (y[k - nQ] - c)
                              + czz * (y[k - 1] - 2.0 * c + y[k + 1])
                              - (c - y[k - nQ]) * vj[j] * inv_dy)
            else:
                for j in range(2, Q - 1):
                    k = row + j - 1
                    c = y[k]
                    out[k] = (cyy * (y[k - nQ] - c)
                              + czz * (y[k - 1] - 2.0 * c + y[k + 1]))
        else:
            if relaxed == 1:
                for j in range(2, Q - 1):
                    k = row + j - 1
                    c = y[k]
                    out[k] = (cyy * (y[k - nQ] - 2.0 * c + y[k + nQ])
                              + czz * (y[k - 1] - 2.0 * c + y[k + 1])
                              - (c - y[k - nQ]) * vj[j] * inv_dy)
            else:
                for j in range(2, Q - 1):
                    k = row + j - 1
                    c = y[k]
                    out[k] = (cyy * (y[k - nQ] - 2.0 * c + y[k + nQ])
                              + czz * (y[k - 1] - 2.0 * c + y[k + 1])
                              - (y[k + nQ] - c) * vj[j] * inv_dy)

        # j = Q-1 (ceiling ghost equals centre)
        k = row + nQ - 1
        c = y[k]
        left = a_inlet if first_i else y[k - nQ]
        right = c if last_i else y[k + nQ]
        adv = (c - left) if relaxed == 1 else (right - c)
        out[k] = (cyy * (left - 2.0 * c + right)
                  + czz * (y[k - 1] - c)
                  - adv * vj[Q - 1] * inv_dy)


def rhs_numpy(y, out, a0buf, P, Q, dy, dz, gamma, a_inlet, vj, relaxed,
              surf_i, q8, p8, fw, rv, M):
    """Vectorized transcription of ``rhs_loop`` (fallback backend)."""
    nQ = Q - 1
    nint = (P - 1) * nQ
    dzg = dz / gamma
    A = y[:nint].reshape(P - 1, nQ)

    a0 = A[:, 0].copy()  # insulating floor ghost, indexed by i-1
    dU = None
    if surf_i.shape[0]:
        U = y[nint:].reshape(-1, 8)
        qu = U @ q8
        pu = U @ p8
        a0_sens = (A[surf_i - 1, 0] + dzg * pu) / (1.0 + dzg * qu)
        a0[surf_i - 1] = a0_sens
        B, C, D, S, W, X, Yc, Z = U.T
        rates = np.stack([
            fw[0] * a0_sens * B - rv[0] * W,
            fw[1] * a0_sens * C - rv[1] * X,
            fw[2] * W * C - rv[2] * Yc,
            fw[3] * X * B - rv[3] * Yc,
            fw[4] * C * S - rv[4] * D,
            fw[5] * a0_sens * D - rv[5] * Z,
            fw[6] * X * S - rv[6] * Z,
        ])
        dU = (M @ rates).T

    # padded array with all closures applied
    Ap = np.empty((P + 1, Q + 1))
    Ap[1:P, 1:Q] = A
    Ap[0, :] = a_inlet
    Ap[P, 1:Q] = A[P - 2, :]
    Ap[1:P, Q] = A[:, Q - 2]
    Ap[1:P, 0] = a0
    Ap[P, 0] = Ap[P - 1, 0]
    Ap[P, Q] = Ap[P - 1, Q]

    cyy = gamma / (dy * dy)
    czz = gamma / (dz * dz)
    mid = Ap[1:P, 1:Q]
    left = Ap[0:P - 1, 1:Q]
    right = Ap[2:P + 1, 1:Q]
    down = Ap[1:P, 0:Q - 1]
    up = Ap[1:P, 2:Q + 1]
    v = vj[1:Q][None, :]
    if relaxed == 1:
        adv = (mid - left) * (v / dy)
    else:
        adv = (right - mid) * (v / dy)
    dA = cyy * (left - 2.0 * mid + right) + czz * (down - 2.0 * mid + up) - adv
    out[:nint] = dA.reshape(-1)
    if dU is not None:
        out[nint:] = dU.reshape(-1)
    a0buf[1:P] = a0
    return out


# Bogacki-Shampine 3(2) coefficients
_B1, _B2, _B3 = 2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0
_E1, _E2, _E3, _E4 = 5.0 / 72.0, -1.0 / 12.0, -1.0 / 9.0, 1.0 / 8.0


@njit(cache=True, nogil=True)
def _hermite_subset(theta, h, y0, y1, f0, f1, idxs, out, row):
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + theta
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    for n in range(idxs.shape[0]):
        k = idxs[n]
        out[row, n] = h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k]


@njit(cache=True, nogil=True)
def _hermite_full(theta, h, y0, y1, f0, f1, out, row):
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + theta
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    for k in range(y0.shape[0]):
        out[row, k] = h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k]


@njit(cache=True, nogil=True, fastmath=True)
def integrate_loop(y0, P, Q, dy, dz, gamma, a_inlet, vj, relaxed,
                   surf_i, q8, p8, fw, rv, M,
                   t_end, ts, rtol, atol, max_dt, max_steps,
                   dimer_idx, dimer_samples, store_snaps, snaps):
    """BS23 loop with CFL-capped adaptive steps (numba backend).

    Fills ``dimer_samples[m, :]`` with the dimer density of every surface
    node at sample time ts[m]; if ``store_snaps`` also fills ``snaps[m, :]``
    with the full state.  Returns (status, t_reached, min_state, n_steps)
    where min_state is the running minimum over all accepted states.
    """
    n = y0.shape[0]
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    a0buf = np.empty(P)

    t = 0.0
    isamp = 0
    nsamp = ts.shape[0]
    minval = 0.0
    for i in range(n):
        if y[i] < minval:
            minval = y[i]
    while isamp < nsamp and ts[isamp] <= t:
        _hermite_subset(0.0, 1.0, y, y, y, y, dimer_idx, dimer_samples, isamp)
        if store_snaps == 1:
            _hermite_full(0.0, 1.0, y, y, y, y, snaps, isamp)
        isamp += 1

    rhs_loop(y, k1, a0buf, P, Q, dy, dz, gamma, a_inlet, vj, relaxed,
             surf_i, q8, p8, fw, rv, M)
    h = max_dt * 1e-2
    if h > t_end:
        h = t_end

    steps = 0
    while t < t_end:
        if steps >= max_steps:
            return 3, t, minval, steps
        steps += 1
        if h > max_dt:
            h = max_dt
        if t + h > t_end:
            h = t_end - t
        if h <= 1e-14 * max(1.0, abs(t)):
            return 1, t, minval, steps

        for i in range(n):
            ytmp[i] = y[i] + (0.5 * h) * k1[i]
        rhs_loop(ytmp, k2, a0buf, P, Q, dy, dz, gamma, a_inlet, vj, relaxed,
                 surf_i, q8, p8, fw, rv, M)
        for i in range(n):
            ytmp[i] = y[i] + (0.75 * h) * k2[i]
        rhs_loop(ytmp, k3, a0buf, P, Q, dy, dz, gamma, a_inlet, vj, relaxed,
                 surf_i, q8, p8, fw, rv, M)
        for i in range(n):
            ynew[i] = y[i] + h * (_B1 * k1[i] + _B2 * k2[i] + _B3 * k3[i])
        rhs_loop(ynew, k4, a0buf, P, Q, dy, dz, gamma, a_inlet, vj, relaxed,
                 surf_i, q8, p8, fw, rv, M)

        errnorm = 0.0
        for i in range(n):
            err = h * (_E1 * k1[i] + _E2 * k2[i] + _E3 * k3[i] + _E4 * k4[i])
            ya = abs(y[i])
            yb = abs(ynew[i])
            sc = atol[i] + rtol * (ya if ya > yb else yb)
            errnorm += (err / sc) ** 2
        errnorm = np.sqrt(errnorm / n)
        if not np.isfinite(errnorm):
            h *= 0.2
            continue

        if errnorm <= 1.0:
            tnew = t + h
            while isamp < nsamp and ts[isamp] <= tnew:
                theta = (ts[isamp] - t) / h
                _hermite_subset(theta, h, y, ynew, k1, k4, dimer_idx,
                                dimer_samples, isamp)
                if store_snaps == 1:
                    _hermite_full(theta, h, y, ynew, k1, k4, snaps, isamp)
                isamp += 1
            t = tnew
            for i in range(n):
                yi = ynew[i]
                y[i] = yi
                k1[i] = k4[i]  # FSAL
                if yi < minval:
                    minval = yi
            if errnorm < 1e-300:
                fac = 5.0
            else:
                fac = 0.9 * errnorm ** (-1.0 / 3.0)
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
            h *= fac
        else:
            fac = 0.9 * errnorm ** (-1.0 / 3.0)
            if fac < 0.2:
                fac = 0.2
            elif fac > 1.0:
                fac = 1.0
            h *= fac

    while isamp < nsamp:
        _hermite_subset(1.0, 1.0, y, y, k1, k1, dimer_idx, dimer_samples, isamp)
        if store_snaps == 1:
            for k in range(n):
                snaps[isamp, k] = y[k]
        isamp += 1
    return 0, t, minval, steps


def integrate_python(y0, P, Q, dy, dz, gamma, a_inlet, vj, relaxed,
                     surf_i, q8, p8, fw, rv, M,
                     t_end, ts, rtol, atol, max_dt, max_steps,
                     dimer_idx, dimer_samples, store_snaps, snaps):
    """Same stepper driven from Python with the vectorized rhs (fallback)."""
    n = y0.shape[0]
    y = y0.copy()
    k1 = np.empty(n); k2 = np.empty(n); k3 = np.empty(n); k4 = np.empty(n)
    a0buf = np.empty(P)

    def rhs(state, out):
        rhs_numpy(state, out, a0buf, P, Q, dy, dz, gamma, a_inlet, vj, relaxed,
                  surf_i, q8, p8, fw, rv, M)

    def record(theta, h, yl, yr, fl, fr, row):
        t2, t3 = theta * theta, theta ** 3
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + theta
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        interp = h00 * yl + h10 * h * fl + h01 * yr + h11 * h * fr
        dimer_samples[row] = interp[dimer_idx]
        if store_snaps:
            snaps[row] = interp

    t = 0.0
    isamp = 0
    minval = float(min(0.0, y.min()))
    zero = np.zeros(n)
    while isamp < ts.shape[0] and ts[isamp] <= t:
        record(0.0, 1.0, y, y, zero, zero, isamp)
        isamp += 1
    rhs(y, k1)
    h = min(max_dt * 1e-2, t_end) if t_end > 0 else max_dt * 1e-2
    steps = 0
    while t < t_end:
        if steps >= max_steps:
            return 3, t, minval, steps
        steps += 1
        h = min(h, max_dt, t_end - t)
        if h <= 1e-14 * max(1.0, abs(t)):
            return 1, t, minval, steps
        rhs(y + (0.5 * h) * k1, k2)
        rhs(y + (0.75 * h) * k2, k3)
        ynew = y + h * (_B1 * k1 + _B2 * k2 + _B3 * k3)
        rhs(ynew, k4)
        err = h * (_E1 * k1 + _E2 * k2 + _E3 * k3 + _E4 * k4)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        errnorm = float(np.sqrt(np.mean((err / sc) ** 2)))
        if not np.isfinite(errnorm):
            h *= 0.2
            continue
        if errnorm <= 1.0:
            tnew = t + h
            while isamp < ts.shape[0] and ts[isamp] <= tnew:
                record((ts[isamp] - t) / h, h, y, ynew, k1, k4, isamp)
                isamp += 1
            t = tnew
            y, k1 = ynew, k4.copy()
            minval = min(minval, float(ynew.min()))
            fac = 5.0 if errnorm < 1e-300 else min(5.0, max(0.2, 0.9 * errnorm ** (-1 / 3)))
        else:
            fac = min(1.0, max(0.2, 0.9 * errnorm ** (-1 / 3)))
        h *= fac
    while isamp < ts.shape[0]:
        record(1.0, 1.0, y, y, zero, zero, isamp)
        isamp += 1
    return 0, t, minval, steps


def rhs_dispatch(*args):
    if NUMBA_ENABLED:
        return rhs_loop(*args)
    return rhs_numpy(*args)


def integrate_dispatch(*args):
    if NUMBA_ENABLED:
        return integrate_loop(*args)
    return integrate_python(*args)
