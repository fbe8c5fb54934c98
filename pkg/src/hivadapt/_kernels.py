"""Compiled inner loops for the implicit forward and backward sweeps.

The 3x3 linear systems are solved by Cramer's rule.  Status codes:
0 ok, 1 Newton divergence (NaN or iteration cap), 2 singular matrix.
"""
import math

import numpy as np
from numba import njit

OK, DIVERGED, SINGULAR = 0, 1, 2
_DET_RTOL = 1e-14


@njit(cache=True)
def solve3(a11, a12, a13, a21, a22, a23, a31, a32, a33, r1, r2, r3):
    c11 = a22 * a33 - a23 * a32
    c12 = a21 * a33 - a23 * a31
    c13 = a21 * a32 - a22 * a31
    det = a11 * c11 - a12 * c12 + a13 * c13
    scale = max(abs(a11), abs(a12), abs(a13), abs(a21), abs(a22), abs(a23),
                abs(a31), abs(a32), abs(a33)) ** 3
    if not (abs(det) > _DET_RTOL * scale):
        return 0.0, 0.0, 0.0, False
    x1 = (r1 * c11 - a12 * (r2 * a33 - a23 * r3) + a13 * (r2 * a32 - a22 * r3)) / det
    x2 = (a11 * (r2 * a33 - a23 * r3) - r1 * c12 + a13 * (a21 * r3 - r2 * a31)) / det
    x3 = (a11 * (a22 * r3 - r2 * a32) - a12 * (a21 * r3 - r2 * a31) + r1 * c13) / det
    return x1, x2, x3, True


@njit(cache=True)
def _fres(u1, u2, u3, p1, p2, p3, h, de, s, mu, b1, b2, c, rho):
    inf = b1 * u1 * u3
    r1 = u1 - h * (s - inf - mu * u1) - p1
    r2 = u2 - h * (inf - de * u2) - p2
    r3 = u3 - h * (rho * u2 - b2 * u1 * u3 - c * u3) - p3
    return r1, r2, r3


@njit(cache=True)
def forward_sweep(h, de, x0, s, mu, b1, b2, c, rho, tol, max_iter, damping):
    """Implicit Euler over sub-steps ``h`` with death-rate products ``de = d*e``.

    Returns (X, status, failing step, max Newton iterations used).
    """
    n = h.size
    X = np.empty((n + 1, 3))
    X[0, 0] = x0[0]
    X[0, 1] = x0[1]
    X[0, 2] = x0[2]
    u1, u2, u3 = x0[0], x0[1], x0[2]
    itmax = 0
    for i in range(n):
        hh = h[i]
        ee = de[i]
        p1, p2, p3 = u1, u2, u3
        s1 = 1.0 + abs(p1)
        s2 = 1.0 + abs(p2)
        s3 = 1.0 + abs(p3)
        r1, r2, r3 = _fres(u1, u2, u3, p1, p2, p3, hh, ee, s, mu, b1, b2, c, rho)
        nr = max(abs(r1) / s1, abs(r2) / s2, abs(r3) / s3)
        it = 0
        while nr >= tol:
            if it >= max_iter or not math.isfinite(nr):
                return X, DIVERGED, i, itmax
            d1, d2, d3, ok = solve3(
                1.0 + hh * (b1 * u3 + mu), 0.0, hh * b1 * u1,
                -hh * b1 * u3, 1.0 + hh * ee, -hh * b1 * u1,
                hh * b2 * u3, -hh * rho, 1.0 + hh * (b2 * u1 + c),
                r1, r2, r3)
            if not ok:
                return X, SINGULAR, i, itmax
            v1, v2, v3 = u1 - d1, u2 - d2, u3 - d3
            q1, q2, q3 = _fres(v1, v2, v3, p1, p2, p3, hh, ee, s, mu, b1, b2, c, rho)
            nq = max(abs(q1) / s1, abs(q2) / s2, abs(q3) / s3)
            if nq > nr:
                # damped step on residual increase
                v1, v2, v3 = u1 - damping * d1, u2 - damping * d2, u3 - damping * d3
                q1, q2, q3 = _fres(v1, v2, v3, p1, p2, p3, hh, ee, s, mu, b1, b2, c, rho)
                nq = max(abs(q1) / s1, abs(q2) / s2, abs(q3) / s3)
            u1, u2, u3 = v1, v2, v3
            r1, r2, r3 = q1, q2, q3
            nr = nq
            it += 1
        if it > itmax:
            itmax = it
        X[i + 1, 0] = u1
        X[i + 1, 1] = u2
        X[i + 1, 2] = u3
    return X, OK, -1, itmax


@njit(cache=True)
def misfit_forcing(X, lg1, lg2, w1, w2, floor):
    """Log-misfit forcings at the right sub-node of every sub-step.

    Below the floor the clipped logarithm is flat, so its derivative is 0.
    """
    n = lg1.size
    m1 = np.zeros(n)
    m2 = np.zeros(n)
    ln10 = math.log(10.0)
    for i in range(n):
        S = X[i + 1, 0] + X[i + 1, 1]
        V = X[i + 1, 2]
        if S > floor:
            m1[i] = w1[i] * (math.log10(S) - lg1[i]) / (S * ln10)
        if V > floor:
            m2[i] = w2[i] * (math.log10(V) - lg2[i]) / (V * ln10)
    return m1, m2


@njit(cache=True)
def backward_sweep(h, de, X, m1, m2, lT, s, mu, b1, b2, c, rho, tol, max_iter):
    """Implicit backward recurrence from the terminal value ``lT``.

    Coefficients are frozen at the left node of each sub-step (the time
    level of the unknown); forcings are supplied per sub-step.
    Returns (L, status, failing step, max Newton iterations used).
    """
    n = h.size
    L = np.zeros((n + 1, 3))
    l1, l2, l3 = lT[0], lT[1], lT[2]
    L[n, 0] = l1
    L[n, 1] = l2
    L[n, 2] = l3
    itmax = 0
    for i in range(n - 1, -1, -1):
        hh = h[i]
        ee = de[i]
        u1 = X[i, 0]
        u3 = X[i, 2]
        f1, f2, f3 = m1[i], m1[i], m2[i]
        a11 = 1.0 + hh * (b1 * u3 + mu)
        a12 = -hh * b1 * u3
        a13 = hh * b2 * u3
        a22 = 1.0 + hh * ee
        a23 = -hh * rho
        a31 = hh * b1 * u1
        a32 = -hh * b1 * u1
        a33 = 1.0 + hh * (c + b2 * u1)
        n1, n2, n3 = l1, l2, l3
        s1 = 1.0 + abs(n1)
        s2 = 1.0 + abs(n2)
        s3 = 1.0 + abs(n3)
        # Newton on R(l) = (I + hM) l + h f - l_next, started at l_next
        it = 0
        while True:
            r1 = a11 * l1 + a12 * l2 + a13 * l3 + hh * f1 - n1
            r2 = a22 * l2 + a23 * l3 + hh * f2 - n2
            r3 = a31 * l1 + a32 * l2 + a33 * l3 + hh * f3 - n3
            nr = max(abs(r1) / s1, abs(r2) / s2, abs(r3) / s3)
            if nr < tol:
                break
            if it >= max_iter or not math.isfinite(nr):
                return L, DIVERGED, i, itmax
            d1, d2, d3, ok = solve3(a11, a12, a13, 0.0, a22, a23, a31, a32, a33, r1, r2, r3)
            if not ok:
                return L, SINGULAR, i, itmax
            l1 -= d1
            l2 -= d2
            l3 -= d3
            it += 1
        if it > itmax:
            itmax = it
        L[i, 0] = l1
        L[i, 1] = l2
        L[i, 2] = l3
    return L, OK, -1, itmax
