"""Compiled SU(2) propagators for the {|0>, |k,-k>} block of each mode.

A propagator is stored as the pair (a, b) with U = [[a, -conj(b)], [b, conj(a)]].
Time stepping is the two-exponential commutator-free Magnus scheme of order 4,
with each exponential of a traceless 2x2 Hermitian evaluated in closed form.
"""

import math

import numba
import numpy as np

_SQ3 = math.sqrt(3.0)
ALPHA1 = 0.25 - _SQ3 / 6.0
ALPHA2 = 0.25 + _SQ3 / 6.0
NODE1 = 0.5 - _SQ3 / 6.0
NODE2 = 0.5 + _SQ3 / 6.0


@numba.njit(cache=True, inline="always")
def _su2_exp(x, y, z, dt):
    # exp(-i dt (x sx + y sy + z sz))
    r = math.sqrt(x * x + y * y + z * z)
    th = r * dt
    c = math.cos(th)
    if th > 1e-12:
        s = math.sin(th) / r
    else:
        s = dt * (1.0 - th * th / 6.0)
    return complex(c, -s * z), complex(s * y, -s * x)


@numba.njit(cache=True, inline="always")
def _mul(a2, b2, a1, b1):
    # (a2, b2) @ (a1, b1)
    return a2 * a1 - b2.conjugate() * b1, b2 * a1 + a2.conjugate() * b1


@numba.njit(cache=True, inline="always")
def _cd(hdot, h, ck, sk):
    return 0.5 * hdot * (-sk) / ((h - ck) ** 2 + sk * sk)


@numba.njit(cache=True)
def ramp_su2(ks, h_start, h_end, tau, n, with_cd):
    """Propagators of H_k(h(t)) (+ exact counterdiabatic term) for a linear ramp."""
    m = ks.size
    a_out = np.empty(m, np.complex128)
    b_out = np.empty(m, np.complex128)
    dt = tau / n
    hdot = (h_end - h_start) / tau
    for j in range(m):
        ck = math.cos(ks[j])
        sk = math.sin(ks[j])
        x = sk  # 2 sin k times (ALPHA1 + ALPHA2) = 1/2
        a = 1.0 + 0.0j
        b = 0.0 + 0.0j
        for i in range(n):
            t = i * dt
            h1 = h_start + hdot * (t + NODE1 * dt)
            h2 = h_start + hdot * (t + NODE2 * dt)
            z1 = -2.0 * (h1 - ck)
            z2 = -2.0 * (h2 - ck)
            y1 = 0.0
            y2 = 0.0
            if with_cd:
                y1 = -_cd(hdot, h1, ck, sk)
                y2 = -_cd(hdot, h2, ck, sk)
            ea, eb = _su2_exp(x, ALPHA2 * y1 + ALPHA1 * y2, ALPHA2 * z1 + ALPHA1 * z2, dt)
            a, b = _mul(ea, eb, a, b)
            ea, eb = _su2_exp(x, ALPHA1 * y1 + ALPHA2 * y2, ALPHA1 * z1 + ALPHA2 * z2, dt)
            a, b = _mul(ea, eb, a, b)
        a_out[j] = a
        b_out[j] = b
    return a_out, b_out


@numba.njit(cache=True)
def ramp_su2_projected(ks, grid_ks, proj, sin_q, h_start, h_end, tau, n):
    """Like ``ramp_su2`` with the counterdiabatic k-profile replaced by a projection.

    proj (M x G) maps the exact profile on the G grid momenta to sine
    coefficients; sin_q (Q x M) evaluates the truncated series at ``ks``.
    """
    q = ks.size
    g = grid_ks.size
    mm = proj.shape[0]
    dt = tau / n
    hdot = (h_end - h_start) / tau
    cgk = np.cos(grid_ks)
    sgk = np.sin(grid_ks)
    ck = np.cos(ks)
    sk = np.sin(ks)
    a = np.ones(q, np.complex128)
    b = np.zeros(q, np.complex128)
    prof = np.empty(g)
    coef = np.empty(mm)
    y1 = np.empty(q)
    y2 = np.empty(q)
    for i in range(n):
        t = i * dt
        h1 = h_start + hdot * (t + NODE1 * dt)
        h2 = h_start + hdot * (t + NODE2 * dt)
        for node in range(2):
            hh = h1 if node == 0 else h2
            for p in range(g):
                prof[p] = _cd(hdot, hh, cgk[p], sgk[p])
            for r in range(mm):
                acc = 0.0
                for p in range(g):
                    acc += proj[r, p] * prof[p]
                coef[r] = acc
            for j in range(q):
                acc = 0.0
                for r in range(mm):
                    acc += sin_q[j, r] * coef[r]
                if node == 0:
                    y1[j] = -acc
                else:
                    y2[j] = -acc
        for j in range(q):
            z1 = -2.0 * (h1 - ck[j])
            z2 = -2.0 * (h2 - ck[j])
            ea, eb = _su2_exp(sk[j], ALPHA2 * y1[j] + ALPHA1 * y2[j], ALPHA2 * z1 + ALPHA1 * z2, dt)
            aj, bj = _mul(ea, eb, a[j], b[j])
            ea, eb = _su2_exp(sk[j], ALPHA1 * y1[j] + ALPHA2 * y2[j], ALPHA1 * z1 + ALPHA2 * z2, dt)
            a[j], b[j] = _mul(ea, eb, aj, bj)
    return a, b
