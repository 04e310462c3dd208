"""Compiled radial integrals along many rays.

Each ray integrates ``(peak + t) * exp(-q t (t + 2 off) / 2)`` over its own
list of panels, depth-first, using the same acceptance rule as the
vectorized drivers in :mod:`conjrisk.collision`.
"""

import math

import numba
import numpy as np

_EPS = float(np.finfo(float).eps)
_STAGNANT_RESOLUTION = 1e-6


@numba.njit(cache=True)
def _density(t, q, off, peak):
    return (peak + t) * math.exp(-0.5 * q * t * (t + 2.0 * off))


@numba.njit(cache=True)
def _panel(a, b, q, off, peak, simpson, nodes, kronrod, gauss):
    """``(value, error)`` of one panel under the selected rule."""
    if simpson:
        h = b - a
        fa = _density(a, q, off, peak)
        fl = _density(a + 0.25 * h, q, off, peak)
        fm = _density(a + 0.5 * h, q, off, peak)
        fr = _density(a + 0.75 * h, q, off, peak)
        fb = _density(b, q, off, peak)
        s1 = h / 6.0 * (fa + 4.0 * fm + fb)
        s2 = h / 12.0 * (fa + 4.0 * fl + 2.0 * fm + 4.0 * fr + fb)
        return s2 + (s2 - s1) / 15.0, abs(s2 - s1) / 15.0
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    k = 0.0
    g = 0.0
    for j in range(nodes.size):
        v = _density(c + h * nodes[j], q, off, peak)
        k += kronrod[j] * v
        g += gauss[j] * v
    return h * k, abs(h * (k - g))


@numba.njit(cache=True, nogil=True)
def integrate_rays(ta, tb, start, q, off, peak, tol, max_depth, simpson, nodes, kronrod, gauss):
    """Integrate every ray; ray ``i`` owns panels ``start[i]:start[i + 1]``.

    Returns per-ray ``(value, error, forced)``.
    """
    n = q.size
    val = np.zeros(n)
    err = np.zeros(n)
    forced = np.zeros(n, np.bool_)
    widest = 0
    for i in range(n):
        widest = max(widest, start[i + 1] - start[i])
    cap = widest + 2 * (max_depth + 2)
    stall = 1.0 if simpson else 0.25
    sa = np.empty(cap)
    sb = np.empty(cap)
    sk = np.empty(cap)
    se = np.empty(cap)
    sp = np.empty(cap)
    sd = np.empty(cap, np.int64)
    for i in range(n):
        lo = start[i]
        hi = start[i + 1]
        span = tb[hi - 1] - ta[lo]
        if not span > 0.0:
            continue
        top = 0
        est = 0.0
        for j in range(lo, hi):
            kk, ee = _panel(ta[j], tb[j], q[i], off[i], peak[i], simpson, nodes, kronrod, gauss)
            sa[top] = ta[j]
            sb[top] = tb[j]
            sk[top] = kk
            se[top] = ee
            sp[top] = np.inf
            sd[top] = 0
            top += 1
            est += kk
        total = 0.0
        etot = 0.0
        while top > 0:
            top -= 1
            a = sa[top]
            b = sb[top]
            kk = sk[top]
            ee = se[top]
            h = b - a
            local = 0.5 * tol * max(abs(kk), abs(est) * h / span)
            ok = ee <= local or ee <= 50.0 * _EPS * abs(kk) or h <= 64.0 * _EPS * max(abs(a), abs(b))
            if not ok and sd[top] >= 2 and ee >= stall * sp[top] and ee <= _STAGNANT_RESOLUTION * abs(kk):
                ok = True
            if not ok and sd[top] >= max_depth:
                ok = True
                forced[i] = True
            if ok:
                total += kk
                etot += ee
                continue
            m = 0.5 * (a + b)
            k1, e1 = _panel(a, m, q[i], off[i], peak[i], simpson, nodes, kronrod, gauss)
            k2, e2 = _panel(m, b, q[i], off[i], peak[i], simpson, nodes, kronrod, gauss)
            est += k1 + k2 - kk
            depth = sd[top] + 1
            sa[top], sb[top], sk[top], se[top], sp[top], sd[top] = a, m, k1, e1, ee, depth
            top += 1
            sa[top], sb[top], sk[top], se[top], sp[top], sd[top] = m, b, k2, e2, ee, depth
            top += 1
        val[i] = total
        err[i] = etot
    return val, err, forced
