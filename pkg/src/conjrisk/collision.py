"""Plug-in collision probability over the hard-body disk.

Two independent evaluations of

    p = integral over ||t|| <= hbr of N(t; center, diag(d1**2, d2**2)) dt

are provided: nested adaptive quadrature in polar coordinates
(:func:`pc_quadrature`) and the equivalent-area series (:func:`pc_chan`).
:func:`dilution_curve` and :func:`pc_max` sweep an isotropic covariance
scale factor.

Quadrature layout: the outer integral runs over the ray angle on
``[0, 2 pi)`` and the inner one over the radius ``[0, hbr]`` along each ray.
The outer level is a breadth-first adaptive driver vectorized over all live
panels of all frames; each inner integral runs in a compiled depth-first
loop.  Both levels use Gauss-Kronrod 7/15 panels by default, or adaptive
Simpson with a Richardson estimate (``QuadratureConfig(rule="simpson")``).
Narrow features of the integrand are located analytically and used as
initial breakpoints, so refinement never has to discover a spike on its own:

* along a ray the density is ``r`` times a Gaussian in ``r`` with known mean
  and width;
* across rays the mass concentrates around the direction of the center,
  the major-axis directions of the ellipse, and the directions of the
  Mahalanobis-nearest points on the disk boundary.

The integrand is scaled by ``exp(delta_min / 2)`` where ``delta_min`` is the
smallest squared Mahalanobis distance inside the disk, so the adaptive
bookkeeping works on O(1) numbers; the scale is restored at the end and
probabilities below the double range underflow to 0 only then.

When the center sits within one standard deviation of the disk edge and the
density is narrow compared with the edge curvature, ``p`` is close to the
probability of the tangent half-plane at the center's direction, which is a
normal CDF.  There the small remainder between half-plane and disk is
integrated instead, which keeps full relative accuracy in ``0.5 - p`` for
centers exactly on the edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammainc, gammaln, logsumexp, ndtr

from ._raykernel import integrate_rays
from .errors import InvalidInputError, QuadratureError

_TWO_PI = 2.0 * math.pi
_EPS = np.finfo(float).eps
_LOG_TINY = math.log(np.nextafter(0.0, 1.0))
_FRAME_CHUNK = 64  # frames per vectorized pass; bounds peak memory
_EDGE_CURVATURE = 0.01
_RAY_OFFSETS = np.array([0.0, -1.0, 1.0, -3.0, 3.0, -8.0, 8.0])
_LAYER = 4.0 ** np.arange(0, 3)


@dataclass(frozen=True)
class QuadratureConfig:
    relative_tolerance: float = 1e-10
    max_refinements: int = 30
    rule: str = "kronrod"

    def __post_init__(self):
        if not 0.0 < self.relative_tolerance <= 1e-2:
            raise InvalidInputError(
                f"relative_tolerance must be in (0, 1e-2], got {self.relative_tolerance}"
            )
        if int(self.max_refinements) != self.max_refinements or self.max_refinements < 1:
            raise InvalidInputError(f"max_refinements must be an integer >= 1, got {self.max_refinements}")
        if self.rule not in ("kronrod", "simpson"):
            raise InvalidInputError(f"rule must be 'kronrod' or 'simpson', got {self.rule!r}")


DEFAULT_CONFIG = QuadratureConfig()


@dataclass(frozen=True)
class DilutionMaximum:
    c_star: float
    pc_max: float
    on_boundary: bool


# --------------------------------------------------------------------------
# breadth-first adaptive rules
#
# Both rules integrate a nonnegative ``func`` over panels ``[a, b]`` grouped
# by ``owner``.
# ``func(t, owner)`` receives nodes ``t`` of shape (panels, k) and one owner
# index per panel.  They return per-owner
# ``(value, error, forced)`` where ``forced`` flags owners with a panel
# accepted only because ``max_depth`` was reached.

_STAGNANT_RESOLUTION = 1e-6
# error ratio to the parent panel that counts as "stopped shrinking"; Simpson
# estimates converge slowly before the asymptotic regime, so only a panel
# that failed to improve at all is treated as stagnant
_STALL_KRONROD = 0.25
_STALL_SIMPSON = 1.0


def _accept(err, value, resabs, est, h, span, parent_err, depth, tol, a, b, stall=_STALL_KRONROD):
    """Acceptance mask for a batch of panels.

    A panel passes when its error is below ``tol / 2`` times the larger of
    its own value and its width-share of the owner's running estimate; for
    a positive integrand the accepted errors then sum to at most ``tol``
    times the result.  Panels at round-off level, too narrow to bisect, or
    whose error stopped shrinking under bisection while already resolved to
    1e-6 (evaluation noise, not structure) are accepted as well.
    """
    local = 0.5 * tol * np.maximum(np.abs(value), np.abs(est) * h / span)
    done = (err <= local) | (err <= 50.0 * _EPS * resabs)
    done |= h <= 64.0 * _EPS * np.maximum(np.abs(a), np.abs(b))
    if depth >= 2:
        done |= (err >= stall * parent_err) & (err <= _STAGNANT_RESOLUTION * resabs)
    return done, err > local


def _adaptive_simpson(func, a, b, owner, n_owner, tol, max_depth):
    """Adaptive Simpson with Richardson error estimate ``|S2 - S1| / 15``."""
    total = np.zeros(n_owner)
    error = np.zeros(n_owner)
    forced = np.zeros(n_owner, dtype=bool)
    if a.size == 0:
        return total, error, forced
    span = np.bincount(owner, weights=b - a, minlength=n_owner)
    span[span == 0.0] = 1.0
    n = a.size
    mid = 0.5 * (a + b)
    f = func(np.stack([a, mid, b], axis=1), owner)
    fa, fm, fb = f[:, 0], f[:, 1], f[:, 2]
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    parent = np.full(n, np.inf)
    for depth in range(max_depth + 1):
        n = a.size
        if n == 0:
            break
        h = b - a
        f = func(np.stack([a + 0.25 * h, a + 0.75 * h], axis=1), owner)
        flm, frm = f[:, 0], f[:, 1]
        left = h / 12.0 * (fa + 4.0 * flm + fm)
        right = h / 12.0 * (fm + 4.0 * frm + fb)
        s2 = left + right
        err = np.abs(s2 - whole) / 15.0
        value = s2 + (s2 - whole) / 15.0
        resabs = np.abs(value)
        est = total + np.bincount(owner, weights=value, minlength=n_owner)
        done, over = _accept(err, value, resabs, est[owner], h, span[owner], parent, depth, tol, a, b, _STALL_SIMPSON)
        if depth == max_depth:
            forced[owner[over & ~done]] = True
            done[:] = True
        if done.any():
            od = owner[done]
            total += np.bincount(od, weights=value[done], minlength=n_owner)
            error += np.bincount(od, weights=err[done], minlength=n_owner)
        keep = ~done
        if not keep.any():
            break
        a, b, owner = a[keep], b[keep], owner[keep]
        fa, fm, fb, flm, frm = fa[keep], fm[keep], fb[keep], flm[keep], frm[keep]
        left, right, err = left[keep], right[keep], err[keep]
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        owner = np.concatenate([owner, owner])
        fa, fm, fb = np.concatenate([fa, fm]), np.concatenate([flm, frm]), np.concatenate([fm, fb])
        whole = np.concatenate([left, right])
        parent = np.concatenate([err, err])
    return total, error, forced


_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS = np.zeros(15)
_GAUSS[1:7:2] = _WG[:3]
_GAUSS[7] = _WG[3]
_GAUSS[9:15:2] = _WG[2::-1]
_KG = np.stack([_KRONROD, _KRONROD - _GAUSS], axis=1)


def _adaptive_kronrod(func, a, b, owner, n_owner, tol, max_depth):
    """Adaptive Gauss-Kronrod 7/15 with error estimate ``|K15 - G7|``."""
    total = np.zeros(n_owner)
    error = np.zeros(n_owner)
    forced = np.zeros(n_owner, dtype=bool)
    if a.size == 0:
        return total, error, forced
    span = np.bincount(owner, weights=b - a, minlength=n_owner)
    span[span == 0.0] = 1.0
    parent = np.full(a.size, np.inf)
    for depth in range(max_depth + 1):
        n = a.size
        if n == 0:
            break
        half = 0.5 * (b - a)
        t = (0.5 * (a + b))[:, None] + half[:, None] * _NODES[None, :]
        f = func(t, owner)
        # fixed-order sums, so each panel's value does not depend on the batch
        k_sum = np.zeros(n)
        d_sum = np.zeros(n)
        for j in range(_NODES.size):
            k_sum += _KG[j, 0] * f[:, j]
            d_sum += _KG[j, 1] * f[:, j]
        kron = half * k_sum
        err = np.abs(half * d_sum)
        resabs = np.abs(kron)
        est = total + np.bincount(owner, weights=kron, minlength=n_owner)
        done, over = _accept(err, kron, resabs, est[owner], b - a, span[owner], parent, depth, tol, a, b)
        if depth == max_depth:
            forced[owner[over & ~done]] = True
            done[:] = True
        if done.any():
            od = owner[done]
            total += np.bincount(od, weights=kron[done], minlength=n_owner)
            error += np.bincount(od, weights=err[done], minlength=n_owner)
        keep = ~done
        if not keep.any():
            break
        a, b, owner, err = a[keep], b[keep], owner[keep], err[keep]
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        owner = np.concatenate([owner, owner])
        parent = np.concatenate([err, err])
    return total, error, forced


def _panels(points, lo, hi):
    """Turn a (rows, k) array of candidate breakpoints into flat panels.

    Candidates outside ``(lo, hi)`` or non-finite are ignored; ``lo`` and
    ``hi`` (per row) are always included.  Breakpoints closer than 1e-9 of
    the row's span to their predecessor (or to ``hi``) are merged.
    """
    rows = points.shape[0]
    thr = (1e-9 * (hi - lo))[:, None]
    inside = np.isfinite(points) & (points > lo[:, None] + thr) & (points < hi[:, None] - thr)
    pts = np.sort(np.where(inside, points, np.nan), axis=1)  # nan sorts last
    pts = np.concatenate([lo[:, None], pts], axis=1)
    gap = np.diff(pts, axis=1)
    keep = np.concatenate([np.ones((rows, 1), dtype=bool), gap > thr], axis=1)
    pts = np.where(keep, pts, np.nan)
    pts = np.concatenate([np.sort(pts, axis=1), np.full((rows, 1), np.nan)], axis=1)
    count = np.sum(np.isfinite(pts), axis=1)
    pts[np.arange(rows), count] = hi
    a, b = pts[:, :-1], pts[:, 1:]
    valid = np.isfinite(b)
    owner = np.broadcast_to(np.arange(rows)[:, None], a.shape)
    return a[valid], b[valid], owner[valid]


_RULES = {"kronrod": _adaptive_kronrod, "simpson": _adaptive_simpson}


# --------------------------------------------------------------------------
# geometry of the integrand


def _circle_stationary(c1, c2, d1, d2, radius):
    """Angles where the squared Mahalanobis distance restricted to a circle is stationary.

    Uses the quartic in ``u = exp(i theta)``; returns up to four angles
    (fewer in the isotropic case) polished by a few Newton steps.
    """
    k = 1.0 / d2**2 - 1.0 / d1**2
    a = 0.5 * radius * k
    b = c1 / d1**2
    e = c2 / d2**2
    scale = abs(b) + abs(e)
    if abs(a) > 1e-12 * scale and a != 0.0:
        coeffs = np.array([a, b - 1j * e, 0.0, -(b + 1j * e), -a], dtype=complex) / a
        with np.errstate(all="ignore"):
            roots = np.roots(coeffs)
        theta = np.angle(roots)
    elif scale > 0.0:
        t0 = math.atan2(e, b)
        theta = np.array([t0, t0 + math.pi])
    else:
        return np.zeros(0)
    theta = theta[np.isfinite(theta)]
    for _ in range(4):
        g = a * np.sin(2 * theta) + b * np.sin(theta) - e * np.cos(theta)
        gp = 2 * a * np.cos(2 * theta) + b * np.cos(theta) + e * np.sin(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(gp != 0.0, g / gp, 0.0)
        step = np.clip(step, -0.1, 0.1)
        theta = theta - step
    return np.mod(theta, _TWO_PI)


def _mahalanobis_on_circle(theta, c1, c2, d1, d2, radius):
    return (radius * np.cos(theta) - c1) ** 2 / d1**2 + (radius * np.sin(theta) - c2) ** 2 / d2**2


def _graded(center, scale, limit, ratio=4.0, cap=48):
    """Points ``center +- scale * ratio**j`` up to distance ``limit``."""
    if not (scale > 0.0 and math.isfinite(scale)):
        return []
    out = [center]
    step = scale
    n = 0
    while step < limit and n < cap:
        out.append(center - step)
        out.append(center + step)
        step *= ratio
        n += 1
    return out


def _frame_layout(c1, c2, d1, d2, radius):
    """Angular breakpoints and exponent shift for one frame."""
    breaks = list(np.linspace(0.0, _TWO_PI, 9))
    rho = math.hypot(c1, c2)
    v = c1**2 / d1**2 + c2**2 / d2**2

    if v > 0.0:
        tc = math.atan2(c2, c1)
        q = math.cos(tc) ** 2 / d1**2 + math.sin(tc) ** 2 / d2**2
        sc = d1 * d2 * q / math.sqrt(v)
        breaks += _graded(tc, sc, min(math.pi, 1024 * sc))
        breaks.append(tc + math.pi)

    ratio = min(d1, d2) / max(d1, d2)
    if ratio < 0.5:
        axis = 0.0 if d1 > d2 else 0.5 * math.pi
        for base in (axis, axis + math.pi):
            breaks += _graded(base, ratio, 0.5 * math.pi)

    stationary = _circle_stationary(c1, c2, d1, d2, radius)
    grid = np.linspace(0.0, _TWO_PI, 721)[:-1]
    cand = np.concatenate([stationary, grid])
    dcirc = _mahalanobis_on_circle(cand, c1, c2, d1, d2, radius)
    shift = 0.0 if rho <= radius else float(np.min(dcirc))

    k = 1.0 / d2**2 - 1.0 / d1**2
    for th in stationary:
        c, s = math.cos(th), math.sin(th)
        curv = 2.0 * (radius**2 * (c * c - s * s) * k + radius * (c1 * c / d1**2 + c2 * s / d2**2))
        if curv > 0.0:
            width = math.sqrt(2.0 / curv)
            if width < 1.0:
                breaks += _graded(th, width, min(math.pi, 1024 * width))
            else:
                breaks.append(th)

    breaks = np.mod(np.asarray(breaks, dtype=float), _TWO_PI)
    return breaks, shift


# --------------------------------------------------------------------------
# quadrature driver


def _tangent_layout(c1, c2, d1, d2, radius):
    """Breakpoints in ``delta = theta - phi`` for the region between the disk
    and its tangent line at the direction ``phi`` of ``x``."""
    breaks, _ = _frame_layout(c1, c2, d1, d2, radius)
    phi = math.atan2(c2, c1)
    n1, n2 = math.cos(phi), math.sin(phi)
    sig_n = math.sqrt((n1 * d1) ** 2 + (n2 * d2) ** 2)
    sig_t = math.sqrt((n2 * d1) ** 2 + (n1 * d2) ** 2)
    scale = min(sig_t / radius, math.sqrt(2.0 * sig_n / radius))
    extra = _graded(0.0, scale, 0.5 * math.pi) + [-0.5 * math.pi, 0.5 * math.pi]
    shifted = np.mod(np.asarray(breaks) - phi + math.pi, _TWO_PI) - math.pi
    return np.concatenate([shifted, extra]), 0.0


def _pc_polar(c1, c2, d1, d2, radius, cfg, tangent=False):
    """Nested adaptive quadrature for arrays of frames.  Returns (p, err, forced).

    Integrates the density over the disk, or with ``tangent`` over the part
    of the half-plane ``xi . n <= R`` (``n = x / ||x||``) outside the disk.
    """
    n = c1.size
    tol = cfg.relative_tolerance
    depth = int(cfg.max_refinements)
    integrate = _RULES[cfg.rule]
    simpson = cfg.rule == "simpson"
    layout = _tangent_layout if tangent else _frame_layout
    layouts = [layout(c1[i], c2[i], d1[i], d2[i], radius[i]) for i in range(n)]
    shift = np.array([s for _, s in layouts])
    width = max(len(bk) for bk, _ in layouts)
    cand = np.full((n, width), np.nan)
    for i, (bk, _) in enumerate(layouts):
        cand[i, : bk.size] = bk
    # the integrand is at most 1 after the shift, so the result is bounded by
    # hbr^2 exp(-shift / 2) / (2 d1 d2); skip frames where that underflows
    live = tangent | (np.log(radius**2 / (2.0 * d1 * d2)) - 0.5 * shift > _LOG_TINY)
    cand[~live] = np.nan
    if tangent:
        # outer variable is the offset from phi, so the slab width near
        # delta = 0 keeps full relative precision
        a, b, owner = _panels(cand, np.full(n, -math.pi), np.full(n, math.pi))
        phi = np.arctan2(c2, c1)
    else:
        a, b, owner = _panels(cand, np.zeros(n), np.full(n, _TWO_PI))
        phi = np.zeros(n)
    keep = live[owner]
    a, b, owner = a[keep], b[keep], owner[keep]

    inner_forced = np.zeros(n, dtype=bool)

    def along_rays(theta, frame):
        shape = theta.shape
        theta = theta.reshape(-1)
        frame = np.repeat(frame, shape[1])
        big_r = radius[frame]
        if tangent:
            delta = theta
            theta = theta + phi[frame]
            cos_d = np.cos(delta)
            with np.errstate(divide="ignore"):
                width = np.where(cos_d > 0.0, 2.0 * big_r * np.sin(0.5 * delta) ** 2 / cos_d, np.inf)
            base_r = big_r
        else:
            width = big_r
            base_r = np.zeros_like(big_r)
        ct, st = np.cos(theta), np.sin(theta)
        p1, p2 = d1[frame], d2[frame]
        q = ct * ct / p1**2 + st * st / p2**2
        m = (c1[frame] * ct / p1**2 + c2[frame] * st / p2**2) / q
        cross = c1[frame] * st - c2[frame] * ct
        sig = 1.0 / np.sqrt(q)
        # the ray covers r in [base_r, base_r + width]; integrate in
        # t = r - peak, peak being the densest radius there, which keeps the
        # exponent small and exact where the integrand matters
        rel = m - base_r
        u = np.clip(rel, 0.0, width)
        peak = base_r + u
        off = u - rel
        t_hi = np.minimum(width - u, 40.0 * sig)
        ray_base = q * off * off + cross * cross / (p1**2 * p2**2 * q) - shift[frame]

        pts = [sig[:, None] * _RAY_OFFSETS[None, :] - off[:, None]]
        with np.errstate(divide="ignore", invalid="ignore"):
            layer_hi = np.where(rel > width, sig * sig / (rel - width), np.nan)
            layer_lo = np.where(rel < 0.0, sig * sig / (-rel), np.nan)
        pts.append((width - u)[:, None] - layer_hi[:, None] * _LAYER[None, :])
        pts.append(layer_lo[:, None] * _LAYER[None, :] - u[:, None])
        ta, tb, ray = _panels(np.concatenate(pts, axis=1), -u, t_hi)
        start = np.searchsorted(ray, np.arange(theta.size + 1))
        val, _, forced = integrate_rays(
            ta, tb, start, q, off, peak, 0.125 * tol, depth, simpson, _NODES, _KRONROD, _GAUSS
        )
        if forced.any():
            inner_forced[np.unique(frame[forced])] = True
        with np.errstate(under="ignore"):
            return (val * np.exp(-0.5 * np.maximum(ray_base, 0.0))).reshape(shape)

    total, err, forced = integrate(along_rays, a, b, owner, n, tol, depth)
    norm = 1.0 / (_TWO_PI * d1 * d2)
    with np.errstate(under="ignore"):
        factor = norm * np.exp(-0.5 * shift)
    p = total * factor
    e = err * factor
    return np.clip(p, 0.0, 1.0), e, forced | inner_forced


def _near_edge(c1, c2, d1, d2, radius):
    """Frames whose density sits on the disk edge and is narrow next to its curvature.

    There the disk probability is close to that of the tangent half-plane,
    and computing the small difference keeps full relative accuracy.
    """
    rho = np.hypot(c1, c2)
    with np.errstate(divide="ignore", invalid="ignore"):
        n1, n2 = c1 / rho, c2 / rho
    sig_n = np.sqrt((n1 * d1) ** 2 + (n2 * d2) ** 2)
    sig_t2 = (n2 * d1) ** 2 + (n1 * d2) ** 2
    return (rho > 0.0) & (np.abs(rho - radius) <= sig_n) & (sig_t2 <= _EDGE_CURVATURE * radius * sig_n)


def _pc_chunk(c1, c2, d1, d2, radius, cfg):
    p = np.empty(c1.size)
    err = np.empty(c1.size)
    forced = np.empty(c1.size, dtype=bool)
    edge = _near_edge(c1, c2, d1, d2, radius)
    if (~edge).any():
        rest = ~edge
        p[rest], err[rest], forced[rest] = _pc_polar(c1[rest], c2[rest], d1[rest], d2[rest], radius[rest], cfg)
    if edge.any():
        e1, e2, f1, f2, fr = c1[edge], c2[edge], d1[edge], d2[edge], radius[edge]
        rho = np.hypot(e1, e2)
        sig_n = np.hypot(e1 / rho * f1, e2 / rho * f2)
        half = ndtr((fr - rho) / sig_n)
        gap, gap_err, gap_forced = _pc_polar(e1, e2, f1, f2, fr, cfg, tangent=True)
        p[edge] = np.clip(half - gap, 0.0, 1.0)
        err[edge] = gap_err + _EPS * half
        forced[edge] = gap_forced
    return p, err, forced


def pc_quadrature_many(c1, c2, d1, d2, hbr, cfg=DEFAULT_CONFIG):
    """Disk probability for arrays of centers and covariances.

    Raises:
        QuadratureError: some frame did not converge within
            ``cfg.max_refinements`` levels; carries the estimates and bounds.
    """
    arrs = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (c1, c2, d1, d2, hbr)])
    c1, c2, d1, d2, hbr = [np.array(v, dtype=float).reshape(-1) for v in arrs]
    if not np.all(np.isfinite(np.concatenate([c1, c2, d1, d2, hbr]))):
        raise InvalidInputError("frame parameters and center must be finite")
    if np.any(d1 <= 0.0) or np.any(d2 <= 0.0) or np.any(hbr <= 0.0):
        raise InvalidInputError("d1, d2 and hbr must be > 0")
    p = np.empty(c1.size)
    err = np.empty(c1.size)
    forced = np.empty(c1.size, dtype=bool)
    for start in range(0, c1.size, _FRAME_CHUNK):
        sl = slice(start, start + _FRAME_CHUNK)
        p[sl], err[sl], forced[sl] = _pc_chunk(c1[sl], c2[sl], d1[sl], d2[sl], hbr[sl], cfg)
    bad = forced & (err > cfg.relative_tolerance * p)
    if bad.any():
        raise QuadratureError(
            f"quadrature did not converge after {cfg.max_refinements} refinements "
            f"for {int(bad.sum())} frame(s)",
            estimate=p if p.size > 1 else float(p[0]),
            error_bound=err if err.size > 1 else float(err[0]),
        )
    return p


def pc_quadrature(frame, center, cfg=DEFAULT_CONFIG):
    """Probability that N(center, diag(d1^2, d2^2)) falls in the hard-body disk."""
    c1, c2 = center
    return float(pc_quadrature_many(c1, c2, frame.d1, frame.d2, frame.hbr, cfg)[0])


def pc_hat(frame, cfg=DEFAULT_CONFIG):
    """Plug-in estimate: the disk probability with the density centered at ``x``."""
    return pc_quadrature(frame, (frame.x1, frame.x2), cfg)


def pc_hat_many(frames, cfg=DEFAULT_CONFIG):
    if len(frames) == 0:
        return np.zeros(0)
    cols = np.array([(f.x1, f.x2, f.d1, f.d2, f.hbr) for f in frames], dtype=float)
    return pc_quadrature_many(cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3], cols[:, 4], cfg)


# --------------------------------------------------------------------------
# equivalent-area series


def _log_gammainc(k, x):
    """log of the regularized lower incomplete gamma P(k, x), underflow safe."""
    val = gammainc(k, x)
    if val > 0.0:
        return math.log(val)
    # leading term of the series when P underflows (x << k)
    return k * math.log(x) - x - gammaln(k + 1.0) + math.log1p(x / (k + 1.0))


def pc_chan_value(c1, c2, d1, d2, hbr, max_order=100):
    if max_order < 1:
        raise InvalidInputError(f"max_order must be >= 1, got {max_order}")
    u = hbr * hbr / (d1 * d2)
    half_v = 0.5 * (c1 * c1 / (d1 * d1) + c2 * c2 / (d2 * d2))
    half_u = 0.5 * u
    if half_u == 0.0:
        return 0.0
    log_terms = []
    for k in range(int(max_order) + 1):
        if half_v == 0.0:
            log_pois = 0.0 if k == 0 else -math.inf
        else:
            log_pois = k * math.log(half_v) - half_v - gammaln(k + 1.0)
        term = log_pois + _log_gammainc(k + 1.0, half_u)
        log_terms.append(term)
        if k >= half_v:
            if term == -math.inf or term < logsumexp(log_terms) + math.log(1e-16):
                break
    total = float(np.exp(logsumexp(log_terms)))
    return min(max(total, 0.0), 1.0)


def pc_chan(frame, center=None, max_order=100):
    """Equivalent-area series approximation of the disk probability.

    With ``u = hbr^2 / (d1 d2)`` and ``v = c1^2/d1^2 + c2^2/d2^2``,

        p = sum_k Poisson(k; v/2) * P(Poisson(u/2) > k),

    accumulated in the log domain and truncated after the Poisson mode at the
    first term below 1e-16 of the running sum, or at ``max_order``.
    """
    if center is None:
        center = (frame.x1, frame.x2)
    return pc_chan_value(center[0], center[1], frame.d1, frame.d2, frame.hbr, max_order)


# --------------------------------------------------------------------------
# dilution


def scaled(frame, c):
    """Frame with covariance multiplied by ``c`` (standard deviations by ``sqrt(c)``)."""
    if not c > 0.0:
        raise InvalidInputError(f"covariance scale must be > 0, got {c}")
    root = math.sqrt(c)
    return replace(frame, d1=frame.d1 * root, d2=frame.d2 * root)


def dilution_curve(frame, scales, cfg=DEFAULT_CONFIG):
    """``[(c, pc_hat(frame scaled by c)), ...]`` for each covariance scale ``c``."""
    scales = [float(c) for c in scales]
    if any(not c > 0.0 for c in scales):
        raise InvalidInputError("all covariance scales must be > 0")
    if not scales:
        return []
    root = np.sqrt(np.asarray(scales))
    values = pc_quadrature_many(frame.x1, frame.x2, frame.d1 * root, frame.d2 * root, frame.hbr, cfg)
    return list(zip(scales, values.tolist()))


def pc_max(frame, log_c_range=(-6.0, 6.0), grid=121, cfg=DEFAULT_CONFIG):
    """Largest plug-in probability over covariance scales ``10**log_c``.

    A uniform grid in ``log10 c`` locates the maximum, which golden-section
    search then refines between the neighbouring grid nodes.
    ``on_boundary`` is set when the grid maximum sits at either end.
    """
    if grid < 3:
        raise InvalidInputError(f"grid must be >= 3, got {grid}")
    lo, hi = map(float, log_c_range)
    if not hi > lo:
        raise InvalidInputError("log_c_range must be increasing")
    logs = np.linspace(lo, hi, int(grid))
    values = np.array([p for _, p in dilution_curve(frame, 10.0**logs, cfg)])
    i = int(np.argmax(values))
    if i == 0 or i == logs.size - 1:
        return DilutionMaximum(float(10.0 ** logs[i]), float(values[i]), True)

    def value(lc):
        return float(pc_quadrature_many(frame.x1, frame.x2, frame.d1 * 10 ** (lc / 2), frame.d2 * 10 ** (lc / 2), frame.hbr, cfg)[0])

    a, b = logs[i - 1], logs[i + 1]
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - inv * (b - a)
    x2 = a + inv * (b - a)
    f1, f2 = value(x1), value(x2)
    while b - a > 1e-6:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv * (b - a)
            f2 = value(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv * (b - a)
            f1 = value(x1)
    best_log, best = (x1, f1) if f1 > f2 else (x2, f2)
    if values[i] > best:
        best_log, best = logs[i], values[i]
    return DilutionMaximum(float(10.0**best_log), float(best), False)
