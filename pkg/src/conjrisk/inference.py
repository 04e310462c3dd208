"""Likelihood inference on the miss distance of an encounter frame.

The observation ``x`` is bivariate normal with mean ``xi = (psi cos lam,
psi sin lam)`` and covariance ``diag(d1**2, d2**2)``.  For a fixed miss
distance ``psi`` the orientation ``lam`` is profiled out by minimizing the
squared Mahalanobis distance

    delta(xi) = (xi1 - x1)**2 / d1**2 + (xi2 - x2)**2 / d2**2

over the circle ``||xi|| = psi``.  The profile log-likelihood is
``-delta / 2`` (the constant ``-log(2 pi d1 d2)`` is dropped), which gives
the likelihood root ``r``, the Wald statistic ``w`` and the significance
probability ``p_obs = Phi(-r)`` for the boundary null ``psi = psi0``.

Batch helpers (``*_many``) accept numpy arrays of frame parameters and are
what the experiment and oracle modules use; the scalar functions wrap them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InvalidInputError, UndefinedVarianceError

GRID_SIZE = 720
NEWTON_TOL = 1e-12  # rad
_CHUNK = 2048
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ConstrainedFit:
    """Maximum-likelihood position on the circle ``||xi|| = psi``."""

    xi_hat: tuple
    lambda_hat: float
    delta: float


@dataclass(frozen=True)
class TestResult:
    """Boundary test of ``psi = psi0``.

    ``w`` is ``None`` when the observed position is the origin and the Wald
    variance is undefined.
    """

    __test__ = False  # not a pytest class

    psi0: float
    r: float
    w: float | None
    p_obs: float
    psi_hat: float

    @property
    def wald_defined(self):
        return self.w is not None


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    lower_truncated: bool = False


def _as_arrays(*values):
    arrs = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in values])
    return [np.array(a, dtype=float).reshape(-1) for a in arrs]


def _delta(lam, x1, x2, d1, d2, psi):
    return (psi * np.cos(lam) - x1) ** 2 / d1**2 + (psi * np.sin(lam) - x2) ** 2 / d2**2


def _dlam(lam, x1, x2, d1, d2, psi):
    """First and second derivative of delta with respect to the angle."""
    c, s = np.cos(lam), np.sin(lam)
    k = 1.0 / d2**2 - 1.0 / d1**2
    g = 2.0 * (psi**2 * s * c * k + psi * (x1 * s / d1**2 - x2 * c / d2**2))
    gp = 2.0 * (psi**2 * (c * c - s * s) * k + psi * (x1 * c / d1**2 + x2 * s / d2**2))
    return g, gp


def _refine(lam0, lo, hi, x1, x2, d1, d2, psi):
    """Safeguarded Newton on d(delta)/d(lam) inside ``[lo, hi]``, vectorized."""
    g_lo, _ = _dlam(lo, x1, x2, d1, d2, psi)
    g_hi, _ = _dlam(hi, x1, x2, d1, d2, psi)
    valid = (g_lo <= 0.0) & (g_hi >= 0.0)
    lam = lam0.copy()
    lo = lo.copy()
    hi = hi.copy()
    active = valid.copy()
    for _ in range(200):
        if not active.any():
            break
        g, gp = _dlam(lam, x1, x2, d1, d2, psi)
        lo = np.where(active & (g < 0.0), lam, lo)
        hi = np.where(active & (g > 0.0), lam, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(gp > 0.0, g / gp, np.inf)
        cand = lam - step
        bad = ~((cand > lo) & (cand < hi))
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        moved = np.abs(cand - lam)
        lam = np.where(active, cand, lam)
        active &= (moved > NEWTON_TOL) & (g != 0.0) & (hi - lo > NEWTON_TOL)
    return lam, valid


def _fit_chunk(x1, x2, d1, d2, psi):
    n = x1.size
    step = _TWO_PI / GRID_SIZE
    grid = np.arange(GRID_SIZE) * step
    dg = _delta(grid[None, :], x1[:, None], x2[:, None], d1[:, None], d2[:, None], psi[:, None])
    prev = np.roll(dg, 1, axis=1)
    nxt = np.roll(dg, -1, axis=1)
    is_min = (dg <= prev) & (dg <= nxt)
    masked = np.where(is_min, dg, np.inf)
    # a degree-two trigonometric polynomial has at most two local minima
    order = np.argsort(masked, axis=1, kind="stable")[:, :2]
    best_lam = np.full(n, np.nan)
    best_delta = np.full(n, np.inf)
    rows = np.arange(n)
    for j in range(2):
        idx = order[:, j]
        usable = np.isfinite(masked[rows, idx])
        lam0 = grid[idx]
        lam, _ = _refine(lam0, lam0 - step, lam0 + step, x1, x2, d1, d2, psi)
        dl = _delta(lam, x1, x2, d1, d2, psi)
        d0 = dg[rows, idx]
        take_grid = ~(dl <= d0)
        lam = np.where(take_grid, lam0, lam)
        dl = np.where(take_grid, d0, dl)
        better = usable & (dl < best_delta)
        best_lam = np.where(better, lam, best_lam)
        best_delta = np.where(better, dl, best_delta)
    zero = psi == 0.0
    best_lam = np.mod(best_lam, _TWO_PI)
    # mod of a tiny negative angle rounds up to 2 pi itself
    best_lam = np.where(zero | (best_lam >= _TWO_PI), 0.0, best_lam)
    best_delta = np.where(zero, x1**2 / d1**2 + x2**2 / d2**2, best_delta)
    return best_lam, best_delta


def constrained_mle_many(x1, x2, d1, d2, psi):
    """Vectorized constrained fit.  Returns ``(lambda_hat, delta)`` arrays.

    ``delta`` is evaluated on a 720-point angular grid, every discrete local
    minimum (at most two) is refined by safeguarded Newton on the angular
    derivative to 1e-12 rad, and the smallest refined value wins.
    """
    x1, x2, d1, d2, psi = _as_arrays(x1, x2, d1, d2, psi)
    if np.any(psi < 0.0):
        raise InvalidInputError("psi must be >= 0")
    lam = np.empty_like(x1)
    delta = np.empty_like(x1)
    for start in range(0, x1.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        lam[sl], delta[sl] = _fit_chunk(x1[sl], x2[sl], d1[sl], d2[sl], psi[sl])
    return lam, delta


def likelihood_root_many(x1, x2, d1, d2, psi0):
    """Signed root ``sign(||x|| - psi0) * sqrt(delta_hat(psi0))`` for arrays."""
    x1, x2, d1, d2, psi0 = _as_arrays(x1, x2, d1, d2, psi0)
    _, delta = constrained_mle_many(x1, x2, d1, d2, psi0)
    return np.sign(np.hypot(x1, x2) - psi0) * np.sqrt(delta)


def significance_probability_many(x1, x2, d1, d2, psi0):
    return ndtr(-likelihood_root_many(x1, x2, d1, d2, psi0))


def _root_and_slope(x1, x2, d1, d2, psi):
    lam, delta = constrained_mle_many(x1, x2, d1, d2, psi)
    rho = np.hypot(x1, x2)
    sign = np.sign(rho - psi)
    r = sign * np.sqrt(delta)
    # envelope theorem: d(delta_hat)/d(psi) is the partial derivative at lam_hat
    c, s = np.cos(lam), np.sin(lam)
    ddelta = 2.0 * ((psi * c - x1) * c / d1**2 + (psi * s - x2) * s / d2**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = sign * ddelta / (2.0 * np.sqrt(delta))
    return r, slope


def _solve_root(x1, x2, d1, d2, target, lo, hi, xtol):
    """Solve ``r(psi) = target`` on brackets where ``r(lo) >= target >= r(hi)``."""
    psi = 0.5 * (lo + hi)
    lo = lo.copy()
    hi = hi.copy()
    active = np.ones(psi.size, dtype=bool)
    for _ in range(200):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        r, slope = _root_and_slope(x1[idx], x2[idx], d1[idx], d2[idx], psi[idx])
        f = r - target[idx]
        lo[idx] = np.where(f > 0.0, psi[idx], lo[idx])
        hi[idx] = np.where(f < 0.0, psi[idx], hi[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = psi[idx] - f / slope
        ok = np.isfinite(cand) & (cand > lo[idx]) & (cand < hi[idx])
        cand = np.where(ok, cand, 0.5 * (lo[idx] + hi[idx]))
        moved = np.abs(cand - psi[idx])
        psi[idx] = cand
        done = (moved <= xtol[idx]) | (f == 0.0) | (hi[idx] - lo[idx] <= xtol[idx])
        active[idx[done]] = False
    return psi


def confidence_interval_many(x1, x2, d1, d2, level):
    """Profile-likelihood interval endpoints for arrays of frames.

    Returns ``(lower, upper, lower_truncated)``.  Endpoints solve
    ``r(psi) = +z`` (lower) and ``r(psi) = -z`` (upper) with
    ``z = Phi^-1((1 + level) / 2)``; the lower endpoint is 0 when
    ``r(0) < z``.
    """
    x1, x2, d1, d2 = _as_arrays(x1, x2, d1, d2)
    if not 0.0 < level < 1.0:
        raise InvalidInputError(f"level must be in (0, 1), got {level}")
    z = float(ndtri(0.5 * (1.0 + level)))
    rho = np.hypot(x1, x2)
    xtol = 1e-8 * np.minimum(1.0, np.minimum(d1, d2))

    # r(psi) <= -(psi - rho) / max(d) above rho, so this bracket always closes
    hi = rho + z * np.maximum(d1, d2) * (1.0 + 1e-9) + xtol
    upper = _solve_root(x1, x2, d1, d2, np.full_like(x1, -z), rho.copy(), hi, xtol)

    r0 = np.sqrt(x1**2 / d1**2 + x2**2 / d2**2)
    truncated = r0 < z
    lower = np.zeros_like(x1)
    need = ~truncated
    if need.any():
        i = np.flatnonzero(need)
        lower[i] = _solve_root(
            x1[i], x2[i], d1[i], d2[i], np.full(i.size, z), np.zeros(i.size), rho[i].copy(), xtol[i]
        )
    lower = np.minimum(lower, rho)
    upper = np.maximum(upper, rho)
    return lower, upper, truncated


def constrained_mle(frame, psi):
    """Closest point to ``x`` (Mahalanobis) on the circle of radius ``psi``."""
    if psi < 0.0:
        raise InvalidInputError(f"psi must be >= 0, got {psi}")
    lam, delta = constrained_mle_many(frame.x1, frame.x2, frame.d1, frame.d2, psi)
    lam, delta = float(lam[0]), float(delta[0])
    if psi == 0.0:
        return ConstrainedFit((0.0, 0.0), 0.0, delta)
    return ConstrainedFit((psi * math.cos(lam), psi * math.sin(lam)), lam, delta)


def profile_loglik(frame, psi):
    """Profile log-likelihood ``-delta_hat(psi) / 2``, additive constant dropped."""
    return -0.5 * constrained_mle(frame, psi).delta


def mle(frame):
    return frame.psi_hat


def likelihood_root(frame, psi0):
    if psi0 < 0.0:
        raise InvalidInputError(f"psi0 must be >= 0, got {psi0}")
    return float(likelihood_root_many(frame.x1, frame.x2, frame.d1, frame.d2, psi0)[0])


def wald_variance(frame):
    """Delta-method variance of ``||x||``: ``(x1^2 d1^2 + x2^2 d2^2) / ||x||^2``."""
    rho = frame.psi_hat
    if rho == 0.0:
        raise UndefinedVarianceError("Wald variance is undefined at x = (0, 0)")
    n1, n2 = frame.x1 / rho, frame.x2 / rho
    return (n1 * frame.d1) ** 2 + (n2 * frame.d2) ** 2


def wald_statistic(frame, psi0):
    if psi0 < 0.0:
        raise InvalidInputError(f"psi0 must be >= 0, got {psi0}")
    return (frame.psi_hat - psi0) ** 2 / wald_variance(frame)


def significance_probability(frame, psi0):
    """``p_obs = Phi(-r(psi0))``."""
    return float(ndtr(-likelihood_root(frame, psi0)))


def test_hypothesis(frame, psi0):
    """Bundle ``psi_hat``, ``r``, ``w`` and ``p_obs`` for the null ``psi = psi0``.

    The composite null ``psi >= psi0`` is tested at its boundary, where the
    significance probability is largest.  Rejection at level ``alpha`` is
    ``p_obs < alpha`` and is left to the caller.
    """
    r = likelihood_root(frame, psi0)
    try:
        w = wald_statistic(frame, psi0)
    except UndefinedVarianceError:
        w = None
    return TestResult(psi0=psi0, r=r, w=w, p_obs=float(ndtr(-r)), psi_hat=frame.psi_hat)


test_hypothesis.__test__ = False


def confidence_interval(frame, level=0.95):
    lower, upper, truncated = confidence_interval_many(frame.x1, frame.x2, frame.d1, frame.d2, level)
    return ConfidenceInterval(float(lower[0]), float(upper[0]), level, bool(truncated[0]))
