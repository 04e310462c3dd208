"""Sampling-based checks: Monte Carlo disk probability, the ordering
``pc_hat <= p_obs`` over random frames, calibration of ``p_obs`` and
coverage of the profile-likelihood interval."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import rng
from .collision import DEFAULT_CONFIG, pc_quadrature_many
from .errors import InvalidInputError, PropertyViolationError
from .inference import confidence_interval_many, significance_probability_many

ORDERING_SLACK = 1e-12
KS_CRITICAL_1PCT = 1.63  # asymptotic 1% critical value of sqrt(n) * D
_MIN_SAMPLES = 1000
_SWEEP_CHUNK = 256


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    std_error: float
    samples: int
    seed: int


def mc_pc(frame, center, n, seed):
    """Fraction of ``n`` draws from N(center, diag(d1^2, d2^2)) inside the disk.

    Draws come from the counter-based stream, so a given ``(seed, n)`` always
    produces the same estimate.  ``std_error = sqrt(p (1 - p) / n)``.
    """
    n = int(n)
    if n < _MIN_SAMPLES:
        raise InvalidInputError(f"n must be >= {_MIN_SAMPLES}, got {n}")
    c1, c2 = (float(v) for v in center)
    if not (math.isfinite(c1) and math.isfinite(c2)):
        raise InvalidInputError("center must be finite")
    hits = 0
    radius2 = frame.hbr * frame.hbr
    for start in range(0, n, rng.BLOCK * 16):
        count = min(rng.BLOCK * 16, n - start)
        z = rng.normals(seed, rng.MC_PC, start, count, 2)
        p1 = c1 + frame.d1 * z[:, 0]
        p2 = c2 + frame.d2 * z[:, 1]
        hits += int(np.count_nonzero(p1 * p1 + p2 * p2 <= radius2))
    p = hits / n
    return McEstimate(p, math.sqrt(p * (1.0 - p) / n), n, int(seed))


# --------------------------------------------------------------------------
# ordering sweep

_CASES = ("inside", "boundary", "outside")


@dataclass
class SweepReport:
    configs: int
    violations: int
    boundary_checks: int
    seed: int
    offending: list = field(default_factory=list)
    max_excess: float = -math.inf  # largest pc_hat - p_obs seen

    def as_dict(self):
        return {
            "configs": self.configs,
            "violations": self.violations,
            "boundary_checks": self.boundary_checks,
            "seed": self.seed,
            "max_excess": self.max_excess,
            "offending": self.offending,
        }


def sweep_frames(n_configs, seed, start=0):
    """Random frames for the ordering sweep, as column arrays plus case labels.

    Standard deviations are log-uniform on [1e-3, 1e3] km (so anisotropy
    reaches 1e6), ``||x|| / max(d)`` is uniform on [0, 10], the direction is
    uniform, and the case cycles inside / boundary / outside by index.  With
    a log-uniform factor ``f`` on [1, 1e3], ``hbr`` is ``||x|| * f`` inside,
    exactly ``||x||`` on the boundary and ``||x|| / f`` outside.
    """
    u = rng.uniforms(seed, rng.SWEEP, start, n_configs, 5)
    d = 10.0 ** (-3.0 + 6.0 * u[:, :2])
    d1 = d.max(axis=1)
    d2 = d.min(axis=1)
    rho = 10.0 * u[:, 2] * d1
    angle = 2.0 * math.pi * u[:, 3]
    x1 = rho * np.cos(angle)
    x2 = rho * np.sin(angle)
    norm = np.hypot(x1, x2)
    f = 10.0 ** (3.0 * u[:, 4])
    case = (np.arange(start, start + n_configs) % 3).astype(int)
    hbr = np.where(case == 0, norm * f, np.where(case == 1, norm, norm / f))
    # a frame at the origin has no boundary; give it a disk around it instead
    hbr = np.where(hbr > 0.0, hbr, f * d1)
    return x1, x2, d1, d2, hbr, case


def theorem_sweep(n_configs, seed, cfg=DEFAULT_CONFIG, raise_on_violation=True):
    """Check ``pc_hat <= p_obs(psi0 = hbr) + 1e-12`` on random frames.

    Exact-boundary frames additionally require ``p_obs == 0.5`` (to 1e-15)
    and ``pc_hat < 0.5``.

    Raises:
        PropertyViolationError: some frame broke the ordering; the report is
            attached as ``error.report``.
    """
    n_configs = int(n_configs)
    if n_configs < 1:
        raise InvalidInputError(f"n_configs must be >= 1, got {n_configs}")
    report = SweepReport(n_configs, 0, 0, int(seed))
    for start in range(0, n_configs, _SWEEP_CHUNK):
        count = min(_SWEEP_CHUNK, n_configs - start)
        x1, x2, d1, d2, hbr, case = sweep_frames(count, seed, start)
        pc = pc_quadrature_many(x1, x2, d1, d2, hbr, cfg)
        p_obs = significance_probability_many(x1, x2, d1, d2, hbr)
        excess = pc - p_obs
        bad = excess > ORDERING_SLACK
        boundary = case == 1
        report.boundary_checks += int(boundary.sum())
        bad |= boundary & ((np.abs(p_obs - 0.5) > 1e-15) | ~(pc < 0.5))
        report.max_excess = max(report.max_excess, float(excess.max()))
        for i in np.flatnonzero(bad):
            report.offending.append(
                {
                    "index": start + int(i),
                    "case": _CASES[case[i]],
                    "frame": [float(x1[i]), float(x2[i]), float(d1[i]), float(d2[i]), float(hbr[i])],
                    "pc_hat": float(pc[i]),
                    "p_obs": float(p_obs[i]),
                }
            )
        report.violations += int(bad.sum())
    if report.violations and raise_on_violation:
        err = PropertyViolationError(
            f"{report.violations} of {n_configs} frames violate pc_hat <= p_obs", report.offending
        )
        err.report = report
        raise err
    return report


# --------------------------------------------------------------------------
# calibration and coverage


def _simulate(d1, d2, psi, lambda_grid, replicates, seed, stream):
    """Observed positions around true points spread over ``lambda_grid`` angles.

    Replicate ``k`` uses angle ``2 pi (k mod grid) / grid``.
    """
    lam = 2.0 * math.pi * (np.arange(replicates) % lambda_grid) / lambda_grid
    z = rng.normals(seed, stream, 0, replicates, 2)
    x1 = psi * np.cos(lam) + d1 * z[:, 0]
    x2 = psi * np.sin(lam) + d2 * z[:, 1]
    return x1, x2


def _check_study(d1, d2, psi, lambda_grid, replicates):
    if not (d1 > 0.0 and d2 > 0.0):
        raise InvalidInputError("d1 and d2 must be > 0")
    if not psi > 0.0:
        raise InvalidInputError("psi must be > 0")
    if int(lambda_grid) < 1:
        raise InvalidInputError("lambda_grid must be >= 1")
    if int(replicates) < _MIN_SAMPLES:
        raise InvalidInputError(f"replicates must be >= {_MIN_SAMPLES}")


@dataclass(frozen=True)
class CalibrationReport:
    ks_statistic: float
    critical_value: float
    replicates: int
    empirical_quantiles: dict

    @property
    def calibrated(self):
        return self.ks_statistic < self.critical_value


def calibration_study(d1, d2, psi0, lambda_grid=36, replicates=10_000, seed=0):
    """KS distance between pooled ``p_obs(psi0)`` values and Uniform(0, 1).

    Data are simulated with the true position on the circle ``||xi|| = psi0``
    at each grid angle.  The critical value is ``1.63 / sqrt(n)``.
    """
    _check_study(d1, d2, psi0, lambda_grid, replicates)
    n = int(replicates)
    x1, x2 = _simulate(d1, d2, psi0, int(lambda_grid), n, seed, rng.CALIBRATION)
    p = significance_probability_many(x1, x2, np.full(n, d1), np.full(n, d2), np.full(n, psi0))
    ks = float(stats.kstest(p, "uniform").statistic)
    levels = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
    quantiles = {f"{q:g}": float(v) for q, v in zip(levels, np.quantile(p, levels))}
    return CalibrationReport(ks, KS_CRITICAL_1PCT / math.sqrt(n), n, quantiles)


@dataclass(frozen=True)
class CoverageReport:
    coverage: float
    covered: int
    replicates: int
    level: float


def coverage_study(d1, d2, psi_true, level=0.95, replicates=10_000, seed=0, lambda_grid=36):
    """Fraction of simulated profile-likelihood intervals containing ``psi_true``."""
    _check_study(d1, d2, psi_true, lambda_grid, replicates)
    n = int(replicates)
    x1, x2 = _simulate(d1, d2, psi_true, int(lambda_grid), n, seed, rng.COVERAGE)
    lower, upper, _ = confidence_interval_many(x1, x2, np.full(n, d1), np.full(n, d2), level)
    covered = int(np.count_nonzero((lower <= psi_true) & (psi_true <= upper)))
    return CoverageReport(covered / n, covered, n, float(level))

