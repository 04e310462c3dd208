"""Risk assessment of frames and timelines: hit/miss synthesis, covariance
scaling, batch assessment and confusion tables."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import rng
from .collision import DEFAULT_CONFIG, pc_chan_value, pc_quadrature_many, scaled
from .errors import EmptyCatalogError, InvalidInputError, PropertyViolationError
from .geometry import EncounterFrame
from .inference import ConfidenceInterval, confidence_interval_many, likelihood_root_many
from .montecarlo import ORDERING_SLACK

DEFAULT_KAPPA = 0.1
DEFAULT_PC_THRESHOLD = 1e-4
_BATCH = 64


@dataclass(frozen=True)
class TimelineSeries:
    """Encounter frames of one conjunction, oldest first.

    ``epochs`` holds ``(lead_time_hours, frame)`` pairs with lead times
    strictly decreasing and non-negative.
    """

    epochs: tuple
    label: str = "base"

    def __post_init__(self):
        epochs = tuple((float(t), f) for t, f in self.epochs)
        if not epochs:
            raise InvalidInputError("a timeline needs at least one epoch")
        leads = [t for t, _ in epochs]
        if any(not math.isfinite(t) or t < 0.0 for t in leads):
            raise InvalidInputError("lead times must be finite and >= 0")
        if any(b >= a for a, b in zip(leads, leads[1:])):
            raise InvalidInputError("lead times must be strictly decreasing")
        object.__setattr__(self, "epochs", epochs)

    @property
    def lead_times(self):
        return [t for t, _ in self.epochs]

    @property
    def frames(self):
        return [f for _, f in self.epochs]

    def __len__(self):
        return len(self.epochs)


@dataclass(frozen=True)
class RiskAssessment:
    frame: EncounterFrame
    psi0: float
    pc_foster: float
    pc_chan: float
    p_obs: float
    r: float
    w: float | None
    psi_hat: float
    ci: ConfidenceInterval

    def __post_init__(self):
        if not self.pc_foster <= self.p_obs + ORDERING_SLACK:
            raise PropertyViolationError(
                f"pc_hat {self.pc_foster!r} exceeds p_obs {self.p_obs!r}",
                [{"frame": list(self.frame.x + (self.frame.d1, self.frame.d2, self.frame.hbr))}],
            )


@dataclass(frozen=True)
class ConfusionTable:
    """Counts of assessments by ``p_obs >= alpha`` (rows) and ``pc >= threshold`` (columns)."""

    alpha: float
    pc_threshold: float
    obs_high_pc_low: int
    obs_high_pc_high: int
    obs_low_pc_low: int
    obs_low_pc_high: int  # flagged by pc but not by p_obs

    @property
    def total(self):
        return self.obs_high_pc_low + self.obs_high_pc_high + self.obs_low_pc_low + self.obs_low_pc_high

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "pc_threshold": self.pc_threshold,
            "p_obs>=alpha,pc<threshold": self.obs_high_pc_low,
            "p_obs>=alpha,pc>=threshold": self.obs_high_pc_high,
            "p_obs<alpha,pc<threshold": self.obs_low_pc_low,
            "p_obs<alpha,pc>=threshold": self.obs_low_pc_high,
            "total": self.total,
        }


def scale_covariance(frame, c):
    """Frame with the covariance multiplied by ``c`` (so ``d -> sqrt(c) d``)."""
    return scaled(frame, c)


def _assess_chunk(frames, psi0, level, cfg):
    cols = np.array([(f.x1, f.x2, f.d1, f.d2, f.hbr) for f in frames], dtype=float)
    x1, x2, d1, d2, hbr = cols.T
    psi = hbr if psi0 is None else np.full(len(frames), float(psi0))
    pc = pc_quadrature_many(x1, x2, d1, d2, hbr, cfg)
    r = likelihood_root_many(x1, x2, d1, d2, psi)
    lower, upper, truncated = confidence_interval_many(x1, x2, d1, d2, level)
    out = []
    for i, f in enumerate(frames):
        rho = f.psi_hat
        if rho > 0.0:
            var = (f.x1 / rho * f.d1) ** 2 + (f.x2 / rho * f.d2) ** 2
            w = float((rho - psi[i]) ** 2 / var)
        else:
            w = None
        out.append(
            RiskAssessment(
                frame=f,
                psi0=float(psi[i]),
                pc_foster=float(pc[i]),
                pc_chan=pc_chan_value(f.x1, f.x2, f.d1, f.d2, f.hbr),
                p_obs=float(ndtr(-r[i])),
                r=float(r[i]),
                w=w,
                psi_hat=f.psi_hat,
                ci=ConfidenceInterval(float(lower[i]), float(upper[i]), float(level), bool(truncated[i])),
            )
        )
    return out


def assess_many(frames, psi0=None, level=0.95, cfg=DEFAULT_CONFIG, workers=1):
    """Assess frames at ``psi0`` (each frame's own hbr when ``None``).

    Work is split into fixed chunks; every per-frame value is independent of
    the chunking and of ``workers``, and results keep input order.
    """
    frames = list(frames)
    if psi0 is not None and not float(psi0) >= 0.0:
        raise InvalidInputError(f"psi0 must be >= 0, got {psi0}")
    if not 0.0 < level < 1.0:
        raise InvalidInputError(f"level must be in (0, 1), got {level}")
    chunks = [frames[i : i + _BATCH] for i in range(0, len(frames), _BATCH)]
    if int(workers) <= 1 or len(chunks) <= 1:
        parts = [_assess_chunk(c, psi0, level, cfg) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(lambda c: _assess_chunk(c, psi0, level, cfg), chunks))
    return [a for part in parts for a in part]


def assess(frame, psi0=None, level=0.95, cfg=DEFAULT_CONFIG):
    """Collision probabilities, test of ``psi = psi0`` and interval for one frame.

    ``psi0`` defaults to the frame's hard-body radius.
    """
    return assess_many([frame], psi0, level, cfg)[0]


def confusion_matrix(assessments, alpha, pc_threshold=DEFAULT_PC_THRESHOLD):
    """Cross-tabulate ``p_obs >= alpha`` against ``pc_foster >= pc_threshold``."""
    assessments = list(assessments)
    if not assessments:
        raise EmptyCatalogError("confusion matrix of an empty assessment list")
    cells = [[0, 0], [0, 0]]
    for a in assessments:
        cells[a.p_obs < alpha][a.pc_foster >= pc_threshold] += 1
    return ConfusionTable(float(alpha), float(pc_threshold), cells[0][0], cells[0][1], cells[1][0], cells[1][1])


# --------------------------------------------------------------------------
# timelines


def synthesize_hit_miss(base, kappa=DEFAULT_KAPPA, seed=0):
    """Hit and miss versions of a timeline.

    Both receive the same per-epoch noise ``kappa * (d1_f z1, d2_f z2)``
    where ``d_f`` are the final epoch's standard deviations.  The hit series
    is additionally shifted by ``-x_final`` so that its last observed
    position sits at the origin before noise.
    """
    kappa = float(kappa)
    if not (kappa >= 0.0 and math.isfinite(kappa)):
        raise InvalidInputError(f"kappa must be finite and >= 0, got {kappa}")
    final = base.frames[-1]
    z = rng.normals(seed, rng.HIT_MISS, 0, len(base), 2)
    hit, miss = [], []
    for k, (lead, f) in enumerate(base.epochs):
        n1 = kappa * final.d1 * z[k, 0]
        n2 = kappa * final.d2 * z[k, 1]
        miss.append((lead, EncounterFrame(f.x1 + n1, f.x2 + n2, f.d1, f.d2, f.hbr)))
        hit.append((lead, EncounterFrame((f.x1 - final.x1) + n1, (f.x2 - final.x2) + n2, f.d1, f.d2, f.hbr)))
    return TimelineSeries(tuple(hit), "hit"), TimelineSeries(tuple(miss), "miss")


def decaying_timeline(
    days=7.0,
    step_hours=6.0,
    hbr=0.02,
    x_final=(0.3, 0.2),
    drift=(0.6, -0.5),
    d_initial=(2.0, 0.7),
    d_final=(0.06, 0.02),
):
    """Synthetic conjunction timeline with geometrically shrinking covariance.

    Epochs run from ``days`` before tca to ``step_hours`` before it.  The
    standard deviations move geometrically from ``d_initial`` to
    ``d_final``; the observed position moves linearly from
    ``x_final + drift`` to ``x_final``.
    """
    n = int(round(days * 24.0 / step_hours))
    if n < 1:
        raise InvalidInputError("timeline needs at least one epoch")
    epochs = []
    for k in range(n):
        lead = (n - k) * step_hours
        u = (n - 1 - k) / (n - 1) if n > 1 else 0.0  # 1 at the first epoch, 0 at the last
        d1 = d_final[0] * (d_initial[0] / d_final[0]) ** u
        d2 = d_final[1] * (d_initial[1] / d_final[1]) ** u
        frame = EncounterFrame(x_final[0] + u * drift[0], x_final[1] + u * drift[1], d1, d2, hbr)
        epochs.append((lead, frame))
    return TimelineSeries(tuple(epochs))


@dataclass(frozen=True)
class TimelineRow:
    lead_time: float
    psi_hat: float
    log10_pc: float  # -inf when pc is exactly 0
    log10_p_obs: float


def _log10(p):
    return math.log10(p) if p > 0.0 else -math.inf


def timeline_report(series, hbr=None, cfg=DEFAULT_CONFIG):
    """Per-epoch ``(lead_time, psi_hat, log10 pc, log10 p_obs)`` at ``psi0 = hbr``.

    ``hbr`` overrides the frames' own radius when given.
    """
    frames = series.frames
    if hbr is not None:
        frames = [EncounterFrame(f.x1, f.x2, f.d1, f.d2, hbr) for f in frames]
    rows = []
    for lead, a in zip(series.lead_times, assess_many(frames, cfg=cfg)):
        rows.append(TimelineRow(lead, a.psi_hat, _log10(a.pc_foster), _log10(a.p_obs)))
    return rows
