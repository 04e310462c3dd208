"""Encounter-plane reduction of a two-object conjunction.

Three-dimensional states and position covariances are reduced to an
:class:`EncounterFrame`: the observed relative position expressed in the
principal axes of the projected 2x2 covariance, the principal standard
deviations, and the combined hard-body radius.  Units are km and km/s
throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCovarianceError, DegenerateGeometryError, InvalidInputError

MIN_SPEED = 1e-12  # km/s
MIN_EIGENVALUE = 1e-18  # km^2
_POLE_COSINE = 1.0 - 1e-6


def _vec3(value, name):
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise InvalidInputError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite, got {arr.tolist()}")
    arr.setflags(write=False)
    return arr


def _symmetric(value, size, name):
    m = np.array(value, dtype=float)
    if m.shape != (size, size):
        raise InvalidInputError(f"{name} must be {size}x{size}, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{name} must be finite")
    scale = max(float(np.max(np.abs(m))), np.finfo(float).tiny)
    if np.max(np.abs(m - m.T)) > 1e-9 * scale:
        raise InvalidInputError(f"{name} is not symmetric to 1e-9 relative")
    m = 0.5 * (m + m.T)
    trace = float(np.trace(m))
    if np.min(np.linalg.eigvalsh(m)) < -1e-12 * abs(trace):
        raise InvalidInputError(f"{name} is not positive semidefinite")
    m.setflags(write=False)
    return m


class _ArrayValue:
    """Value equality and hashing for frozen dataclasses holding arrays."""

    def _fields(self):
        return tuple(getattr(self, f) for f in self.__dataclass_fields__)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return all(
            np.array_equal(a, b) if isinstance(a, np.ndarray) else a == b
            for a, b in zip(self._fields(), other._fields())
        )

    def __hash__(self):
        return hash(tuple(v.tobytes() if isinstance(v, np.ndarray) else v for v in self._fields()))


@dataclass(frozen=True, eq=False)
class StateVector(_ArrayValue):
    """Position (km) and velocity (km/s) of one object."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        object.__setattr__(self, "velocity", _vec3(self.velocity, "velocity"))


@dataclass(frozen=True, eq=False)
class PositionCovariance(_ArrayValue):
    """Symmetric positive semidefinite 3x3 position covariance, km^2."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _symmetric(self.matrix, 3, "position covariance"))

    @classmethod
    def from_lower(cls, xx, yx, yy, zx, zy, zz):
        """Build from the six lower-triangular entries in row order."""
        return cls(np.array([[xx, yx, zx], [yx, yy, zy], [zx, zy, zz]], dtype=float))

    def __add__(self, other):
        return PositionCovariance(self.matrix + other.matrix)


@dataclass(frozen=True, eq=False)
class FullStateCovariance(_ArrayValue):
    """6x6 position/velocity covariance.  Stored, never propagated."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _symmetric(self.matrix, 6, "state covariance"))


@dataclass(frozen=True, eq=False)
class RelativeState(_ArrayValue):
    """Relative position ``mu`` (km), velocity ``nu`` (km/s) and combined covariance."""

    mu: np.ndarray
    nu: np.ndarray
    covariance: PositionCovariance

    def __post_init__(self):
        object.__setattr__(self, "mu", _vec3(self.mu, "mu"))
        object.__setattr__(self, "nu", _vec3(self.nu, "nu"))


@dataclass(frozen=True)
class EncounterFrame:
    """Reduced two-dimensional conjunction.

    ``(x1, x2)`` is the observed position in the principal axes of the
    encounter-plane covariance ``diag(d1**2, d2**2)``; ``hbr`` is the combined
    hard-body radius.  All lengths in km.
    """

    x1: float
    x2: float
    d1: float
    d2: float
    hbr: float

    def __post_init__(self):
        for name in ("x1", "x2", "d1", "d2", "hbr"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise InvalidInputError(f"{name} must be a number, got {value!r}") from None
            if not math.isfinite(value):
                raise InvalidInputError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        for name in ("d1", "d2", "hbr"):
            if getattr(self, name) <= 0.0:
                raise InvalidInputError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def x(self):
        return (self.x1, self.x2)

    @property
    def psi_hat(self):
        """Observed miss distance ``||x||``."""
        return math.hypot(self.x1, self.x2)


def relative_state(primary, primary_cov, secondary, secondary_cov):
    """Form the secondary-minus-primary relative state.

    Position errors of the two objects are assumed independent, so the
    combined covariance is the sum of the two position covariances.
    """
    mu = secondary.position - primary.position
    nu = secondary.velocity - primary.velocity
    return RelativeState(mu, nu, primary_cov + secondary_cov)


def encounter_basis(nu):
    """Return an orthonormal basis ``(e1, e2)`` of the plane normal to ``nu``.

    ``e1 = nu x k`` with ``k = z``, or ``k = x`` when ``nu`` is within 1e-6 of
    the z axis; ``e2 = nu x e1``.  Both normalized.
    """
    nu = np.asarray(nu, dtype=float)
    speed = float(np.linalg.norm(nu))
    if not speed > MIN_SPEED:
        raise DegenerateGeometryError(f"relative speed {speed:.3e} km/s too small for an encounter plane")
    k = np.array([0.0, 0.0, 1.0])
    if abs(nu[2]) / speed > _POLE_COSINE:
        k = np.array([1.0, 0.0, 0.0])
    e1 = np.cross(nu, k)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nu, e1)
    e2 /= np.linalg.norm(e2)
    return e1, e2


def project_to_encounter_frame(rel, hbr):
    """Project a relative state onto its encounter plane.

    The in-plane covariance ``B.T @ C @ B`` (``B = [e1 e2]``) is
    eigendecomposed; the observed position is expressed in its principal axes
    with ``d1 >= d2`` and ``x1 >= 0`` (``x2 >= 0`` when ``x1 == 0``).  The
    principal axes form a right-handed pair.

    Raises:
        DegenerateGeometryError: relative velocity is (near) zero.
        DegenerateCovarianceError: an in-plane eigenvalue is <= 1e-18 km^2.
    """
    e1, e2 = encounter_basis(rel.nu)
    basis = np.column_stack([e1, e2])
    c2 = basis.T @ rel.covariance.matrix @ basis
    c2 = 0.5 * (c2 + c2.T)
    evals, evecs = np.linalg.eigh(c2)
    if evals[0] <= MIN_EIGENVALUE:
        raise DegenerateCovarianceError(
            f"projected covariance eigenvalue {evals[0]:.3e} km^2 <= {MIN_EIGENVALUE:g}"
        )
    v1 = evecs[:, 1]
    inplane = basis.T @ rel.mu
    x1 = float(v1 @ inplane)
    if x1 < 0.0:
        v1 = -v1
        x1 = -x1
    v2 = np.array([-v1[1], v1[0]])
    x2 = float(v2 @ inplane)
    if x1 == 0.0 and x2 < 0.0:
        v1, v2 = -v1, -v2
        x2 = -x2
    return EncounterFrame(x1, x2, math.sqrt(evals[1]), math.sqrt(evals[0]), hbr)


def geometric_miss_distance(mu, nu):
    """Distance of closest approach under linear motion: ``||mu x nu|| / ||nu||``."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    speed = float(np.linalg.norm(nu))
    if not speed > 0.0:
        raise DegenerateGeometryError("relative velocity is zero")
    psi = float(np.linalg.norm(np.cross(mu, nu))) / speed
    return min(psi, float(np.linalg.norm(mu)))
