"""Conjunction-message catalogs: parsing, event grouping, decision-epoch
selection, summary statistics and per-message features.

Catalog format: comma-separated text with a header row.  Column names are
configurable through :class:`CatalogSchema`; the defaults are

``primary_id, secondary_id, creation_time, tca``,
``{obj}_r_x, {obj}_r_y, {obj}_r_z, {obj}_v_x, {obj}_v_y, {obj}_v_z`` and
``{obj}_c_xx, {obj}_c_yx, {obj}_c_yy, {obj}_c_zx, {obj}_c_zy, {obj}_c_zz``
for ``obj`` in ``primary, secondary`` (km, km/s, km^2; covariance in
lower-triangular row order), plus the optional
``foster_1, foster_2, chan_1, chan_2, hbr``.  Other columns (for example
UVW-frame data) are ignored.  Timestamps are ISO-8601, UTC unless an offset
is given, and are held as integer microseconds since 1970-01-01T00:00Z.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from . import rng
from .errors import (
    DegenerateCovarianceError,
    DegenerateGeometryError,
    EmptyCatalogError,
    InvalidInputError,
    SchemaError,
)
from .geometry import PositionCovariance, StateVector, project_to_encounter_frame, relative_state

MICROSECOND = 1
SECOND = 1_000_000
MINUTE = 60 * SECOND
HOUR = 60 * MINUTE
GROUP_WINDOW = 15 * MINUTE
DECISION_HORIZON = 12 * HOUR
QUANTILE_LEVELS = (25, 50, 75, 90, 95, 99)
DEFAULT_THRESHOLDS = (1e-7, 1e-4)

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_STATE = ("r_x", "r_y", "r_z", "v_x", "v_y", "v_z")
_COV = ("c_xx", "c_yx", "c_yy", "c_zx", "c_zy", "c_zz")
_OBJECTS = ("primary", "secondary")
MANDATORY = (
    ("primary_id", "secondary_id", "creation_time", "tca")
    + tuple(f"{o}_{s}" for o in _OBJECTS for s in _STATE)
    + tuple(f"{o}_{c}" for o in _OBJECTS for c in _COV)
)
OPTIONAL = ("foster_1", "foster_2", "chan_1", "chan_2", "hbr")


def parse_timestamp(text):
    """ISO-8601 text to integer microseconds since the Unix epoch (UTC)."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return (dt - _EPOCH) // timedelta(microseconds=1)


def format_timestamp(micros):
    dt = _EPOCH + timedelta(microseconds=int(micros))
    return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass(frozen=True)
class CatalogSchema:
    """Map from canonical field name to the column header used in a file."""

    columns: dict = field(default_factory=dict)

    def header(self, name):
        return self.columns.get(name, name)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or not all(isinstance(v, str) for v in data.values()):
            raise SchemaError(f"{path}: schema map must be a JSON object of strings")
        unknown = set(data) - set(MANDATORY) - set(OPTIONAL)
        if unknown:
            raise SchemaError(f"{path}: unknown canonical fields {sorted(unknown)}")
        return cls(dict(data))


DEFAULT_SCHEMA = CatalogSchema()


@dataclass(frozen=True)
class ConjunctionMessage:
    primary_id: str
    secondary_id: str
    creation_time: int  # microseconds, UTC
    tca: int  # microseconds, UTC
    primary_state: StateVector
    secondary_state: StateVector
    primary_cov: PositionCovariance
    secondary_cov: PositionCovariance
    foster_1: float | None = None
    foster_2: float | None = None
    chan_1: float | None = None
    chan_2: float | None = None
    hbr: float | None = None
    line: int = field(default=0, compare=False)  # source line, not part of the content

    @property
    def lead_time(self):
        """``tca - creation_time`` in microseconds."""
        return self.tca - self.creation_time

    def sort_key(self):
        """Total order on message content, independent of file position."""
        return (
            self.primary_id,
            self.secondary_id,
            self.tca,
            self.creation_time,
            tuple(self.primary_state.position) + tuple(self.primary_state.velocity),
            tuple(self.secondary_state.position) + tuple(self.secondary_state.velocity),
            tuple(self.primary_cov.matrix.ravel()),
            tuple(self.secondary_cov.matrix.ravel()),
            tuple(-1.0 if v is None else v for v in (self.foster_1, self.foster_2, self.chan_1, self.chan_2, self.hbr)),
        )


@dataclass(frozen=True)
class Reject:
    line: int  # 1-based line number in the file, header is line 1
    reason: str


@dataclass
class ParsedCatalog:
    messages: list
    rejects: list

    def __iter__(self):
        return iter(self.messages)

    def __len__(self):
        return len(self.messages)


def _number(row, name, columns):
    text = row[columns[name]].strip()
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"{name}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"{name}: not finite: {text!r}")
    return value


def _optional(row, name, columns):
    if name not in columns:
        return None
    text = row[columns[name]].strip()
    if text == "":
        return None
    return _number(row, name, columns)


def _message(row, columns, line):
    ids = []
    for name in ("primary_id", "secondary_id"):
        value = row[columns[name]].strip()
        if not value:
            raise ValueError(f"{name}: empty identifier")
        ids.append(value)
    times = []
    for name in ("creation_time", "tca"):
        try:
            times.append(parse_timestamp(row[columns[name]]))
        except ValueError:
            raise ValueError(f"{name}: bad timestamp {row[columns[name]]!r}") from None
    if times[0] > times[1]:
        raise ValueError("creation_time is after tca")
    states, covs = [], []
    for obj in _OBJECTS:
        v = [_number(row, f"{obj}_{s}", columns) for s in _STATE]
        c = [_number(row, f"{obj}_{s}", columns) for s in _COV]
        try:
            states.append(StateVector(v[:3], v[3:]))
            covs.append(PositionCovariance.from_lower(*c))
        except InvalidInputError as exc:
            raise ValueError(f"{obj}: {exc}") from None
    extras = {name: _optional(row, name, columns) for name in OPTIONAL}
    for name in ("foster_1", "foster_2", "chan_1", "chan_2"):
        value = extras[name]
        if value is not None and not 0.0 <= value <= 1.0:
            raise ValueError(f"{name}: probability outside [0, 1]: {value}")
    if extras["hbr"] is not None and not extras["hbr"] > 0.0:
        raise ValueError(f"hbr must be > 0, got {extras['hbr']}")
    return ConjunctionMessage(
        ids[0], ids[1], times[0], times[1], states[0], states[1], covs[0], covs[1], **extras, line=line
    )


def parse_catalog(path, schema=DEFAULT_SCHEMA):
    """Read a catalog file.

    Rows that cannot be parsed are collected in ``rejects`` with their line
    number and reason; parsing continues.

    Raises:
        SchemaError: the header lacks a mandatory column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        position = {h: i for i, h in enumerate(header)}
        columns = {}
        missing = []
        for name in MANDATORY + OPTIONAL:
            h = schema.header(name)
            if h in position:
                columns[name] = position[h]
            elif name in MANDATORY:
                missing.append(h)
        if missing:
            raise SchemaError(f"{path}: missing mandatory column(s): {', '.join(missing)}")
        messages, rejects = [], []
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                rejects.append(Reject(line, f"expected {len(header)} fields, found {len(row)}"))
                continue
            try:
                messages.append(_message(row, columns, line))
            except ValueError as exc:
                rejects.append(Reject(line, str(exc)))
    return ParsedCatalog(messages, rejects)


# --------------------------------------------------------------------------
# grouping and epoch selection


@dataclass(frozen=True)
class EventGroup:
    key: tuple  # (primary_id, secondary_id, anchor tca in microseconds)
    messages: tuple


def group_events(messages, window=GROUP_WINDOW):
    """Cluster messages into conjunction events.

    Messages are partitioned by ``(primary_id, secondary_id)`` and sorted by
    tca; each cluster is anchored at its earliest tca and takes every
    following message whose tca is at most ``window`` later.  The first
    message beyond that starts the next cluster.  The result is sorted by
    key and does not depend on input order.
    """
    parts = {}
    for m in messages:
        parts.setdefault((m.primary_id, m.secondary_id), []).append(m)
    groups = []
    for ids in sorted(parts):
        ordered = sorted(parts[ids], key=ConjunctionMessage.sort_key)
        cluster = [ordered[0]]
        for m in ordered[1:]:
            if m.tca - cluster[0].tca <= window:
                cluster.append(m)
            else:
                groups.append(EventGroup((*ids, cluster[0].tca), tuple(cluster)))
                cluster = [m]
        groups.append(EventGroup((*ids, cluster[0].tca), tuple(cluster)))
    return groups


def select_decision_epoch(group, horizon=DECISION_HORIZON):
    """Message whose lead time is nearest ``horizon`` (microseconds).

    Ties go to the earlier creation time.
    """
    messages = group.messages if isinstance(group, EventGroup) else tuple(group)
    if not messages:
        raise InvalidInputError("cannot select an epoch from an empty group")
    return min(messages, key=lambda m: (abs(m.lead_time - horizon), m.creation_time, m.sort_key()))


# --------------------------------------------------------------------------
# summaries and features


@dataclass(frozen=True)
class CatalogSummary:
    count: int
    mean: float
    min: float
    max: float
    quantiles: dict  # percent level -> value
    threshold_counts: dict  # threshold -> (count, fraction)


def nearest_rank(sorted_values, percent):
    """Nearest-rank quantile: the ``ceil(p n / 100)``-th smallest value."""
    n = len(sorted_values)
    rank = max(1, math.ceil(percent * n / 100.0))
    return sorted_values[rank - 1]


def summarize(values, thresholds=DEFAULT_THRESHOLDS):
    """Mean, extremes, nearest-rank quantiles and exceedance counts.

    A value counts toward a threshold only when strictly greater.

    Raises:
        EmptyCatalogError: ``values`` is empty.
    """
    data = [float(v) for v in values]
    if not data:
        raise EmptyCatalogError("no values to summarize")
    ordered = sorted(data)
    n = len(ordered)
    quantiles = {q: nearest_rank(ordered, q) for q in QUANTILE_LEVELS}
    counts = {}
    for t in thresholds:
        k = sum(1 for v in ordered if v > t)
        counts[float(t)] = (k, k / n)
    return CatalogSummary(n, math.fsum(ordered) / n, ordered[0], ordered[-1], quantiles, counts)


@dataclass(frozen=True)
class Features:
    d1_sq: float
    d2_sq: float
    x1_over_d1: float
    x2_over_d2: float
    psi_hat: float
    psi_hat_over_d2: float
    psi_hat_over_d1: float

    NAMES = ("d1_sq", "d2_sq", "x1_over_d1", "x2_over_d2", "psi_hat", "psi_hat_over_d2", "psi_hat_over_d1")

    def as_tuple(self):
        return tuple(getattr(self, n) for n in self.NAMES)


def message_frame(message, hbr):
    """Encounter frame of a message (hbr from the message when it has one)."""
    rel = relative_state(message.primary_state, message.primary_cov, message.secondary_state, message.secondary_cov)
    radius = message.hbr if message.hbr is not None else hbr
    return project_to_encounter_frame(rel, radius)


def frame_features(frame):
    psi = frame.psi_hat
    return Features(
        frame.d1**2,
        frame.d2**2,
        frame.x1 / frame.d1,
        frame.x2 / frame.d2,
        psi,
        psi / frame.d2,
        psi / frame.d1,
    )


def derive_features(message, hbr):
    """Scatter and histogram features of one message.

    Returns ``(features, None)``, or ``(None, reason)`` when the message
    cannot be projected; such rows are flagged, not plotted.
    """
    try:
        frame = message_frame(message, hbr)
    except (DegenerateCovarianceError, DegenerateGeometryError) as exc:
        return None, str(exc)
    return frame_features(frame), None


# --------------------------------------------------------------------------
# synthetic catalogs


def synthetic_catalog_rows(n_events, seed, start_time="2024-01-01T00:00:00Z"):
    """Rows (header first) of a reproducible synthetic catalog.

    Each event is a low-Earth-orbit encounter with 1 to 6 messages created
    between 72 h and 1 h before tca; the reported tca jitters by up to
    +-5 minutes between messages, and position uncertainty shrinks as tca
    approaches.  About one event in twenty carries a near-singular
    covariance.
    """
    n_events = int(n_events)
    if n_events < 0:
        raise InvalidInputError("n_events must be >= 0")
    t0 = parse_timestamp(start_time)
    header = list(MANDATORY) + list(OPTIONAL)
    rows = [header]
    u = rng.uniforms(seed, rng.CATALOG, 0, n_events, 16)
    z = rng.normals(seed, rng.CATALOG, 0, n_events, 24)
    for e in range(n_events):
        ue, ze = u[e], z[e]
        primary = f"P{int(ue[0] * 50):03d}"
        secondary = f"S{e:05d}"
        tca = t0 + int(ue[1] * 30 * 24 * HOUR)
        # primary on a circular orbit of radius 6800-7500 km
        radius = 6800.0 + 700.0 * ue[2]
        pos = ze[:3] / np.linalg.norm(ze[:3]) * radius
        tangent = np.cross(pos, ze[3:6])
        vel = tangent / np.linalg.norm(tangent) * math.sqrt(398600.4418 / radius)
        rel_speed = 1.0 + 14.0 * ue[3]
        rel_dir = np.cross(pos, ze[6:9])
        rel_vel = rel_dir / np.linalg.norm(rel_dir) * rel_speed
        miss = 10.0 ** (-2.0 + 2.5 * ue[4])
        offset = np.cross(rel_vel, ze[9:12])
        offset = offset / np.linalg.norm(offset) * miss
        n_msgs = 1 + int(ue[5] * 6)
        base_sigma = 10.0 ** (-2.0 + 2.0 * ue[6])
        elongation = 10.0 ** (3.0 * ue[7])
        singular = ue[8] < 0.05
        for k in range(n_msgs):
            lead = int((1.0 + 71.0 * ((k + 1.0 + ue[9]) / (n_msgs + 1.0)) ** 1.5) * HOUR)
            jitter = int((ue[10 + k % 6] - 0.5) * 10 * MINUTE) if k else 0
            msg_tca = tca + jitter
            shrink = (lead / (72 * HOUR)) ** 0.5
            rot, _ = np.linalg.qr(np.reshape(ze[12:21] + 0.1 * k, (3, 3)))
            sig = base_sigma * shrink * np.array([elongation, 1.0, 0.3 + ue[11]])
            if singular:
                sig[1] = sig[2] = 0.0
            cov_p = rot @ np.diag(sig**2) @ rot.T
            cov_s = np.diag((0.5 * base_sigma * shrink * np.array([1.0, 1.0, 1.0])) ** 2) if not singular else np.zeros((3, 3))
            sec_pos = pos + offset + ze[21:24] * 0.05 * miss * shrink
            row = [primary, secondary, format_timestamp(msg_tca - lead), format_timestamp(msg_tca)]
            row += [repr(float(v)) for v in (*pos, *vel)]
            row += [repr(float(v)) for v in (*sec_pos, *(vel + rel_vel))]
            for cov in (cov_p, cov_s):
                row += [repr(float(cov[i, j])) for i, j in ((0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2))]
            row += ["", "", "", "", ""]
            rows.append(row)
    return rows


def write_rows(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
