"""Bernstein-form polynomial segments on hourly intervals.

A segment stores its control values ``coeffs`` over the local parameter
``tau`` in [0, 1] of hour ``span``.  Everything here is exact algebra on the
coefficient vectors; nothing is resampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BernsteinError",
    "BernsteinSegment",
    "PiecewiseBernstein",
    "basis_eval",
    "basis_matrix",
    "eval",
    "derivative",
    "elevate",
    "multiply",
    "add",
    "sub",
    "coeff_bounds",
    "integral",
    "fit_segment",
]


class BernsteinError(ValueError):
    """Domain error raised by the Bernstein algebra."""


def _check_tau(tau) -> np.ndarray:
    t = np.asarray(tau, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise BernsteinError(f"tau must lie in [0, 1], got {tau!r}")
    return t


@dataclass(frozen=True)
class BernsteinSegment:
    """Degree-``n`` polynomial on hour ``span`` in Bernstein form."""

    coeffs: tuple[float, ...]
    span: int = 0

    def __init__(self, coeffs: Iterable[float], span: int = 0):
        values = tuple(float(c) for c in coeffs)
        if not values:
            raise BernsteinError("a segment needs at least one coefficient")
        if not all(np.isfinite(values)):
            raise BernsteinError(f"non-finite coefficient in {values!r}")
        object.__setattr__(self, "coeffs", values)
        object.__setattr__(self, "span", int(span))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def __call__(self, tau):
        return eval(self, tau)

    @classmethod
    def constant(cls, value: float, degree: int = 3, span: int = 0) -> "BernsteinSegment":
        return cls([value] * (degree + 1), span)

    @classmethod
    def zero(cls, degree: int = 3, span: int = 0) -> "BernsteinSegment":
        return cls.constant(0.0, degree, span)


@dataclass(frozen=True)
class PiecewiseBernstein:
    """Hour-contiguous sequence of segments covering ``horizon`` hours."""

    segments: tuple[BernsteinSegment, ...]
    continuity: str = "none"  # one of none, c0, c1
    residuals: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        for t, seg in enumerate(segs):
            if seg.span != t:
                raise BernsteinError(f"segment {t} has span {seg.span}; segments must be hour-contiguous")
        if self.continuity not in ("none", "c0", "c1"):
            raise BernsteinError(f"unknown continuity flag {self.continuity!r}")

    @property
    def horizon(self) -> int:
        return len(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __getitem__(self, t: int) -> BernsteinSegment:
        return self.segments[t]

    def coeff_matrix(self) -> np.ndarray:
        """Coefficients as a ``(horizon, degree+1)`` array (all segments share a degree)."""
        return np.array([s.coeffs for s in self.segments], dtype=float)

    def continuity_residuals(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-boundary residuals of zero- and first-order continuity."""
        c = self.coeff_matrix()
        if len(c) < 2:
            return np.zeros(0), np.zeros(0)
        c0 = c[1:, 0] - c[:-1, -1]
        c1 = (c[1:, 1] - c[1:, 0]) - (c[:-1, -1] - c[:-1, -2])
        return c0, c1

    def sample(self, per_hour: int) -> np.ndarray:
        """Values at ``per_hour`` evenly spaced instants of every hour (tau = k/per_hour)."""
        tau = np.arange(per_hour) / per_hour
        return np.concatenate([eval(s, tau) for s in self.segments]) if self.segments else np.zeros(0)


def basis_eval(b: int, n: int, tau):
    """Bernstein basis function ``C(n, b) tau^b (1 - tau)^(n - b)``."""
    if n < 0 or b < 0 or b > n:
        raise BernsteinError(f"basis index b={b} out of range for degree n={n}")
    t = _check_tau(tau)
    out = comb(n, b) * t**b * (1.0 - t) ** (n - b)
    return float(out) if out.ndim == 0 else out


def basis_matrix(n: int, tau) -> np.ndarray:
    """All ``n+1`` basis functions at each tau; shape ``(len(tau), n+1)``."""
    t = np.atleast_1d(_check_tau(tau))
    b = np.arange(n + 1)
    binom = np.array([comb(n, k) for k in b], dtype=float)
    return binom * t[:, None] ** b * (1.0 - t[:, None]) ** (n - b)


def eval(seg: BernsteinSegment, tau):  # noqa: A001 - mirrors the algebra vocabulary
    """Evaluate ``seg`` at ``tau`` (scalar or array) in [0, 1].

    Uses de Casteljau so endpoint values are exactly the end coefficients.
    """
    t = _check_tau(tau)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    pts = np.tile(seg.as_array(), (t.size, 1))
    for r in range(seg.degree):
        pts = (1.0 - t[:, None]) * pts[:, :-1] + t[:, None] * pts[:, 1:]
    out = pts[:, 0]
    return float(out[0]) if scalar else out


def derivative(seg: BernsteinSegment) -> BernsteinSegment:
    """Derivative with respect to tau, as a degree ``n-1`` segment.

    A degree-0 segment yields a degree-0 zero segment.
    """
    n = seg.degree
    if n == 0:
        return BernsteinSegment([0.0], seg.span)
    c = seg.as_array()
    return BernsteinSegment(n * np.diff(c), seg.span)


def _elevate_once(c: np.ndarray) -> np.ndarray:
    n = len(c) - 1
    b = np.arange(n + 2)
    w = b / (n + 1)
    lower = np.concatenate([[0.0], c])
    upper = np.concatenate([c, [0.0]])
    return w * lower + (1.0 - w) * upper


def elevate(seg: BernsteinSegment, target_degree: int) -> BernsteinSegment:
    if target_degree < seg.degree:
        raise BernsteinError(f"cannot elevate degree {seg.degree} down to {target_degree}")
    c = seg.as_array()
    for _ in range(target_degree - seg.degree):
        c = _elevate_once(c)
    return BernsteinSegment(c, seg.span)


def _same_span(p: BernsteinSegment, q: BernsteinSegment) -> None:
    if p.span != q.span:
        raise BernsteinError(f"segments live on different spans ({p.span} vs {q.span})")


def multiply(p: BernsteinSegment, q: BernsteinSegment) -> BernsteinSegment:
    """Exact product; the result has degree ``n + m``."""
    _same_span(p, q)
    n, m = p.degree, q.degree
    pc, qc = p.as_array(), q.as_array()
    out = np.zeros(n + m + 1)
    for k in range(n + m + 1):
        acc = 0.0
        for j in range(max(0, k - m), min(n, k) + 1):
            acc += comb(n, j) * comb(m, k - j) / comb(n + m, k) * pc[j] * qc[k - j]
        out[k] = acc
    return BernsteinSegment(out, p.span)


def _equalize(p: BernsteinSegment, q: BernsteinSegment) -> tuple[np.ndarray, np.ndarray]:
    _same_span(p, q)
    d = max(p.degree, q.degree)
    return elevate(p, d).as_array(), elevate(q, d).as_array()


def add(p: BernsteinSegment, q: BernsteinSegment) -> BernsteinSegment:
    a, b = _equalize(p, q)
    return BernsteinSegment(a + b, p.span)


def sub(p: BernsteinSegment, q: BernsteinSegment) -> BernsteinSegment:
    a, b = _equalize(p, q)
    return BernsteinSegment(a - b, p.span)


def scale(p: BernsteinSegment, factor: float) -> BernsteinSegment:
    return BernsteinSegment(p.as_array() * factor, p.span)


def coeff_bounds(seg: BernsteinSegment) -> tuple[float, float]:
    """Convex-hull bounds: the segment never leaves ``[min(coeffs), max(coeffs)]``."""
    return min(seg.coeffs), max(seg.coeffs)


def integral(seg: BernsteinSegment, dt: float = 1.0) -> float:
    """Exact integral over the span, ``dt * mean(coeffs)``."""
    return dt * sum(seg.coeffs) / (seg.degree + 1)


RIDGE = 1e-10


def _normal_solve(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares through ridge-damped normal equations plus one refinement step.

    The damping keeps the solve stable for nearly singular layouts; the
    refinement step removes its bias when the problem is well conditioned.
    """
    gram = A.T @ A + RIDGE * np.eye(A.shape[1])
    x = np.linalg.solve(gram, A.T @ y)
    return x + np.linalg.solve(gram, A.T @ (y - A @ x))


def fit_segment(
    samples: Sequence[tuple[float, float]],
    degree: int = 3,
    *,
    start_value: float | None = None,
    start_diff: float | None = None,
    span: int = 0,
    label: str | None = None,
) -> BernsteinSegment:
    """Least-squares Bernstein fit of ``(tau, value)`` samples.

    Parameters
    ----------
    samples : sequence of (tau, value)
        Sample points with tau in [0, 1].
    degree : int
        Degree of the fitted segment.
    start_value : float, optional
        Pins ``coeffs[0]``.  Chained hourly fits pass the previous segment's
        last coefficient here.
    start_diff : float, optional
        Pins ``coeffs[1] - coeffs[0]`` (requires ``start_value``).  Chained
        fits pass the previous segment's last first difference.
    span : int
        Hour index stored on the result.
    label : str, optional
        Name used in error messages, e.g. ``"demand hour 7"``.

    Returns
    -------
    BernsteinSegment

    Raises
    ------
    BernsteinError
        If there are fewer samples than free coefficients or the reduced
        design matrix is rank deficient.
    """
    name = label or f"segment {span}"
    if start_diff is not None and start_value is None:
        raise BernsteinError(f"{name}: start_diff needs start_value")
    if degree < 0:
        raise BernsteinError(f"{name}: negative degree")
    arr = np.asarray(samples, dtype=float).reshape(-1, 2)
    tau, y = arr[:, 0], arr[:, 1]
    n_fixed = (start_value is not None) + (start_diff is not None)
    n_fixed = min(n_fixed, degree + 1)
    n_free = degree + 1 - n_fixed
    if len(tau) < degree + 1:
        raise BernsteinError(
            f"{name}: underdetermined fit, {len(tau)} samples for degree {degree} (need {degree + 1})"
        )
    A = basis_matrix(degree, tau)

    # substitute pinned coefficients: c0 = v, c1 = v + d
    fixed = np.zeros(degree + 1)
    if start_value is not None:
        fixed[0] = start_value
    if start_diff is not None and degree >= 1:
        fixed[1] = start_value + start_diff
    pinned = np.zeros(degree + 1, dtype=bool)
    pinned[:n_fixed] = True
    rhs = y - A[:, pinned] @ fixed[pinned]
    Af = A[:, ~pinned]
    coeffs = fixed.copy()
    if n_free:
        if np.linalg.matrix_rank(Af) < n_free:
            raise BernsteinError(f"{name}: rank-deficient sample layout")
        coeffs[~pinned] = _normal_solve(Af, rhs)
    return BernsteinSegment(coeffs, span)


def fit_piecewise(
    values: Sequence[float],
    per_hour: int,
    horizon: int,
    degree: int = 3,
    *,
    start_value: float | None = None,
    start_diff: float | None = None,
    name: str = "profile",
) -> PiecewiseBernstein:
    """Least-squares fit of a sampled curve by hourly segments joined with c0/c1 continuity.

    ``values`` holds ``horizon * per_hour`` samples (optionally one extra
    closing sample at the end of the horizon), evenly spaced from the start
    of hour 0.  Continuity is imposed by substitution: hour ``t > 0`` inherits
    its first two coefficients from hour ``t - 1``, so the unknowns are the
    whole of hour 0 plus the trailing ``degree - 1`` coefficients of every
    later hour.  All hours are solved jointly; chaining independent hourly
    fits propagates slope errors and diverges geometrically.
    """
    v = np.asarray(values, dtype=float)
    if len(v) not in (horizon * per_hour, horizon * per_hour + 1):
        raise BernsteinError(
            f"{name}: {len(v)} samples do not cover {horizon} h at {per_hour} samples/h"
        )
    if per_hour < degree + 1:
        raise BernsteinError(f"{name}: {per_hour} samples per hour, need at least {degree + 1}")
    if degree < 2:
        raise BernsteinError(f"{name}: c1-continuous chaining needs degree >= 2")
    if start_diff is not None and start_value is None:
        raise BernsteinError(f"{name}: start_diff needs start_value")

    n1 = degree + 1
    # affine map coeffs = G @ z + g0, one row per (hour, b)
    n_head = n1 - (start_value is not None) - (start_diff is not None)
    n_z = n_head + (horizon - 1) * (degree - 1)
    G = np.zeros((horizon * n1, n_z))
    g0 = np.zeros(horizon * n1)
    col = 0
    # hour 0
    for b in range(n1):
        r = b
        if b == 0 and start_value is not None:
            g0[r] = start_value
        elif b == 1 and start_diff is not None:
            G[r] = G[0]
            g0[r] = g0[0] + start_diff
        else:
            G[r, col] = 1.0
            col += 1
    for t in range(1, horizon):
        prev_last, prev_pen = (t - 1) * n1 + degree, (t - 1) * n1 + degree - 1
        r0 = t * n1
        G[r0], g0[r0] = G[prev_last], g0[prev_last]
        G[r0 + 1] = 2 * G[prev_last] - G[prev_pen]
        g0[r0 + 1] = 2 * g0[prev_last] - g0[prev_pen]
        for b in range(2, n1):
            G[r0 + b, col] = 1.0
            col += 1

    rows, rhs, hour_of_row = [], [], []
    blocks = []
    for t in range(horizon):
        lo = t * per_hour
        hi = min(lo + per_hour + 1, len(v))
        tau = np.arange(hi - lo) / per_hour
        blocks.append((t, tau, v[lo:hi]))
        A = basis_matrix(degree, tau)
        rows.append(A @ G[t * n1 : (t + 1) * n1])
        rhs.append(v[lo:hi] - A @ g0[t * n1 : (t + 1) * n1])
        hour_of_row.append(np.full(len(tau), t))
    M = np.vstack(rows)
    y = np.concatenate(rhs)
    if np.linalg.matrix_rank(M) < n_z:
        raise BernsteinError(f"{name}: rank-deficient sample layout")
    z = _normal_solve(M, y)
    coeffs = (G @ z + g0).reshape(horizon, n1)

    segs, rms = [], []
    for t, tau, vals in blocks:
        seg = BernsteinSegment(coeffs[t], t)
        resid = eval(seg, tau) - vals
        rms.append(float(np.sqrt(np.mean(resid**2))))
        segs.append(seg)
    return PiecewiseBernstein(tuple(segs), "c1", tuple(rms))
