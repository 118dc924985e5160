"""Synthetic operating points and the linear frequency-nadir surrogate.

The sampling scheme is this package's own: random commitments sized to a
random demand level, random loading within unit limits, random reserve
fractions, and one labelled point per committed unit taken as the outage
candidate.

The regression itself is plain least squares.  Used unchanged as a MILP row
it is too permissive: the optimizer settles exactly where the linear fit
under-predicts.  :func:`fit_linear` therefore also computes a safety margin,
the smallest intercept increase under which no insecure training point is
predicted secure, and the scheduler tightens the limit by that margin.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .freq import nadir_exact
from .sysmodel import CaseInput

log = logging.getLogger(__name__)

TRAIN_FRACTION = 0.7
LABEL_CAP = 10.0  # Hz; also stands in for an unarrested decline
MAX_RETRIES = 1000


class LearnError(ValueError):
    pass


@dataclass(frozen=True)
class SamplePoint:
    lost_power: float
    inertia: float
    reserve: float
    demand: float
    label_nadir: float
    secure: bool = True

    def features(self) -> tuple[float, float, float]:
        return (self.lost_power, self.inertia, self.reserve)


@dataclass
class NadirModel:
    alpha: tuple[float, float, float, float]
    threshold: float
    score: float
    train_fraction: float = TRAIN_FRACTION
    seed: int | None = None
    n_samples: int = 0
    margin: float = 0.0  # Hz subtracted from the limit when the row enters a MILP
    margin_score: float | None = None  # score of the tightened rule on the test split

    def predict(self, lost_power, inertia, reserve):
        a0, a1, a2, a3 = self.alpha
        return a0 + a1 * np.asarray(lost_power) + a2 * np.asarray(inertia) + a3 * np.asarray(reserve)

    def effective_limit(self, limit: float) -> float:
        """Right-hand side used in the scheduling model for a nadir limit ``limit``."""
        return limit - self.margin

    def to_json(self) -> dict:
        a = self.alpha
        return {
            "alpha0": a[0], "alpha1": a[1], "alpha2": a[2], "alpha3": a[3],
            "threshold_hz": self.threshold,
            "score": self.score,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "n_samples": self.n_samples,
            "margin_hz": self.margin,
            "margin_score": self.margin_score,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "NadirModel":
        return cls(
            alpha=(doc["alpha0"], doc["alpha1"], doc["alpha2"], doc["alpha3"]),
            threshold=doc["threshold_hz"],
            score=doc["score"],
            train_fraction=doc.get("train_fraction", TRAIN_FRACTION),
            seed=doc.get("seed"),
            n_samples=doc.get("n_samples", 0),
            margin=doc.get("margin_hz", 0.0),
            margin_score=doc.get("margin_score"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "NadirModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def _profile_range(case: CaseInput) -> tuple[float, float]:
    net = np.asarray(case.demand_samples) - np.asarray(case.res_samples)
    return float(max(net.min(), 0.0)), float(net.max())


def _random_fill(rng, pmin: np.ndarray, pmax: np.ndarray, level: float) -> np.ndarray:
    p = pmin.astype(float).copy()
    room = pmax - pmin
    extra = level - p.sum()
    w = rng.random(len(p))
    free = room > 0
    while extra > 1e-12 and free.any():
        want = np.where(free, w, 0.0)
        want = want / want.sum() * extra
        add = np.minimum(want, room)
        p += add
        room -= add
        extra -= add.sum()
        free = room > 1e-12
    return p


def generate_dataset(case: CaseInput, n_samples: int, seed: int = 0, threshold: float | None = None,
                     secure_only: bool = True, dispatch: str = "random") -> list[SamplePoint]:
    """Draw ``n_samples`` labelled outage points, deterministic in ``seed``.

    Each draw picks a net-demand level uniformly between the profile's
    minimum and peak, commits every unit independently with probability
    ``clip(1.5 * level / total capacity + share_i, 0.2, 1)``, rejects the
    draw unless the committed range brackets the level, dispatches the
    committed units, and gives each a uniform random fraction of its
    headroom as reserve.  Gross demand is the level plus a uniform draw of
    renewable output.  Every committed unit then yields one point with
    itself as the lost unit.

    ``dispatch="random"`` spreads the level above the summed minima with
    random weights (capped at p_max, overflow passed on), so that unevenly
    loaded units appear in the data; ``"proportional"`` loads every unit to
    the same fraction of its range.

    With ``secure_only`` a point is kept only if it already satisfies the
    RoCoF and quasi-steady-state rows of ``case.params``; the nadir row is
    only ever evaluated next to those rows, so points they exclude would
    just bend the fit away from the region the scheduler explores.
    """
    if n_samples <= 0:
        return []
    if dispatch not in ("random", "proportional"):
        raise LearnError(f"unknown dispatch rule {dispatch!r}")
    rng = np.random.default_rng(seed)
    params = case.params
    units = case.units
    pmin = np.array([u.p_min for u in units])
    pmax = np.array([u.p_max for u in units])
    hm = np.array([u.inertia_mws for u in units])
    share = pmax / pmax.sum()
    lo, hi = _profile_range(case)
    lo = max(lo, float(pmin.min()))
    res_max = float(np.max(case.res_samples))
    thr = params.nadir_limit if threshold is None else threshold
    rocof_k = 2.0 * params.rocof_limit / params.f0
    out: list[SamplePoint] = []
    retries = 0
    while len(out) < n_samples:
        level = rng.uniform(lo, hi)
        prob = np.clip(1.5 * level / pmax.sum() + share, 0.2, 1.0)
        on = rng.random(len(units)) < prob
        if on.sum() < 2 or not (pmin[on].sum() <= level <= pmax[on].sum()):
            retries += 1
            if retries > MAX_RETRIES * max(1, n_samples):
                raise LearnError("could not draw a feasible commitment; check unit limits against demand")
            continue
        if dispatch == "random":
            p = np.zeros(len(units))
            p[on] = _random_fill(rng, pmin[on], pmax[on], level)
        else:
            lam = (level - pmin[on].sum()) / max(pmax[on].sum() - pmin[on].sum(), 1e-12)
            p = np.where(on, pmin + lam * (pmax - pmin), 0.0)
        r = np.where(on, rng.random(len(units)) * (pmax - p), 0.0)
        demand = level + float(rng.uniform(0.0, res_max))
        h_tot, r_tot = float((hm * on).sum()), float(r.sum())
        for l in np.flatnonzero(on):
            h = h_tot - hm[l]
            res = r_tot - r[l]
            if secure_only and (p[l] > rocof_k * h or res < p[l] - params.damping * demand * params.qss_limit):
                continue
            label = min(nadir_exact(p[l], res, h, demand, params), LABEL_CAP)
            out.append(SamplePoint(float(p[l]), float(h), float(res), demand, float(label), bool(label <= thr)))
            if len(out) == n_samples:
                break
    return out


def _arrays(points):
    X = np.array([[1.0, s.lost_power, s.inertia, s.reserve] for s in points]).reshape(-1, 4)
    y = np.array([s.label_nadir for s in points])
    return X, y


def split(points: list[SamplePoint], threshold: float, seed: int = 0,
          train_fraction: float = TRAIN_FRACTION) -> tuple[list[SamplePoint], list[SamplePoint]]:
    """Random split stratified on the secure/insecure label at ``threshold``."""
    rng = np.random.default_rng([seed, 7])
    labels = np.array([s.label_nadir <= threshold for s in points])
    train, test = [], []
    for cls in (True, False):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        k = int(round(train_fraction * len(idx)))
        train += idx[:k].tolist()
        test += idx[k:].tolist()
    return [points[i] for i in sorted(train)], [points[i] for i in sorted(test)]


def fit_alpha(points: list[SamplePoint]) -> tuple[float, float, float, float]:
    """Ordinary least squares of the nadir label on (1, lost power, inertia, reserve)."""
    X, y = _arrays(points)
    if len(points) < 4:
        raise LearnError(f"{len(points)} training points; need at least 4")
    if np.linalg.matrix_rank(X) < 4:
        raise LearnError("rank-deficient design matrix; draw more (or more varied) samples")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return tuple(float(a) for a in coef)


def safety_margin(alpha, points: list[SamplePoint], threshold: float, eps: float = 1e-6) -> float:
    """Intercept increase that leaves no insecure point predicted secure.

    Returns ``max(threshold - prediction) + eps`` over the points labelled
    above ``threshold``, or 0 when the fit already separates them.
    """
    X, y = _arrays(points)
    bad = y > threshold
    if not bad.any():
        return 0.0
    gap = float(np.max(threshold - X[bad] @ np.asarray(alpha)))
    return gap + eps if gap >= 0 else 0.0


def score(model: NadirModel, test_set: list[SamplePoint], threshold: float | None = None,
          margin: float = 0.0) -> float:
    """Share of points where predicted and labelled secure/insecure agree.

    A point is predicted secure when ``alpha . (1, p, H, r) <= threshold -
    margin``; the default margin 0 scores the regression itself.
    """
    if not test_set:
        raise LearnError("empty test set")
    thr = model.threshold if threshold is None else threshold
    X, y = _arrays(test_set)
    pred = X @ np.asarray(model.alpha)
    return float(np.mean((pred <= thr - margin) == (y <= thr)))


def fit_linear(dataset: list[SamplePoint], threshold: float, seed: int = 0,
               train_fraction: float = TRAIN_FRACTION, conservative: bool = True) -> NadirModel:
    """Fit the surrogate on a stratified 70 % split and score it on the rest.

    ``score`` is the held-out agreement of the least-squares fit.  With
    ``conservative`` the model also carries :func:`safety_margin` from the
    training split, and ``margin_score`` is the held-out agreement of the
    tightened rule ``prediction <= threshold - margin``.
    """
    train, test = split(dataset, threshold, seed, train_fraction)
    model = NadirModel(fit_alpha(train), float(threshold), 0.0, train_fraction, seed, len(dataset))
    if conservative:
        model.margin = safety_margin(model.alpha, train, threshold)
    if test:
        model.score = score(model, test)
        model.margin_score = score(model, test, margin=model.margin)
    else:
        model.score = model.margin_score = 1.0
    return model


def write_dataset(points: list[SamplePoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["lost_mw", "inertia_mws", "reserve_mw", "demand_mw", "nadir_hz"])
        for s in points:
            wr.writerow([repr(s.lost_power), repr(s.inertia), repr(s.reserve), repr(s.demand), repr(s.label_nadir)])


def read_dataset(path: str | Path, threshold: float = np.inf) -> list[SamplePoint]:
    with open(path, newline="") as fh:
        return [
            SamplePoint(float(r["lost_mw"]), float(r["inertia_mws"]), float(r["reserve_mw"]),
                        float(r["demand_mw"]), float(r["nadir_hz"]), float(r["nadir_hz"]) <= threshold)
            for r in csv.DictReader(fh)
        ]
