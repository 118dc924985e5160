"""Post-outage frequency security: constraint rows, nadir evaluators, metrics.

Inertia of the surviving fleet is ``sum(H_i * M_i * u_i)`` over committed
units other than the lost one, in MW*s.  Units inside a start-up or
shut-down window have u = 0 and contribute neither inertia nor reserve.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bernstein import BernsteinSegment, elevate, multiply, scale, sub
from .milp import GE, LE, Model
from .sysmodel import ApproximatedProfiles, CaseInput, SystemParams

NB = 4


@dataclass(frozen=True)
class OutageContext:
    lost_unit: str
    hour: int
    inertia: float  # MW*s of the surviving units
    lost_power: BernsteinSegment
    reserve: BernsteinSegment
    demand: BernsteinSegment


# ---------------------------------------------------------------------------
# constraint rows

def _others_inertia_terms(vars, case: CaseInput, t: int, lost: int, coef: float = 1.0):
    return [(vars.u[t, i], coef * unit.inertia_mws) for i, unit in enumerate(case.units) if i != lost]


def build_rocof_constraints(model: Model, vars, case: CaseInput) -> None:
    """Lost-unit coefficients bounded by ``2*rocof_limit/f0`` times surviving inertia."""
    k = 2.0 * case.params.rocof_limit / case.params.f0
    for t in range(case.horizon):
        for l, unit in enumerate(case.units):
            h_terms = _others_inertia_terms(vars, case, t, l, -k)
            for b in range(NB):
                model.add_constraint([(vars.p[b, t, l], 1.0)] + h_terms, LE, 0.0, f"rocof_{unit.id}_t{t}_b{b}")


def build_qss_constraints(model: Model, vars, case: CaseInput, profiles: ApproximatedProfiles) -> None:
    """Surviving reserve covers the lost output less the load-damping relief."""
    prm = case.params
    dem = profiles.demand_coeffs
    for t in range(case.horizon):
        for l, unit in enumerate(case.units):
            for b in range(NB):
                terms = [(vars.r[b, t, i], 1.0) for i in range(len(case.units)) if i != l]
                terms.append((vars.p[b, t, l], -1.0))
                rhs = -prm.damping * float(dem[t, b]) * prm.qss_limit
                model.add_constraint(terms, GE, rhs, f"qss_{unit.id}_t{t}_b{b}")


def nadir_row_bigm(case: CaseInput, alpha, limit: float, lost: int) -> float:
    """Smallest M that deactivates a nadir row when the lost unit is off.

    With u_lost = 0 the lost power is 0, so only the intercept, inertia and
    reserve terms remain; bound them over their variable ranges.
    """
    a0, _, a2, a3 = alpha
    h_max = sum(u.inertia_mws for i, u in enumerate(case.units) if i != lost)
    r_max = sum(u.p_max for i, u in enumerate(case.units) if i != lost)
    worst = a0 + max(a2, 0.0) * h_max + max(a3, 0.0) * r_max
    return max(0.0, worst - limit)


def build_nadir_constraints(model: Model, vars, case: CaseInput, nadir_model, limit: float | None = None) -> None:
    """Learned linear nadir rows, one per (lost unit, hour, coefficient).

    ``a0 + a1*p + a2*H(u) + a3*sum(r) <= limit - margin`` with the row
    relaxed by big-M when the candidate unit is off.
    """
    a0, a1, a2, a3 = nadir_model.alpha
    limit = nadir_model.effective_limit(case.params.nadir_limit if limit is None else limit)
    for l, unit in enumerate(case.units):
        M = nadir_row_bigm(case, nadir_model.alpha, limit, l)
        for t in range(case.horizon):
            h_terms = _others_inertia_terms(vars, case, t, l, a2)
            for b in range(NB):
                terms = [(vars.p[b, t, l], a1)] + h_terms
                terms += [(vars.r[b, t, i], a3) for i in range(len(case.units)) if i != l]
                if M > 0:
                    terms.append((vars.u[t, l], M))
                model.add_constraint(terms, LE, limit - a0 + M, f"nadir_{unit.id}_t{t}_b{b}")


# ---------------------------------------------------------------------------
# nadir evaluators

def nadir_exact(p_lost, reserve, inertia, demand, params: SystemParams):
    """Closed-form nadir deviation in Hz, ``f0*Tg*p^2 / (4*r*H - D*Tg*f0*demand*p)``.

    Works elementwise on arrays.  A non-positive denominator means the
    decline is not arrested by the ramping reserve; that is reported as
    ``inf``.  Zero lost power gives 0 regardless of the denominator.
    """
    p = np.asarray(p_lost, dtype=float)
    f0, tg, D = params.f0, params.t_g, params.damping
    den = 4.0 * np.asarray(reserve, dtype=float) * np.asarray(inertia, dtype=float) - D * tg * f0 * np.asarray(demand, dtype=float) * p
    num = f0 * tg * p * p
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    out = np.where(p == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def nadir_coefficient_approx(p_coeffs, r_coeffs, inertia, d_coeffs, params: SystemParams) -> np.ndarray:
    """Per-coefficient nadir: the exact formula applied to matching coefficients.

    Squares and products of segments are replaced by the segments of
    coefficient-wise squares and products, keeping the result cubic.
    """
    return np.asarray(nadir_exact(np.asarray(p_coeffs), np.asarray(r_coeffs), inertia, np.asarray(d_coeffs), params))


def nadir_approx_eval(p_coeffs, r_coeffs, inertia, d_coeffs, params: SystemParams, tau) -> np.ndarray:
    """Approximate nadir at ``tau`` from numerator and denominator cubics."""
    f0, tg, D = params.f0, params.t_g, params.damping
    p = np.asarray(p_coeffs, float)
    num = BernsteinSegment(f0 * tg * p * p)
    den = BernsteinSegment(4.0 * np.asarray(r_coeffs, float) * inertia - D * tg * f0 * np.asarray(d_coeffs, float) * p)
    n, d = num(tau), den(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d > 0, n / np.where(d > 0, d, 1.0), np.where(n == 0, 0.0, np.inf))


def nadir_order6(lost: BernsteinSegment, reserve: BernsteinSegment, inertia: float,
                 demand: BernsteinSegment, params: SystemParams) -> tuple[BernsteinSegment, BernsteinSegment]:
    """Exact degree-6 numerator and denominator of the continuous nadir."""
    f0, tg, D = params.f0, params.t_g, params.damping
    num = scale(multiply(lost, lost), f0 * tg)
    den = sub(scale(elevate(reserve, 6), 4.0 * inertia), scale(multiply(demand, lost), D * tg * f0))
    return num, den


def approximation_deviation(lost, reserve, inertia, demand, params: SystemParams, n_tau: int = 61) -> float:
    """Max |exact - per-coefficient approximation| over ``n_tau`` instants of one hour."""
    tau = np.linspace(0.0, 1.0, n_tau)
    num, den = nadir_order6(lost, reserve, inertia, demand, params)
    n, d = num(tau), den(tau)
    exact = np.where(d > 0, n / np.where(d > 0, d, 1.0), np.inf)
    approx = nadir_approx_eval(lost.coeffs, reserve.coeffs, inertia, demand.coeffs, params, tau)
    finite = np.isfinite(exact) & np.isfinite(approx)
    return float(np.max(np.abs(exact[finite] - approx[finite]))) if finite.any() else math.inf


def ode_nadir_oracle(p_lost, reserve, inertia, demand, params: SystemParams,
                     dt: float = 1e-3, horizon: float = 60.0):
    """Largest frequency deviation from the aggregated swing equation (RK4).

    Integrates ``(2H/f0) d(df)/dt = -p + min(t/Tg, 1)*r - D*demand*df/f0``
    from rest and returns the deepest decline ``max(-df, 0)`` over
    ``horizon`` seconds; the over-frequency swing once reserve outruns the
    loss is not a nadir.  Accepts arrays (integrated together).
    """
    p = np.atleast_1d(np.asarray(p_lost, float))
    r = np.atleast_1d(np.asarray(reserve, float))
    H = np.atleast_1d(np.asarray(inertia, float))
    dem = np.atleast_1d(np.asarray(demand, float))
    p, r, H, dem = np.broadcast_arrays(p, r, H, dem)
    if np.any(H <= 0):
        raise ValueError("inertia must be positive")
    f0, tg, D = params.f0, params.t_g, params.damping
    gain = f0 / (2.0 * H)

    def rhs(t, x):
        return gain * (-p + min(t / tg, 1.0) * r - D * dem * x / f0)

    x = np.zeros_like(p)
    worst = np.zeros_like(p)
    n = int(round(horizon / dt))
    for k in range(n):
        t = k * dt
        k1 = rhs(t, x)
        k2 = rhs(t + dt / 2, x + dt / 2 * k1)
        k3 = rhs(t + dt / 2, x + dt / 2 * k2)
        k4 = rhs(t + dt, x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        np.maximum(worst, -x, out=worst)
    return float(worst[0]) if np.ndim(p_lost) == 0 and worst.size == 1 else worst


# ---------------------------------------------------------------------------
# minute sweep

@dataclass
class NadirSweep:
    threshold: float
    minutes_above: int
    worst_nadir: np.ndarray  # per minute, Hz (0 with no online unit)
    worst_unit: list  # unit id or "" per minute
    per_hour_worst: np.ndarray

    def to_json(self) -> dict:
        return {
            "threshold_hz": self.threshold,
            "minutes_above": self.minutes_above,
            "per_hour_worst_nadir": [_json_num(x) for x in self.per_hour_worst],
        }


def _json_num(x: float):
    return float(x) if math.isfinite(x) else "inf"


def nadir_grid(schedule, profiles: ApproximatedProfiles, case: CaseInput, per_hour: int = 60):
    """Exact nadir for every (minute, online unit): array (minutes, units), NaN when offline."""
    T, I = schedule.horizon, len(schedule.units)
    params = case.params
    tau = np.arange(per_hour) / per_hour
    hm = np.array([case.unit(uid).inertia_mws for uid in schedule.units])
    out = np.full((T * per_hour, I), np.nan)
    for t in range(T):
        P = np.stack([schedule.power[i][t](tau) for i in range(I)]) if I else np.zeros((0, per_hour))
        R = np.stack([schedule.reserve[i][t](tau) for i in range(I)]) if I else np.zeros((0, per_hour))
        dem = profiles.demand[t](tau)
        on = schedule.u[t].astype(bool)
        r_total = (R * on[:, None]).sum(axis=0)
        h_total = float((hm * on).sum())
        for l in range(I):
            if not on[l]:
                continue
            r_others = r_total - R[l]
            h_others = h_total - hm[l]
            out[t * per_hour:(t + 1) * per_hour, l] = nadir_exact(P[l], r_others, h_others, dem, params)
    return out


def nadir_sweep(schedule, profiles: ApproximatedProfiles, case: CaseInput, threshold: float,
                per_hour: int = 60) -> NadirSweep:
    grid = nadir_grid(schedule, profiles, case, per_hour)
    has = ~np.all(np.isnan(grid), axis=1) if grid.size else np.zeros(grid.shape[0], bool)
    filled = np.where(np.isnan(grid), -np.inf, grid)
    worst = np.where(has, filled.max(axis=1) if grid.shape[1] else 0.0, 0.0)
    idx = filled.argmax(axis=1) if grid.shape[1] else np.zeros(grid.shape[0], int)
    units = [schedule.units[k] if h else "" for k, h in zip(idx, has)]
    above = int(np.sum(worst > threshold))
    per_hour_worst = worst.reshape(schedule.horizon, per_hour).max(axis=1) if schedule.horizon else np.zeros(0)
    return NadirSweep(threshold, above, worst, units, per_hour_worst)


def minutes_above(schedule, profiles: ApproximatedProfiles, case: CaseInput, threshold: float) -> int:
    """Minutes in which some online unit's outage drives the exact nadir above ``threshold``."""
    return nadir_sweep(schedule, profiles, case, threshold).minutes_above


def write_sweep(sweep: NadirSweep, out_dir: str | Path, stem: str = "nadir") -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tag = f"{sweep.threshold:g}".replace(".", "p")
    jp = out / f"{stem}_{tag}hz.json"
    jp.write_text(json.dumps(sweep.to_json(), indent=1) + "\n")
    cp = out / f"{stem}_minutes.csv"
    with open(cp, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["minute", "worst_unit", "nadir_hz"])
        for m, (uid, x) in enumerate(zip(sweep.worst_unit, sweep.worst_nadir)):
            wr.writerow([m, uid, repr(float(x)) if math.isfinite(x) else "inf"])
    return jp, cp
