"""Synthetic island cases for tests, demos and the acceptance runs."""

from __future__ import annotations

import numpy as np

from .sysmodel import CaseInput, SystemParams, UnitSpec


def island_profiles(horizon: int = 24, per_hour: int = 12, peak: float = 40.0, solar: float = 8.0):
    """Daily demand with a morning and an evening peak, plus a solar bell.

    Demand bottoms out near 55 % of ``peak`` around 04:00 and reaches
    ``peak`` in the evening; solar peaks at noon with ``solar`` MW.
    """
    m = np.arange(horizon * per_hour) * (60.0 / per_hour)
    h = (m / 60.0) % 24.0
    base = 0.55 + 0.25 * (1 - np.cos(2 * np.pi * (h - 4.0) / 24.0)) / 2
    morning = 0.10 * np.exp(-0.5 * ((h - 10.5) / 2.0) ** 2)
    evening = 0.22 * np.exp(-0.5 * ((h - 20.5) / 1.8) ** 2)
    demand = peak * (base + morning + evening) / 1.0
    demand *= peak / demand.max()
    sun = np.clip(np.cos(np.pi * (h - 13.0) / 12.0), 0.0, None) ** 2
    res = solar * sun
    return demand, res


DESK_UNITS = (
    # id, p_min, p_max, ramp, UT, DT, H, M, mc, noload, startup
    ("G1", 5.0, 16.0, 30.0, 4, 3, 4.0, 18.0, 62.0, 180.0, 900.0),
    ("G2", 4.0, 14.0, 30.0, 3, 3, 3.5, 16.0, 70.0, 150.0, 700.0),
    ("G3", 3.0, 12.0, 30.0, 2, 2, 3.0, 14.0, 88.0, 110.0, 450.0),
    ("G4", 2.0, 10.0, 30.0, 2, 2, 2.5, 12.0, 105.0, 80.0, 300.0),
    ("G5", 1.5, 8.0, 30.0, 1, 2, 2.0, 10.0, 140.0, 50.0, 150.0),
)


def desk_case(
    horizon: int = 24,
    mode: str = "cuc",
    rocof_limit: float = 2.0,
    qss_limit: float = 1.0,
    nadir_limit: float = 2.5,
    initial_on: tuple[str, ...] = ("G1", "G2", "G3", "G4", "G5"),
) -> CaseInput:
    """Five diesel-like units serving a 40 MW-peak island with some solar."""
    units = []
    for uid, pmin, pmax, ramp, ut, dt, H, M, mc, nl, sc in DESK_UNITS:
        on = uid in initial_on
        units.append(UnitSpec(
            id=uid, p_min=pmin, p_max=pmax, ramp_up=ramp, ramp_down=ramp,
            min_up=ut, min_down=dt, su_duration=1, sd_duration=1,
            inertia=H, base_power=M, marginal_cost=mc, no_load_cost=nl, startup_cost=sc,
            initial_on=on, initial_hours=8,
        ))
    demand, res = island_profiles(horizon)
    params = SystemParams(f0=50.0, damping=0.01, t_g=3.0, rocof_limit=rocof_limit,
                          qss_limit=qss_limit, nadir_limit=nadir_limit, mode=mode)
    case = CaseInput(params, tuple(units), tuple(demand), tuple(res), horizon, name="desk")
    case.validate()
    return case


def tiny_case(
    rng: np.random.Generator,
    n_units: int = 2,
    horizon: int = 4,
    per_hour: int = 12,
) -> CaseInput:
    """Random small case for brute-force comparisons.

    The first unit starts online and can carry the whole demand alone, and
    demand never drops below the summed minimum outputs, so every draw is
    feasible.  The other units start in a random state, free to switch from
    hour 0 on, and give the optimizer real commitment choices.
    """
    units = []
    for k in range(n_units):
        pmin = float(rng.uniform(1.0, 3.0))
        span = rng.uniform(6.0, 10.0) * max(1, n_units - 1) if k == 0 else rng.uniform(2.0, 6.0)
        pmax = float(pmin + span)
        on = True if k == 0 else bool(rng.random() < 0.5)
        units.append(UnitSpec(
            id=f"U{k + 1}", p_min=pmin, p_max=pmax,
            ramp_up=float(rng.uniform(2.0, 4.0) * pmax), ramp_down=float(rng.uniform(2.0, 4.0) * pmax),
            min_up=int(rng.integers(1, 3)), min_down=2, su_duration=1, sd_duration=1,
            inertia=float(rng.uniform(2.0, 5.0)), base_power=float(pmax * 1.2),
            marginal_cost=float(rng.uniform(40.0, 120.0)), no_load_cost=float(rng.uniform(0.0, 60.0)),
            startup_cost=float(rng.uniform(0.0, 200.0)),
            initial_on=on, initial_hours=3,
        ))
    lo = sum(u.p_min for u in units) + 0.5
    hi = 0.9 * units[0].p_max
    m = np.arange(horizon * per_hour) / per_hour
    phase = rng.uniform(0, 2 * np.pi)
    demand = lo + (hi - lo) * (0.5 + 0.5 * np.sin(2 * np.pi * m / (horizon * 1.5) + phase))
    res = np.clip(rng.uniform(0.0, 1.5) * np.sin(np.pi * m / horizon), 0.0, None)
    params = SystemParams(rocof_limit=2.0, qss_limit=1.0, nadir_limit=2.5)
    case = CaseInput(params, tuple(units), tuple(demand), tuple(res), horizon, name="tiny")
    case.validate()
    return case
