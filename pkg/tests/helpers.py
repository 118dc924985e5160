"""Small hand-made cases shared by the model tests."""

from cfuc.sysmodel import CaseInput, SystemParams, UnitSpec

PH = 12


def unit(uid="X", **kw):
    spec = dict(id=uid, p_min=2.0, p_max=5.0, ramp_up=30.0, ramp_down=30.0, min_up=1, min_down=2,
                su_duration=1, sd_duration=1, inertia=3.0, base_power=10.0, marginal_cost=10.0,
                initial_on=True, initial_hours=5)
    spec.update(kw)
    return UnitSpec(**spec)


def flat_case(units, demand=3.0, res=0.0, horizon=2, **params):
    n = horizon * PH
    case = CaseInput(SystemParams(**params), tuple(units), (demand,) * n, (res,) * n, horizon, name="t")
    case.validate()
    return case
