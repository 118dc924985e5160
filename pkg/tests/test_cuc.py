import numpy as np
import pytest

from cfuc import cases, cuc, milp
from cfuc.cuc import NB, ScheduleError
from cfuc.milp import EQ, Model
from cfuc.nadirlearn import NadirModel
from cfuc.sysmodel import approximate_profiles
from helpers import flat_case, unit
from oracles import enumerate_uc


def partial_model(case, *builders):
    """Variables plus the chosen constraint builders, still open for extra rows."""
    profiles = approximate_profiles(case)
    m = Model("PART")
    v = cuc.create_variables(m, case, profiles)
    for build in builders:
        if build is cuc.build_power_balance:
            build(m, v, case, profiles)
        else:
            build(m, v, case)
    return m, v


def fix(m, var, value):
    m.add_constraint([(var, 1.0)], EQ, value, f"fix_{var.name}")


def solve_open(m, objective=()):
    m.set_objective(list(objective))
    return milp.solve(m.freeze())


def merged(sol, v, t, i=0):
    return np.array([sum(sol[h] * c for h, c in v.power_terms(b, t, i)) for b in range(NB)])


def backbone():
    return unit("B", p_min=1.0, p_max=50.0, marginal_cost=1.0)


def solve_full(case, fixes=(), mode="cuc", nadir_model=None):
    profiles = approximate_profiles(case)
    m = Model("FULL")
    v = cuc.create_variables(m, case, profiles)
    cuc.build_commitment_logic(m, v, case)
    cuc.build_min_up_down(m, v, case)
    cuc.build_su_sd_trajectories(m, v, case)
    cuc.build_continuity(m, v, case)
    cuc.build_capacity_reserve(m, v, case)
    cuc.build_ramping(m, v, case)
    cuc.build_power_balance(m, v, case, profiles)
    for name, t, i, val in fixes:
        fix(m, getattr(v, name)[t, i], val)
    cuc.build_objective(m, v, case)
    sol = milp.solve(m.freeze())
    assert sol.ok, sol.status
    return sol, v, cuc.extract_schedule(sol, v, case)


# ---------------------------------------------------------------------------
# commitment logic and minimum times

def test_switching_follows_commitment():
    case = flat_case([backbone(), unit(initial_on=False)], demand=10.0, horizon=6)
    _, _, s = solve_full(case, [("u", 2, 1, 1), ("u", 3, 1, 1), ("u", 4, 1, 0)])
    assert s.v[2, 1] == 1 and s.w[2, 1] == 0
    assert s.w[4, 1] == 1 and s.v[4, 1] == 0
    assert np.all(s.v + s.w <= 1)


def test_min_up_window():
    case = flat_case([backbone(), unit(initial_on=False, min_up=3, marginal_cost=99.0)], demand=10.0, horizon=7)
    _, _, s = solve_full(case, [("v", 2, 1, 1)])
    assert s.u[2:5, 1].tolist() == [1, 1, 1]


def test_initial_on_carry_over():
    x = unit(min_up=2, initial_hours=1, marginal_cost=99.0, no_load_cost=50.0)
    m, v = partial_model(flat_case([backbone(), x], demand=10.0), cuc.build_commitment_logic)
    assert (v.u[0, 1].lo, v.u[0, 1].hi) == (1.0, 1.0)
    assert (v.u[1, 1].lo, v.u[1, 1].hi) == (0.0, 1.0)


def test_no_startup_before_window_fits():
    case = flat_case([backbone(), unit(initial_on=False, su_duration=2, min_down=3)], horizon=5)
    _, v = partial_model(case)
    assert [v.v[t, 1].hi for t in range(5)] == [0.0, 0.0, 1.0, 1.0, 1.0]


# ---------------------------------------------------------------------------
# trajectories

def test_continuity_forces_next_hour():
    case = flat_case([unit(p_min=0.5)], horizon=2)
    m, v = partial_model(case, cuc.build_commitment_logic, cuc.build_continuity, cuc.build_capacity_reserve)
    for b, c in enumerate((1.0, 1.0, 2.0, 3.0)):
        fix(m, v.p[b, 0, 0], c)
    sol = solve_open(m)
    assert sol.ok
    assert merged(sol, v, 1)[:2] == pytest.approx([3.0, 4.0])


def test_startup_and_shutdown_shapes():
    x = unit(initial_on=False, marginal_cost=99.0, p_min=2.0)
    case = flat_case([backbone(), x], demand=10.0, horizon=10)
    sol, v, s = solve_full(case, [("v", 7, 1, 1)])
    su_hour = s.power[1].segments[6].coeffs
    assert su_hour[0] == pytest.approx(0.0, abs=1e-9) and su_hour[3] == pytest.approx(2.0)
    k = int(np.flatnonzero(s.w[:, 1])[0])
    sd_hour = s.power[1].segments[k].coeffs
    assert sd_hour[0] == pytest.approx(2.0) and sd_hour[3] == pytest.approx(0.0, abs=1e-9)
    c0, c1 = s.power[1].continuity_residuals()
    assert np.max(np.abs(c0)) <= 1e-6 and np.max(np.abs(c1)) <= 1e-6
    # before the start-up window the unit is idle
    assert np.all(s.power_coeffs()[1, :6] == 0.0)


def test_no_startup_no_su_power():
    case = flat_case([backbone(), unit(initial_on=False)], demand=10.0, horizon=4)
    sol, v, s = solve_full(case, [("u", t, 1, 0) for t in range(4)])
    assert all(sol[h] == pytest.approx(0.0, abs=1e-9) for h in v.su.ravel() if h is not None)
    assert np.all(s.power_coeffs()[1] == 0.0)


def test_reserve_is_headroom():
    case = flat_case([unit(p_max=5.0)], demand=4.0, horizon=1)
    _, _, s = solve_full(case)
    assert s.reserve_coeffs()[0, 0] == pytest.approx([1.0] * NB)


@pytest.mark.parametrize("ramp, ok", [(3.0, True), (2.9, False)])
def test_ramp_limit(ramp, ok):
    case = flat_case([unit(p_min=1.0, p_max=10.0, ramp_up=ramp)], horizon=1)
    m, v = partial_model(case, cuc.build_commitment_logic, cuc.build_su_sd_trajectories,
                         cuc.build_capacity_reserve, cuc.build_ramping)
    for b in range(NB):
        fix(m, v.p[b, 0, 0], 2.0 + b)
    assert solve_open(m).ok is ok


def test_balance_single_unit():
    case = flat_case([unit()], demand=3.0, horizon=2)
    _, _, s = solve_full(case)
    assert s.power_coeffs()[0] == pytest.approx(np.full((2, NB), 3.0))


def test_curtailment_absorbs_surplus():
    x = unit(initial_on=False, initial_hours=1, min_down=4)
    case = flat_case([x], demand=2.0, res=5.0, horizon=2)
    _, _, s = solve_full(case)
    assert np.all(s.power_coeffs() == 0.0)
    assert s.curtailment.coeff_matrix() == pytest.approx(np.full((2, NB), 3.0))


# ---------------------------------------------------------------------------
# objective

def test_objective_identities():
    case = flat_case([unit(startup_cost=100.0)], horizon=1)
    P = np.full((1, 1, NB), 3.0)
    assert cuc.cost_breakdown(case, np.ones((1, 1)), np.zeros((1, 1)), P)["total"] == pytest.approx(30.0)
    assert cuc.cost_breakdown(case, np.ones((1, 1)), np.ones((1, 1)), P)["total"] == pytest.approx(130.0)


def test_two_hour_flat_case_matches_enumeration():
    case = flat_case([unit()], horizon=2)
    _, _, s = solve_full(case)
    best, n_feasible = enumerate_uc(case, approximate_profiles(case))
    assert s.objective == pytest.approx(60.0) and best == pytest.approx(60.0)
    assert n_feasible >= 1


@pytest.mark.parametrize("seed", range(5))
def test_random_tiny_cases_match_enumeration(seed):
    case = cases.tiny_case(np.random.default_rng(100 + seed))
    profiles = approximate_profiles(case)
    m, v = cuc.assemble(case, profiles)
    sol = milp.solve(m)
    best, _ = enumerate_uc(case, profiles)
    assert sol.objective == pytest.approx(best, rel=1e-6)


# ---------------------------------------------------------------------------
# assembly and schedules

def _nadir_model():
    return NadirModel((0.5, 0.2, -0.002, -0.1), 2.5, 1.0)


def test_mode_gating():
    case = cases.desk_case(horizon=3)
    prof = approximate_profiles(case)
    I, T = len(case.units), 3
    m, _ = cuc.assemble(case, prof, "cuc")
    assert (m.count_rows("rocof"), m.count_rows("qss"), m.count_rows("nadir")) == (0, 0, 0)
    m, _ = cuc.assemble(case, prof, "rocof-cuc")
    assert m.count_rows("rocof") > 0 and m.count_rows("qss") > 0 and m.count_rows("nadir") == 0
    m, _ = cuc.assemble(case, prof, "cfcuc", _nadir_model())
    assert m.count_rows("nadir") == NB * T * I
    with pytest.raises(ValueError, match="NadirModel"):
        cuc.assemble(case, prof, "cfcuc")
    with pytest.raises(ValueError, match="unknown mode"):
        cuc.assemble(case, prof, "fcuc")


def test_breakdown_matches_objective_and_hull(desk_runs):
    for run in desk_runs:
        s, case = run["schedule"], run["case"]
        assert s.breakdown["total"] == pytest.approx(run["solution"].objective, rel=1e-6)
        tau_vals = np.stack([pw.sample(60) for pw in s.power])
        pmax = np.array([u.p_max for u in case.units])[:, None]
        assert np.all(tau_vals >= -1e-6) and np.all(tau_vals <= pmax + 1e-6)


def test_extract_refuses_failed_solution():
    case = flat_case([unit()], horizon=1)
    _, v = partial_model(case)
    with pytest.raises(ScheduleError, match="infeasible"):
        cuc.extract_schedule(milp.Solution("infeasible"), v, case)


def test_verify_names_unit_and_hour():
    case = flat_case([unit()], demand=3.0, horizon=2)
    _, _, s = solve_full(case)
    P = s.power_coeffs()[0]
    P[1, 0] += 0.5
    s.power[0] = cuc._piecewise(P)
    with pytest.raises(ScheduleError, match="unit X hour 1: zero-order continuity"):
        cuc.verify_schedule(s, case)


def test_schedule_round_trip(tmp_path):
    case = flat_case([backbone(), unit(initial_on=False)], demand=10.0, horizon=4)
    _, _, s = solve_full(case, [("v", 2, 1, 1)])
    csv_path, json_path = cuc.write_schedule(s, tmp_path, extra={"mode": "cuc"})
    back = cuc.read_schedule(csv_path)
    assert back.units == s.units and back.objective == s.objective
    assert np.array_equal(back.u, s.u) and np.array_equal(back.v, s.v)
    assert np.array_equal(back.power_coeffs(), s.power_coeffs())
    assert np.array_equal(back.reserve_coeffs(), s.reserve_coeffs())
    first = csv_path.read_bytes()
    cuc.write_schedule(back, tmp_path / "again", extra={"mode": "cuc"})
    assert (tmp_path / "again" / cuc.SCHEDULE_CSV).read_bytes() == first
