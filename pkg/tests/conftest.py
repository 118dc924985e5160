import glob
import os
import shutil

import numpy as np
import pytest

import _acceptance
from cfuc import cases, cuc, freq, milp, nadirlearn
from cfuc.sysmodel import approximate_profiles


def cbc_binary():
    """A CBC executable: env var, PATH, or the one bundled with PuLP."""
    found = os.environ.get(milp.SOLVER_BIN_ENV) or shutil.which("cbc")
    if found:
        return found
    try:
        import pulp
    except ImportError:
        return None
    hits = glob.glob(os.path.join(os.path.dirname(pulp.__file__), "solverdir", "cbc", "linux", "*", "cbc"))
    return hits[0] if hits else None


@pytest.fixture(scope="session")
def cbc_path():
    path = cbc_binary()
    if path is None:
        pytest.skip("no CBC binary available")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


DESK_SEED = 1
DESK_SAMPLES = 10_000
DESK_ROWS = (("cuc", None), ("rocof-cuc", None), ("cfcuc", 3.0), ("cfcuc", 2.5), ("cfcuc", 2.0))


@pytest.fixture(scope="session")
def desk():
    case = cases.desk_case()
    return case, approximate_profiles(case)


@pytest.fixture(scope="session")
def desk_dataset(desk):
    case, _ = desk
    return nadirlearn.generate_dataset(case, DESK_SAMPLES, seed=DESK_SEED)


@pytest.fixture(scope="session")
def desk_runs(desk, desk_dataset):
    """The five comparison rows on the desk case, solved once per session."""
    case, profiles = desk
    runs = []
    for mode, limit in DESK_ROWS:
        c = case.replace_params(mode=mode, nadir_limit=limit or case.params.nadir_limit)
        model = nadirlearn.fit_linear(desk_dataset, limit, DESK_SEED) if limit else None
        m, v = cuc.assemble(c, profiles, mode, model)
        sol = milp.solve(m, "highs")
        assert sol.ok, (mode, limit, sol.status)
        sched = cuc.extract_schedule(sol, v, c)
        runs.append({
            "mode": mode, "limit": limit, "case": c, "model": model, "solution": sol, "schedule": sched,
            "sweep25": freq.nadir_sweep(sched, profiles, c, 2.5),
            "sweepL": freq.nadir_sweep(sched, profiles, c, limit) if limit else None,
        })
    return runs


def pytest_terminal_summary(terminalreporter):
    if not _acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_acceptance.RESULTS):
        status, detail = _acceptance.RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
