"""Solver-agnostic MILP container, fixed-column MPS export and solve backends.

Variables and rows keep insertion order, which is also the MPS order, so an
identical build sequence exports identical bytes.
"""

from __future__ import annotations

import logging
import math
import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

LE, EQ, GE = "<=", "==", ">="
_SENSES = (LE, EQ, GE)

DEFAULT_GAP = 1e-6
DEFAULT_TIME_LIMIT = 1800.0


class ModelError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class VarHandle:
    id: int
    kind: str
    lo: float
    hi: float
    name: str

    def __repr__(self) -> str:
        return f"VarHandle({self.id}, {self.name!r})"


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[VarHandle, float], ...]
    sense: str
    rhs: float
    name: str


@dataclass(frozen=True)
class Solution:
    status: str  # optimal | feasible | infeasible | time-limit | unbounded | error
    objective: float = math.nan
    values: Mapping[int, float] = field(default_factory=dict)
    gap: float = math.nan
    message: str = ""
    runtime: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")

    def __getitem__(self, var: VarHandle) -> float:
        return self.values[var.id]

    def value(self, var: VarHandle) -> float:
        return self.values[var.id]


def _canonical(terms: Iterable[tuple[VarHandle, float]], where: str) -> tuple[tuple[VarHandle, float], ...]:
    merged: dict[int, list] = {}
    for var, coef in terms:
        coef = float(coef)
        if not math.isfinite(coef):
            raise ModelError(f"{where}: non-finite coefficient {coef} on {var.name}")
        if var.id in merged:
            merged[var.id][1] += coef
        else:
            merged[var.id] = [var, coef]
    return tuple((v, c) for v, c in merged.values() if c != 0.0)


class Model:
    """A minimisation MILP built by appending variables and rows."""

    def __init__(self, name: str = "MODEL"):
        self.name = name
        self.vars: list[VarHandle] = []
        self.constraints: list[LinearConstraint] = []
        self.objective: tuple[tuple[VarHandle, float], ...] = ()
        self.frozen = False
        self._names: set[str] = set()
        self._rows_by_prefix: dict[str, int] = {}

    # -- build ---------------------------------------------------------------

    def _check_open(self):
        if self.frozen:
            raise ModelError("model is frozen; no further changes allowed")

    def add_var(self, name: str, kind: str = "continuous", lo: float = 0.0, hi: float = math.inf) -> VarHandle:
        self._check_open()
        if kind not in ("continuous", "binary"):
            raise ModelError(f"unknown variable kind {kind!r}")
        if kind == "binary":
            lo, hi = max(0.0, lo), min(1.0, hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise ModelError(f"variable {name}: bounds [{lo}, {hi}] are empty")
        if name in self._names:
            raise ModelError(f"duplicate name {name}")
        self._names.add(name)
        v = VarHandle(len(self.vars), kind, float(lo), float(hi), name)
        self.vars.append(v)
        return v

    def add_binary(self, name: str) -> VarHandle:
        return self.add_var(name, "binary", 0.0, 1.0)

    def add_constraint(self, terms: Iterable[tuple[VarHandle, float]], sense: str, rhs: float, name: str) -> LinearConstraint:
        self._check_open()
        if sense not in _SENSES:
            raise ModelError(f"constraint {name}: unknown sense {sense!r}")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ModelError(f"constraint {name}: non-finite rhs {rhs}")
        if name in self._names:
            raise ModelError(f"duplicate name {name}")
        self._names.add(name)
        con = LinearConstraint(_canonical(terms, name), sense, rhs, name)
        self.constraints.append(con)
        prefix = name.split("_", 1)[0]
        self._rows_by_prefix[prefix] = self._rows_by_prefix.get(prefix, 0) + 1
        return con

    def set_objective(self, terms: Iterable[tuple[VarHandle, float]]) -> None:
        """Set a minimisation objective."""
        self._check_open()
        self.objective = _canonical(terms, "objective")

    def freeze(self) -> "Model":
        self.frozen = True
        return self

    # -- inspection ----------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.vars)

    @property
    def n_rows(self) -> int:
        return len(self.constraints)

    def count_rows(self, prefix: str) -> int:
        """Number of rows whose name starts with ``prefix + '_'``."""
        return self._rows_by_prefix.get(prefix, 0)

    def to_arrays(self):
        """Objective vector, sparse row matrix, row bounds, column bounds, integrality."""
        n = self.n_vars
        c = np.zeros(n)
        for v, coef in self.objective:
            c[v.id] += coef
        rows, cols, vals = [], [], []
        lo = np.empty(self.n_rows)
        hi = np.empty(self.n_rows)
        for r, con in enumerate(self.constraints):
            for v, coef in con.terms:
                rows.append(r)
                cols.append(v.id)
                vals.append(coef)
            lo[r] = con.rhs if con.sense in (GE, EQ) else -np.inf
            hi[r] = con.rhs if con.sense in (LE, EQ) else np.inf
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_rows, n))
        xl = np.array([v.lo for v in self.vars])
        xu = np.array([v.hi for v in self.vars])
        integ = np.array([1 if v.kind == "binary" else 0 for v in self.vars])
        return c, A, lo, hi, xl, xu, integ

    def evaluate(self, values: Mapping[int, float]) -> float:
        return float(sum(coef * values[v.id] for v, coef in self.objective))

    def max_violation(self, values: Mapping[int, float]) -> float:
        """Largest bound or row violation of a candidate point."""
        worst = 0.0
        for v in self.vars:
            x = values[v.id]
            worst = max(worst, v.lo - x, x - v.hi)
        for con in self.constraints:
            lhs = sum(c * values[v.id] for v, c in con.terms)
            if con.sense in (LE, EQ):
                worst = max(worst, lhs - con.rhs)
            if con.sense in (GE, EQ):
                worst = max(worst, con.rhs - lhs)
        return worst


# ---------------------------------------------------------------------------
# MPS

def col_code(i: int) -> str:
    return f"C{i:07d}"


def row_code(i: int) -> str:
    return f"R{i:07d}"


def _num(x: float) -> str:
    if x == 0:
        return "0"
    r = repr(float(x))
    return r[:-2] if r.endswith(".0") else r


def _line(code: str, name: str, f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    # fixed-format column positions: 2, 5, 15, 25, 40, 50
    s = f" {code:<2} {name:<8}"
    if f3:
        s += f"  {f3:<8}  {f4:>12}"
    if f5:
        s += f"   {f5:<8}  {f6:>12}"
    return s.rstrip()


def export_mps(model: Model, names: bool = False) -> str:
    """Fixed-format MPS text for a frozen model.

    Columns and rows are written as ``C0000012``/``R0000005`` so every name
    fits the 8-character fields; with ``names=True`` the long model names are
    listed in ``*`` comment lines.  Numbers use the shortest round-trip
    representation and may overflow the nominal 12-character field.
    Binaries sit inside ``MARKER`` blocks and also carry ``BV`` bounds.
    """
    if not model.frozen:
        raise ModelError("export_mps needs a frozen model")
    out = [f"NAME          {model.name[:8]}"]
    if names:
        out.append("* column names")
        out += [f"* {col_code(v.id)} {v.name}" for v in model.vars]
        out.append("* row names")
        out += [f"* {row_code(r)} {c.name}" for r, c in enumerate(model.constraints)]
    out.append("ROWS")
    out.append(_line("N", "COST"))
    kind = {LE: "L", EQ: "E", GE: "G"}
    for r, con in enumerate(model.constraints):
        out.append(_line(kind[con.sense], row_code(r)))

    col_entries: list[list[tuple[str, float]]] = [[] for _ in model.vars]
    for v, coef in model.objective:
        col_entries[v.id].append(("COST", coef))
    for r, con in enumerate(model.constraints):
        for v, coef in con.terms:
            col_entries[v.id].append((row_code(r), coef))

    out.append("COLUMNS")
    in_int = False
    n_marker = 0
    for v in model.vars:
        is_int = v.kind == "binary"
        if is_int and not in_int:
            out.append(_line("", f"M{n_marker:07d}", "'MARKER'", "", "'INTORG'"))
            n_marker += 1
            in_int = True
        elif not is_int and in_int:
            out.append(_line("", f"M{n_marker:07d}", "'MARKER'", "", "'INTEND'"))
            n_marker += 1
            in_int = False
        entries = col_entries[v.id] or [("COST", 0.0)]
        for k in range(0, len(entries), 2):
            pair = entries[k : k + 2]
            if len(pair) == 2:
                out.append(_line("", col_code(v.id), pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1])))
            else:
                out.append(_line("", col_code(v.id), pair[0][0], _num(pair[0][1])))
    if in_int:
        out.append(_line("", f"M{n_marker:07d}", "'MARKER'", "", "'INTEND'"))

    out.append("RHS")
    rhs = [(row_code(r), c.rhs) for r, c in enumerate(model.constraints) if c.rhs != 0.0]
    for k in range(0, len(rhs), 2):
        pair = rhs[k : k + 2]
        if len(pair) == 2:
            out.append(_line("", "RHS", pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1])))
        else:
            out.append(_line("", "RHS", pair[0][0], _num(pair[0][1])))

    out.append("BOUNDS")
    for v in model.vars:
        c = col_code(v.id)
        if v.kind == "binary":
            if v.lo == 0.0 and v.hi == 1.0:
                out.append(_line("BV", "BND", c))
            else:
                # fixed binary: keep integrality through the marker, pin bounds
                out.append(_line("LO", "BND", c, _num(v.lo)))
                out.append(_line("UP", "BND", c, _num(v.hi)))
            continue
        if v.lo == v.hi:
            out.append(_line("FX", "BND", c, _num(v.lo)))
            continue
        if v.lo == -math.inf and v.hi == math.inf:
            out.append(_line("FR", "BND", c))
            continue
        if v.lo == -math.inf:
            out.append(_line("MI", "BND", c))
        elif v.lo != 0.0:
            out.append(_line("LO", "BND", c, _num(v.lo)))
        if v.hi != math.inf:
            out.append(_line("UP", "BND", c, _num(v.hi)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def mps_column_index(code: str) -> int:
    if len(code) != 8 or code[0] != "C" or not code[1:].isdigit():
        raise SolverError(f"unexpected column name {code!r} in solution file")
    return int(code[1:])


# ---------------------------------------------------------------------------
# backends

class Backend(Protocol):
    name: str

    def solve(self, model: Model, time_limit: float, mip_gap: float) -> Solution: ...


class ScipyHighsBackend:
    """In-memory HiGHS through ``scipy.optimize.milp``."""

    name = "highs"

    def solve(self, model: Model, time_limit: float = DEFAULT_TIME_LIMIT, mip_gap: float = DEFAULT_GAP) -> Solution:
        import time

        from scipy.optimize import Bounds, LinearConstraint as SciLC, milp

        c, A, lo, hi, xl, xu, integ = model.to_arrays()
        cons = [SciLC(A, lo, hi)] if model.n_rows else []
        t0 = time.perf_counter()
        try:
            res = milp(c, constraints=cons, integrality=integ, bounds=Bounds(xl, xu),
                       options={"time_limit": float(time_limit), "mip_rel_gap": float(mip_gap),
                                "disp": False, "presolve": True})
        except ValueError as exc:
            raise SolverError(str(exc)) from exc
        runtime = time.perf_counter() - t0
        has_x = res.x is not None
        if res.status == 0:
            status = "optimal"
        elif res.status == 1:
            status = "feasible" if has_x else "time-limit"
        elif res.status == 2:
            status = "infeasible"
        elif res.status == 3:
            status = "unbounded"
        else:
            status = "error"
        gap = getattr(res, "mip_gap", None)
        if gap is None or not integ.any():
            gap = 0.0 if status == "optimal" else math.nan
        if status in ("optimal", "feasible") and has_x:
            values = {i: float(x) for i, x in enumerate(res.x)}
            return Solution(status, float(res.fun), values, float(gap), res.message, runtime)
        return Solution(status, math.nan, {}, math.nan, res.message, runtime)


class HighspyMpsBackend:
    """Round-trips the model through MPS text into ``highspy``."""

    name = "highs-mps"

    def solve(self, model: Model, time_limit: float = DEFAULT_TIME_LIMIT, mip_gap: float = DEFAULT_GAP) -> Solution:
        return solve_mps_highspy(export_mps(model), time_limit, mip_gap, n_cols=model.n_vars)


def solve_mps_highspy(text: str, time_limit: float = DEFAULT_TIME_LIMIT, mip_gap: float = DEFAULT_GAP,
                      n_cols: int | None = None) -> Solution:
    try:
        import highspy
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise SolverError("highspy is not installed (pip install highspy)") from exc
    import time

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.mps")
        Path(path).write_text(text)
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("time_limit", float(time_limit))
        h.setOptionValue("mip_rel_gap", float(mip_gap))
        h.setOptionValue("threads", 1)
        if h.readModel(path) != highspy.HighsStatus.kOk:
            raise SolverError("highspy could not read the MPS text")
        t0 = time.perf_counter()
        h.run()
        runtime = time.perf_counter() - t0
    ms = h.getModelStatus()
    M = highspy.HighsModelStatus
    info = h.getInfo()
    if ms == M.kOptimal:
        status = "optimal"
    elif ms == M.kInfeasible:
        status = "infeasible"
    elif ms in (M.kUnbounded, M.kUnboundedOrInfeasible):
        status = "unbounded" if ms == M.kUnbounded else "infeasible"
    elif ms == M.kTimeLimit:
        status = "feasible" if info.primal_solution_status == 2 else "time-limit"
    else:
        status = "error"
    if status not in ("optimal", "feasible"):
        return Solution(status, math.nan, {}, math.nan, h.modelStatusToString(ms), runtime)
    lp = h.getLp()
    x = list(h.getSolution().col_value)
    values = {}
    for j, nm in enumerate(lp.col_names_):
        values[mps_column_index(nm)] = float(x[j])
    gap = float(info.mip_gap) if info.mip_gap == info.mip_gap else 0.0
    return Solution(status, float(info.objective_function_value), values, gap, h.modelStatusToString(ms), runtime)


SOLVER_BIN_ENV = "CFUC_SOLVER_BIN"


class CbcFileBackend:
    """Writes MPS, runs an external CBC binary, parses its solution file.

    The binary comes from ``binary`` or the ``CFUC_SOLVER_BIN`` environment
    variable, falling back to ``cbc`` on ``PATH``.
    """

    name = "cbc"

    def __init__(self, binary: str | None = None):
        self.binary = binary

    def _binary(self) -> str:
        b = self.binary or os.environ.get(SOLVER_BIN_ENV) or shutil.which("cbc")
        if not b:
            raise SolverError(f"no CBC binary: set {SOLVER_BIN_ENV} or put cbc on PATH")
        return b

    def solve(self, model: Model, time_limit: float = DEFAULT_TIME_LIMIT, mip_gap: float = DEFAULT_GAP) -> Solution:
        import time

        binary = self._binary()
        with tempfile.TemporaryDirectory() as tmp:
            mps = os.path.join(tmp, "model.mps")
            sol = os.path.join(tmp, "model.sol")
            Path(mps).write_text(export_mps(model))
            cmd = [binary, mps, "-sec", str(float(time_limit)), "-ratioGap", str(float(mip_gap)),
                   "-threads", "1", "-solve", "-solu", sol]
            t0 = time.perf_counter()
            proc = subprocess.run(cmd, capture_output=True, text=True)
            runtime = time.perf_counter() - t0
            if proc.returncode != 0 or not os.path.exists(sol):
                raise SolverError((proc.stdout + proc.stderr).strip() or f"{binary} failed")
            text = Path(sol).read_text()
        return parse_cbc_solution(text, model.n_vars, model, runtime)


def parse_cbc_solution(text: str, n_cols: int, model: Model | None = None, runtime: float = 0.0) -> Solution:
    """Parse a CBC ``-solu`` file.

    First line carries the status and objective (``Optimal - objective value
    1.00000000``); each further line is ``index name value reduced_cost``
    and only non-zero columns are listed.
    """
    lines = text.splitlines()
    if not lines:
        raise SolverError("empty CBC solution file")
    head = lines[0].strip()
    low = head.lower()
    if low.startswith("optimal"):
        status = "optimal"
    elif "infeasible" in low:
        return Solution("infeasible", message=head, runtime=runtime)
    elif "unbounded" in low:
        return Solution("unbounded", message=head, runtime=runtime)
    elif low.startswith("stopped") and "objective value" in low:
        status = "feasible"
    elif low.startswith("stopped"):
        return Solution("time-limit", message=head, runtime=runtime)
    else:
        return Solution("error", message=head, runtime=runtime)
    try:
        obj = float(head.rsplit("objective value", 1)[1].split()[0])
    except (IndexError, ValueError) as exc:
        raise SolverError(f"cannot read objective from {head!r}") from exc
    values = {i: 0.0 for i in range(n_cols)}
    for line in lines[1:]:
        parts = line.replace("**", " ").split()
        if len(parts) < 3:
            continue
        values[mps_column_index(parts[1])] = float(parts[2])
    if model is not None:
        obj = model.evaluate(values)
    return Solution(status, obj, values, 0.0 if status == "optimal" else math.nan, head, runtime)


BACKENDS: dict[str, type] = {
    "highs": ScipyHighsBackend,
    "highs-mps": HighspyMpsBackend,
    "cbc": CbcFileBackend,
}


def get_backend(name: str = "highs"):
    try:
        return BACKENDS[name]()
    except KeyError:
        raise SolverError(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}") from None


def solve(model: Model, backend=None, time_limit: float = DEFAULT_TIME_LIMIT, mip_gap: float = DEFAULT_GAP) -> Solution:
    """Freeze ``model`` and solve it with ``backend`` (name or adapter)."""
    if backend is None:
        backend = "highs"
    if isinstance(backend, str):
        backend = get_backend(backend)
    model.freeze()
    log.info("solving %s: %d cols, %d rows with %s", model.name, model.n_vars, model.n_rows, backend.name)
    return backend.solve(model, time_limit, mip_gap)
