"""Command-line entry point: ``cfuc {case,train,solve,evaluate,table}``.

Every command writes under ``--out``:

``case``      ``case.json``
``train``     ``dataset.csv``, ``nadir_model.json``
``solve``     ``schedule.csv``, ``schedule.json``, ``model.mps``, ``summary.json``,
              and with ``--train`` also the ``train`` files
``evaluate``  ``nadir_<L>hz.json`` per threshold, ``nadir_minutes.csv``, ``evaluation.json``
``table``     one ``solve`` directory per row plus ``summary.csv``

Exit codes: 0 on success, 1 when the solver returns no usable schedule,
2 for bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import cases, cuc, freq, milp, nadirlearn
from .sysmodel import MODES, CaseError, CaseInput, approximate_profiles, dump_case, load_case

log = logging.getLogger("cfuc")

BUILTIN_CASES = {"desk": cases.desk_case}
DEFAULT_SAMPLES = 10_000
LOW_SCORE = 0.9
REPORT_THRESHOLD = 2.5
TABLE_ROWS = (("cuc", None), ("rocof-cuc", None), ("cfcuc", 3.0), ("cfcuc", 2.5), ("cfcuc", 2.0))
SUMMARY_FIELDS = ("mode", "nadir_limit_hz", "objective_keur", "runtime_s", "minutes_above_2p5hz", "score")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    case_path: str
    mode: str = "cuc"
    nadir_limit_hz: float | None = None
    backend: str = "highs"
    time_limit_s: float = milp.DEFAULT_TIME_LIMIT
    mip_gap: float = milp.DEFAULT_GAP
    seed: int = 0
    output_dir: str = "out"
    model_path: str | None = None
    train: bool = False
    n_samples: int = DEFAULT_SAMPLES

    def validate(self) -> None:
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.mode == "cfcuc":
            if self.nadir_limit_hz is None:
                raise UsageError("mode cfcuc needs --nadir-limit")
            if self.model_path is None and not self.train:
                raise UsageError("mode cfcuc needs --model PATH or --train")
        if self.nadir_limit_hz is not None and self.nadir_limit_hz <= 0:
            raise UsageError("--nadir-limit must be positive")


def resolve_case(spec: str) -> CaseInput:
    """A JSON case file, or the name of a built-in case."""
    if spec in BUILTIN_CASES and not Path(spec).exists():
        return BUILTIN_CASES[spec]()
    return load_case(spec)


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_train(case: CaseInput, threshold: float, seed: int, n_samples: int, out_dir: str | Path,
              stem: str = "nadir_model") -> nadirlearn.NadirModel:
    """Generate the labelled dataset, fit the surrogate, write both files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = nadirlearn.generate_dataset(case, n_samples, seed, threshold)
    nadirlearn.write_dataset(data, out / "dataset.csv")
    model = nadirlearn.fit_linear(data, threshold, seed)
    model.save(out / f"{stem}.json")
    if model.score < LOW_SCORE:
        log.warning("held-out score %.4f is below %.2f; consider more samples", model.score, LOW_SCORE)
    log.info("threshold %g Hz: score %.4f, margin %.3f Hz", threshold, model.score, model.margin)
    return model


def cmd_solve(cfg: RunConfig, case: CaseInput | None = None) -> dict:
    """Solve one case in one mode and write the schedule, MPS snapshot and summary.

    Returns the summary row.  Raises ``milp.SolverError`` when no schedule
    comes back.
    """
    cfg.validate()
    case = case or resolve_case(cfg.case_path)
    limit = cfg.nadir_limit_hz if cfg.nadir_limit_hz is not None else case.params.nadir_limit
    case = case.replace_params(mode=cfg.mode, nadir_limit=limit)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    nadir_model = None
    if cfg.mode == "cfcuc":
        if cfg.model_path is not None:
            nadir_model = nadirlearn.NadirModel.load(cfg.model_path)
        else:
            nadir_model = cmd_train(case, limit, cfg.seed, cfg.n_samples, out)

    profiles = approximate_profiles(case)
    model, vars = cuc.assemble(case, profiles, cfg.mode, nadir_model)
    (out / "model.mps").write_text(milp.export_mps(model))

    t0 = time.perf_counter()
    sol = milp.solve(model, cfg.backend, cfg.time_limit_s, cfg.mip_gap)
    runtime = time.perf_counter() - t0
    if not sol.ok:
        raise milp.SolverError(f"{cfg.mode}: solver returned {sol.status}: {sol.message}")

    sched = cuc.extract_schedule(sol, vars, case)
    sweep = freq.nadir_sweep(sched, profiles, case, REPORT_THRESHOLD)
    freq.write_sweep(sweep, out)
    row = {
        "mode": cfg.mode,
        "objective_keur": round(sol.objective / 1000.0, 2),
        "runtime_s": round(runtime, 3),
        "minutes_above_2p5hz": sweep.minutes_above,
    }
    if nadir_model is not None:
        row["nadir_limit_hz"] = limit
        row["score"] = nadir_model.score
        row["minutes_above_limit"] = freq.minutes_above(sched, profiles, case, limit)
    cuc.write_schedule(sched, out, extra={"mode": cfg.mode, "gap": sol.gap})
    _write_json(out / "summary.json", row)
    return row


def cmd_evaluate(schedule_path: str | Path, case: CaseInput, thresholds, out_dir: str | Path) -> dict:
    """Minutes above each threshold plus the per-minute worst nadir CSV."""
    path = Path(schedule_path)
    csv_path = path / cuc.SCHEDULE_CSV if path.is_dir() else path
    sched = cuc.read_schedule(csv_path)
    unknown = [uid for uid in sched.units if uid not in case.unit_ids]
    if unknown:
        raise CaseError(f"schedule units {unknown} are not in case {case.name!r}")
    if sched.units and sched.horizon != case.horizon:
        raise CaseError(f"schedule covers {sched.horizon} h but the case has {case.horizon} h")
    profiles = approximate_profiles(case)
    out = Path(out_dir)
    report = {}
    for thr in thresholds:
        sweep = freq.nadir_sweep(sched, profiles, case, thr)
        freq.write_sweep(sweep, out)
        report[f"{thr:g}"] = sweep.minutes_above
    _write_json(out / "evaluation.json", {"minutes_above": report})
    return report


def cmd_table(cfg: RunConfig, rows=TABLE_ROWS) -> list[dict]:
    """All comparison rows back to back; one surrogate is trained per nadir limit."""
    case = resolve_case(cfg.case_path)
    out = Path(cfg.output_dir)
    table = []
    for mode, limit in rows:
        tag = mode if limit is None else f"{mode}_{limit:g}".replace(".", "p")
        sub = RunConfig(**{**cfg.__dict__, "mode": mode, "nadir_limit_hz": limit,
                           "output_dir": str(out / tag), "train": cfg.model_path is None})
        row = cmd_solve(sub, case)
        table.append(row)
        log.info("%s: %.2f k€, %d min above 2.5 Hz", tag, row["objective_keur"], row["minutes_above_2p5hz"])
    with open(out / "summary.csv", "w", newline="") as fh:
        wr = csv.DictWriter(fh, SUMMARY_FIELDS, extrasaction="ignore", lineterminator="\n")
        wr.writeheader()
        for row in table:
            wr.writerow(row)
    return table


# ---------------------------------------------------------------------------
# argument parsing

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", required=True, help="case JSON file, or 'desk' for the built-in case")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", default="highs", choices=sorted(milp.BACKENDS))
    p.add_argument("--time-limit", type=float, default=milp.DEFAULT_TIME_LIMIT, help="seconds")
    p.add_argument("--gap", type=float, default=milp.DEFAULT_GAP, help="relative MIP gap")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="dataset size when training")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfuc", description="Continuous-time, frequency-constrained unit commitment.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sp = ap.add_subparsers(dest="command", required=True)

    p = sp.add_parser("case", help="write a built-in case to JSON")
    p.add_argument("name", choices=sorted(BUILTIN_CASES))
    p.add_argument("--out", default="out")

    p = sp.add_parser("train", help="generate data and fit the nadir surrogate")
    _common(p)
    p.add_argument("--threshold", type=float, required=True, help="nadir threshold in Hz")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)

    p = sp.add_parser("solve", help="solve a case in one mode")
    _common(p)
    _solver_flags(p)
    p.add_argument("--mode", default="cuc", choices=MODES)
    p.add_argument("--nadir-limit", type=float, help="Hz; required for cfcuc")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--model", help="trained nadir model JSON")
    g.add_argument("--train", action="store_true", help="train the surrogate before solving")

    p = sp.add_parser("evaluate", help="minutes above nadir thresholds for a solved schedule")
    _common(p)
    p.add_argument("--schedule", required=True, help="schedule.csv or the directory holding it")
    p.add_argument("--thresholds", type=float, nargs="+", default=[REPORT_THRESHOLD])

    p = sp.add_parser("table", help="run cuc, rocof-cuc and cfcuc at 3, 2.5 and 2 Hz")
    _common(p)
    _solver_flags(p)
    return ap


def _config(args) -> RunConfig:
    return RunConfig(
        case_path=args.case,
        mode=getattr(args, "mode", "cuc"),
        nadir_limit_hz=getattr(args, "nadir_limit", None),
        backend=args.backend,
        time_limit_s=args.time_limit,
        mip_gap=args.gap,
        seed=args.seed,
        output_dir=args.out,
        model_path=getattr(args, "model", None),
        train=getattr(args, "train", False),
        n_samples=args.samples,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "case":
            Path(args.out).mkdir(parents=True, exist_ok=True)
            dump_case(BUILTIN_CASES[args.name](), Path(args.out) / "case.json")
        elif args.command == "train":
            model = cmd_train(resolve_case(args.case), args.threshold, args.seed, args.samples, args.out)
            print(json.dumps({"threshold_hz": model.threshold, "score": model.score}))
        elif args.command == "solve":
            print(json.dumps(cmd_solve(_config(args)), sort_keys=True))
        elif args.command == "evaluate":
            print(json.dumps(cmd_evaluate(args.schedule, resolve_case(args.case), args.thresholds, args.out)))
        elif args.command == "table":
            for row in cmd_table(_config(args)):
                print(json.dumps(row, sort_keys=True))
    except milp.SolverError as exc:
        print(f"cfuc: {exc}", file=sys.stderr)
        return 1
    except (UsageError, CaseError, cuc.ScheduleError, nadirlearn.LearnError, FileNotFoundError) as exc:
        print(f"cfuc: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
