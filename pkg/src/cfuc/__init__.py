"""Continuous-time unit commitment with frequency-security constraints.

Trajectories are hourly cubic Bernstein segments; the scheduling problem is
a MILP over their coefficients, optionally constrained by RoCoF,
quasi-steady-state frequency and a learned linear frequency-nadir rule.
"""

from .bernstein import BernsteinSegment, PiecewiseBernstein, fit_piecewise
from .cuc import Schedule, assemble, extract_schedule
from .milp import Model, Solution, export_mps, solve
from .nadirlearn import NadirModel, SamplePoint, fit_linear, generate_dataset
from .sysmodel import ApproximatedProfiles, CaseInput, SystemParams, UnitSpec, approximate_profiles, load_case

__all__ = [
    "ApproximatedProfiles", "BernsteinSegment", "CaseInput", "Model", "NadirModel", "PiecewiseBernstein",
    "SamplePoint", "Schedule", "Solution", "SystemParams", "UnitSpec", "approximate_profiles", "assemble",
    "export_mps", "extract_schedule", "fit_linear", "fit_piecewise", "generate_dataset", "load_case", "solve",
]
