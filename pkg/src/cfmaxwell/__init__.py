"""Correction-function interface treatment for 2-D TM_z Maxwell FDTD."""

from .cfm import Physics, PatchSet, build_patch, solve_corrections
from .fdtd import RunResult, SchemeConfig, Simulation, run
from .geometry import LevelSet
from .grid import FieldSet, GridSpec
from .problems import Problem, make_problem

__all__ = [
    "FieldSet",
    "GridSpec",
    "LevelSet",
    "PatchSet",
    "Physics",
    "Problem",
    "RunResult",
    "SchemeConfig",
    "Simulation",
    "build_patch",
    "make_problem",
    "run",
    "solve_corrections",
]

__version__ = "0.1.0"
