"""Trailer routing over scheduled line-haul services."""

from .model import Instance, Path, Solution, read_instance, read_solution, validate_solution
from .colgen import CgParams, insert_realtime, run_colgen, solve_cg

__all__ = ["Instance", "Path", "Solution", "read_instance", "read_solution", "validate_solution",
           "CgParams", "insert_realtime", "run_colgen", "solve_cg"]
