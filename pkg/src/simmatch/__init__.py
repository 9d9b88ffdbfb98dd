"""Batch active learning by matching simulated sequential-policy trajectories."""
from . import bcm, data, klr, matching, policy, simulate
from .bcm import BcmProblem, greedy_accelerated, greedy_naive, objective_g, select_batch
from .data import Dataset, Pool, load_csv, normalize, split_and_init
from .matching import BACKEND, CostMetric, repair_after_removal, solve_assignment

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BcmProblem", "CostMetric", "Dataset", "Pool",
    "bcm", "data", "greedy_accelerated", "greedy_naive", "klr", "load_csv",
    "matching", "normalize", "objective_g", "policy", "repair_after_removal",
    "select_batch", "simulate", "solve_assignment", "split_and_init",
]
