"""Datasets, metrics, experiment runners and the command line front end."""

from .config import load_config, make_config, ratio_to_subset
from .datasets import gen_gaussian_mixture, gen_inverse_sine, gen_multipoint
from .experiments import (
    RUNNERS,
    run_gaussian_mixture_experiment,
    run_multipoint,
    run_sine_experiment,
    run_subset_ratio_sweep,
    run_vq_comparison,
)
from .metrics import inverse_sine_branches, mean_ci, sdd
