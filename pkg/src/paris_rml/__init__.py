"""Particle-based online maximum likelihood for state-space models.

The library pairs a linear-cost tangent smoother (``algorithm="paris"``)
with the classical quadratic-cost baseline (``algorithm="quadratic"``)
inside a projected Robbins-Monro parameter recursion, and ships exact
Kalman oracles for validating the particle score estimates.
"""

from .engine import (RunConfig, ScoreIncrement, StepSchedule, Trajectory,
                     iter_online, rml_step, run_online, score_terms)
from .filtering import (DegeneracyError, ParticleCloud, effective_sample_size,
                        init_cloud, predict_estimate, propagate, weight_cloud)
from .kalman import LgssmSpec, fd_score, kalman_filter, kalman_score_step, kalman_step
from .models import (ConstraintSet, LinearGaussianModel, ModelError,
                     StochasticVolatilityModel, default_constraints, get_model,
                     project, sv_simulate)
from .rng import RngStream, SamplerError, backward_indices, categorical_draw
from .smoothing import (TauStats, genealogy_update, paris_update,
                        quadratic_update, tau_mean, zero_stats)

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "ScoreIncrement", "StepSchedule", "Trajectory",
    "iter_online", "rml_step", "run_online", "score_terms",
    "DegeneracyError", "ParticleCloud", "effective_sample_size",
    "init_cloud", "predict_estimate", "propagate", "weight_cloud",
    "LgssmSpec", "fd_score", "kalman_filter", "kalman_score_step", "kalman_step",
    "ConstraintSet", "LinearGaussianModel", "ModelError",
    "StochasticVolatilityModel", "default_constraints", "get_model",
    "project", "sv_simulate",
    "RngStream", "SamplerError", "backward_indices", "categorical_draw",
    "TauStats", "genealogy_update", "paris_update",
    "quadratic_update", "tau_mean", "zero_stats",
]
