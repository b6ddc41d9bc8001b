"""Training: rollouts, controller and module updates, curriculum, baseline, evaluation."""
from .baseline import BaselineConfig, BaselineParams, baseline_config
from .config import MODELS, TASKS, TrainConfig, parse_flat, parse_lengths
from .evaluation import (AGG_COLUMNS, COLUMNS, EvalReport, EvalRow, aggregate, aggregate_csv,
                         evaluate, evaluate_baseline, evaluate_policy)
from .rollouts import RolloutBuffer, StepArrays, collect_rollouts, episode_rng
from .trainer import (CurriculumDriver, Learner, TrainResult, build_learner, curriculum_driver,
                      default_eval_pools, module_config, run_ablation, train)
from .updates import (PPOStats, clipped_surrogate, controller_update, eligible, module_loss,
                      module_update, ppo_gradients, ppo_loss, recompute_chain, recompute_final,
                      surrogate_coefficients)

__all__ = [
    "AGG_COLUMNS", "COLUMNS", "BaselineConfig", "BaselineParams", "CurriculumDriver", "EvalReport",
    "EvalRow", "Learner", "MODELS", "PPOStats", "RolloutBuffer", "StepArrays", "TASKS",
    "TrainConfig", "TrainResult", "aggregate", "aggregate_csv", "baseline_config",
    "build_learner", "clipped_surrogate", "collect_rollouts", "controller_update",
    "curriculum_driver", "default_eval_pools", "eligible", "episode_rng", "evaluate",
    "evaluate_baseline", "evaluate_policy", "module_config", "module_loss", "module_update",
    "parse_flat", "parse_lengths", "ppo_gradients", "ppo_loss", "recompute_chain",
    "recompute_final", "run_ablation", "surrogate_coefficients", "train",
]
