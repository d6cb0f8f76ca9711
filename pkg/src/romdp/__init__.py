"""Agents, planners and benchmark environments for redundantly observable
MDPs: a goal-oriented clustering agent that compresses observations into
reward-relevant states, a complete-inference baseline, Action-value
Thompson Sampling, and nonstationary test environments with evaluation
metrics.
"""

from .cei import CeiModel, cei_e_step, cei_infer_window, cei_m_step
from .config import ExperimentConfig, load_config, parse_config_text
from .env import (CoreMDP, NoiseKind, NoiseModel, RomdpEnv, RuleChange,
                  ScheduleEvent, decode_obs, default_core_mdp, encode_obs,
                  oracle_action_sets, oracle_policy, periodic_schedule,
                  swapped_reward_rule, swapped_transition_rule)
from .goei import (GoeiModel, active_states, goei_aux_update, goei_e_step,
                   goei_infer_window, goei_m_step_with_forgetting)
from .metrics import JointCounts, accumulate, conditional_entropy, optimal_rate
from .planner import (PlanningPosterior, SampledModel, ats_select_action,
                      sample_model, value_iteration)
from .probability import (PosteriorTable, StickWeights, digamma,
                          expected_log_dirichlet, expected_log_sbp,
                          normalize_log, sample_categorical_from_dirichlet)
from .runner import (RunSummary, SeedResult, TrialRecord, compare_agents,
                     emit_comparison, emit_plot_data, run_experiment, run_seed)
from .window import WindowData

__version__ = "0.1.0"
