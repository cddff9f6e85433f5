"""Tabular batch-RL laboratory: exact models, learners, assumption checks,
performance bounds, and boundary refinements."""
from .admissible import AdmissibleSet, admissible_cb, admissible_mdp
from .assumptions import (
    CheckReport,
    build_b_operator,
    check_contraction,
    check_exploratory_classical,
    check_realizability,
    concentrability,
    exploratory_bi,
    find_valid_reward_function,
    fixed_point_of_b,
    inherent_bellman_error,
)
from .boundary import (
    RefinedProblem,
    RefinementMap,
    coupled_run,
    cosmetic_split,
    determinize,
    invariance_sweep,
    reward_derandomize_split,
    split_states,
    trajectory_distribution,
)
from .bounds import (
    BoundReport,
    bound_cb_classical,
    bound_cb_invariant,
    bound_cb_robust,
    bound_fqi_invariant,
    compare_prop3,
)
from .function_class import FunctionClass, base_policies, greedy_policy, pairwise_max_policy, weighted_norm
from .instances import Problem
from .learners import behavior_clone, fit_cb, population_loss_cb, population_target_loss, run_fqi
from .mdp import (
    Dataset,
    NonstationaryPolicy,
    Policy,
    RewardDistribution,
    TabularMDP,
    bellman_backup,
    occupancy,
    optimal_q,
    policy_q,
    policy_value,
    sample_transitions,
    validate,
)
from .scenarios import scenario_figure2, scenario_imitation, scenario_sq_loss_necessity, scenario_unverifiability
from .serialization import ProblemFormatError, dumps_problem, load_problem, loads_problem

__version__ = "0.1.0"
