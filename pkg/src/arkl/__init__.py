"""Tabular autoregressive policies, joint-KL learners and hard instances."""

from .ar_core import (
    Alphabet,
    PolicyClass,
    Regime,
    SeqPolicy,
    StepKind,
    StepPolicy,
    enumerate_trajectories,
    joint_log_law,
    log_joint_prob,
    random_seq_policy,
    random_step_policy,
    sample_dataset,
)
from .divergences import (
    DivergenceReport,
    Method,
    joint_kl,
    joint_kl_chain,
    joint_kl_exact,
    joint_kl_monte_carlo,
    squared_hellinger,
    stepwise_squared_hellinger,
    total_variation,
)
from .errors import ArklError, CapExceeded, InvalidParam, SupportViolation, Unbounded, ZeroProbability
from .learners import Dataset, bayes_mode, bayes_posterior, erm, fit, mixability_check, stepwise_erm
from .policy_eval import RewardFn, expected_return, regret, worst_case_regret

__version__ = "0.1.0"
