from .ensemble import EnsembleConfig, SupervisedModel, train_fully_observed
from .isotonic import IsotonicMap, isotonic_fit, pava
from .partial import CachedTriageModel, partially_observed_qvalues, train_partially_observed
from .policies import expected_random_questions, policy_always_green, policy_random, run_fixed_policy
from .powerset import expand_dataset, expand_powerset, expanded_count

__all__ = [
    "CachedTriageModel",
    "EnsembleConfig",
    "IsotonicMap",
    "SupervisedModel",
    "expand_dataset",
    "expand_powerset",
    "expanded_count",
    "expected_random_questions",
    "isotonic_fit",
    "partially_observed_qvalues",
    "pava",
    "policy_always_green",
    "policy_random",
    "run_fixed_policy",
    "train_fully_observed",
    "train_partially_observed",
]
