"""Dynamic Q-learning agents that learn when to stop asking questions before a triage decision."""

from .agent import AgentConfig, DyQNAgent, build_targets, select_action, sigma_schedule, target_and, target_or, train
from .core import Action, DecisionBag, Dataset, EvidenceAssignment, TriageLevel, Vignette, encode_state, urgency_bounds
from .environment import VignetteEnv
from .memory import ExperienceTuple, PrioritizedMemory
from .metrics import aggregate, human_baseline, is_appropriate, is_safe
from .network import QNetwork, backward, forward
from .rewards import counterfactual_reward, terminal_target
from .synthetic import GeneratorConfig, generate

__version__ = "0.1.0"
