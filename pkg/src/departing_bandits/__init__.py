"""Planning and learning for bandits whose recommendations affect how long users stay."""

from .core import (
    TABLE1,
    EpisodeResult,
    Instance,
    InstanceError,
    Policy,
    Structure,
    StructureClass,
    classify_structure,
    denormalize_policy,
    load_instance,
    normalize_2x2,
    save_instance,
    validate_instance,
)
from .dp_planner import dp_plan, dp_value_curve
from .environment import RngStream, run_episode, run_episodes, run_stream
from .learning import (
    UCBHybrid,
    build_fixed_arm_policy_set,
    build_threshold_policy_set,
    horizon_for_T,
    regret_curve,
)
from .planning import optimal_policy_2x2, policy_value, single_type_optimal_arm

__version__ = "0.1.0"

__all__ = [
    "TABLE1", "EpisodeResult", "Instance", "InstanceError", "Policy", "Structure",
    "StructureClass", "classify_structure", "denormalize_policy", "load_instance",
    "normalize_2x2", "save_instance", "validate_instance", "dp_plan", "dp_value_curve",
    "RngStream", "run_episode", "run_episodes", "run_stream", "UCBHybrid",
    "build_fixed_arm_policy_set", "build_threshold_policy_set", "horizon_for_T",
    "regret_curve", "optimal_policy_2x2", "policy_value", "single_type_optimal_arm",
]
