from .config import EngagementConfig, ObstacleSet, SlotCapacity, TaskKind, Team
from .geometry import advantage, advantage_matrix, cover_rectangle, line_of_sight
from .perception import (
    LowerObservation,
    ObsLayout,
    Perception,
    UpperObservation,
    apply_uncertainty,
    build_lower_observation,
    build_upper_observation,
    lower_observations,
    neighbor_sets,
    perceive,
    upper_observations,
)
from .world import (
    AgentState,
    StepEvents,
    World,
    detect_collisions,
    resolve_attacks,
    step_kinematics,
    step_world,
)

__all__ = [
    "AgentState", "EngagementConfig", "LowerObservation", "ObsLayout", "ObstacleSet",
    "Perception", "SlotCapacity", "StepEvents", "TaskKind", "Team", "UpperObservation",
    "World", "advantage", "advantage_matrix", "apply_uncertainty", "build_lower_observation",
    "build_upper_observation", "cover_rectangle", "detect_collisions", "line_of_sight",
    "lower_observations", "neighbor_sets", "perceive", "resolve_attacks", "step_kinematics",
    "step_world", "upper_observations",
]
