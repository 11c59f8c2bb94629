"""Mixed-initiative room design: MAP-Elites suggestions blended with a
designer preference model that learns from applied suggestions."""

from .config import AppConfig
from .engine import EliteGridEngine, cell_index
from .level import (Door, Dungeon, Room, RoomEdit, TileKind, apply_edit,
                    deserialize_dungeon, new_room, serialize_dungeon)
from .patterns import (DimensionKind, dimension_value, infeasibility_fitness,
                       is_feasible, meso_patterns, objective_fitness,
                       spatial_patterns, walkable_components)
from .preference import (PreferenceNet, build_adhoc_matrix, build_dataset,
                         combined_fitness, compute_weights, confidence,
                         encode_room, predicted_preference, train_episode)
from .session import Session, default_session, rank_top_preference
from .sim import ExperimentConfig, run_experiment

__version__ = "0.1.0"

__all__ = [
    "AppConfig", "Door", "Dungeon", "Room", "RoomEdit", "TileKind",
    "EliteGridEngine", "cell_index", "apply_edit", "new_room",
    "serialize_dungeon", "deserialize_dungeon", "DimensionKind",
    "dimension_value", "is_feasible", "infeasibility_fitness",
    "meso_patterns", "objective_fitness", "spatial_patterns",
    "walkable_components", "PreferenceNet", "build_adhoc_matrix",
    "build_dataset", "combined_fitness", "compute_weights", "confidence",
    "encode_room", "predicted_preference", "train_episode", "Session",
    "default_session", "rank_top_preference", "ExperimentConfig",
    "run_experiment", "__version__",
]
