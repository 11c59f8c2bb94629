"""Central configuration: every tunable constant in one place.

All numbers referenced elsewhere in the package (grid granularity, population
caps, pattern-scoring constants, network shape and training hyperparameters,
publish cadence) live here so a single JSON file can override them.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class FitnessConfig:
    """Constants of the pattern-based objective and the behavior dimensions."""

    chamber_ratio_target: float = 0.5   # preferred chamber share of walkable area
    meso_norm: float = 4.0              # meso pattern count that saturates the score
    dead_end_penalty: float = 0.5       # weight of dead ends inside the meso score
    patterns_cap: int = 10              # meso count mapped to dimension value 1.0
    leniency_enemy_frac: float = 0.1    # enemies per tile that zero out leniency


@dataclass(frozen=True)
class EvolutionConfig:
    grid_rows: int = 5                  # behavior bins along the first dimension
    grid_cols: int = 5                  # behavior bins along the second dimension
    feasible_cap: int = 25              # max feasible individuals per cell
    infeasible_cap: int = 25            # max infeasible individuals per cell
    offspring_per_generation: int = 20
    mutation_rate: float = 0.04         # per-tile resample probability
    crossover_rate: float = 0.5         # per-tile chance of taking parent B's tile
    seed_count: int = 100               # mutated target copies on (re)seed
    seed_mutation_rate: float = 0.2


@dataclass(frozen=True)
class PreferenceConfig:
    hidden_sizes: tuple[int, ...] = (100, 50)
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.05
    test_fraction: float = 0.1
    adhoc_step: float = 0.2             # preference drop per grid step from the pick
    adhoc_metric: str = "chebyshev"     # or "manhattan"
    weight_cap: float = 0.5             # ceiling of the model's blend weight
    literal_weighted_sum: bool = False  # keep both published blend variants selectable
    batches_per_generation: int = 2     # training slices interleaved per generation


@dataclass(frozen=True)
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8000
    session_dir: str = "sessions"
    publish_every_generations: int = 50
    publish_every_ms: float = 500.0     # live-service cadence only; replay ignores it


@dataclass(frozen=True)
class AppConfig:
    fitness: FitnessConfig = field(default_factory=FitnessConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    preference: PreferenceConfig = field(default_factory=PreferenceConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AppConfig":
        sections = {}
        known = {f.name: f.type for f in fields(cls)}
        for name, payload in data.items():
            if name not in known:
                raise ConfigError(f"unknown config section {name!r}")
            section_cls = {"fitness": FitnessConfig, "evolution": EvolutionConfig,
                           "preference": PreferenceConfig, "service": ServiceConfig}[name]
            valid = {f.name for f in fields(section_cls)}
            bad = set(payload) - valid
            if bad:
                raise ConfigError(f"unknown keys in {name}: {sorted(bad)}")
            if "hidden_sizes" in payload:
                payload = dict(payload, hidden_sizes=tuple(payload["hidden_sizes"]))
            sections[name] = section_cls(**payload)
        return cls(**sections)

    @classmethod
    def load(cls, path: str | Path) -> "AppConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON in config file {path}: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True),
                              encoding="utf-8")
