"""Headless experiment driver: scripted synthetic designers over full sessions.

Each run drafts a starting room through ordinary edit events, then alternates
evolution bursts with one suggestion application per episode. The applied
suggestion triggers a training episode exactly like a human selection would,
so the run exercises the entire learning loop and records how well the model
tracks the scripted preference.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import AppConfig
from .engine import EliteSnapshot
from .errors import ConfigError, EmptySnapshot
from .level import Room, TileKind
from .patterns import DimensionKind, analyze, dimension_value
from .session import Session, default_session, rank_top_preference

REPORT_HEADER = ("episode", "testAcc", "meanConfidence", "meanW1",
                 "favoriteRank", "generations", "wallMs")


# --- synthetic designers ------------------------------------------------------

@dataclass(frozen=True)
class MaxDimensionPolicy:
    dim: DimensionKind


@dataclass(frozen=True)
class PatternSeekerPolicy:
    pass


@dataclass(frozen=True)
class RandomPolicy:
    pass


@dataclass(frozen=True)
class DriftingPolicy:
    dim_a: DimensionKind
    dim_b: DimensionKind
    switch_episode: int


Policy = MaxDimensionPolicy | PatternSeekerPolicy | RandomPolicy | DriftingPolicy


def _argmax_cell(snapshot: EliteSnapshot, score) -> tuple[int, int]:
    views = snapshot.non_empty()
    if not views:
        raise EmptySnapshot("no elites to choose from")
    best = None
    best_score = -np.inf
    for view in views:             # row-major, so ties keep the first cell
        s = score(view)
        if s > best_score:
            best, best_score = view.cell, s
    return best


def synthetic_select(policy: Policy, snapshot: EliteSnapshot, episode: int,
                     rng: np.random.Generator, target: Room) -> tuple[int, int]:
    """The cell this designer applies; deterministic except for RandomPolicy."""
    if isinstance(policy, DriftingPolicy):
        dim = policy.dim_a if episode < policy.switch_episode else policy.dim_b
        policy = MaxDimensionPolicy(dim)
    if isinstance(policy, MaxDimensionPolicy):
        # recompute the metric: selection must not trust cached descriptors
        return _argmax_cell(snapshot, lambda v: dimension_value(
            v.room, policy.dim, target=target))
    if isinstance(policy, PatternSeekerPolicy):
        return _argmax_cell(snapshot, lambda v: analyze(v.room).meso_total)
    if isinstance(policy, RandomPolicy):
        views = snapshot.non_empty()
        if not views:
            raise EmptySnapshot("no elites to choose from")
        return views[int(rng.integers(len(views)))].cell
    raise ConfigError(f"unknown policy {policy!r}")


# --- scenarios ---------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    policy: Policy
    dims: tuple[DimensionKind, DimensionKind]


def scenario_by_name(name: str, episodes: int) -> Scenario:
    table = {
        "max-symmetry": Scenario("max-symmetry",
                                 MaxDimensionPolicy(DimensionKind.SYMMETRY),
                                 (DimensionKind.SYMMETRY, DimensionKind.SIMILARITY)),
        "max-leniency": Scenario("max-leniency",
                                 MaxDimensionPolicy(DimensionKind.LENIENCY),
                                 (DimensionKind.SYMMETRY, DimensionKind.LENIENCY)),
        "pattern-seeker": Scenario("pattern-seeker", PatternSeekerPolicy(),
                                   (DimensionKind.PATTERNS, DimensionKind.LENIENCY)),
        "random": Scenario("random", RandomPolicy(),
                           (DimensionKind.SYMMETRY, DimensionKind.SIMILARITY)),
        "drift-symmetry-leniency": Scenario(
            "drift-symmetry-leniency",
            DriftingPolicy(DimensionKind.SYMMETRY, DimensionKind.LENIENCY,
                           switch_episode=max(1, episodes // 2 + 1)),
            (DimensionKind.SYMMETRY, DimensionKind.LENIENCY)),
    }
    if name not in table:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(table)}")
    return table[name]


def draft_room(session: Session) -> None:
    """Scripted first draft: wall structure, a treasure nook, and a locked row.

    Mirrors a designer who sketches most of the room by hand before leaning
    on suggestions; every stroke goes through the normal edit path.
    """
    w, h = session.active_room.width, session.active_room.height
    for y in range(0, h):
        if y != h // 2:
            session.edit_room(w // 3, y, TileKind.WALL)
    for y in (1, h - 2):
        session.edit_room(2 * w // 3, y, TileKind.WALL)
    session.edit_room(1, 1, TileKind.TREASURE)
    session.edit_room(2, 1, TileKind.TREASURE)
    session.edit_room(1, h - 2, TileKind.ENEMY)
    session.edit_room(w - 2, h // 2 + 1, TileKind.ENEMY)
    for x in range(1, 3):
        for y in range(1, 2):
            session.toggle_lock(x, y)


# --- experiment runs -----------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    episodes: int = 10
    seed: int = 0
    out_dir: str | Path | None = None
    burst_generations: int = 500
    app: AppConfig = field(default_factory=AppConfig)

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.burst_generations < 1:
            raise ConfigError("burst must be >= 1")


@dataclass
class EpisodeRow:
    episode: int
    test_acc: float
    mean_confidence: float
    mean_w1: float
    favorite_rank: int
    generations: int
    wall_ms: int

    def as_record(self) -> dict:
        return {"episode": self.episode, "testAcc": repr(self.test_acc),
                "meanConfidence": repr(self.mean_confidence),
                "meanW1": repr(self.mean_w1), "favoriteRank": self.favorite_rank,
                "generations": self.generations, "wallMs": self.wall_ms}


@dataclass
class ExperimentReport:
    scenario: str
    seed: int
    rows: list[EpisodeRow]
    stream_digest: str
    session: Session

    def final_test_acc(self) -> float:
        return self.rows[-1].test_acc

    def mean_w1(self) -> float:
        return float(np.mean([r.mean_w1 for r in self.rows]))

    def favorite_in_top_k(self, last_n: int, k: int = 6) -> int:
        return sum(1 for r in self.rows[-last_n:] if r.favorite_rank <= k)

    def csv_bytes(self) -> bytes:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_HEADER, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row.as_record())
        return buf.getvalue().encode("utf-8")

    def liveness(self) -> list[int]:
        """Generations the engine advanced during each training episode."""
        spans = []
        start = None
        for event in self.session.events:
            if event.kind == "APPLY_SUGGESTION":
                start = event.generation
            elif event.kind == "TRAIN_DONE" and start is not None:
                spans.append(event.generation - start)
                start = None
        return spans


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    scenario = scenario_by_name(config.scenario, config.episodes)
    session = default_session(f"sim-{scenario.name}-{config.seed}",
                              seed=config.seed, config=config.app)
    policy_rng = np.random.default_rng([config.seed, 977])

    draft_room(session)
    session.set_dims(scenario.dims)
    session.advance(config.burst_generations)
    session.publish()

    rows: list[EpisodeRow] = []
    for episode in range(1, config.episodes + 1):
        t0 = time.perf_counter()
        gen0 = session.generation
        snapshot = session.panes.snapshot
        target = session.active_room
        selected = synthetic_select(scenario.policy, snapshot, episode,
                                    policy_rng, target)
        # agreement metric: where the pick landed in the model's full ranking
        ranking = rank_top_preference(snapshot, session.engine.model,
                                      k=len(snapshot.non_empty()))
        favorite_rank = 1 + [entry.cell for entry in ranking].index(selected)

        session.apply_suggestion(selected)
        session.advance(config.burst_generations)
        while session.trainer.busy:
            session.tick()
        session.publish()
        status = session.model_status()
        rows.append(EpisodeRow(
            episode=episode,
            test_acc=status["testAcc"],
            mean_confidence=status["meanConfidence"],
            mean_w1=status["meanW1"],
            favorite_rank=favorite_rank,
            generations=session.generation - gen0,
            wall_ms=int((time.perf_counter() - t0) * 1000)))

    report = ExperimentReport(scenario=scenario.name, seed=config.seed, rows=rows,
                              stream_digest=session.stream_digest, session=session)
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_bytes(report.csv_bytes())
        (out / "digest.txt").write_text(report.stream_digest + "\n", encoding="utf-8")
        session.save(out / "session.json")
    return report


def masked_report_bytes(csv_bytes: bytes) -> bytes:
    """report.csv with the wall-clock column blanked, for byte comparisons."""
    lines = csv_bytes.decode("utf-8").splitlines()
    out = [lines[0]]
    for line in lines[1:]:
        cells = line.split(",")
        cells[-1] = "-"
        out.append(",".join(cells))
    return ("\n".join(out) + "\n").encode("utf-8")
