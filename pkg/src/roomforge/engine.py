"""Continuous constrained MAP-Elites over room candidates.

The engine owns a grid of behavior-space cells, each holding a capped
feasible population, a capped infeasible population, and an elite pointer.
Candidates evolve around the designer's current target room: locked tiles are
pinned to the target and door tiles are forced to FLOOR, so every published
suggestion preserves the designer's protected edits.

All outside interaction goes through an ordered command queue applied at
generation boundaries, and through immutable published snapshots. One numpy
RNG stream drives everything, so a fixed seed plus a fixed command script
reproduces the snapshot sequence bit for bit.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .config import AppConfig
from .errors import (DuplicateDimension, EmptySnapshot, NoPopulation,
                     ShapeMismatch)
from .level import Room, TileKind, room_to_dict
from .patterns import DimensionKind, analyze, dimension_value, evaluate_batch
from .preference import CLASS_VALUES, PreferenceNet

DEFAULT_DIMS = (DimensionKind.SYMMETRY, DimensionKind.SIMILARITY)


@dataclass(slots=True, eq=False)
class Individual:
    genotype: np.ndarray                # int8 (h, w), read-only
    feasible: bool
    descriptor: tuple[float, float]
    objective: float
    predicted_pref: float
    confidence: float
    combined: float
    seq: int = -1                       # insertion order, newer is larger

    def feasible_key(self) -> tuple[float, float, int]:
        return (self.combined, self.objective, self.seq)

    def infeasible_key(self) -> tuple[float, int]:
        return (self.objective, self.seq)


class Cell:
    __slots__ = ("feasible_pop", "infeasible_pop", "elite")

    def __init__(self):
        self.feasible_pop: list[Individual] = []
        self.infeasible_pop: list[Individual] = []
        self.elite: Individual | None = None

    def members(self) -> list[Individual]:
        return self.feasible_pop + self.infeasible_pop

    def __len__(self) -> int:
        return len(self.feasible_pop) + len(self.infeasible_pop)


@dataclass(frozen=True)
class PlacementReport:
    cell: tuple[int, int]
    evicted: Individual | None
    became_elite: bool


@dataclass(frozen=True)
class EliteView:
    cell: tuple[int, int]
    room: Room
    combined: float
    objective: float
    predicted_pref: float
    confidence: float
    descriptor: tuple[float, float]
    feasible_count: int
    infeasible_count: int


@dataclass(frozen=True)
class EliteSnapshot:
    generation: int
    dims: tuple[DimensionKind, DimensionKind]
    shape: tuple[int, int]
    cells: tuple[tuple[EliteView | None, ...], ...]

    def elite_at(self, i: int, j: int) -> EliteView | None:
        return self.cells[i][j]

    def non_empty(self) -> list[EliteView]:
        return [v for row in self.cells for v in row if v is not None]


def snapshot_to_dict(snap: EliteSnapshot) -> dict:
    cells = []
    for row in snap.cells:
        out_row = []
        for view in row:
            if view is None:
                out_row.append(None)
            else:
                out_row.append({
                    "room": room_to_dict(view.room),
                    "combined": view.combined,
                    "objective": view.objective,
                    "predictedPref": view.predicted_pref,
                    "confidence": view.confidence,
                    "descriptor": list(view.descriptor),
                    "feasibleCount": view.feasible_count,
                    "infeasibleCount": view.infeasible_count,
                })
        cells.append(out_row)
    return {
        "generation": snap.generation,
        "dims": [d.value for d in snap.dims],
        "shape": list(snap.shape),
        "cells": cells,
    }


def snapshot_digest(snap: EliteSnapshot) -> str:
    payload = json.dumps(snapshot_to_dict(snap), sort_keys=True,
                         separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


# --- commands ----------------------------------------------------------------

@dataclass(frozen=True)
class SetDimensions:
    dims: tuple[DimensionKind, DimensionKind]


@dataclass(frozen=True)
class SetTargetRoom:
    room: Room


@dataclass(frozen=True)
class ApplySuggestion:
    cell: tuple[int, int]


@dataclass(frozen=True)
class SetLocks:
    locks: np.ndarray


@dataclass(frozen=True)
class Pause:
    pass


@dataclass(frozen=True)
class Resume:
    pass


@dataclass(frozen=True)
class SwapModel:
    model: PreferenceNet


EngineCommand = Union[SetDimensions, SetTargetRoom, ApplySuggestion, SetLocks,
                      Pause, Resume, SwapModel]


def cell_index(descriptor: tuple[float, float], granularity: tuple[int, int]
               ) -> tuple[int, int]:
    """Bin a [0,1]^2 descriptor; the upper boundary folds into the last bin."""
    (v1, v2), (rows, cols) = descriptor, granularity
    i = min(max(int(v1 * rows), 0), rows - 1)
    j = min(max(int(v2 * cols), 0), cols - 1)
    return i, j


class EliteGridEngine:
    """One evolving suggestion grid around one target room."""

    def __init__(self, target: Room | None = None, config: AppConfig | None = None,
                 seed: int = 0, dims: tuple[DimensionKind, DimensionKind] = DEFAULT_DIMS,
                 model: PreferenceNet | None = None):
        if dims[0] is dims[1]:
            raise DuplicateDimension(f"behavior dimensions must differ, got {dims}")
        self.config = config or AppConfig()
        self.rng = np.random.default_rng(seed)
        self._model_seed = seed
        self.dims = dims
        self.generation = 0
        self.paused = False
        self._seq = 0
        self._commands: list[EngineCommand] = []
        self.model = model
        self.target: Room | None = target
        self.cells: list[list[Cell]] = []
        self._reset_cells()
        if target is not None:
            self._ensure_model()
            self._refresh_target_masks()
            self._seed_population()

    def _ensure_model(self) -> None:
        if self.model is None:
            self.model = PreferenceNet(
                self.target.width * self.target.height,
                self.config.preference.hidden_sizes,
                rng=np.random.default_rng([self._model_seed, 857]))

    # --- shape helpers -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.config.evolution.grid_rows, self.config.evolution.grid_cols)

    def _reset_cells(self) -> None:
        rows, cols = self.shape
        self.cells = [[Cell() for _ in range(cols)] for _ in range(rows)]

    def _refresh_target_masks(self) -> None:
        self._door_mask = np.zeros(self.target.grid.shape, dtype=bool)
        for x, y in self.target.door_positions:
            self._door_mask[y, x] = True

    def individuals(self) -> Iterator[Individual]:
        """Row-major over cells, feasible members before infeasible."""
        for row in self.cells:
            for cell in row:
                yield from cell.feasible_pop
                yield from cell.infeasible_pop

    # --- command queue ---------------------------------------------------------

    def submit(self, command: EngineCommand) -> None:
        self._commands.append(command)

    def _drain_commands(self) -> None:
        commands, self._commands = self._commands, []
        for command in commands:
            self._apply_command(command)

    def _apply_command(self, command: EngineCommand) -> None:
        if isinstance(command, SetDimensions):
            self.set_dimensions(command.dims)
        elif isinstance(command, SetTargetRoom):
            self.set_target_room(command.room)
        elif isinstance(command, ApplySuggestion):
            view = self.publish().elite_at(*command.cell)
            if view is None:
                raise EmptySnapshot(f"no elite in cell {command.cell}")
            self.set_target_room(view.room)
        elif isinstance(command, SetLocks):
            self.set_target_room(self.target.with_locks(command.locks))
        elif isinstance(command, Pause):
            self.paused = True
        elif isinstance(command, Resume):
            self.paused = False
        elif isinstance(command, SwapModel):
            self.model = command.model
        else:
            raise TypeError(f"unknown engine command {command!r}")

    # --- evaluation -------------------------------------------------------------

    def _evaluate(self, genotypes: list[np.ndarray]) -> list[Individual]:
        if not genotypes:
            return []
        pref_cfg = self.config.preference
        stacked = np.stack(genotypes)
        scores = evaluate_batch(stacked, self.target, self.dims, self.config.fitness)
        probs = self.model.predict_batch(stacked.reshape(len(genotypes), -1)
                                         .astype(np.float64) / 3.0)
        confidences = probs.max(axis=1)
        prefs = probs @ CLASS_VALUES
        w1 = np.minimum(confidences * self.model.last_test_acc, pref_cfg.weight_cap)
        w0 = 1.0 - w1
        if pref_cfg.literal_weighted_sum:
            combined = w0 * scores.objective + w0 * prefs
        else:
            combined = w0 * scores.objective + w1 * prefs
        out: list[Individual] = []
        for k, genotype in enumerate(genotypes):
            frozen = np.ascontiguousarray(genotype, dtype=np.int8)
            frozen.flags.writeable = False
            out.append(Individual(
                genotype=frozen,
                feasible=bool(scores.feasible[k]),
                descriptor=(float(scores.descriptor_1[k]), float(scores.descriptor_2[k])),
                objective=float(scores.objective[k]),
                predicted_pref=float(prefs[k]),
                confidence=float(confidences[k]),
                combined=float(combined[k])))
        return out

    # --- insertion ---------------------------------------------------------------

    def insert(self, ind: Individual) -> PlacementReport:
        if ind.genotype.shape != self.target.grid.shape:
            raise ShapeMismatch("individual shape differs from the target room")
        if ind.seq < 0:
            ind.seq = self._seq
            self._seq += 1
        i, j = cell_index(ind.descriptor, self.shape)
        cell = self.cells[i][j]
        evo = self.config.evolution
        evicted: Individual | None = None
        if ind.feasible:
            cell.feasible_pop.append(ind)
            if len(cell.feasible_pop) > evo.feasible_cap:
                worst = min(cell.feasible_pop, key=Individual.feasible_key)
                cell.feasible_pop.remove(worst)
                evicted = worst
            if evicted is not ind:
                if cell.elite is None or ind.feasible_key() > cell.elite.feasible_key():
                    cell.elite = ind
            if cell.elite is evicted:
                cell.elite = max(cell.feasible_pop, key=Individual.feasible_key,
                                 default=None)
        else:
            cell.infeasible_pop.append(ind)
            if len(cell.infeasible_pop) > evo.infeasible_cap:
                worst = min(cell.infeasible_pop, key=Individual.infeasible_key)
                cell.infeasible_pop.remove(worst)
                evicted = worst
        became_elite = cell.elite is ind
        return PlacementReport(cell=(i, j), evicted=evicted, became_elite=became_elite)

    def _reinsert_all(self, members: list[Individual]) -> None:
        self._reset_cells()
        for ind in members:
            self.insert(ind)

    # --- generations -----------------------------------------------------------

    def _make_child(self, parent_a: np.ndarray, parent_b: np.ndarray) -> np.ndarray:
        evo = self.config.evolution
        shape = parent_a.shape
        take_b = self.rng.random(shape) < evo.crossover_rate
        child = np.where(take_b, parent_b, parent_a).astype(np.int8)
        mutate = self.rng.random(shape) < evo.mutation_rate
        n_mut = int(mutate.sum())
        if n_mut:
            child[mutate] = self.rng.integers(0, 4, size=n_mut, dtype=np.int8)
        return self._conform(child)

    def _conform(self, genotype: np.ndarray) -> np.ndarray:
        """Pin locked tiles to the target and keep FLOOR under doors."""
        locks = self.target.locks
        genotype[locks] = self.target.grid[locks]
        genotype[self._door_mask] = int(TileKind.FLOOR)
        return genotype

    def _mutated_target_copy(self, rate: float) -> np.ndarray:
        child = np.array(self.target.grid, dtype=np.int8)
        mutate = self.rng.random(child.shape) < rate
        n_mut = int(mutate.sum())
        if n_mut:
            child[mutate] = self.rng.integers(0, 4, size=n_mut, dtype=np.int8)
        return self._conform(child)

    def _seed_population(self) -> None:
        evo = self.config.evolution
        genotypes = [self._mutated_target_copy(evo.seed_mutation_rate)
                     for _ in range(evo.seed_count)]
        for ind in self._evaluate(genotypes):
            self.insert(ind)

    def _non_empty_cells(self) -> list[Cell]:
        return [cell for row in self.cells for cell in row if len(cell)]

    def step(self) -> bool:
        """Apply all queued commands, then run one generation unless paused."""
        self._drain_commands()
        if self.paused:
            return False
        self._run_generation()
        return True

    def _run_generation(self) -> None:
        if self.target is None:
            raise NoPopulation("empty grid and no target room to seed from")
        pool = self._non_empty_cells()
        if not pool:
            self._seed_population()
            pool = self._non_empty_cells()
        evo = self.config.evolution
        children: list[np.ndarray] = []
        for _ in range(evo.offspring_per_generation):
            cell = pool[int(self.rng.integers(len(pool)))]
            parents = cell.feasible_pop if cell.feasible_pop else cell.infeasible_pop
            ia, ib = self.rng.integers(len(parents), size=2)
            children.append(self._make_child(parents[int(ia)].genotype,
                                             parents[int(ib)].genotype))
        for ind in self._evaluate(children):
            self.insert(ind)
        self.generation += 1

    # --- designer-driven state changes -------------------------------------------

    def set_dimensions(self, dims: tuple[DimensionKind, DimensionKind]) -> None:
        if dims[0] is dims[1]:
            raise DuplicateDimension(f"behavior dimensions must differ, got {dims}")
        self.dims = dims
        fit_cfg = self.config.fitness
        members = list(self.individuals())
        for ind in members:
            room = Room(self.target.width, self.target.height, ind.genotype,
                        self.target.doors, self.target.locks)
            a = analyze(room, fit_cfg)
            ind.descriptor = (
                dimension_value(room, dims[0], self.target, fit_cfg, a),
                dimension_value(room, dims[1], self.target, fit_cfg, a),
            )
        self._reinsert_all(members)

    def set_target_room(self, room: Room) -> None:
        if self.target is None or room.grid.shape != self.target.grid.shape:
            # incompatible genotypes: restart the search around the new room;
            # the model's input layer is sized by tile count, so it restarts
            # cold as well
            self.target = room
            if self.model is None or self.model.input_size != room.grid.size:
                self.model = None
                self._ensure_model()
            self._refresh_target_masks()
            self._reset_cells()
            self._seed_population()
            return
        self.target = room
        self._refresh_target_masks()
        members = list(self.individuals())
        genotypes = [self._conform(np.array(ind.genotype, dtype=np.int8))
                     for ind in members]
        fresh = self._evaluate(genotypes)
        for ind, new in zip(members, fresh):
            ind.genotype = new.genotype
            ind.feasible = new.feasible
            ind.descriptor = new.descriptor
            ind.objective = new.objective
            ind.predicted_pref = new.predicted_pref
            ind.confidence = new.confidence
            ind.combined = new.combined
        self._reinsert_all(members)

    # --- outputs --------------------------------------------------------------------

    def publish(self) -> EliteSnapshot:
        """Immutable view of the current elites; evolution keeps running."""
        rows = []
        for i, row in enumerate(self.cells):
            out_row: list[EliteView | None] = []
            for j, cell in enumerate(row):
                if cell.elite is None:
                    out_row.append(None)
                else:
                    e = cell.elite
                    room = Room(self.target.width, self.target.height, e.genotype,
                                self.target.doors, self.target.locks)
                    out_row.append(EliteView(
                        cell=(i, j), room=room, combined=e.combined,
                        objective=e.objective, predicted_pref=e.predicted_pref,
                        confidence=e.confidence, descriptor=e.descriptor,
                        feasible_count=len(cell.feasible_pop),
                        infeasible_count=len(cell.infeasible_pop)))
            rows.append(tuple(out_row))
        return EliteSnapshot(generation=self.generation, dims=self.dims,
                             shape=self.shape, cells=tuple(rows))

    def capture_feasible(self) -> list[tuple[int, int, np.ndarray]]:
        """(cell_i, cell_j, genotype) of every feasible individual, elites included."""
        out = []
        for i, row in enumerate(self.cells):
            for j, cell in enumerate(row):
                for ind in cell.feasible_pop:
                    out.append((i, j, ind.genotype))
        return out

    def model_stats(self) -> tuple[float, float]:
        """(mean confidence, mean blend weight) of the current model over elites."""
        elites = [cell.elite for row in self.cells for cell in row
                  if cell.elite is not None]
        if not elites:
            return 0.0, 0.0
        encoded = np.stack([e.genotype.ravel() for e in elites]).astype(np.float64) / 3.0
        probs = self.model.predict_batch(encoded)
        confs = probs.max(axis=1)
        cap = self.config.preference.weight_cap
        w1s = np.minimum(confs * self.model.last_test_acc, cap)
        return float(confs.mean()), float(w1s.mean())

    # --- invariants ----------------------------------------------------------------

    def audit(self) -> list[str]:
        """Full-grid invariant scan; returns human-readable violations."""
        problems: list[str] = []
        evo = self.config.evolution
        fit_cfg = self.config.fitness
        for i, row in enumerate(self.cells):
            for j, cell in enumerate(row):
                if len(cell.feasible_pop) > evo.feasible_cap:
                    problems.append(f"cell {i},{j}: feasible cap exceeded")
                if len(cell.infeasible_pop) > evo.infeasible_cap:
                    problems.append(f"cell {i},{j}: infeasible cap exceeded")
                if cell.elite is not None:
                    if cell.elite not in cell.feasible_pop:
                        problems.append(f"cell {i},{j}: elite not in feasible population")
                    if not cell.elite.feasible:
                        problems.append(f"cell {i},{j}: elite marked infeasible")
                    best = max(cell.feasible_pop, key=Individual.feasible_key)
                    if best is not cell.elite:
                        problems.append(f"cell {i},{j}: elite is not the best member")
                elif cell.feasible_pop:
                    problems.append(f"cell {i},{j}: feasible members but no elite")
                for ind in cell.members():
                    room = Room(self.target.width, self.target.height, ind.genotype,
                                self.target.doors, self.target.locks)
                    a = analyze(room, fit_cfg)
                    descriptor = (
                        dimension_value(room, self.dims[0], self.target, fit_cfg, a),
                        dimension_value(room, self.dims[1], self.target, fit_cfg, a),
                    )
                    if descriptor != ind.descriptor:
                        problems.append(f"cell {i},{j}: stale descriptor")
                    if cell_index(descriptor, self.shape) != (i, j):
                        problems.append(f"cell {i},{j}: descriptor maps elsewhere")
                    if a.feasible != ind.feasible:
                        problems.append(f"cell {i},{j}: stale feasibility")
                    locks = self.target.locks
                    if not np.array_equal(ind.genotype[locks], self.target.grid[locks]):
                        problems.append(f"cell {i},{j}: locked tiles differ from target")
                    if not np.all(ind.genotype[self._door_mask] == int(TileKind.FLOOR)):
                        problems.append(f"cell {i},{j}: non-FLOOR under a door")
        return problems
