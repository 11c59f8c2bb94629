"""Room analysis: feasibility, pattern-based objective, behavior dimensions.

Everything here is a pure function of an immutable Room, so calls are freely
parallelizable. The expensive intermediates (connectivity labels, chamber
mask, walkable degrees) are computed once per room in :func:`analyze` and
shared by the objective and all five dimension metrics.

Conventions: 4-neighborhood connectivity; TREASURE and ENEMY tiles count as
walkable; a "chamber" tile is any walkable tile covered by at least one fully
walkable 3x3 square.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .config import FitnessConfig
from .errors import InfeasibleInput, MissingTarget, ShapeMismatch
from .level import Room, TileKind

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_BOX = np.ones((3, 3), dtype=bool)

# 3D structuring elements whose connectivity never crosses the batch axis,
# so one ndimage call labels/erodes every room of a stacked batch at once
_CROSS3D = np.zeros((3, 3, 3), dtype=bool)
_CROSS3D[1] = _CROSS
_BOX3D = np.zeros((3, 3, 3), dtype=bool)
_BOX3D[1] = _BOX


class SpatialLabel(IntEnum):
    NOT_WALKABLE = -1
    CHAMBER = 0
    CORRIDOR = 1
    CONNECTOR = 2
    NOTHING = 3


class MesoKind(Enum):
    TREASURE_ROOM = "treasure_room"
    GUARD_ROOM = "guard_room"
    AMBUSH = "ambush"
    DEAD_END = "dead_end"


@dataclass(frozen=True)
class MesoPattern:
    kind: MesoKind
    tiles: frozenset[tuple[int, int]]

    def __post_init__(self):
        if not self.tiles:
            raise ValueError("a meso pattern covers at least one tile")


class DimensionKind(Enum):
    SYMMETRY = "symmetry"
    SIMILARITY = "similarity"
    PATTERNS = "patterns"
    LINEARITY = "linearity"
    LENIENCY = "leniency"


@dataclass
class RoomAnalysis:
    """Shared per-room intermediates; see module docstring."""

    walk: np.ndarray            # bool, non-WALL tiles
    comp_labels: np.ndarray     # int component ids, 0 outside walkable
    n_components: int
    degree: np.ndarray          # walkable 4-neighbor count per tile
    chamber: np.ndarray         # bool, tiles covered by a walkable 3x3 square
    spatial: np.ndarray         # SpatialLabel codes per tile
    meso_counts: dict[MesoKind, int]
    feasible: bool
    infeasibility: float

    @property
    def meso_total(self) -> int:
        return sum(self.meso_counts.values())


def _walkable_degree(walk: np.ndarray) -> np.ndarray:
    padded = np.pad(walk, 1, constant_values=False)
    return (padded[:-2, 1:-1].astype(np.int8) + padded[2:, 1:-1]
            + padded[1:-1, :-2] + padded[1:-1, 2:])


def _door_mask(room: Room) -> np.ndarray:
    mask = np.zeros(room.grid.shape, dtype=bool)
    for x, y in room.door_positions:
        mask[y, x] = True
    return mask


def analyze(room: Room, config: FitnessConfig | None = None) -> RoomAnalysis:
    grid = room.grid
    walk = grid != int(TileKind.WALL)
    comp_labels, n_components = ndimage.label(walk, structure=_CROSS)

    degree = _walkable_degree(walk)
    centers = ndimage.binary_erosion(walk, structure=_BOX, border_value=0)
    chamber = ndimage.binary_dilation(centers, structure=_BOX, border_value=0) & walk

    spatial = np.full(grid.shape, int(SpatialLabel.NOT_WALKABLE), dtype=np.int8)
    spatial[walk & (degree == 0)] = int(SpatialLabel.NOTHING)
    spatial[walk & (degree >= 1) & (degree <= 2)] = int(SpatialLabel.CORRIDOR)
    spatial[walk & (degree >= 3)] = int(SpatialLabel.CONNECTOR)
    spatial[chamber] = int(SpatialLabel.CHAMBER)

    door_xy = room.door_positions
    door_labels = {int(comp_labels[y, x]) for x, y in door_xy}
    entity_mask = (grid == int(TileKind.TREASURE)) | (grid == int(TileKind.ENEMY))
    entity_labels = comp_labels[entity_mask]

    # door-pair connectivity share
    if len(door_xy) < 2:
        door_score = 1.0
    else:
        labels = [int(comp_labels[y, x]) for x, y in door_xy]
        per_label: dict[int, int] = {}
        for lab in labels:
            per_label[lab] = per_label.get(lab, 0) + 1
        connected_pairs = sum(k * (k - 1) // 2 for k in per_label.values())
        total_pairs = len(labels) * (len(labels) - 1) // 2
        door_score = connected_pairs / total_pairs

    # share of entities reachable from some door
    n_entities = int(entity_mask.sum())
    if n_entities == 0:
        entity_score = 1.0
    else:
        door_label_arr = np.array(sorted(door_labels))
        reachable = int(np.isin(entity_labels, door_label_arr).sum())
        entity_score = reachable / n_entities

    feasible = (len(door_labels) == 1
                and bool(np.all(np.isin(entity_labels, np.array(sorted(door_labels))))))
    infeasibility = 0.5 * door_score + 0.5 * entity_score

    meso_counts = _meso_counts(room, chamber, spatial, degree)
    return RoomAnalysis(walk=walk, comp_labels=comp_labels, n_components=n_components,
                        degree=degree, chamber=chamber, spatial=spatial,
                        meso_counts=meso_counts, feasible=feasible,
                        infeasibility=infeasibility)


def _meso_counts(room: Room, chamber: np.ndarray, spatial: np.ndarray,
                 degree: np.ndarray) -> dict[MesoKind, int]:
    """Pattern tallies without materializing tile sets (engine hot path)."""
    grid = room.grid
    region_labels, n_regions = ndimage.label(chamber, structure=_CROSS)
    treasure = grid == int(TileKind.TREASURE)
    enemy = grid == int(TileKind.ENEMY)
    t_per_region = np.bincount(region_labels[treasure], minlength=n_regions + 1)
    e_per_region = np.bincount(region_labels[enemy], minlength=n_regions + 1)
    t_counts = t_per_region[1:]
    e_counts = e_per_region[1:]

    door_mask = _door_mask(room)
    near_door_cheb = ndimage.binary_dilation(door_mask, structure=_BOX, border_value=0)
    near_door_4 = ndimage.binary_dilation(door_mask, structure=_CROSS, border_value=0)
    dead = (spatial == int(SpatialLabel.CORRIDOR)) & (degree == 1) & ~near_door_4

    return {
        MesoKind.TREASURE_ROOM: int((t_counts >= 2).sum()),
        MesoKind.GUARD_ROOM: int(((t_counts >= 1) & (e_counts >= 1)).sum()),
        MesoKind.AMBUSH: int((enemy & near_door_cheb).sum()),
        MesoKind.DEAD_END: int(dead.sum()),
    }


# --- public operations ------------------------------------------------------

def walkable_components(room: Room) -> list[set[tuple[int, int]]]:
    """Maximal 4-connected components of non-WALL tiles, as (x, y) sets."""
    a = analyze(room)
    comps = []
    for label in range(1, a.n_components + 1):
        comps.append({(int(x), int(y)) for y, x in np.argwhere(a.comp_labels == label)})
    return comps


def is_feasible(room: Room) -> bool:
    """True iff all doors share one walkable component that also holds every entity."""
    return analyze(room).feasible


def infeasibility_fitness(room: Room) -> float:
    """Gradient toward feasibility in [0, 1]; equals 1.0 iff the room is feasible."""
    return analyze(room).infeasibility


def spatial_patterns(room: Room) -> np.ndarray:
    """Per-tile SpatialLabel codes (NOT_WALKABLE on walls)."""
    return analyze(room).spatial


def meso_patterns(room: Room) -> list[MesoPattern]:
    """Detailed pattern list with tile sets (slower than the counts in analyze)."""
    grid = room.grid
    a = analyze(room)
    out: list[MesoPattern] = []

    region_labels, n_regions = ndimage.label(a.chamber, structure=_CROSS)
    treasure = grid == int(TileKind.TREASURE)
    enemy = grid == int(TileKind.ENEMY)
    for region in range(1, n_regions + 1):
        mask = region_labels == region
        tiles = frozenset((int(x), int(y)) for y, x in np.argwhere(mask))
        n_t = int((mask & treasure).sum())
        n_e = int((mask & enemy).sum())
        if n_t >= 2:
            out.append(MesoPattern(MesoKind.TREASURE_ROOM, tiles))
        if n_t >= 1 and n_e >= 1:
            out.append(MesoPattern(MesoKind.GUARD_ROOM, tiles))

    door_mask = _door_mask(room)
    near_door_cheb = ndimage.binary_dilation(door_mask, structure=_BOX, border_value=0)
    for y, x in np.argwhere(enemy & near_door_cheb):
        out.append(MesoPattern(MesoKind.AMBUSH, frozenset({(int(x), int(y))})))

    near_door_4 = ndimage.binary_dilation(door_mask, structure=_CROSS, border_value=0)
    dead = (a.spatial == int(SpatialLabel.CORRIDOR)) & (a.degree == 1) & ~near_door_4
    for y, x in np.argwhere(dead):
        out.append(MesoPattern(MesoKind.DEAD_END, frozenset({(int(x), int(y))})))
    return out


def objective_fitness(room: Room, config: FitnessConfig | None = None,
                      analysis: RoomAnalysis | None = None) -> float:
    """Pattern-presence score in [0, 1] for feasible rooms."""
    cfg = config or FitnessConfig()
    a = analysis if analysis is not None else analyze(room, cfg)
    if not a.feasible:
        raise InfeasibleInput("objective fitness is defined for feasible rooms only")
    walkable_tiles = int(a.walk.sum())
    chamber_ratio = int(a.chamber.sum()) / walkable_tiles
    spatial_score = 1.0 - abs(cfg.chamber_ratio_target - chamber_ratio)
    raw = (a.meso_counts[MesoKind.TREASURE_ROOM] + a.meso_counts[MesoKind.GUARD_ROOM]
           - cfg.dead_end_penalty * a.meso_counts[MesoKind.DEAD_END]) / cfg.meso_norm
    meso_score = min(1.0, max(0.0, raw))
    return 0.5 * spatial_score + 0.5 * meso_score


@lru_cache(maxsize=16)
def _enemy_cap(width: int, height: int, frac: float) -> int:
    return math.ceil(frac * width * height)


def dimension_value(room: Room, kind: DimensionKind, target: Room | None = None,
                    config: FitnessConfig | None = None,
                    analysis: RoomAnalysis | None = None) -> float:
    """One behavior-dimension metric in [0, 1]."""
    cfg = config or FitnessConfig()
    if kind is DimensionKind.SYMMETRY:
        mask = room.grid == int(TileKind.WALL)
        scores = (float(np.mean(mask == mask[:, ::-1])),
                  float(np.mean(mask == mask[::-1, :])),
                  float(np.mean(mask == mask[::-1, ::-1])))
        return max(scores)
    if kind is DimensionKind.SIMILARITY:
        if target is None:
            raise MissingTarget("similarity needs a reference room")
        if target.grid.shape != room.grid.shape:
            raise ShapeMismatch("similarity reference has a different shape")
        return 1.0 - float(np.mean(room.grid != target.grid))
    if kind is DimensionKind.LENIENCY:
        enemies = int((room.grid == int(TileKind.ENEMY)).sum())
        cap = _enemy_cap(room.width, room.height, cfg.leniency_enemy_frac)
        return 1.0 - min(1.0, enemies / cap)
    a = analysis if analysis is not None else analyze(room, cfg)
    if kind is DimensionKind.PATTERNS:
        return min(1.0, a.meso_total / cfg.patterns_cap)
    if kind is DimensionKind.LINEARITY:
        connectors = int((a.spatial == int(SpatialLabel.CONNECTOR)).sum())
        return 1.0 - connectors / int(a.walk.sum())
    raise ValueError(f"unknown dimension {kind!r}")


# --- batched evaluation (engine hot path) -------------------------------------

@dataclass
class BatchEvaluation:
    """Per-room results for a stacked batch of candidate grids."""

    feasible: np.ndarray        # (B,) bool
    objective: np.ndarray       # (B,) objective fitness or infeasibility score
    descriptor_1: np.ndarray    # (B,) first dimension values
    descriptor_2: np.ndarray    # (B,) second dimension values


def evaluate_batch(grids: np.ndarray, target: Room,
                   dims: tuple[DimensionKind, DimensionKind],
                   config: FitnessConfig | None = None) -> BatchEvaluation:
    """Vectorized twin of the per-room path for candidates sharing the target's
    doors. Produces bit-identical numbers to analyze()/objective_fitness()/
    dimension_value(): every score is derived from integer tile counts through
    the same float expressions.
    """
    cfg = config or FitnessConfig()
    grids = np.asarray(grids)
    n_batch, height, width = grids.shape
    walk = grids != int(TileKind.WALL)

    comp, _ = ndimage.label(walk, structure=_CROSS3D)
    padded = np.pad(walk, ((0, 0), (1, 1), (1, 1)), constant_values=False)
    degree = (padded[:, :-2, 1:-1].astype(np.int8) + padded[:, 2:, 1:-1]
              + padded[:, 1:-1, :-2] + padded[:, 1:-1, 2:])
    centers = ndimage.binary_erosion(walk, structure=_BOX3D, border_value=0)
    chamber = ndimage.binary_dilation(centers, structure=_BOX3D, border_value=0) & walk
    corridor = walk & (degree >= 1) & (degree <= 2) & ~chamber
    connector = walk & (degree >= 3) & ~chamber

    door_xy = target.door_positions
    n_doors = len(door_xy)
    door_labels = np.stack([comp[:, y, x] for x, y in door_xy], axis=1)

    if n_doors < 2:
        door_score = np.ones(n_batch)
    else:
        connected_pairs = np.zeros(n_batch, dtype=np.int64)
        for a in range(n_doors):
            for b in range(a + 1, n_doors):
                connected_pairs += door_labels[:, a] == door_labels[:, b]
        door_score = connected_pairs / (n_doors * (n_doors - 1) // 2)

    treasure = grids == int(TileKind.TREASURE)
    enemy = grids == int(TileKind.ENEMY)
    entity = treasure | enemy
    reach = np.zeros_like(walk)
    for d in range(n_doors):
        reach |= comp == door_labels[:, d][:, None, None]
    n_entities = entity.reshape(n_batch, -1).sum(axis=1)
    n_reachable = (entity & reach).reshape(n_batch, -1).sum(axis=1)
    entity_score = np.where(n_entities == 0, 1.0,
                            n_reachable / np.maximum(n_entities, 1))
    doors_joined = (door_labels == door_labels[:, :1]).all(axis=1)
    feasible = doors_joined & (n_reachable == n_entities)
    infeasibility = 0.5 * door_score + 0.5 * entity_score

    # meso tallies: chamber regions are labeled globally but never span rooms
    region, n_regions = ndimage.label(chamber, structure=_CROSS3D)
    t_counts = np.bincount(region[treasure], minlength=n_regions + 1)[1:]
    e_counts = np.bincount(region[enemy], minlength=n_regions + 1)[1:]
    room_of_region = np.zeros(n_regions + 1, dtype=np.int64)
    nz = region.nonzero()
    room_of_region[region[nz]] = nz[0]
    treasure_rooms = np.bincount(room_of_region[np.flatnonzero(t_counts >= 2) + 1],
                                 minlength=n_batch)
    guard_rooms = np.bincount(
        room_of_region[np.flatnonzero((t_counts >= 1) & (e_counts >= 1)) + 1],
        minlength=n_batch)

    door_mask = _door_mask(target)
    near_door_cheb = ndimage.binary_dilation(door_mask, structure=_BOX, border_value=0)
    near_door_4 = ndimage.binary_dilation(door_mask, structure=_CROSS, border_value=0)
    ambushes = (enemy & near_door_cheb[None]).reshape(n_batch, -1).sum(axis=1)
    dead_ends = (corridor & (degree == 1) & ~near_door_4[None]
                 ).reshape(n_batch, -1).sum(axis=1)
    meso_total = treasure_rooms + guard_rooms + ambushes + dead_ends

    walkable_n = walk.reshape(n_batch, -1).sum(axis=1)
    chamber_n = chamber.reshape(n_batch, -1).sum(axis=1)
    spatial_score = 1.0 - np.abs(cfg.chamber_ratio_target - chamber_n / walkable_n)
    raw = (treasure_rooms + guard_rooms
           - cfg.dead_end_penalty * dead_ends) / cfg.meso_norm
    meso_score = np.clip(raw, 0.0, 1.0)
    objective = np.where(feasible, 0.5 * spatial_score + 0.5 * meso_score,
                         infeasibility)

    def dim_values(kind: DimensionKind) -> np.ndarray:
        if kind is DimensionKind.SYMMETRY:
            mask = grids == int(TileKind.WALL)
            s1 = (mask == mask[:, :, ::-1]).reshape(n_batch, -1).mean(axis=1)
            s2 = (mask == mask[:, ::-1, :]).reshape(n_batch, -1).mean(axis=1)
            s3 = (mask == mask[:, ::-1, ::-1]).reshape(n_batch, -1).mean(axis=1)
            return np.maximum(np.maximum(s1, s2), s3)
        if kind is DimensionKind.SIMILARITY:
            return 1.0 - (grids != target.grid[None]).reshape(n_batch, -1).mean(axis=1)
        if kind is DimensionKind.PATTERNS:
            return np.minimum(1.0, meso_total / cfg.patterns_cap)
        if kind is DimensionKind.LINEARITY:
            connectors_n = connector.reshape(n_batch, -1).sum(axis=1)
            return 1.0 - connectors_n / walkable_n
        if kind is DimensionKind.LENIENCY:
            enemies_n = enemy.reshape(n_batch, -1).sum(axis=1)
            cap = _enemy_cap(width, height, cfg.leniency_enemy_frac)
            return 1.0 - np.minimum(1.0, enemies_n / cap)
        raise ValueError(f"unknown dimension {kind!r}")

    return BatchEvaluation(feasible=feasible, objective=objective,
                           descriptor_1=dim_values(dims[0]),
                           descriptor_2=dim_values(dims[1]))
