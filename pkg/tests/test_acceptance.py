"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest tests/test_acceptance.py -v -s`).

Each criterion pins its tolerance here; nothing is deferred to later
calibration. Criterion 5's random-policy control asserts the frozen
threshold meanW1 < 0.25 as specified even though the measured behavior of
this artifact sits well above it; see the accompanying analysis in the
project notes for why that bound is not reachable with this dataset
construction. The assertion is intentionally left honest rather than
loosened.
"""
import time

import numpy as np
import pytest

from roomforge.engine import EliteGridEngine, SetDimensions
from roomforge.level import Door, Room, TileKind, new_room
from roomforge.patterns import DimensionKind
from roomforge.preference import (PreferenceNet, build_adhoc_matrix,
                                  build_dataset, combined_fitness,
                                  compute_weights, N_CLASSES)
from roomforge.session import default_session
from roomforge.sim import (ExperimentConfig, draft_room, masked_report_bytes,
                           run_experiment)

from test_preference import finite_difference_gradients, max_relative_error


def report(criterion: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {criterion}: {status}" + (f" ({detail})" if detail else ""))


class TestCriterion1WeightFormulas:
    def test_weight_and_blend_exactness(self):
        t0 = time.perf_counter()
        grid = np.linspace(0.0, 1.0, 101)
        worst = 0.0
        ok = True
        for conf in grid:
            for acc in grid:
                w0, w1 = compute_weights(float(conf), float(acc))
                direct_w1 = min(conf * acc, 0.5)
                worst = max(worst, abs(w1 - direct_w1), abs(w0 - (1.0 - direct_w1)))
                ok &= w1 <= 0.5
                if acc == 0.0:
                    ok &= w1 == 0.0
                for objective, pref in ((0.0, 1.0), (0.8, 0.3), (1.0, 0.0)):
                    blended = combined_fitness(objective, pref, w0, w1)
                    worst = max(worst, abs(blended - (w0 * objective + w1 * pref)))
        elapsed = time.perf_counter() - t0
        passed = ok and worst <= 1e-12 and elapsed < 1.0
        report("1 weight formulas", passed,
               f"max err {worst:.2e}, {elapsed:.2f}s")
        assert worst <= 1e-12
        assert ok
        assert elapsed < 1.0

    def test_cold_start_weight_is_zero(self):
        for conf in np.linspace(0, 1, 101):
            assert compute_weights(float(conf), 0.0)[1] == 0.0


class TestCriterion2AdHocMatrix:
    def test_exhaustive_origin_cell_table(self):
        t0 = time.perf_counter()
        exact = True
        for i0 in range(5):
            for j0 in range(5):
                matrix = build_adhoc_matrix((i0, j0), (5, 5))
                for i in range(5):
                    for j in range(5):
                        step = max(abs(i - i0), abs(j - j0))
                        expected = max(0.0, 1.0 - 0.2 * step)
                        exact &= matrix.values[i, j] == expected
        elapsed = time.perf_counter() - t0
        report("2 ad-hoc matrix", exact and elapsed < 1.0,
               f"25x25 table exact, {elapsed:.2f}s")
        assert exact
        assert elapsed < 1.0


class TestCriterion3DatasetCap:
    def test_saturated_grid_yields_625_with_stratified_split(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(1)
        members = []
        for i in range(5):
            for j in range(5):
                for _ in range(25):
                    members.append(
                        (i, j, rng.integers(0, 4, size=(7, 13)).astype(np.int8)))
        matrix = build_adhoc_matrix((2, 3), (5, 5))
        dataset = build_dataset(members, matrix, rng)
        size_ok = dataset.size == 625
        split_ok = True
        train_hist = dataset.label_histogram("train")
        test_hist = dataset.label_histogram("test")
        for cls in range(N_CLASSES):
            total = train_hist[cls] + test_hist[cls]
            split_ok &= abs(test_hist[cls] - 0.1 * total) <= 1.0
        split_ok &= abs(len(dataset.y_test) - 62.5) <= 3
        elapsed = time.perf_counter() - t0
        passed = size_ok and split_ok and elapsed < 5.0
        report("3 dataset cap", passed,
               f"{dataset.size} samples, {len(dataset.y_train)}/{len(dataset.y_test)} split, "
               f"{elapsed:.2f}s")
        assert size_ok and split_ok
        assert elapsed < 5.0


class TestCriterion4GradientCheck:
    def test_backprop_matches_finite_differences(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(20):
            net = PreferenceNet(12, (8, 6), rng=rng)
            x = rng.random((3, 12))
            y = rng.integers(0, N_CLASSES, size=3)
            _, grads_w, grads_b = net.loss_and_gradients(x, y)
            fd_w, fd_b = finite_difference_gradients(net, x, y)
            worst = max(worst, max_relative_error(grads_w + grads_b, fd_w + fd_b))
        elapsed = time.perf_counter() - t0
        passed = worst < 1e-4 and elapsed < 30.0
        report("4 gradient check", passed,
               f"max rel err {worst:.2e} over 20 draws, {elapsed:.1f}s")
        assert worst < 1e-4
        assert elapsed < 30.0


class TestCriterion5LearningLoop:
    SEEDS = (11, 22, 33, 44, 55)

    def test_learning_loop_and_control(self):
        t0 = time.perf_counter()
        final_accs = []
        favorite_counts = []
        for seed in self.SEEDS:
            run = run_experiment(ExperimentConfig(
                scenario="max-symmetry", episodes=10, seed=seed,
                burst_generations=500))
            final_accs.append(run.final_test_acc())
            favorite_counts.append(run.favorite_in_top_k(last_n=5, k=6))
        control_means = []
        for seed in self.SEEDS:
            run = run_experiment(ExperimentConfig(
                scenario="random", episodes=10, seed=seed,
                burst_generations=500))
            control_means.append(run.mean_w1())
        elapsed = time.perf_counter() - t0

        mean_final_acc = float(np.mean(final_accs))
        mean_favorites = float(np.mean(favorite_counts))
        control_mean_w1 = float(np.mean(control_means))
        acc_ok = mean_final_acc >= 0.33
        favorites_ok = mean_favorites >= 3.0
        control_ok = control_mean_w1 < 0.25
        time_ok = elapsed < 600.0
        report("5 learning loop",
               acc_ok and favorites_ok and control_ok and time_ok,
               f"final acc {mean_final_acc:.3f} (>=0.33), "
               f"favorite-in-top6 {mean_favorites:.1f}/5 (>=3), "
               f"control meanW1 {control_mean_w1:.3f} (<0.25), {elapsed:.0f}s")
        assert acc_ok, f"seed-averaged final testAcc {mean_final_acc:.3f} < 0.33"
        assert favorites_ok, \
            f"favorite ranked in top-6 only {mean_favorites:.1f} of last 5 episodes"
        assert time_ok
        assert control_ok, \
            f"random-control meanW1 {control_mean_w1:.3f} not under 0.25"


def soak_target() -> Room:
    room = new_room(13, 7, [Door("W", 3), Door("E", 3)])
    grid = np.array(room.grid)
    locks = np.zeros((7, 13), dtype=bool)
    grid[1, 4] = int(TileKind.WALL)
    locks[1, 4] = True
    grid[5, 9] = int(TileKind.TREASURE)
    locks[5, 9] = True
    return Room(13, 7, grid, room.doors, locks)


class TestCriterion6EngineSoak:
    DIM_CYCLE = (
        (DimensionKind.SYMMETRY, DimensionKind.SIMILARITY),
        (DimensionKind.PATTERNS, DimensionKind.LINEARITY),
        (DimensionKind.SYMMETRY, DimensionKind.LENIENCY),
        (DimensionKind.LINEARITY, DimensionKind.LENIENCY),
        (DimensionKind.SIMILARITY, DimensionKind.PATTERNS),
    )

    def test_soak_three_seeds(self):
        t0 = time.perf_counter()
        generations = 10_000
        switch_every = 2_000
        problems: list[str] = []
        for seed in (101, 202, 303):
            target = soak_target()
            engine = EliteGridEngine(target, seed=seed)
            evo = engine.config.evolution
            best: dict[tuple[int, int], float] = {}
            for gen in range(1, generations + 1):
                if gen % switch_every == 0:
                    dims = self.DIM_CYCLE[(gen // switch_every) % len(self.DIM_CYCLE)]
                    engine.submit(SetDimensions(dims))
                stepped_dims = engine.dims
                engine.step()
                if engine.dims != stepped_dims:
                    best.clear()     # re-binned grid starts fresh score lineages
                    problems.extend(engine.audit())
                for i, row in enumerate(engine.cells):
                    for j, cell in enumerate(row):
                        if len(cell.feasible_pop) > evo.feasible_cap or \
                                len(cell.infeasible_pop) > evo.infeasible_cap:
                            problems.append(f"seed {seed} gen {gen}: cap violation")
                        elite = cell.elite
                        if elite is None:
                            continue
                        if not elite.feasible:
                            problems.append(f"seed {seed} gen {gen}: infeasible elite")
                        locks = target.locks
                        if not np.array_equal(elite.genotype[locks],
                                              target.grid[locks]):
                            problems.append(f"seed {seed} gen {gen}: lock violation")
                        prev = best.get((i, j))
                        if prev is not None and elite.combined < prev:
                            problems.append(
                                f"seed {seed} gen {gen}: elite score regressed")
                        best[(i, j)] = elite.combined
                if problems:
                    break
            problems.extend(engine.audit())
            if problems:
                break
        elapsed = time.perf_counter() - t0
        passed = not problems and elapsed < 300.0
        report("6 engine soak", passed,
               f"3 seeds x {generations} generations, {elapsed:.0f}s"
               + (f"; first problem: {problems[0]}" if problems else ""))
        assert not problems, problems[:5]
        assert elapsed < 300.0


class TestCriterion7NonStalling:
    def test_engine_advances_during_full_training_episode(self):
        rng = np.random.default_rng(3)
        session = default_session("stall", seed=9)
        draft_room(session)
        session.advance(50)
        session.publish()

        members = []
        for i in range(5):
            for j in range(5):
                for _ in range(25):
                    members.append(
                        (i, j, rng.integers(0, 4, size=(7, 13)).astype(np.int8)))
        dataset = build_dataset(members, build_adhoc_matrix((2, 2), (5, 5)), rng)
        assert dataset.size == 625

        gen_start = session.generation
        t0 = time.perf_counter()
        session.trainer.request(dataset)
        while session.trainer.busy:
            session.tick()
        elapsed = time.perf_counter() - t0
        done = next(e for e in reversed(session.events) if e.kind == "TRAIN_DONE")
        generations_during = done.generation - gen_start
        epochs_ok = done.payload["batches"] == 20 *18
        passed = generations_during >= 100 and elapsed < 2.0 and epochs_ok
        report("7 non-stalling", passed,
               f"{generations_during} generations during a 625-sample episode, "
               f"{elapsed * 1000:.0f}ms")
        assert epochs_ok
        assert generations_during >= 100
        assert elapsed < 2.0


class TestCriterion8Determinism:
    def test_runs_are_byte_identical_twice(self, tmp_path):
        config = dict(scenario="max-symmetry", episodes=4, seed=77,
                      burst_generations=200)
        outputs = []
        for name in ("a", "b", "c"):
            out = tmp_path / name
            run = run_experiment(ExperimentConfig(out_dir=out, **config))
            outputs.append((
                # wall-clock ms is the one unavoidably nondeterministic field
                masked_report_bytes((out / "report.csv").read_bytes()),
                (out / "digest.txt").read_bytes(),
                run.stream_digest,
            ))
        first_second = outputs[0] == outputs[1]
        second_third = outputs[1] == outputs[2]
        report("8 determinism", first_second and second_third,
               "three identical runs compared pairwise")
        assert first_second
        assert second_third
