"""Designer preference learning.

A small fully connected network maps an encoded room to a probability
distribution over six discrete preference values (0.0 to 1.0 in 0.2 steps).
Each time the designer applies a suggestion, the whole feasible population is
labeled by grid distance from the applied cell, split 90/10 stratified, and
the network is trained for a fixed number of epochs. Prediction confidence
times held-out accuracy (capped at 0.5) decides how much say the model gets
in the blended fitness of new individuals.

The network is plain numpy on purpose: deterministic, dependency-free, and
small enough that a full training episode takes well under a second.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .config import PreferenceConfig
from .errors import (DomainError, EmptyDataset, EmptyGrid, OutOfRange,
                     ShapeMismatch, VersionMismatch)

N_CLASSES = 6
CLASS_VALUES = np.array([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
CHECKPOINT_VERSION = 1

_ENCODE_SCALE = 1.0 / 3.0


def encode_room(grid: np.ndarray, input_size: int | None = None) -> np.ndarray:
    """Row-major tile encoding: FLOOR 0, WALL 1/3, TREASURE 2/3, ENEMY 1."""
    flat = np.asarray(grid, dtype=np.float64).ravel() * _ENCODE_SCALE
    if input_size is not None and flat.size != input_size:
        raise ShapeMismatch(f"room has {flat.size} tiles, model expects {input_size}")
    return flat


def class_index_for_value(value: float) -> int:
    """Nearest discrete preference class for a label value."""
    return int(np.argmin(np.abs(CLASS_VALUES - value)))


# --- ad-hoc label matrix ----------------------------------------------------

@dataclass(frozen=True)
class AdHocMatrix:
    origin: tuple[int, int]
    values: np.ndarray          # (rows, cols), floored at 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


def build_adhoc_matrix(selected: tuple[int, int], shape: tuple[int, int],
                       step: float = 0.2, metric: str = "chebyshev") -> AdHocMatrix:
    """Preference labels radiating out from the applied suggestion's cell.

    The applied cell gets 1.0 and every grid step away costs ``step``,
    floored at 0.0. A step is one cell in any of the 8 directions by default
    ("chebyshev"); "manhattan" counts diagonals as two steps.
    """
    rows, cols = shape
    i0, j0 = selected
    if not (0 <= i0 < rows and 0 <= j0 < cols):
        raise OutOfRange(f"selected cell {selected} outside {shape} grid")
    ii, jj = np.indices((rows, cols))
    di = np.abs(ii - i0)
    dj = np.abs(jj - j0)
    if metric == "chebyshev":
        dist = np.maximum(di, dj)
    elif metric == "manhattan":
        dist = di + dj
    else:
        raise ValueError(f"unknown step metric {metric!r}")
    values = np.maximum(0.0, 1.0 - step * dist)
    values.flags.writeable = False
    return AdHocMatrix(origin=(i0, j0), values=values)


# --- labeled datasets --------------------------------------------------------

@dataclass
class PreferenceDataset:
    x_train: np.ndarray         # (n_train, input)
    y_train: np.ndarray         # (n_train,) class indices
    x_test: np.ndarray
    y_test: np.ndarray

    @property
    def size(self) -> int:
        return len(self.y_train) + len(self.y_test)

    def label_histogram(self, split: str = "train") -> np.ndarray:
        y = self.y_train if split == "train" else self.y_test
        return np.bincount(y, minlength=N_CLASSES)


def build_dataset(members: list[tuple[int, int, np.ndarray]], matrix: AdHocMatrix,
                  rng: np.random.Generator, test_fraction: float = 0.1) -> PreferenceDataset:
    """Label every feasible individual by its cell's matrix value and split.

    ``members`` holds (cell_i, cell_j, genotype) for each feasible individual,
    elites included. The split is stratified: per class, round(n * fraction)
    samples go to test, so both splits keep the same label distribution.
    """
    if not members:
        raise EmptyGrid("no feasible individuals to learn from")
    xs = np.stack([encode_room(g) for _, _, g in members])
    ys = np.array([class_index_for_value(float(matrix.values[i, j]))
                   for i, j, _ in members], dtype=np.int64)
    order = rng.permutation(len(ys))
    xs, ys = xs[order], ys[order]

    test_idx: list[int] = []
    train_idx: list[int] = []
    for cls in range(N_CLASSES):
        idx = np.flatnonzero(ys == cls)
        n_test = int(len(idx) * test_fraction + 0.5)
        test_idx.extend(idx[:n_test])
        train_idx.extend(idx[n_test:])
    train_idx = np.sort(np.array(train_idx, dtype=np.int64))
    test_idx = np.sort(np.array(test_idx, dtype=np.int64))
    return PreferenceDataset(x_train=xs[train_idx], y_train=ys[train_idx],
                             x_test=xs[test_idx], y_test=ys[test_idx])


# --- the network -------------------------------------------------------------

class PreferenceNet:
    """Feed-forward rectifier network with a softmax head over the 6 classes.

    Weights persist across training episodes; each episode fine-tunes them on
    the newest dataset only. A freshly created net reports zero test accuracy,
    which zeroes its blend weight (cold start).
    """

    def __init__(self, input_size: int, hidden_sizes: tuple[int, ...] = (100, 50),
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.sizes = (int(input_size), *map(int, hidden_sizes), N_CLASSES)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            limit = np.sqrt(1.0 / fan_in)
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            # slightly positive so rectifiers start active; an exactly-zero
            # pre-activation (e.g. from an all-FLOOR input) sits on the kink
            self.biases.append(np.full(fan_out, 0.01))
        self.last_test_acc = 0.0
        self.episodes_trained = 0

    @property
    def input_size(self) -> int:
        return self.sizes[0]

    def copy(self) -> "PreferenceNet":
        dup = PreferenceNet.__new__(PreferenceNet)
        dup.sizes = self.sizes
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        dup.last_test_acc = self.last_test_acc
        dup.episodes_trained = self.episodes_trained
        return dup

    def _forward_cached(self, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        pre: list[np.ndarray] = []
        act: list[np.ndarray] = [x]
        out = x
        last = len(self.weights) - 1
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = out @ w + b
            pre.append(z)
            out = _softmax(z) if layer == last else np.maximum(z, 0.0)
            act.append(out)
        return pre, act

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities, shape (batch, 6); rows sum to 1."""
        return self._forward_cached(np.atleast_2d(x))[1][-1]

    def predict(self, encoded: np.ndarray) -> np.ndarray:
        """Probability vector for one encoded room."""
        encoded = np.asarray(encoded, dtype=np.float64).ravel()
        if encoded.size != self.input_size:
            raise ShapeMismatch(f"input has {encoded.size} values, expected {self.input_size}")
        return self.forward(encoded[None, :])[0]

    def predict_batch(self, encoded: np.ndarray) -> np.ndarray:
        encoded = np.atleast_2d(encoded)
        if encoded.shape[1] != self.input_size:
            raise ShapeMismatch(f"input has {encoded.shape[1]} values, expected {self.input_size}")
        return self.forward(encoded)

    def loss_and_gradients(self, x: np.ndarray, y: np.ndarray
                           ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Mean cross-entropy and its gradients for a batch of class indices."""
        x = np.atleast_2d(x)
        batch = x.shape[0]
        pre, act = self._forward_cached(x)
        probs = act[-1]
        loss = float(-np.mean(np.log(probs[np.arange(batch), y] + 1e-300)))

        grad = probs.copy()
        grad[np.arange(batch), y] -= 1.0
        grad /= batch
        grads_w: list[np.ndarray] = [np.empty(0)] * len(self.weights)
        grads_b: list[np.ndarray] = [np.empty(0)] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = act[layer].T @ grad
            grads_b[layer] = grad.sum(axis=0)
            if layer > 0:
                grad = (grad @ self.weights[layer].T) * (pre[layer - 1] > 0.0)
        return loss, grads_w, grads_b

    def sgd_step(self, x: np.ndarray, y: np.ndarray, lr: float) -> float:
        loss, grads_w, grads_b = self.loss_and_gradients(x, y)
        for w, gw in zip(self.weights, grads_w):
            w -= lr * gw
        for b, gb in zip(self.biases, grads_b):
            b -= lr * gb
        return loss

    def test_accuracy(self, x: np.ndarray, y: np.ndarray) -> float:
        if len(y) == 0:
            return 0.0
        pred = np.argmax(self.forward(x), axis=1)
        return float(np.mean(pred == y))

    # checkpointing: exact float64 round-trip, predictions are bit-identical
    def save_bytes(self) -> bytes:
        buf = io.BytesIO()
        arrays = {"version": np.array([CHECKPOINT_VERSION]),
                  "sizes": np.array(self.sizes),
                  "last_test_acc": np.array([self.last_test_acc]),
                  "episodes_trained": np.array([self.episodes_trained])}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"w{i}"] = w
            arrays[f"b{i}"] = b
        np.savez(buf, **arrays)
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.save_bytes())

    @classmethod
    def load_bytes(cls, blob: bytes) -> "PreferenceNet":
        with np.load(io.BytesIO(blob)) as data:
            version = int(data["version"][0])
            if version != CHECKPOINT_VERSION:
                raise VersionMismatch(f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
            sizes = tuple(int(s) for s in data["sizes"])
            net = cls.__new__(cls)
            net.sizes = sizes
            net.weights = [data[f"w{i}"].astype(np.float64) for i in range(len(sizes) - 1)]
            net.biases = [data[f"b{i}"].astype(np.float64) for i in range(len(sizes) - 1)]
            net.last_test_acc = float(data["last_test_acc"][0])
            net.episodes_trained = int(data["episodes_trained"][0])
        return net

    @classmethod
    def load(cls, path) -> "PreferenceNet":
        with open(path, "rb") as fh:
            return cls.load_bytes(fh.read())


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


# --- scoring ------------------------------------------------------------------

def confidence(probs: np.ndarray) -> float:
    """Largest class probability; 1/6 for a uniform prediction, 1.0 for one-hot."""
    return float(np.max(probs))


def predicted_preference(probs: np.ndarray) -> float:
    """Expected preference value under the class distribution."""
    return float(np.dot(np.asarray(probs), CLASS_VALUES))


def compute_weights(conf: float, test_acc: float, cap: float = 0.5) -> tuple[float, float]:
    """(w0, w1): the model's weight is confidence times accuracy, capped."""
    if not (0.0 <= conf <= 1.0) or not (0.0 <= test_acc <= 1.0):
        raise DomainError(f"confidence/accuracy must lie in [0, 1], got ({conf}, {test_acc})")
    w1 = min(conf * test_acc, cap)
    return 1.0 - w1, w1


def combined_fitness(objective: float, predicted_pref: float, w0: float, w1: float,
                     literal_weighted_sum: bool = False) -> float:
    """Blend the base objective with the predicted preference.

    The default is the convex combination w0*objective + w1*predicted_pref.
    ``literal_weighted_sum`` selects the alternative that weights both terms
    by w0; it is kept selectable for comparison runs and is not used by
    default because it leaves the blend unnormalized.
    """
    if literal_weighted_sum:
        return w0 * objective + w0 * predicted_pref
    return w0 * objective + w1 * predicted_pref


# --- episodic training ---------------------------------------------------------

@dataclass
class EpisodeResult:
    model: "PreferenceNet"
    test_acc: float
    episode_index: int
    batches_run: int


class TrainingEpisode:
    """One bounded training session, executable in deterministic slices.

    Slicing lets a caller interleave batches with evolution generations so
    the suggestion loop never stalls; run_to_completion() is the synchronous
    convenience wrapper.
    """

    def __init__(self, model: PreferenceNet, dataset: PreferenceDataset,
                 config: PreferenceConfig, rng: np.random.Generator,
                 episode_index: int = 0):
        if dataset.size == 0:
            raise EmptyDataset("cannot train on an empty dataset")
        self.net = model.copy()
        self.dataset = dataset
        self.config = config
        self.rng = rng
        self.episode_index = episode_index
        n = len(dataset.y_train)
        self.batches_per_epoch = max(1, -(-n // config.batch_size))
        self.total_batches = config.epochs * self.batches_per_epoch
        self.batches_done = 0
        self.epoch_losses: list[float] = []
        self._epoch_order: np.ndarray | None = None
        self._epoch_loss_acc = 0.0
        self.result: EpisodeResult | None = None

    @property
    def done(self) -> bool:
        return self.result is not None

    def run_batches(self, n: int) -> EpisodeResult | None:
        """Advance up to ``n`` mini-batches; returns the result when finished."""
        cfg = self.config
        n_train = len(self.dataset.y_train)
        while n > 0 and self.batches_done < self.total_batches:
            in_epoch = self.batches_done % self.batches_per_epoch
            if in_epoch == 0:
                self._epoch_order = self.rng.permutation(n_train)
                self._epoch_loss_acc = 0.0
            if n_train > 0:
                start = in_epoch * cfg.batch_size
                idx = self._epoch_order[start:start + cfg.batch_size]
                loss = self.net.sgd_step(self.dataset.x_train[idx],
                                         self.dataset.y_train[idx], cfg.learning_rate)
                self._epoch_loss_acc += loss
            self.batches_done += 1
            n -= 1
            if self.batches_done % self.batches_per_epoch == 0:
                self.epoch_losses.append(self._epoch_loss_acc / self.batches_per_epoch)
        if self.batches_done >= self.total_batches and self.result is None:
            acc = self.net.test_accuracy(self.dataset.x_test, self.dataset.y_test)
            self.net.last_test_acc = acc
            self.net.episodes_trained += 1
            self.result = EpisodeResult(model=self.net, test_acc=acc,
                                        episode_index=self.episode_index,
                                        batches_run=self.batches_done)
        return self.result

    def run_to_completion(self) -> EpisodeResult:
        result = self.run_batches(self.total_batches)
        assert result is not None
        return result


def train_episode(model: PreferenceNet, dataset: PreferenceDataset,
                  config: PreferenceConfig | None = None,
                  rng: np.random.Generator | None = None) -> tuple[PreferenceNet, float]:
    """Train a copy of ``model`` on ``dataset`` and return it with its accuracy."""
    cfg = config or PreferenceConfig()
    episode = TrainingEpisode(model, dataset, cfg, rng or np.random.default_rng(0))
    result = episode.run_to_completion()
    return result.model, result.test_acc


class EpisodeQueue:
    """FIFO training episodes, at most one in flight, pumped in slices."""

    def __init__(self, config: PreferenceConfig, base_seed: int):
        self.config = config
        self.base_seed = base_seed
        self.pending: list[PreferenceDataset] = []
        self.active: TrainingEpisode | None = None
        self.episodes_started = 0

    def request(self, dataset: PreferenceDataset) -> None:
        self.pending.append(dataset)

    @property
    def busy(self) -> bool:
        return self.active is not None or bool(self.pending)

    def pump(self, model: PreferenceNet, n_batches: int) -> EpisodeResult | None:
        """Run up to ``n_batches`` slices; returns a result exactly once per episode."""
        if self.active is None:
            if not self.pending:
                return None
            dataset = self.pending.pop(0)
            index = self.episodes_started
            self.episodes_started += 1
            rng = np.random.default_rng([self.base_seed, index])
            self.active = TrainingEpisode(model, dataset, self.config, rng,
                                          episode_index=index)
        result = self.active.run_batches(n_batches)
        if result is not None:
            self.active = None
        return result
