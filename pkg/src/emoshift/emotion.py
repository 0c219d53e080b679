"""Four-quadrant emotion classifier: training, inference, evaluation, corpora."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circumplex import Quadrant
from .features import FEATURE_NAMES, N_FEATURES, extract_features
from .synth import AudioClip, read_wav_file

log = logging.getLogger(__name__)

MODEL_MAGIC = "emoshift-classifier"
MODEL_VERSION = 1
HIDDEN = 32
PROB_TOL = 1e-6

# DEAM annotates valence/arousal on a 1..9 scale; its midpoint is the default split.
DEFAULT_THRESHOLD = 5.0


class TrainingError(RuntimeError):
    """Raised when the corpus cannot be trained on or the loss diverges."""


class QuadrantProbs(tuple):
    """(p1, p2, p3, p4): non-negative and summing to one within 1e-6."""

    def __new__(cls, p1, p2=None, p3=None, p4=None):
        values = tuple(p1) if p2 is None else (p1, p2, p3, p4)
        values = tuple(float(v) for v in values)
        if len(values) != 4:
            raise ValueError(f"expected 4 probabilities, got {len(values)}")
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise ValueError(f"probabilities must be finite and non-negative: {values}")
        if abs(sum(values) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {sum(values)!r}, not 1")
        return super().__new__(cls, values)

    p1 = property(lambda self: self[0])
    p2 = property(lambda self: self[1])
    p3 = property(lambda self: self[2])
    p4 = property(lambda self: self[3])

    def __repr__(self):
        return "QuadrantProbs({:.4f}, {:.4f}, {:.4f}, {:.4f})".format(*self)


def predict_quadrant(probs):
    """Most probable quadrant; ties go to the lowest index."""
    best = max(range(4), key=lambda i: (probs[i], -i))
    return Quadrant(best + 1)


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class TrainingConfig:
    """Optimisation settings.

    Epochs and batch size follow the reference fine-tuning recipe (10 and 8).
    Its 1e-4 learning rate was tuned for a large pretrained network; this
    small feature model needs a larger step to move in 10 epochs, so the
    default is 0.05 and ``TrainingConfig.reference()`` restores 1e-4.
    """

    epochs: int = 10
    batch_size: int = 8
    learning_rate: float = 0.05
    seed: int = 0
    validation_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ValueError("learning_rate must be finite and >= 0")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")

    @classmethod
    def reference(cls, **overrides):
        return cls(**{"learning_rate": 1e-4, **overrides})


@dataclass
class ClassifierModel:
    """z-normalisation, one tanh hidden layer, softmax over four quadrants."""

    mean: np.ndarray
    std: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("mean", "std", "w1", "b1", "w2", "b2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in {name}")
            setattr(self, name, arr)
        if np.any(self.std <= 0):
            raise ValueError("normalisation stds must be positive")
        n_in = self.mean.shape[0]
        if self.std.shape != (n_in,) or self.w1.shape[0] != n_in:
            raise ValueError("input dimension mismatch")
        if self.w2.shape != (self.w1.shape[1], 4) or self.b1.shape != (self.w1.shape[1],) \
                or self.b2.shape != (4,):
            raise ValueError("layer shape mismatch")

    @classmethod
    def zeros(cls, n_in=N_FEATURES, hidden=HIDDEN):
        return cls(np.zeros(n_in), np.ones(n_in), np.zeros((n_in, hidden)), np.zeros(hidden),
                   np.zeros((hidden, 4)), np.zeros(4))

    @property
    def params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def normalize(self, features):
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.std

    def logits(self, features):
        h = np.tanh(self.normalize(features) @ self.w1 + self.b1)
        return h @ self.w2 + self.b2

    def clip_probs(self, clip):
        return classify(self, extract_features(clip))


def classify(model, features):
    """Softmax probabilities over Q1..Q4 for one feature vector."""
    features = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    return QuadrantProbs(softmax(model.logits(features)))


# --- loss and gradients ----------------------------------------------------

def forward_loss(params, x, y):
    """Mean cross-entropy of normalised inputs ``x`` against integer labels ``y`` (0..3)."""
    h = np.tanh(x @ params["w1"] + params["b1"])
    z = h @ params["w2"] + params["b2"]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(y.size), y].mean())


def loss_and_grads(params, x, y):
    """Cross-entropy and its analytic gradient with respect to every parameter."""
    a1 = x @ params["w1"] + params["b1"]
    h = np.tanh(a1)
    z = h @ params["w2"] + params["b2"]
    p = softmax(z)
    n = y.size
    loss = float(-np.log(np.maximum(p[np.arange(n), y], 1e-300)).mean())
    dz = p.copy()
    dz[np.arange(n), y] -= 1.0
    dz /= n
    dh = dz @ params["w2"].T
    da1 = dh * (1.0 - h * h)
    grads = {
        "w2": h.T @ dz,
        "b2": dz.sum(axis=0),
        "w1": x.T @ da1,
        "b1": da1.sum(axis=0),
    }
    return loss, grads


# --- labels and corpora ----------------------------------------------------

def engineer_labels(valence, arousal, v_threshold=DEFAULT_THRESHOLD, a_threshold=DEFAULT_THRESHOLD):
    """Quadrant from continuous valence/arousal; values on a threshold count as high."""
    high_v = valence >= v_threshold
    high_a = arousal >= a_threshold
    if high_a:
        return Quadrant.Q1 if high_v else Quadrant.Q2
    return Quadrant.Q4 if high_v else Quadrant.Q3


@dataclass
class LabeledClip:
    """An audio clip (in memory or on disk) with a quadrant or a (valence, arousal) label."""

    clip: AudioClip | str | os.PathLike
    quadrant: Quadrant | None = None
    valence_arousal: tuple | None = None

    def __post_init__(self):
        if (self.quadrant is None) == (self.valence_arousal is None):
            raise ValueError("give exactly one of quadrant or valence_arousal")

    def label(self, v_threshold=DEFAULT_THRESHOLD, a_threshold=DEFAULT_THRESHOLD):
        if self.quadrant is not None:
            return self.quadrant
        return engineer_labels(*self.valence_arousal, v_threshold, a_threshold)

    def audio(self, sample_rate_hz=16000):
        if isinstance(self.clip, AudioClip):
            return self.clip
        return read_wav_file(self.clip, sample_rate_hz)


def load_manifest(path):
    """Read a ``path,quadrant`` or ``path,valence,arousal`` CSV manifest.

    Relative clip paths resolve against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        if fields == ["path", "quadrant"]:
            kind = "quadrant"
        elif fields == ["path", "valence", "arousal"]:
            kind = "va"
        else:
            raise ValueError(f"{path}: header must be 'path,quadrant' or 'path,valence,arousal'")
        items = []
        for lineno, row in enumerate(reader, start=2):
            if None in row or None in row.values():
                raise ValueError(f"{path}:{lineno}: expected {len(fields)} fields")
            row = {k.strip(): v.strip() for k, v in row.items()}
            clip_path = base / row["path"]
            try:
                if kind == "quadrant":
                    items.append(LabeledClip(str(clip_path), quadrant=Quadrant.parse(row["quadrant"])))
                else:
                    items.append(LabeledClip(str(clip_path),
                                             valence_arousal=(float(row["valence"]), float(row["arousal"]))))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not items:
        raise ValueError(f"{path}: manifest lists no clips")
    return items


def write_manifest(rows, path):
    """Write ``(relative_path, quadrant)`` rows as a ``path,quadrant`` manifest."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "quadrant"])
        for rel, quadrant in rows:
            writer.writerow([rel, Quadrant(quadrant).name])


def featurize(corpus, sample_rate_hz=16000):
    return np.array([extract_features(item.audio(sample_rate_hz)) for item in corpus]).reshape(-1, N_FEATURES)


# --- training --------------------------------------------------------------

def _stratified_split(labels, fraction, rng):
    val = []
    for q in np.unique(labels):
        idx = np.flatnonzero(labels == q)
        idx = idx[rng.permutation(idx.size)]
        n_val = int(round(fraction * idx.size))
        if idx.size >= 2:
            n_val = min(max(n_val, 1), idx.size - 1)
        else:
            n_val = 0
        val.extend(idx[:n_val].tolist())
    val = np.array(sorted(val), dtype=int)
    train = np.setdiff1d(np.arange(labels.size), val)
    return train, val


def train(corpus, config=TrainingConfig(), *, features=None, v_threshold=DEFAULT_THRESHOLD,
          a_threshold=DEFAULT_THRESHOLD):
    """Fit a classifier by minibatch gradient descent on cross-entropy.

    A stratified validation split is held out; normalisation statistics
    come from the training split only.  The loss curve records the full
    training-split loss after every step (step 0 is the initial model) and
    the validation loss at step 0 and at the end of each epoch.  Identical
    corpus, config and seed give bit-identical models.
    """
    labels = np.array([int(item.label(v_threshold, a_threshold)) - 1 for item in corpus])
    if features is None:
        features = featurize(corpus)
    features = np.asarray(features, dtype=np.float64)
    if np.unique(labels).size < 2:
        raise TrainingError("corpus must contain at least two quadrants")
    if labels.size < 2 * config.batch_size:
        raise TrainingError(f"corpus of {labels.size} clips is smaller than two batches")
    if not np.all(np.isfinite(features)):
        raise TrainingError("non-finite features in corpus")

    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = _stratified_split(labels, config.validation_fraction, rng)
    mean = features[train_idx].mean(axis=0)
    std = features[train_idx].std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    x = (features - mean) / std
    xt, yt = x[train_idx], labels[train_idx]
    xv, yv = x[val_idx], labels[val_idx]

    n_in = features.shape[1]
    params = {
        "w1": rng.normal(0.0, 1.0 / math.sqrt(n_in), (n_in, HIDDEN)),
        "b1": np.zeros(HIDDEN),
        "w2": rng.normal(0.0, 1.0 / math.sqrt(HIDDEN), (HIDDEN, 4)),
        "b2": np.zeros(4),
    }

    def val_loss():
        return forward_loss(params, xv, yv) if yv.size else None

    curve = [(0, forward_loss(params, xt, yt), val_loss())]
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(yt.size)
        for start in range(0, order.size, config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = loss_and_grads(params, xt[batch], yt[batch])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, step {step}")
            for name in params:
                params[name] = params[name] - config.learning_rate * grads[name]
            step += 1
            train_loss = forward_loss(params, xt, yt)
            if not math.isfinite(train_loss):
                raise TrainingError(f"training loss diverged at epoch {epoch}, step {step}: "
                                    f"max |w| = {max(float(np.abs(p).max()) for p in params.values()):.3g}")
            is_epoch_end = start + config.batch_size >= order.size
            curve.append((step, train_loss, val_loss() if is_epoch_end else None))

    model = ClassifierModel(mean, std, params["w1"], params["b1"], params["w2"], params["b2"])
    model.metadata = {
        "seed": config.seed,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "validation_fraction": config.validation_fraction,
        "feature_names": list(FEATURE_NAMES[:n_in]) if n_in == N_FEATURES else [],
        "n_train": int(train_idx.size),
        "n_validation": int(val_idx.size),
        "train_indices": train_idx.tolist(),
        "validation_indices": val_idx.tolist(),
        "loss_curve": [[s, tl, vl] for s, tl, vl in curve],
    }
    return model


def predict_features(model, features):
    """Vectorised argmax quadrant indices (0..3) for a feature matrix."""
    return np.argmax(model.logits(np.asarray(features, dtype=np.float64)), axis=1)


# --- evaluation ------------------------------------------------------------

def evaluate(model, corpus, *, v_threshold=DEFAULT_THRESHOLD, a_threshold=DEFAULT_THRESHOLD,
             features=None):
    """Accuracy and 4x4 confusion counts (rows true quadrant, columns predicted).

    ``model`` is anything with ``clip_probs(clip) -> probabilities``; with
    precomputed ``features`` it must be a :class:`ClassifierModel`.
    """
    if not corpus:
        raise ValueError("cannot evaluate on an empty corpus")
    confusion = np.zeros((4, 4), dtype=np.int64)
    if features is not None:
        predicted = [int(i) for i in predict_features(model, features)]
    else:
        predicted = [int(predict_quadrant(model.clip_probs(item.audio()))) - 1 for item in corpus]
    for item, pred in zip(corpus, predicted):
        confusion[int(item.label(v_threshold, a_threshold)) - 1, pred] += 1
    return float(np.trace(confusion) / confusion.sum()), confusion


def format_confusion(accuracy, confusion):
    lines = [f"accuracy: {accuracy:.2%}", "true\\pred      Q1      Q2      Q3      Q4"]
    for i, row in enumerate(confusion):
        lines.append(f"Q{i + 1:<12}" + "".join(f"{int(v):8d}" for v in row))
    return "\n".join(lines)


# --- persistence -----------------------------------------------------------

def model_to_json(model):
    doc = {
        "magic": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "n_features": int(model.mean.shape[0]),
        "hidden": int(model.w1.shape[1]),
        "normalization": {"mean": model.mean.tolist(), "std": model.std.tolist()},
        "layers": {
            "w1": model.w1.tolist(), "b1": model.b1.tolist(),
            "w2": model.w2.tolist(), "b2": model.b2.tolist(),
        },
        "metadata": model.metadata,
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def model_from_json(text):
    doc = json.loads(text)
    if doc.get("magic") != MODEL_MAGIC:
        raise ValueError("not an emoshift classifier file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    layers = doc["layers"]
    norm = doc["normalization"]
    return ClassifierModel(np.array(norm["mean"]), np.array(norm["std"]),
                           np.array(layers["w1"]), np.array(layers["b1"]),
                           np.array(layers["w2"]), np.array(layers["b2"]),
                           doc.get("metadata", {}))


def save_model(model, path):
    Path(path).write_text(model_to_json(model))


def load_model(path):
    return model_from_json(Path(path).read_text())


def write_loss_curve(model, path):
    """CSV ``step,train_loss,val_loss``; val_loss is blank between epochs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "train_loss", "val_loss"])
        for step, tl, vl in model.metadata.get("loss_curve", []):
            writer.writerow([step, repr(tl), "" if vl is None else repr(vl)])
