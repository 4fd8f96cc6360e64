"""Desk-scale linear heads trained with CE, MSE and CORAL losses.

Features are synthetic; labels come from binning a noisy latent linear
score so that the 19-level histogram follows a requested imbalance profile
exactly. Heads are linear, hence every loss is convex in the parameters and
the analytic gradients can be checked against finite differences.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigurationError, TrainingDivergedError, ValidationError
from .levels import BAREC, ClassWeights, class_weights_from_labels
from .records import HeadOutput, dump_heads

N_LEVELS = BAREC.n_levels
N_THRESHOLDS = N_LEVELS - 1
HEAD_KINDS = ("ce", "mse", "coral")
HEAD_TO_RECORD_KIND = {"ce": "classification", "mse": "regression", "coral": "ordinal"}

# two dominant mid-high levels, thin tails at both ends
TWO_PEAK = np.array(
    [0.25, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 6, 1, 6, 1, 1, 1, 0.25, 0.25], dtype=np.float64
)


# --------------------------------------------------------------- datasets


@dataclass
class SyntheticDataset:
    features: np.ndarray
    labels: np.ndarray
    ids: list[str]
    seed: int
    latent_weights: np.ndarray
    noise: float
    profile: np.ndarray

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, index) -> SyntheticDataset:
        idx = np.arange(len(self))[index]
        return SyntheticDataset(
            self.features[idx], self.labels[idx], [self.ids[i] for i in idx],
            self.seed, self.latent_weights, self.noise, self.profile,
        )

    def split(self, fractions: Sequence[float] = (0.6, 0.2, 0.2)) -> list[SyntheticDataset]:
        """Contiguous split; items are i.i.d. so no shuffling is needed."""
        bounds = np.round(np.cumsum([0.0, *fractions]) / sum(fractions) * len(self)).astype(int)
        return [self.subset(slice(a, b)) for a, b in zip(bounds[:-1], bounds[1:])]


def resolve_profile(imbalance) -> np.ndarray:
    if isinstance(imbalance, str):
        if imbalance == "uniform":
            shares = np.ones(N_LEVELS)
        elif imbalance in ("two-peak", "two_peak"):
            shares = TWO_PEAK.copy()
        else:
            raise ConfigurationError(f"unknown imbalance profile {imbalance!r}")
    else:
        shares = np.asarray(imbalance, dtype=np.float64)
    if shares.shape != (N_LEVELS,):
        raise ConfigurationError(f"profile needs {N_LEVELS} shares, got shape {shares.shape}")
    if np.any(shares < 0) or not np.all(np.isfinite(shares)):
        raise ConfigurationError("profile shares must be finite and nonnegative")
    if shares.sum() <= 0:
        raise ConfigurationError("profile has no mass")
    return shares / shares.sum()


def profile_counts(n: int, profile: np.ndarray) -> np.ndarray:
    """Largest-remainder apportionment of ``n`` items; ties go to the lower level."""
    exact = profile * n
    counts = np.floor(exact).astype(np.int64)
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[: n - counts.sum()]] += 1
    return counts


def generate_synthetic(n: int, d: int, imbalance="uniform", seed: int = 0,
                       noise: float = 0.5, sentences_per_doc: int = 5) -> SyntheticDataset:
    if n < N_LEVELS:
        raise ConfigurationError(f"need n >= {N_LEVELS}, got {n}")
    if d < 1:
        raise ConfigurationError("need d >= 1")
    profile = resolve_profile(imbalance)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    x = rng.standard_normal((n, d))
    latent = x @ w + noise * rng.standard_normal(n)
    counts = profile_counts(n, profile)
    labels = np.empty(n, dtype=np.int64)
    labels[np.argsort(latent, kind="stable")] = np.repeat(np.arange(1, N_LEVELS + 1), counts)
    ids = [f"D{i // sentences_per_doc:06d}-S{i % sentences_per_doc:02d}" for i in range(n)]
    return SyntheticDataset(x, labels, ids, seed, w, noise, profile)


# ------------------------------------------------------------------ heads


def softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def inverse_softplus(y):
    return y + np.log(-np.expm1(-y))


@dataclass
class LinearHead:
    """``weights``/``bias`` layout per kind.

    ce: ``(d, 19)`` and ``(19,)``; mse: ``(d,)`` and ``(1,)``; coral: ``(d,)``
    and ``(18,)`` holding the first threshold bias followed by 17 raw
    decrement parameters mapped through softplus, so the threshold biases are
    non-increasing for every parameter value.
    """

    kind: str
    weights: np.ndarray
    bias: np.ndarray

    @property
    def params(self) -> list[np.ndarray]:
        return [self.weights, self.bias]

    def copy(self) -> LinearHead:
        return LinearHead(self.kind, self.weights.copy(), self.bias.copy())

    @property
    def thresholds(self) -> np.ndarray:
        if self.kind != "coral":
            raise AttributeError("only coral heads have thresholds")
        return coral_biases(self.bias)

    def logits(self, x):
        if self.kind == "ce":
            return x @ self.weights + self.bias
        if self.kind == "mse":
            return x @ self.weights + self.bias[0]
        return (x @ self.weights)[:, None] + self.thresholds[None, :]

    def class_probs(self, x):
        z = self.logits(x)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def threshold_probs(self, x):
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + np.exp(-self.logits(x)))


def coral_biases(raw):
    return raw[0] - np.concatenate(([0.0], np.cumsum(softplus(raw[1:]))))


def init_head(kind: str, d: int, labels=None) -> LinearHead:
    """Zero weights; biases start from the label prior when labels are given."""
    if kind == "ce":
        bias = np.zeros(N_LEVELS)
        if labels is not None:
            freq = np.bincount(labels - 1, minlength=N_LEVELS) + 1.0
            bias = np.log(freq / freq.sum())
        return LinearHead(kind, np.zeros((d, N_LEVELS)), bias)
    if kind == "mse":
        start = float(np.mean(labels)) if labels is not None else (N_LEVELS + 1) / 2
        return LinearHead(kind, np.zeros(d), np.array([start]))
    if kind == "coral":
        if labels is not None:
            above = np.array([(labels > k).mean() for k in range(1, N_LEVELS)])
            above = np.clip(above, 1e-3, 1 - 1e-3)
            b = np.log(above / (1 - above))
        else:
            b = np.linspace(4.0, -4.0, N_THRESHOLDS)
        dec = np.maximum(-np.diff(b), 1e-3)
        return LinearHead(kind, np.zeros(d), np.concatenate(([b[0]], inverse_softplus(dec))))
    raise ConfigurationError(f"unknown head kind {kind!r}; expected one of {HEAD_KINDS}")


def item_weights(labels, class_weights: ClassWeights | None) -> np.ndarray:
    """Per-item multipliers; levels unseen when the weights were fit get 1."""
    if class_weights is None:
        return np.ones(labels.shape[0])
    lut = np.ones(N_LEVELS + 1)
    for level, w in class_weights.weights.items():
        lut[level] = w
    return lut[labels]


def loss_and_grad(head: LinearHead, x, labels, class_weights: ClassWeights | None = None):
    """Mean (optionally class-weighted) loss and exact gradient ``[d_weights, d_bias]``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != labels.shape[0] or x.shape[0] == 0:
        raise ValidationError(f"batch shape mismatch: x {x.shape}, labels {labels.shape}")
    if x.shape[1] != head.weights.shape[0]:
        raise ValidationError(f"head expects {head.weights.shape[0]} features, batch has {x.shape[1]}")
    c = item_weights(labels, class_weights)
    n = x.shape[0]

    if head.kind == "ce":
        loss, gw, gb = _kernels.ce_loss_grad(x, labels - 1, head.weights, head.bias, c)
        return loss, [gw, gb]
    if head.kind == "mse":
        r = x @ head.weights + head.bias[0] - labels
        loss = float(np.sum(c * r * r) / n)
        g = 2.0 * c * r / n
        return loss, [x.T @ g, np.array([g.sum()])]
    if head.kind == "coral":
        b = coral_biases(head.bias)
        loss, gw, gb = _kernels.coral_loss_grad(x, labels, head.weights, b, c)
        suffix = np.cumsum(gb[::-1])[::-1]
        graw = np.empty_like(head.bias)
        graw[0] = suffix[0]
        graw[1:] = -_kernels.sigmoid(head.bias[1:]) * suffix[1:]
        return loss, [gw, graw]
    raise ConfigurationError(f"unknown head kind {head.kind!r}")


# --------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    base_learning_rate: float = 2e-5
    lr_multiplier: float = 1e3
    epochs: int = 5
    patience: int = 1
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    use_class_weights: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0 or self.patience < 1:
            raise ConfigurationError("batch_size and patience must be >= 1, epochs >= 0")
        if self.base_learning_rate < 0 or self.lr_multiplier < 0 or self.weight_decay < 0:
            raise ConfigurationError("learning rate, multiplier and weight decay must be nonnegative")

    @property
    def learning_rate(self) -> float:
        return self.base_learning_rate * self.lr_multiplier

    def to_dict(self) -> dict:
        out = asdict(self)
        out["learning_rate"] = self.learning_rate
        return out


class AdamW:
    """Decoupled weight decay Adam; decay touches the weight matrix only."""

    def __init__(self, params: list[np.ndarray], config: TrainConfig):
        self.params = params
        self.cfg = config
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        cfg = self.cfg
        lr = cfg.learning_rate
        self.t += 1
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if i == 0 and cfg.weight_decay:
                p *= 1.0 - lr * cfg.weight_decay
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g
            p -= lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + cfg.adam_eps)


@dataclass
class TrainResult:
    head: LinearHead
    curve: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False
    class_weights: ClassWeights | None = None


def train(kind: str, data: SyntheticDataset, config: TrainConfig = TrainConfig(),
          dev: SyntheticDataset | None = None) -> TrainResult:
    """Minibatch AdamW with early stopping on dev loss; returns the best-dev head.

    Without an explicit ``dev`` set the last 20% of ``data`` is held out.
    """
    if dev is None:
        data, dev = data.split((0.8, 0.2))
    weights = class_weights_from_labels(data.labels) if config.use_class_weights else None
    head = init_head(kind, data.features.shape[1], data.labels)
    opt = AdamW(head.params, config)
    rng = np.random.default_rng(config.seed)
    n = len(data)

    def evaluate(epoch):
        train_loss = loss_and_grad(head, data.features, data.labels, weights)[0]
        dev_loss = loss_and_grad(head, dev.features, dev.labels, weights)[0]
        if not (math.isfinite(train_loss) and math.isfinite(dev_loss)):
            raise TrainingDivergedError(
                f"{kind} head diverged at epoch {epoch}: train loss {train_loss}, dev loss {dev_loss}"
            )
        return {"epoch": epoch, "train_loss": train_loss, "dev_loss": dev_loss}

    curve = [evaluate(0)]
    best, best_epoch, bad = head.copy(), 0, 0
    stopped = False
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_grad(head, data.features[idx], data.labels[idx], weights)
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"{kind} head: non-finite batch loss in epoch {epoch}")
            opt.step(grads)
        curve.append(evaluate(epoch))
        if curve[-1]["dev_loss"] < curve[best_epoch]["dev_loss"]:
            best, best_epoch, bad = head.copy(), epoch, 0
        else:
            bad += 1
            if bad >= config.patience:
                stopped = epoch < config.epochs
                break
    return TrainResult(best, curve, best_epoch, stopped, weights)


# --------------------------------------------------------------- emission


def head_outputs(head: LinearHead, data: SyntheticDataset, model_id: str) -> list[HeadOutput]:
    kind = HEAD_TO_RECORD_KIND[head.kind]
    x = data.features
    out = []
    if head.kind == "ce":
        for sid, row in zip(data.ids, head.class_probs(x)):
            out.append(HeadOutput(sid, model_id, kind, class_probs=tuple(float(v) for v in row)))
    elif head.kind == "mse":
        for sid, s in zip(data.ids, head.logits(x)):
            out.append(HeadOutput(sid, model_id, kind, score=float(s)))
    else:
        for sid, row in zip(data.ids, head.threshold_probs(x)):
            out.append(HeadOutput(sid, model_id, kind, threshold_probs=tuple(float(v) for v in row)))
    return out


def emit_heads(head: LinearHead, data: SyntheticDataset, path, model_id: str | None = None) -> None:
    dump_heads(head_outputs(head, data, model_id or f"toy-{head.kind}"), path)
