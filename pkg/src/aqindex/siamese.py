"""Siamese scorer: one shared network, trained on cohort comparisons.

The network maps a normalized feature vector to a score in (0, 1) through
logistic units.  Connection weights are stored as square roots (W = V * V),
so every effective weight is non-negative and exact zeros are reachable;
together with monotone feature orientation this keeps "better input, not
lower score" structurally true.  Parameters live in one flat vector, per
layer the V block row-major followed by its biases, which makes momentum
updates and finite-difference checks one-liners.

Two comparison losses are available.  Contrastive, on labelled pairs with
distance d = |s_a - s_b|:

    y * d^2 + (1 - y) * max(margin - d, 0)^2

and squared triplet on (anchor, positive, negative):

    max(|s_a - s_p| - |s_a - s_n| + margin, 0)^2

Both use the subgradient sign(0) = 0 at the absolute-value kink.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .backend import get_backend
from .features import N_FEATURES

__all__ = [
    "ACTIVATION",
    "DEFAULT_SIZES",
    "BadArchitecture",
    "SiameseNet",
    "TrainConfig",
    "GradientCheckReport",
    "n_params",
    "contrastive_loss",
    "triplet_loss",
    "train_contrastive",
    "train_triplet",
    "gradient_check_contrastive",
    "gradient_check_triplet",
]

ACTIVATION = "logistic"
DEFAULT_SIZES = (N_FEATURES, 16, 8, 1)


class BadArchitecture(ValueError):
    """Layer sizes that the scorer cannot use."""


def n_params(sizes: Sequence[int]) -> int:
    """Flat parameter count: per layer nout * nin square-roots + nout biases."""
    total = 0
    for nin, nout in zip(sizes[:-1], sizes[1:]):
        total += nout * nin + nout
    return total


@dataclass
class SiameseNet:
    sizes: tuple
    omega: np.ndarray

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if len(self.sizes) < 2 or any(s < 1 for s in self.sizes):
            raise BadArchitecture(
                "need input and output layers with positive widths")
        self.omega = np.array(self.omega, dtype=np.float64).ravel()
        if self.omega.shape[0] != n_params(self.sizes):
            raise BadArchitecture(
                f"sizes {self.sizes} need {n_params(self.sizes)} parameters, "
                f"got {self.omega.shape[0]}")

    @classmethod
    def init(cls, layer_sizes: Sequence[int] = DEFAULT_SIZES, seed: int = 0,
             scale: float = 1.0) -> "SiameseNet":
        """Seeded start: positive uniform square-roots sized by fan-in, zero biases."""
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise BadArchitecture(
                "need input and output layers with positive widths")
        if sizes[0] != N_FEATURES:
            raise BadArchitecture(
                f"input layer must have {N_FEATURES} units, got {sizes[0]}")
        if sizes[-1] != 1:
            raise BadArchitecture("output layer must have exactly 1 unit")
        rng = np.random.default_rng(seed)
        chunks = []
        for nin, nout in zip(sizes[:-1], sizes[1:]):
            chunks.append(rng.uniform(0.0, scale / np.sqrt(nin),
                                      size=nout * nin))
            chunks.append(np.zeros(nout))
        return cls(sizes=sizes, omega=np.concatenate(chunks))

    @property
    def n_params(self) -> int:
        return self.omega.shape[0]

    def layers(self) -> list:
        """Effective (W, b) per layer with W = V * V (all entries >= 0)."""
        out = []
        off = 0
        for nin, nout in zip(self.sizes[:-1], self.sizes[1:]):
            v = self.omega[off:off + nout * nin].reshape(nout, nin)
            off += nout * nin
            b = self.omega[off:off + nout].copy()
            off += nout
            out.append((v * v, b))
        return out

    def score(self, x, backend=None) -> np.ndarray:
        """Scores in (0, 1), one per row of x."""
        kb = backend or get_backend()
        arr = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if arr.shape[1] != self.sizes[0]:
            raise ValueError(
                f"input width {arr.shape[1]} != first layer {self.sizes[0]}")
        return kb.net_forward(self.omega, self.sizes, arr)

    def to_dict(self, caps=None, train: Optional[dict] = None) -> dict:
        d = {
            "kind": "siamese",
            "sizes": list(self.sizes),
            "activation": ACTIVATION,
            "params": [float(v) for v in self.omega],
        }
        if caps is not None:
            d["caps"] = caps.to_dict()
        if train is not None:
            d["train"] = dict(train)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SiameseNet":
        if d.get("kind") != "siamese":
            raise ValueError(f"not a siamese artifact: kind={d.get('kind')!r}")
        if d.get("activation", ACTIVATION) != ACTIVATION:
            raise ValueError(f"unsupported activation {d['activation']!r}")
        return cls(sizes=tuple(d["sizes"]),
                   omega=np.asarray(d["params"], dtype=np.float64))


def contrastive_loss(s_a, s_b, y, margin: float):
    """Per-pair loss; y = 1 marks same-class pairs, y = 0 cross-class."""
    d = np.abs(np.asarray(s_a, dtype=np.float64)
               - np.asarray(s_b, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    hinge = np.maximum(margin - d, 0.0)
    out = y * d * d + (1.0 - y) * hinge * hinge
    return float(out) if out.ndim == 0 else out


def triplet_loss(s_anchor, s_pos, s_neg, margin: float):
    """Per-triplet squared hinge on the distance gap."""
    d_ap = np.abs(np.asarray(s_anchor, dtype=np.float64)
                  - np.asarray(s_pos, dtype=np.float64))
    d_an = np.abs(np.asarray(s_anchor, dtype=np.float64)
                  - np.asarray(s_neg, dtype=np.float64))
    out = np.maximum(d_ap - d_an + margin, 0.0) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TrainConfig:
    margin: float = 0.5
    learning_rate: float = 0.5
    momentum: float = 0.9
    epochs: int = 200
    batch_size: int = 32
    rng_seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.margin <= 1.0:
            raise ValueError("margin must lie in (0, 1]")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.init_scale <= 0.0:
            raise ValueError("init_scale must be positive")

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "rng_seed": self.rng_seed,
            "init_scale": self.init_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def _as_batch(name: str, x, width: int) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValueError(f"{name} must be (n, {width}), got {arr.shape}")
    return arr


def _sgd(net: SiameseNet, inputs: list, config: TrainConfig, value_grad):
    """Minibatch SGD with momentum over seeded shuffles; returns epoch means."""
    n = inputs[0].shape[0]
    omega = net.omega.copy()
    vel = np.zeros_like(omega)
    rng = np.random.default_rng(config.rng_seed)
    history = []
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        seen = 0.0
        for s in range(0, n, config.batch_size):
            idx = perm[s:s + config.batch_size]
            loss, grad = value_grad(omega, [a[idx] for a in inputs])
            vel = config.momentum * vel - config.learning_rate * grad
            omega = omega + vel
            seen += loss * idx.shape[0]
        history.append(seen / n)
    return SiameseNet(sizes=net.sizes, omega=omega), history


def train_contrastive(net: SiameseNet, x_a, x_b, y,
                      config: TrainConfig = TrainConfig(),
                      backend=None):
    """Returns (trained net, per-epoch mean loss); deterministic per seed."""
    kb = backend or get_backend()
    width = net.sizes[0]
    x_a = _as_batch("x_a", x_a, width)
    x_b = _as_batch("x_b", x_b, width)
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    if x_a.shape[0] != x_b.shape[0] or y.shape[0] != x_a.shape[0]:
        raise ValueError("x_a, x_b and y must have matching lengths")
    if x_a.shape[0] == 0:
        raise ValueError("no training pairs")
    if np.any((y != 0.0) & (y != 1.0)):
        raise ValueError("pair labels must be 0 or 1")

    def vg(omega, batch):
        return kb.contrastive_value_grad(omega, net.sizes, batch[0], batch[1],
                                         batch[2], config.margin)

    return _sgd(net, [x_a, x_b, y], config, vg)


def train_triplet(net: SiameseNet, x_anchor, x_pos, x_neg,
                  config: TrainConfig = TrainConfig(),
                  backend=None):
    """Returns (trained net, per-epoch mean loss); deterministic per seed."""
    kb = backend or get_backend()
    width = net.sizes[0]
    x_anchor = _as_batch("x_anchor", x_anchor, width)
    x_pos = _as_batch("x_pos", x_pos, width)
    x_neg = _as_batch("x_neg", x_neg, width)
    if not (x_anchor.shape[0] == x_pos.shape[0] == x_neg.shape[0]):
        raise ValueError("anchor, positive and negative counts must match")
    if x_anchor.shape[0] == 0:
        raise ValueError("no training triplets")

    def vg(omega, batch):
        return kb.triplet_value_grad(omega, net.sizes, batch[0], batch[1],
                                     batch[2], config.margin)

    return _sgd(net, [x_anchor, x_pos, x_neg], config, vg)


@dataclass(frozen=True)
class GradientCheckReport:
    max_rel_error: float
    mean_rel_error: float
    n_params: int
    n_samples_used: int
    n_samples_skipped: int

    def passed(self, threshold: float = 1e-5) -> bool:
        return self.max_rel_error < threshold


def _central_diff_check(net, analytic_grad, value_at, eps, tamper_index):
    omega = net.omega
    ga = analytic_grad.copy()
    if tamper_index is not None:
        # deliberate corruption; a healthy harness must flag this loudly
        ga[tamper_index] = ga[tamper_index] * 3.0 + 0.1
    rel = np.zeros_like(ga)
    for k in range(omega.shape[0]):
        bump = np.zeros_like(omega)
        bump[k] = eps
        gn = (value_at(omega + bump) - value_at(omega - bump)) / (2.0 * eps)
        # the floor absorbs cancellation noise in the central difference
        # (machine epsilon times loss scale over eps, ~1e-10 here); near-zero
        # gradient pairs then count as agreeing rather than as noise ratios
        denom = max(abs(ga[k]), abs(gn), 1e-5)
        rel[k] = abs(ga[k] - gn) / denom
    return rel


def gradient_check_contrastive(net: SiameseNet, x_a, x_b, y,
                               margin: float = 0.5, eps: float = 1e-6,
                               tamper_index: Optional[int] = None,
                               backend=None) -> GradientCheckReport:
    """Central-difference audit of the contrastive backward pass.

    Pairs sitting within 10 * eps of a hinge or active absolute-value kink
    are excluded; one-sided subgradients there would fail the comparison for
    reasons that have nothing to do with the implementation.
    """
    kb = backend or get_backend()
    width = net.sizes[0]
    x_a = _as_batch("x_a", x_a, width)
    x_b = _as_batch("x_b", x_b, width)
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()

    s_a = net.score(x_a, backend=kb)
    s_b = net.score(x_b, backend=kb)
    u = np.abs(s_a - s_b)
    kink_dist = np.where(y == 1.0, np.inf, np.abs(margin - u))
    inside = (y == 0.0) & (u < margin)
    kink_dist = np.where(inside, np.minimum(kink_dist, u), kink_dist)
    keep = kink_dist > 10.0 * eps
    if not np.any(keep):
        raise ValueError("every pair sits near a kink; change margin or data")

    xa, xb, yk = x_a[keep], x_b[keep], y[keep]
    _, grad = kb.contrastive_value_grad(net.omega, net.sizes, xa, xb, yk,
                                        margin)

    def value_at(omega):
        sa = kb.net_forward(omega, net.sizes, xa)
        sb = kb.net_forward(omega, net.sizes, xb)
        return float(np.mean(contrastive_loss(sa, sb, yk, margin)))

    rel = _central_diff_check(net, grad, value_at, eps, tamper_index)
    return GradientCheckReport(
        max_rel_error=float(rel.max()),
        mean_rel_error=float(rel.mean()),
        n_params=net.n_params,
        n_samples_used=int(keep.sum()),
        n_samples_skipped=int((~keep).sum()))


def gradient_check_triplet(net: SiameseNet, x_anchor, x_pos, x_neg,
                           margin: float = 0.5, eps: float = 1e-6,
                           tamper_index: Optional[int] = None,
                           backend=None) -> GradientCheckReport:
    """Central-difference audit of the triplet backward pass."""
    kb = backend or get_backend()
    width = net.sizes[0]
    x_anchor = _as_batch("x_anchor", x_anchor, width)
    x_pos = _as_batch("x_pos", x_pos, width)
    x_neg = _as_batch("x_neg", x_neg, width)

    s_a = net.score(x_anchor, backend=kb)
    d_ap = np.abs(s_a - net.score(x_pos, backend=kb))
    d_an = np.abs(s_a - net.score(x_neg, backend=kb))
    h = d_ap - d_an + margin
    kink_dist = np.abs(h)
    active = h > 0.0
    kink_dist = np.where(active,
                         np.minimum(kink_dist, np.minimum(d_ap, d_an)),
                         kink_dist)
    keep = kink_dist > 10.0 * eps
    if not np.any(keep):
        raise ValueError("every triplet sits near a kink; change margin or data")

    xa, xp, xn = x_anchor[keep], x_pos[keep], x_neg[keep]
    _, grad = kb.triplet_value_grad(net.omega, net.sizes, xa, xp, xn, margin)

    def value_at(omega):
        sa = kb.net_forward(omega, net.sizes, xa)
        sp = kb.net_forward(omega, net.sizes, xp)
        sn = kb.net_forward(omega, net.sizes, xn)
        return float(np.mean(triplet_loss(sa, sp, sn, margin)))

    rel = _central_diff_check(net, grad, value_at, eps, tamper_index)
    return GradientCheckReport(
        max_rel_error=float(rel.max()),
        mean_rel_error=float(rel.mean()),
        n_params=net.n_params,
        n_samples_used=int(keep.sum()),
        n_samples_skipped=int((~keep).sum()))
