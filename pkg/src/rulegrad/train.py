"""Adam, batching and the epoch loop."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from . import kernels
from . import ndgrad as nd
from .curriculum import MarginSchedule
from .data import ZslDataset, add_feature_noise
from .errors import ConfigError, ContractError, NumericError, ShapeError
from .losses import LossBreakdown, LossWeights, total_loss
from .vse import VseParams

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    gamma: float = 32.0
    embed_dim: int = 1024
    batch_size: int = 128
    epochs: int = 30
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 1e-5
    weights: LossWeights = field(default_factory=LossWeights)
    schedule: MarginSchedule = field(default_factory=MarginSchedule)
    transductive: bool = False
    seed: int = 0
    noise_sigma: float = 0.0
    per_step_margin: bool = False

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        for name in ("embed_dim", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.lr <= 0 or not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1 or self.adam_eps <= 0:
            raise ConfigError("invalid Adam hyper-parameters")
        if self.weight_decay < 0 or self.noise_sigma < 0:
            raise ConfigError("weight_decay and noise_sigma must be >= 0")

    @property
    def effective_weights(self) -> LossWeights:
        """Loss weights with the unlabeled-data terms switched off outside transductive mode."""
        if self.transductive:
            return self.weights
        return replace(self.weights, lambda_q=0.0, lambda_trans=0.0)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.0):
    """Bias-corrected Adam with coupled L2 decay (``g + wd * p``); updates in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ContractError("params, grads and Adam state have different lengths")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"Adam: param {p.shape}, grad {g.shape}, moment {m.shape}")
    state.step += 1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        kernels.adam_update(p, g, m, v, lr, beta1, beta2, eps, weight_decay, state.step)


class _Cycler:
    """Endless reshuffled index stream over ``n`` items."""

    def __init__(self, n: int, rng: np.random.Generator):
        self.n, self.rng = n, rng
        self.order = rng.permutation(n)
        self.pos = 0

    def take(self, k: int) -> np.ndarray:
        out = []
        while k > 0:
            if self.pos == self.n:
                self.order, self.pos = self.rng.permutation(self.n), 0
            step = min(k, self.n - self.pos)
            out.append(self.order[self.pos:self.pos + step])
            self.pos += step
            k -= step
        return np.concatenate(out)


@dataclass
class EpochRecord:
    epoch: int
    margin: float
    losses: LossBreakdown
    metrics: dict = field(default_factory=dict)

    def row(self) -> dict:
        r = {"epoch": self.epoch, "margin": self.margin}
        r.update(self.losses.as_dict())
        r.update(self.metrics)
        return r


@dataclass
class TrainResult:
    params: VseParams
    history: list[EpochRecord]
    step_losses: list[float]


class Trainer:
    """Holds parameters, optimiser state and data streams across epochs."""

    def __init__(self, dataset: ZslDataset, config: TrainConfig, params: VseParams | None = None):
        self.data = dataset
        self.config = config
        seeds = np.random.SeedSequence(config.seed).spawn(4)
        init_seed = int(seeds[0].generate_state(1)[0])
        self.params = params.copy() if params is not None else VseParams.init(
            dataset.train_x.shape[1], dataset.class_emb.shape[1], config.embed_dim, init_seed)
        self.state = AdamState.zeros_like(self.params.arrays())
        self._shuffle_rng = np.random.default_rng(seeds[1])
        self.train_x = add_feature_noise(dataset.train_x, config.noise_sigma,
                                         int(seeds[2].generate_state(1)[0]))
        self.unlabeled = None
        self._unl_stream = None
        if config.transductive:
            # only features are taken from the test split
            self.unlabeled = add_feature_noise(dataset.unlabeled, config.noise_sigma,
                                               int(seeds[3].generate_state(1)[0]) + 1)
            self._unl_stream = _Cycler(len(self.unlabeled), np.random.default_rng(seeds[3]))
        self.weights = config.effective_weights
        self.step_losses: list[float] = []
        self.epoch_index = 0

    def steps_per_epoch(self) -> int:
        n = len(self.data.train_y)
        return -(-n // self.config.batch_size)

    def step(self, idx: np.ndarray, margin: float) -> LossBreakdown:
        cfg = self.config
        tape = nd.Tape()
        w_x = tape.leaf(self.params.w_x)
        w_y = tape.leaf(self.params.w_y)
        x_unl = None
        if self._unl_stream is not None:
            x_unl = self.unlabeled[self._unl_stream.take(len(idx))]
        loss, br = total_loss(w_x, w_y, self.train_x[idx], self.data.train_y[idx], x_unl,
                              self.data, margin, self.weights, cfg.gamma)
        if not np.isfinite(br.total):
            raise NumericError(f"non-finite loss at step {len(self.step_losses)}")
        tape.backward(loss)
        adam_step(self.params.arrays(), [w_x.grad, w_y.grad], self.state, cfg.lr,
                  cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay)
        self.step_losses.append(br.total)
        return br

    def run_epoch(self) -> EpochRecord:
        cfg = self.config
        e = self.epoch_index
        order = self._shuffle_rng.permutation(len(self.data.train_y))
        n_steps = self.steps_per_epoch()
        parts = []
        for s in range(n_steps):
            t = e + s / n_steps if cfg.per_step_margin else e
            idx = order[s * cfg.batch_size:(s + 1) * cfg.batch_size]
            parts.append(self.step(idx, cfg.schedule.margin_at(t)))
        self.epoch_index += 1
        return EpochRecord(e, cfg.schedule.margin_at(e), LossBreakdown.average(parts))


def train(dataset: ZslDataset, config: TrainConfig,
          evaluate: Callable[[VseParams], dict] | None = None) -> TrainResult:
    """Run ``config.epochs`` epochs; ``evaluate`` (optional) is called after each epoch."""
    trainer = Trainer(dataset, config)
    history = []
    for _ in range(config.epochs):
        rec = trainer.run_epoch()
        if evaluate is not None:
            rec.metrics = dict(evaluate(trainer.params))
        log.debug("epoch %d margin %.3f loss %.5f", rec.epoch, rec.margin, rec.losses.total)
        history.append(rec)
    return TrainResult(trainer.params, history, trainer.step_losses)
