"""Iterative generator training: sample batches, couple real to generated
features with either a solved transport plan or the label-derived coupling,
then take an Adam step on the fixed-plan objective.

Per iteration the batch RNG is consumed in a fixed order (real indices, seen
replacement draws if any, seen noises, unseen class draws, unseen noises,
branch coin) so runs are bit-reproducible for a given seed and config.

Modes: "standard" and "generalized" train identically on labeled seen data
and differ only at evaluation; "transductive" additionally mixes the
unlabeled pool into the real batches (sentinel class -1) and solves transport
against the full generated batch, seen and unseen halves alike.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import param_blocks
from .data import AttributeMatrix, FeatureDataset, UNLABELED
from .errors import ConfigError, SolverError
from .generator import (GeneratorParams, PredictorParams, backward,
                        generator_forward, init_generator, init_predictor)
from .mlp import AdamState, MlpParams, adam_init, adam_step
from .ot import IpotConfig, Marginals, cosine_cost_matrix, ipot_solve, transition_plan
from .rng import SeededRng

MODES = ("standard", "generalized", "transductive")


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the training loop.

    ot_prob is the probability of solving for the transport plan; with
    probability 1 - ot_prob the label-derived coupling is used instead.
    reg_weight weighs the class-likelihood regularizer against the transport
    term, and nca_scale is that regularizer's softmax sharpness.

    The default ipot budget is deliberately small (200 sweeps): training only
    needs the current proximal iterate for a gradient, not a certified-feasible
    plan, and batch cost matrices with near-tied entries would otherwise crawl
    for tens of thousands of sweeps every iteration.
    """

    ot_prob: float = 0.9
    reg_weight: float = 0.05
    nca_scale: float = 0.5
    ipot: IpotConfig = IpotConfig(max_outer_iters=200, stop_tol=1e-7)
    batch_size: int = 128
    learning_rate: float = 0.001
    epochs: int = 30
    seed: int = 0
    mode: str = "standard"
    hidden_dim: int = 128

    def __post_init__(self):
        if not 0.0 <= self.ot_prob <= 1.0:
            raise ConfigError(f"ot_prob must be in [0, 1], got {self.ot_prob}")
        if self.reg_weight < 0.0:
            raise ConfigError(f"reg_weight must be non-negative, got {self.reg_weight}")
        if not self.nca_scale > 0.0:
            raise ConfigError(f"nca_scale must be positive, got {self.nca_scale}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be at least 2, got {self.batch_size}")
        if self.learning_rate < 0.0:
            raise ConfigError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim must be positive, got {self.hidden_dim}")


@dataclass
class TrainTrace:
    """Per-iteration loss records plus wall-clock seconds per epoch."""

    branch: list[str] = field(default_factory=list)
    transport_cost: list[float] = field(default_factory=list)
    reg_loss: list[float] = field(default_factory=list)
    total_loss: list[float] = field(default_factory=list)
    underflows: list[int] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)

    def record(self, branch: str, transport: float, reg: float, total: float, clamped: int):
        self.branch.append(branch)
        self.transport_cost.append(transport)
        self.reg_loss.append(reg)
        self.total_loss.append(total)
        self.underflows.append(clamped)

    def __len__(self) -> int:
        return len(self.branch)


def write_trace_csv(trace: TrainTrace, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,branch,transport_cost,reg_loss,total_loss\n")
        for i in range(len(trace)):
            fh.write(f"{i},{trace.branch[i]},{trace.transport_cost[i]:.17g},"
                     f"{trace.reg_loss[i]:.17g},{trace.total_loss[i]:.17g}\n")


@dataclass
class TrainResult:
    g: GeneratorParams
    f: PredictorParams
    adam: AdamState
    trace: TrainTrace


def sample_real_batch(data: FeatureDataset, b: int, rng: SeededRng,
                      transductive: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """b uniform draws with replacement from the labeled seen pool, extended
    by the unlabeled pool (class -1) in transductive mode."""
    feats, labels = data.seen_train
    if transductive and data.unseen_unlabeled.shape[0]:
        feats = np.vstack([feats, data.unseen_unlabeled])
        labels = np.concatenate([
            labels, np.full(data.unseen_unlabeled.shape[0], UNLABELED, dtype=np.int64)
        ])
    if feats.shape[0] == 0:
        raise ValueError("cannot sample from an empty pool")
    idx = rng.integers(feats.shape[0], b)
    return feats[idx], labels[idx]


def sample_synth_batch(g: GeneratorParams, attrs: AttributeMatrix, class_pool,
                       b: int, rng: SeededRng, mirror_classes=None):
    """Generate b features. With mirror_classes the class indices are copied
    one-for-one (sentinel entries replaced by uniform draws from class_pool),
    which keeps class proportions matched to the mirrored batch; otherwise
    classes are drawn uniformly from class_pool.

    Returns (features, class ids, noises)."""
    pool = np.asarray(list(class_pool), dtype=np.int64)
    if pool.size == 0:
        raise ValueError("class pool is empty")
    if np.any(pool < 0) or np.any(pool >= attrs.n_classes):
        raise ValueError(f"class pool {pool.tolist()} outside 0..{attrs.n_classes - 1}")
    if mirror_classes is not None:
        classes = np.asarray(mirror_classes, dtype=np.int64).copy()
        hole = classes == UNLABELED
        if hole.any():
            classes[hole] = pool[rng.integers(pool.size, int(hole.sum()))]
        if np.any(classes < 0) or np.any(classes >= attrs.n_classes):
            raise ValueError("mirror_classes contains an unknown class id")
    else:
        classes = pool[rng.integers(pool.size, b)]
    noises = rng.gaussian(classes.size * attrs.attr_dim).reshape(classes.size, attrs.attr_dim)
    feats = generator_forward(g, attrs.attrs[classes], noises)
    return feats, classes, noises


def ot_branch_coin(rng: SeededRng, ot_prob: float) -> bool:
    """Decide the branch for one iteration; always consumes one uniform."""
    coin = float(rng.uniform(1)[0])
    return ot_prob > 0.0 and coin <= ot_prob


def iterations_per_epoch(pool_size: int, batch_size: int) -> int:
    return max(1, math.ceil(pool_size / batch_size))


def train(data: FeatureDataset, attrs: AttributeMatrix, cfg: TrainConfig,
          init_params: tuple[GeneratorParams, PredictorParams] | None = None) -> TrainResult:
    transductive = cfg.mode == "transductive"
    if data.seen_train[0].shape[0] == 0:
        raise ValueError("training requires labeled seen samples")
    if transductive and data.unseen_unlabeled.shape[0] == 0:
        raise ValueError("transductive mode requires a non-empty unlabeled pool")

    d = attrs.attr_dim
    feature_dim = data.feature_dim
    root = SeededRng(cfg.seed)
    if init_params is None:
        g = init_generator(d, feature_dim, cfg.hidden_dim, root.split(1))
        f = init_predictor(feature_dim, d, cfg.hidden_dim, root.split(2),
                           nca_scale=cfg.nca_scale)
    else:
        g, f = init_params
    adam = adam_init(param_blocks(g, f), learning_rate=cfg.learning_rate)
    batch_rng = root.split(3)

    pool_size = data.seen_train[0].shape[0] + (
        data.unseen_unlabeled.shape[0] if transductive else 0
    )
    iters = iterations_per_epoch(pool_size, cfg.batch_size)
    trace = TrainTrace()
    b = cfg.batch_size

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        for it in range(iters):
            step = epoch * iters + it
            try:
                real_feats, real_classes = sample_real_batch(data, b, batch_rng, transductive)
                s_feats, s_classes, s_noises = sample_synth_batch(
                    g, attrs, attrs.seen_ids, b, batch_rng, mirror_classes=real_classes
                )
                u_feats, u_classes, u_noises = sample_synth_batch(
                    g, attrs, attrs.unseen_ids, b, batch_rng
                )
                synth_attrs = np.vstack([attrs.attrs[s_classes], attrs.attrs[u_classes]])
                synth_noises = np.vstack([s_noises, u_noises])
                synth_classes = np.concatenate([s_classes, u_classes])

                has_unlabeled = bool(np.any(real_classes == UNLABELED))
                take_ot = ot_branch_coin(batch_rng, cfg.ot_prob) or has_unlabeled
                if take_ot:
                    branch = "ot"
                    if transductive:
                        synth_all = np.vstack([s_feats, u_feats])
                        cost = cosine_cost_matrix(real_feats, synth_all)
                        plan = ipot_solve(cost, Marginals.uniform(*cost.shape), cfg.ipot).values
                    else:
                        cost = cosine_cost_matrix(real_feats, s_feats)
                        solved = ipot_solve(cost, Marginals.uniform(*cost.shape), cfg.ipot).values
                        plan = np.hstack([solved, np.zeros((b, u_feats.shape[0]))])
                else:
                    branch = "transition"
                    coupled = transition_plan(real_classes, s_classes).values
                    plan = np.hstack([coupled, np.zeros((b, u_feats.shape[0]))])

                res = backward(plan, real_feats, real_classes, synth_attrs, synth_noises,
                               synth_classes, g, f, attrs.attrs, cfg.reg_weight)
                blocks, adam = adam_step(param_blocks(g, f),
                                         res.g_grads.blocks() + res.f_grads.blocks(), adam)
                g = GeneratorParams(net=MlpParams(*blocks[:4]))
                f = PredictorParams(net=MlpParams(*blocks[4:]), nca_scale=cfg.nca_scale)
            except (SolverError, ValueError) as exc:
                raise SolverError(f"iteration {step} (epoch {epoch}): {exc}") from exc
            trace.record(branch, res.transport_term, res.regularizer_term,
                         res.total, res.underflow_count)
        trace.epoch_seconds.append(time.perf_counter() - t0)

    return TrainResult(g=g, f=f, adam=adam, trace=trace)


def synthesize_class_features(g: GeneratorParams, attrs: AttributeMatrix, classes,
                              per_class: int, rng: SeededRng) -> tuple[np.ndarray, np.ndarray]:
    """per_class generated features for each listed class, labels attached."""
    classes = [int(c) for c in classes]
    if per_class < 1:
        raise ValueError(f"per_class must be at least 1, got {per_class}")
    for c in classes:
        if not 0 <= c < attrs.n_classes:
            raise ValueError(f"class {c} outside 0..{attrs.n_classes - 1}")
    feats = []
    for c in classes:
        noises = rng.gaussian(per_class * attrs.attr_dim).reshape(per_class, attrs.attr_dim)
        feats.append(generator_forward(g, np.tile(attrs.attrs[c], (per_class, 1)), noises))
    labels = np.repeat(np.asarray(classes, dtype=np.int64), per_class)
    return np.vstack(feats), labels
