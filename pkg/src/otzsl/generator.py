"""Conditional feature generator, attribute predictor, and their joint loss.

The generator maps [attribute; noise] to a feature vector. The predictor maps
features back to attribute space, where a class-likelihood softmax over cosine
distances to every class attribute (an NCA-style term) scores how recognizable
each feature is. Training minimizes

    transport_term + reg_weight * regularizer_term

with the transport plan held fixed, so all gradients here treat the plan as a
constant matrix. Gradients are fully analytic; finite differences are used
only in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .linalg import log_softmax_rows, unit_rows
from .mlp import MlpParams, add_grads, init_mlp, mlp_backward, mlp_forward, mlp_forward_cache
from .rng import SeededRng

UNLABELED = -1

# Class probabilities below this floor are clamped before the log; clamped
# samples contribute a constant to the loss and nothing to the gradient.
PROB_FLOOR = 1e-300
_LOG_FLOOR = math.log(PROB_FLOOR)


@dataclass
class GeneratorParams:
    """Feature generator g: [attribute; noise] -> feature. Noise dimension
    equals attribute dimension, so the network input is twice the latter."""

    net: MlpParams

    def __post_init__(self):
        if self.net.input_dim % 2 != 0:
            raise ValueError(
                f"generator input dim {self.net.input_dim} is odd; expected attribute + noise halves"
            )

    @property
    def attr_dim(self) -> int:
        return self.net.input_dim // 2

    @property
    def feature_dim(self) -> int:
        return self.net.output_dim


@dataclass
class PredictorParams:
    """Attribute predictor f: feature -> attribute, plus the softmax sharpness
    of the class-likelihood term."""

    net: MlpParams
    nca_scale: float = 0.5

    def __post_init__(self):
        if not (self.nca_scale > 0.0 and math.isfinite(self.nca_scale)):
            raise ValueError(f"nca_scale must be positive, got {self.nca_scale}")


def init_generator(attr_dim: int, feature_dim: int, hidden_dim: int,
                   rng: SeededRng) -> GeneratorParams:
    return GeneratorParams(net=init_mlp(2 * attr_dim, hidden_dim, feature_dim, rng))


def init_predictor(feature_dim: int, attr_dim: int, hidden_dim: int,
                   rng: SeededRng, nca_scale: float = 0.5) -> PredictorParams:
    return PredictorParams(net=init_mlp(feature_dim, hidden_dim, attr_dim, rng),
                           nca_scale=nca_scale)


def generator_forward(g: GeneratorParams, attrs, noises) -> np.ndarray:
    """Generate features for attribute/noise pairs; accepts single vectors or
    row-aligned batches."""
    attrs = np.asarray(attrs, dtype=np.float64)
    noises = np.asarray(noises, dtype=np.float64)
    if attrs.shape != noises.shape:
        raise ValueError(f"attribute shape {attrs.shape} != noise shape {noises.shape}")
    single = attrs.ndim == 1
    if single:
        attrs = attrs[None, :]
        noises = noises[None, :]
    if attrs.shape[1] != g.attr_dim:
        raise ValueError(f"attribute dim {attrs.shape[1]} != generator's {g.attr_dim}")
    out = mlp_forward(g.net, np.hstack([attrs, noises]))
    return out[0] if single else out


def nca_log_probs(pred_attrs, class_attrs, nca_scale: float) -> np.ndarray:
    """Log class probabilities from cosine distances in attribute space.

    Row b, column c holds log p(class c | prediction b) where the logit is
    -nca_scale * (1 - cos(prediction, attribute_c)).
    """
    pred = np.atleast_2d(np.asarray(pred_attrs, dtype=np.float64))
    attrs = np.asarray(class_attrs, dtype=np.float64)
    if pred.shape[1] != attrs.shape[1]:
        raise ValueError(f"prediction dim {pred.shape[1]} != attribute dim {attrs.shape[1]}")
    pred_unit, _ = unit_rows(pred, "predicted attributes")
    attr_unit, _ = unit_rows(attrs, "class attributes")
    logits = -nca_scale * (1.0 - pred_unit @ attr_unit.T)
    return log_softmax_rows(logits)


def nca_probability(pred_attr, class_attrs, target_class: int, nca_scale: float) -> float:
    """p(target class | predicted attribute); the row over classes sums to 1."""
    log_p = nca_log_probs(pred_attr, class_attrs, nca_scale)
    n_classes = log_p.shape[1]
    if not 0 <= target_class < n_classes:
        raise ValueError(f"target class {target_class} outside [0, {n_classes})")
    return float(np.exp(log_p[0, target_class]))


def _nca_term(pred, targets, attr_unit, nca_scale, grad_weight):
    """Mean negative log class likelihood of a prediction batch, plus the
    gradient of grad_weight * mean w.r.t. the predictions."""
    b = pred.shape[0]
    pred_unit, norms = unit_rows(pred, "predicted attributes")
    cos = pred_unit @ attr_unit.T
    logits = -nca_scale * (1.0 - cos)
    log_p = log_softmax_rows(logits)
    rows = np.arange(b)
    picked = log_p[rows, targets]
    floored = picked < _LOG_FLOOR
    loss = float(-np.maximum(picked, _LOG_FLOOR).mean())

    soft = np.exp(log_p)
    d_logits = soft
    d_logits[rows, targets] -= 1.0
    d_logits[floored] = 0.0
    coef = grad_weight * nca_scale / b
    d_pred = coef * (d_logits @ attr_unit
                     - (d_logits * cos).sum(axis=1, keepdims=True) * pred_unit) / norms[:, None]
    return loss, d_pred, int(floored.sum())


def regularizer_loss(real_feats, real_classes, synth_feats, synth_classes,
                     f: PredictorParams, class_attrs) -> tuple[float, int]:
    """Mean -log p over labeled real features plus mean -log p over generated
    ones. Returns (loss, clamped-sample count). Real rows labeled UNLABELED
    are skipped: their class term is undefined."""
    attr_unit, _ = unit_rows(np.asarray(class_attrs, dtype=np.float64), "class attributes")
    real_feats = np.atleast_2d(np.asarray(real_feats, dtype=np.float64))
    synth_feats = np.atleast_2d(np.asarray(synth_feats, dtype=np.float64))
    real_classes = np.asarray(real_classes, dtype=np.int64).reshape(-1)
    synth_classes = np.asarray(synth_classes, dtype=np.int64).reshape(-1)
    if synth_feats.shape[0] == 0:
        raise ValueError("synthetic batch is empty")

    total = 0.0
    clamped = 0
    labeled = real_classes != UNLABELED
    if labeled.any():
        q = mlp_forward(f.net, real_feats[labeled])
        loss, _, n = _nca_term(q, real_classes[labeled], attr_unit, f.nca_scale, 0.0)
        total += loss
        clamped += n
    q = mlp_forward(f.net, synth_feats)
    loss, _, n = _nca_term(q, synth_classes, attr_unit, f.nca_scale, 0.0)
    total += loss
    clamped += n
    return total, clamped


def total_loss(plan, cost, regularizer: float, reg_weight: float) -> float:
    """Transport cost of the fixed plan plus the weighted regularizer."""
    from .ot import transport_cost

    if reg_weight < 0.0:
        raise ValueError(f"reg_weight must be non-negative, got {reg_weight}")
    return transport_cost(plan, cost) + reg_weight * regularizer


@dataclass
class BackwardResult:
    g_grads: MlpParams | None
    f_grads: MlpParams | None
    transport_term: float
    regularizer_term: float
    total: float
    underflow_count: int


def _assemble(plan_values, real_feats, real_classes, synth_attrs, synth_noises,
              synth_classes, g: GeneratorParams, f: PredictorParams, class_attrs,
              reg_weight: float, want_grads: bool) -> BackwardResult:
    plan = np.asarray(plan_values, dtype=np.float64)
    real_feats = np.atleast_2d(np.asarray(real_feats, dtype=np.float64))
    real_classes = np.asarray(real_classes, dtype=np.int64).reshape(-1)
    synth_attrs = np.atleast_2d(np.asarray(synth_attrs, dtype=np.float64))
    synth_noises = np.atleast_2d(np.asarray(synth_noises, dtype=np.float64))
    synth_classes = np.asarray(synth_classes, dtype=np.int64).reshape(-1)
    if reg_weight < 0.0:
        raise ValueError(f"reg_weight must be non-negative, got {reg_weight}")
    n, m = real_feats.shape[0], synth_attrs.shape[0]
    if plan.shape != (n, m):
        raise ValueError(f"plan shape {plan.shape} does not match batches ({n}, {m})")

    inputs = np.hstack([synth_attrs, synth_noises])
    xhat, g_cache = mlp_forward_cache(g.net, inputs)

    real_unit, _ = unit_rows(real_feats, "real features")
    xhat_unit, xhat_norms = unit_rows(xhat, "generated features")
    cos = real_unit @ xhat_unit.T
    transport_term = float(np.sum(plan * (1.0 - cos)))

    attr_unit, _ = unit_rows(np.asarray(class_attrs, dtype=np.float64), "class attributes")
    labeled = real_classes != UNLABELED
    reg_term = 0.0
    underflows = 0

    d_real_q = None
    real_cache = None
    if labeled.any():
        q_real, real_cache = mlp_forward_cache(f.net, real_feats[labeled])
        loss, d_real_q, c = _nca_term(q_real, real_classes[labeled], attr_unit,
                                      f.nca_scale, reg_weight)
        reg_term += loss
        underflows += c
    q_synth, synth_cache = mlp_forward_cache(f.net, xhat)
    loss, d_synth_q, c = _nca_term(q_synth, synth_classes, attr_unit,
                                   f.nca_scale, reg_weight)
    reg_term += loss
    underflows += c

    total = transport_term + reg_weight * reg_term
    if not want_grads:
        return BackwardResult(None, None, transport_term, reg_term, total, underflows)

    # transport term: d cost[n, m] / d xhat[m] = -(u_n - cos[n, m] v_m)/|xhat_m|
    col_mass = (plan * cos).sum(axis=0)
    d_xhat = -(plan.T @ real_unit - col_mass[:, None] * xhat_unit) / xhat_norms[:, None]

    f_grads, d_xhat_reg = mlp_backward(f.net, synth_cache, d_synth_q)
    d_xhat += d_xhat_reg
    if d_real_q is not None:
        real_grads, _ = mlp_backward(f.net, real_cache, d_real_q)
        f_grads = add_grads(f_grads, real_grads)
    g_grads, _ = mlp_backward(g.net, g_cache, d_xhat)

    for owner, grads in (("generator", g_grads), ("predictor", f_grads)):
        for name, block in zip(("W1", "b1", "W2", "b2"), grads.blocks()):
            if not np.all(np.isfinite(block)):
                raise SolverError(f"non-finite gradient in {owner} block {name}")
    return BackwardResult(g_grads, f_grads, transport_term, reg_term, total, underflows)


def objective(plan_values, real_feats, real_classes, synth_attrs, synth_noises,
              synth_classes, g: GeneratorParams, f: PredictorParams, class_attrs,
              reg_weight: float) -> BackwardResult:
    """Loss components only (grads left as None); same code path as backward."""
    return _assemble(plan_values, real_feats, real_classes, synth_attrs, synth_noises,
                     synth_classes, g, f, class_attrs, reg_weight, want_grads=False)


def backward(plan_values, real_feats, real_classes, synth_attrs, synth_noises,
             synth_classes, g: GeneratorParams, f: PredictorParams, class_attrs,
             reg_weight: float) -> BackwardResult:
    """Analytic gradients of the fixed-plan objective for every parameter
    block of the generator and predictor."""
    return _assemble(plan_values, real_feats, real_classes, synth_attrs, synth_noises,
                     synth_classes, g, f, class_attrs, reg_weight, want_grads=True)
