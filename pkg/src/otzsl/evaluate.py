"""Classifier training on generated features and the three test protocols.

standard / transductive: a U-way linear softmax classifier is trained purely
on features generated for the unseen classes and scored on the real unseen
test split (mean per-class top-1, optionally top-k).

generalized: an (S+U)-way classifier is trained on features generated for all
classes, optionally together with the real seen training data, and scored on
both test splits; the headline number is the harmonic mean of the seen and
unseen per-class accuracies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import AttributeMatrix, FeatureDataset
from .errors import ConfigError, DataFormatError
from .generator import GeneratorParams
from .linalg import log_softmax_rows
from .mlp import adam_init, adam_step
from .rng import SeededRng
from .training import synthesize_class_features


@dataclass(frozen=True)
class ClassifierConfig:
    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 128

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be at least 1")


@dataclass
class ClassifierParams:
    """Linear softmax classifier; row c of W scores class class_id_map[c]."""

    W: np.ndarray
    b: np.ndarray
    class_id_map: tuple[int, ...]

    def __post_init__(self):
        self.class_id_map = tuple(int(c) for c in self.class_id_map)
        if len(set(self.class_id_map)) != len(self.class_id_map):
            raise ValueError("class_id_map has duplicates")
        if self.W.shape[0] != len(self.class_id_map) or self.b.shape != (self.W.shape[0],):
            raise ValueError(
                f"inconsistent classifier shapes: W {self.W.shape}, b {self.b.shape}, "
                f"{len(self.class_id_map)} classes"
            )


def train_softmax(features, labels, classes, cfg: ClassifierConfig,
                  rng: SeededRng) -> ClassifierParams:
    """Minimize mean cross-entropy with Adam from a zero initialization;
    minibatch order is reshuffled each epoch from the given stream."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    classes = tuple(int(c) for c in classes)
    n, dim = features.shape
    if labels.shape[0] != n:
        raise ValueError(f"{n} rows but {labels.shape[0]} labels")
    local = {c: i for i, c in enumerate(classes)}
    for c in classes:
        if not np.any(labels == c):
            raise ValueError(f"class {c} has no training samples")
    unknown = set(labels.tolist()) - set(classes)
    if unknown:
        raise ValueError(f"labels {sorted(unknown)} missing from the class list")
    y = np.array([local[int(c)] for c in labels], dtype=np.int64)

    k = len(classes)
    W = np.zeros((k, dim))
    b = np.zeros(k)
    state = adam_init([W, b], learning_rate=cfg.learning_rate)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x = features[idx]
            log_p = log_softmax_rows(x @ W.T + b)
            grad_logits = np.exp(log_p)
            grad_logits[np.arange(idx.size), y[idx]] -= 1.0
            grad_logits /= idx.size
            (W, b), state = adam_step([W, b], [grad_logits.T @ x, grad_logits.sum(axis=0)], state)
    return ClassifierParams(W=W, b=b, class_id_map=classes)


def classify_scores(clf: ClassifierParams, features) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    return features @ clf.W.T + clf.b


def predict_ids(clf: ClassifierParams, features) -> np.ndarray:
    scores = classify_scores(clf, features)
    ids = np.asarray(clf.class_id_map, dtype=np.int64)
    return ids[scores.argmax(axis=1)]


def per_class_top1(predictions, labels, classes):
    """Within-class accuracies and their unweighted mean.

    Returns (per-class dict, mean, classes with no test samples). Empty
    classes are excluded from the mean rather than dividing by zero.
    """
    predictions = np.asarray(predictions, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if predictions.shape != labels.shape:
        raise ValueError(f"{predictions.shape[0]} predictions vs {labels.shape[0]} labels")
    per_class = {}
    missing = []
    for c in classes:
        mask = labels == c
        if not mask.any():
            missing.append(int(c))
            continue
        per_class[int(c)] = float((predictions[mask] == c).mean())
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return per_class, mean, tuple(missing)


def per_class_topk(scores, class_id_map, labels, classes, k: int):
    """Like per_class_top1 but a sample counts as correct when its label is
    among its k highest-scoring classes."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    ids = np.asarray(class_id_map, dtype=np.int64)
    if not 1 <= k <= ids.size:
        raise ValueError(f"k must be in 1..{ids.size}, got {k}")
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    hits = (ids[order] == labels[:, None]).any(axis=1)
    per_class = {}
    missing = []
    for c in classes:
        mask = labels == c
        if not mask.any():
            missing.append(int(c))
            continue
        per_class[int(c)] = float(hits[mask].mean())
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return per_class, mean, tuple(missing)


def harmonic_mean(a_s: float, a_u: float) -> float:
    """2 a b / (a + b), with the both-zero case defined as 0."""
    for name, v in (("seen accuracy", a_s), ("unseen accuracy", a_u)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} {v} outside [0, 1]")
    if a_s == a_u:
        # exact by definition; also covers the 0/0 case, and the formula
        # below would drift an ulp for some equal inputs
        return a_s
    return 2.0 * a_s * a_u / (a_s + a_u)


@dataclass(frozen=True)
class EvalConfig:
    n_synth_per_class: int = 100
    seed: int = 0
    top_k: int | None = None
    include_real_seen: bool = True
    classifier: ClassifierConfig = ClassifierConfig()

    def __post_init__(self):
        if self.n_synth_per_class < 1:
            raise ConfigError(f"n_synth_per_class must be positive, got {self.n_synth_per_class}")
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError(f"top_k must be positive, got {self.top_k}")


@dataclass
class EvalReport:
    mode: str
    per_class: dict[int, float]
    A_u: float
    A_s: float | None
    H: float | None
    top_k: float | None
    confusion: dict[int, dict[int, int]]
    n_synth_per_class: int
    seed: int


def _confusion(predictions, labels) -> dict[int, dict[int, int]]:
    out: dict[int, dict[int, int]] = {}
    for p, t in zip(predictions.tolist(), labels.tolist()):
        out.setdefault(int(t), {})
        out[int(t)][int(p)] = out[int(t)].get(int(p), 0) + 1
    return out


def evaluate(mode: str, g: GeneratorParams, attrs: AttributeMatrix,
             data: FeatureDataset, cfg: EvalConfig) -> EvalReport:
    if mode not in ("standard", "generalized", "transductive"):
        raise ConfigError(f"unknown evaluation mode {mode!r}")
    if data.unseen_test[0].shape[0] == 0:
        raise DataFormatError("unseen test split is empty; nothing to evaluate")

    rng = SeededRng(cfg.seed)
    synth_rng, clf_rng = rng.split(1), rng.split(2)

    if mode in ("standard", "transductive"):
        classes = attrs.unseen_ids
        feats, labels = synthesize_class_features(g, attrs, classes,
                                                  cfg.n_synth_per_class, synth_rng)
        clf = train_softmax(feats, labels, classes, cfg.classifier, clf_rng)
        test_feats, test_labels = data.unseen_test
        pred = predict_ids(clf, test_feats)
        per_class, a_u, _ = per_class_top1(pred, test_labels, classes)
        top_k = None
        if cfg.top_k is not None:
            scores = classify_scores(clf, test_feats)
            _, top_k, _ = per_class_topk(scores, clf.class_id_map, test_labels,
                                         classes, cfg.top_k)
        return EvalReport(
            mode=mode, per_class=per_class, A_u=a_u, A_s=None, H=None, top_k=top_k,
            confusion=_confusion(pred, test_labels),
            n_synth_per_class=cfg.n_synth_per_class, seed=cfg.seed,
        )

    if data.seen_test[0].shape[0] == 0:
        raise DataFormatError("seen test split is empty; generalized mode needs it")
    classes = tuple(range(attrs.n_classes))
    feats, labels = synthesize_class_features(g, attrs, classes,
                                              cfg.n_synth_per_class, synth_rng)
    if cfg.include_real_seen:
        feats = np.vstack([data.seen_train[0], feats])
        labels = np.concatenate([data.seen_train[1], labels])
    clf = train_softmax(feats, labels, classes, cfg.classifier, clf_rng)

    seen_feats, seen_labels = data.seen_test
    unseen_feats, unseen_labels = data.unseen_test
    pred_seen = predict_ids(clf, seen_feats)
    pred_unseen = predict_ids(clf, unseen_feats)
    per_seen, a_s, _ = per_class_top1(pred_seen, seen_labels, attrs.seen_ids)
    per_unseen, a_u, _ = per_class_top1(pred_unseen, unseen_labels, attrs.unseen_ids)
    top_k = None
    if cfg.top_k is not None:
        scores = np.vstack([classify_scores(clf, seen_feats), classify_scores(clf, unseen_feats)])
        all_labels = np.concatenate([seen_labels, unseen_labels])
        _, top_k, _ = per_class_topk(scores, clf.class_id_map, all_labels, classes, cfg.top_k)
    all_pred = np.concatenate([pred_seen, pred_unseen])
    all_true = np.concatenate([seen_labels, unseen_labels])
    return EvalReport(
        mode=mode, per_class={**per_seen, **per_unseen}, A_u=a_u, A_s=a_s,
        H=harmonic_mean(a_s, a_u), top_k=top_k,
        confusion=_confusion(all_pred, all_true),
        n_synth_per_class=cfg.n_synth_per_class, seed=cfg.seed,
    )


def report_json_dict(report: EvalReport) -> dict:
    """JSON form of a report; seen-side keys appear only when measured."""
    out = {
        "mode": report.mode,
        "per_class": {str(c): v for c, v in sorted(report.per_class.items())},
        "A_u": report.A_u,
        "top_k": report.top_k,
        "n_synth_per_class": report.n_synth_per_class,
        "seed": report.seed,
    }
    if report.A_s is not None:
        out["A_s"] = report.A_s
        out["H"] = report.H
    return out


def save_report(report: EvalReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report_json_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
