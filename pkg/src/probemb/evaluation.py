"""Retrieval, verification and confidence metrics.

Every sample acts as query against all others (self excluded); score
ties break by ascending gallery index and confidence ties by ascending
sample index so that reports are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .data import VerificationSet
from .distributions import PredictedDistribution
from .encoder import EncoderModel, class_logits, encode, prenorm_magnitude
from .errors import ConfigurationError, ContractError, DomainError
from .scoring import ScoringKind, score_matrix


@dataclass
class ConfidenceRecords:
    """Per-sample confidence, top-1 correctness flag and optional
    ground-truth quality."""

    confidence: np.ndarray
    nn_correct: np.ndarray
    quality: Optional[np.ndarray] = None

    def __post_init__(self):
        self.confidence = np.asarray(self.confidence, dtype=np.float64)
        self.nn_correct = np.asarray(self.nn_correct, dtype=bool)
        if len(self.confidence) != len(self.nn_correct):
            raise ContractError("ConfidenceRecords: column lengths differ")

    def __len__(self) -> int:
        return len(self.confidence)


def rank_gallery(scores: np.ndarray) -> np.ndarray:
    """(N, N-1) gallery orderings by descending score, self excluded,
    ties broken by ascending index."""
    s = np.array(scores, dtype=np.float64)
    n = s.shape[0]
    np.fill_diagonal(s, -np.inf)
    idx = np.arange(n)
    orders = np.empty((n, n - 1), dtype=int)
    for q in range(n):
        order = np.lexsort((idx, -s[q]))
        orders[q] = order[order != q][: n - 1]
    return orders


def retrieval_metrics(scores: np.ndarray, labels: np.ndarray
                      ) -> tuple[float, float, np.ndarray]:
    """(Recall@1, MAP@R, per-query top-1 correctness) from a square score
    matrix.  Queries whose class is a singleton are skipped for MAP@R;
    if every class is a singleton that metric is undefined."""
    labels = np.asarray(labels)
    n = len(labels)
    if n < 2:
        raise DomainError("retrieval metrics need at least 2 samples")
    orders = rank_gallery(scores)
    nn_correct = labels[orders[:, 0]] == labels
    recall1 = float(nn_correct.mean())
    aps = []
    for q in range(n):
        rel = labels[orders[q]] == labels[q]
        r = int(rel.sum())
        if r == 0:
            continue
        topr = rel[:r]
        prec = np.cumsum(topr) / np.arange(1, r + 1)
        aps.append(float((prec * topr).sum() / r))
    if not aps:
        raise DomainError("MAP@R undefined: every class is a singleton")
    return recall1, float(np.mean(aps)), nn_correct


def recall_at_1(dists: PredictedDistribution, labels, kind: ScoringKind,
                rng: np.random.Generator | None = None) -> float:
    scores = score_matrix(dists, dists, kind, rng)
    return retrieval_metrics(scores, labels)[0]


def map_at_r(dists: PredictedDistribution, labels, kind: ScoringKind,
             rng: np.random.Generator | None = None) -> float:
    scores = score_matrix(dists, dists, kind, rng)
    return retrieval_metrics(scores, labels)[1]


def _best_prefix_accuracy(sort_keys: np.ndarray, flag_in_prefix: np.ndarray) -> float:
    """Max accuracy over threshold cuts of the ascending sort of sort_keys,
    counting flag_in_prefix hits before the cut and misses after.

    Cuts are only placed between distinct key values (plus both ends),
    which is exactly the midpoint/±inf threshold sweep.
    """
    n = len(sort_keys)
    order = np.argsort(sort_keys, kind="stable")
    keys = sort_keys[order]
    hits = flag_in_prefix[order].astype(np.int64)
    prefix_hits = np.concatenate([[0], np.cumsum(hits)])
    total_miss = int((1 - hits).sum())
    miss_after = total_miss - np.concatenate([[0], np.cumsum(1 - hits)])
    valid = np.ones(n + 1, dtype=bool)
    valid[1:n] = keys[1:] != keys[:-1]  # no cutting inside a tie group
    correct = prefix_hits + miss_after
    return float(correct[valid].max() / n)


def verification_accuracy(pairs: VerificationSet, scores) -> float:
    """Best same/different-class accuracy over all score thresholds
    (midpoints of sorted unique scores plus both infinities)."""
    scores = np.asarray(scores, dtype=np.float64)
    if len(scores) == 0:
        raise ContractError("verification_accuracy: empty pairs")
    if len(scores) != len(pairs):
        raise ContractError("verification_accuracy: scores/pairs length mismatch")
    # predict same iff score >= t: below the cut "different" is correct
    return _best_prefix_accuracy(scores, ~pairs.same)


def ceda(records: ConfidenceRecords) -> float:
    """Confidence-based error detection accuracy: best accuracy, over
    confidence thresholds, of predicting a retrieval error whenever the
    confidence is at or below the threshold."""
    if len(records) == 0:
        raise ContractError("ceda: empty records")
    return _best_prefix_accuracy(records.confidence, ~records.nn_correct)


def filter_out_curve(records: ConfidenceRecords, rates: Sequence[float],
                     metric: Callable[[np.ndarray], Optional[float]]
                     ) -> list[tuple[float, Optional[float]]]:
    """Drop the floor(N * rate) lowest-confidence samples (ties by
    ascending index) and re-evaluate the metric on the kept indices.

    The metric callable may return None (or raise DomainError) when the
    remainder is too small; the point is then recorded as absent.
    """
    rates = list(rates)
    if any(r < 0.0 or r >= 1.0 for r in rates):
        raise ContractError("filter_out_curve: rates must lie in [0, 1)")
    if sorted(rates) != rates:
        raise ContractError("filter_out_curve: rates must be ascending")
    n = len(records)
    order = np.lexsort((np.arange(n), records.confidence))
    out: list[tuple[float, Optional[float]]] = []
    for rate in rates:
        drop = int(np.floor(n * rate))
        kept = np.sort(order[drop:])
        try:
            value = metric(kept)
        except DomainError:
            value = None
        out.append((rate, value))
    return out


def rankdata(values) -> np.ndarray:
    """Average ranks (1-based); ties share the mean of their rank range."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(confidence, quality) -> float:
    """Spearman rank correlation with average ranks for ties; a constant
    argument makes the correlation undefined and returns NaN."""
    a = np.asarray(confidence, dtype=np.float64)
    b = np.asarray(quality, dtype=np.float64)
    if len(a) != len(b) or len(a) < 3:
        raise ContractError("spearman: need equal lengths >= 3")
    ra, rb = rankdata(a), rankdata(b)
    da, db = ra - ra.mean(), rb - rb.mean()
    va, vb = (da * da).sum(), (db * db).sum()
    if va == 0.0 or vb == 0.0:
        return float("nan")
    return float((da * db).sum() / np.sqrt(va * vb))


def baseline_confidences(model: EncoderModel, xs: np.ndarray, kind: str,
                         scale: float = 16.0) -> np.ndarray:
    """Deterministic confidence baselines: maximum posterior class
    probability, or the mean-head magnitude before normalization."""
    if kind == "max_posterior":
        if model.targets is None:
            raise ConfigurationError(
                "max_posterior baseline needs a classification head")
        dist = encode(model, xs)
        logits = class_logits(model.target_embeddings, dist.mu)
        z = scale * logits
        z = z - z.max(axis=1, keepdims=True)
        probs = np.exp(z)
        probs /= probs.sum(axis=1, keepdims=True)
        return probs.max(axis=1)
    if kind == "magnitude":
        return np.asarray(prenorm_magnitude(model, xs))
    raise ConfigurationError(f"unknown confidence baseline {kind!r}")
