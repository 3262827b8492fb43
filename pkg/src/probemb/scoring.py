"""Similarity scores between predicted distributions.

Four families: distance between means, Monte-Carlo expected distance,
and the mutual likelihood score (closed form for both distribution
types).  All scores are oriented so that larger means more similar
(L2 distances are negated).  MLS is computed and returned in log space.

score() handles one pair; score_matrix() computes the full query x
gallery matrix used by the retrieval metrics.  The matrix form of the
sampled score draws one set of samples per item and reuses it across
pairs, which keeps the estimator unbiased per pair at a fraction of the
cost of per-pair draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import (
    DiagonalNormal,
    PredictedDistribution,
    VonMisesFisher,
    sample_normal,
    sample_vmf,
    vmf_log_normalizer,
    LOG_2PI,
)
from .errors import ConfigurationError, ContractError, DegenerateInputError

DEFAULT_SAMPLE_COUNT = 8


@dataclass(frozen=True)
class ScoringKind:
    """Scoring selector: family in {"mean", "sampled", "mls"} with a
    metric of "cosine" or "l2" (plus "sq_l2", a test-only mode of the
    sampled family) and the Monte-Carlo sample count for "sampled"."""

    family: str
    metric: str = "cosine"
    samples: int = DEFAULT_SAMPLE_COUNT

    def __post_init__(self):
        if self.family not in ("mean", "sampled", "mls"):
            raise ConfigurationError(f"unknown scoring family {self.family!r}")
        if self.family == "sampled" and self.samples < 1:
            raise ConfigurationError("sampled scoring needs samples >= 1")
        metrics = ("cosine", "l2", "sq_l2") if self.family == "sampled" else ("cosine", "l2")
        if self.family != "mls" and self.metric not in metrics:
            raise ConfigurationError(f"unknown metric {self.metric!r}")

    @property
    def label(self) -> str:
        if self.family == "mls":
            return "mls"
        return f"{self.family}_{self.metric}"


MEAN_COSINE = ScoringKind("mean", "cosine")
MEAN_L2 = ScoringKind("mean", "l2")
MLS = ScoringKind("mls")


def parse_scoring(label: str, samples: int = DEFAULT_SAMPLE_COUNT) -> ScoringKind:
    if label == "mls":
        return ScoringKind("mls")
    try:
        family, metric = label.split("_", 1)
        return ScoringKind(family, metric, samples)
    except ValueError:
        raise ConfigurationError(f"unknown scoring kind {label!r}") from None


def _means(d: PredictedDistribution) -> np.ndarray:
    return d.mu


def mean_score(d1: PredictedDistribution, d2: PredictedDistribution,
               metric: str = "cosine") -> float:
    """Similarity of the two predicted means: cosine, or negated L2."""
    m1, m2 = _means(d1), _means(d2)
    if m1.shape[-1] != m2.shape[-1]:
        raise ContractError("mean_score: dimension mismatch")
    if metric == "cosine":
        n1, n2 = np.linalg.norm(m1), np.linalg.norm(m2)
        if n1 == 0.0 or n2 == 0.0:
            raise DegenerateInputError("mean_score: zero-norm mean under cosine")
        return float(m1 @ m2 / (n1 * n2))
    if metric == "l2":
        return float(-np.linalg.norm(m1 - m2))
    raise ConfigurationError(f"mean_score: unknown metric {metric!r}")


def _draws(d: PredictedDistribution, k: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(d, DiagonalNormal):
        eps = rng.standard_normal((k,) + d.mu.shape)
        return sample_normal(d, eps)
    return sample_vmf(d, k, rng)


def sampled_score(d1: PredictedDistribution, d2: PredictedDistribution,
                  k: int, metric: str, rng: np.random.Generator) -> float:
    """Monte-Carlo expected similarity over k draws from each side.

    Cosine returns the mean cosine; l2 returns minus the mean distance;
    sq_l2 (test mode) returns minus the mean squared distance.
    """
    if k < 1:
        raise ContractError("sampled_score: k must be >= 1")
    z1 = _draws(d1, k, rng)
    z2 = _draws(d2, k, rng)
    if metric == "cosine":
        z1 = z1 / np.linalg.norm(z1, axis=-1, keepdims=True)
        z2 = z2 / np.linalg.norm(z2, axis=-1, keepdims=True)
        return float((z1 @ z2.T).mean())
    diff = z1[:, None, :] - z2[None, :, :]
    if metric == "l2":
        return float(-np.sqrt((diff ** 2).sum(axis=-1)).mean())
    if metric == "sq_l2":
        return float(-(diff ** 2).sum(axis=-1).mean())
    raise ConfigurationError(f"sampled_score: unknown metric {metric!r}")


def mls_normal(d1: DiagonalNormal, d2: DiagonalNormal):
    """log integral of the product of two diagonal normals (closed form)."""
    if d1.dim != d2.dim:
        raise ContractError("mls_normal: dimension mismatch")
    v1 = np.broadcast_to(np.exp(d1.log_var), d1.mu.shape)
    v2 = np.broadcast_to(np.exp(d2.log_var), d2.mu.shape)
    vsum = v1 + v2
    terms = (d1.mu - d2.mu) ** 2 / vsum + np.log(vsum) + LOG_2PI
    out = -0.5 * terms.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def mls_vmf(d1: VonMisesFisher, d2: VonMisesFisher):
    """log integral of the product of two vMF densities (closed form).

    The product is an unnormalized vMF with kappa3 = ||k1 mu1 + k2 mu2||;
    kappa3 = 0 (antipodal means, equal kappas) falls back to the uniform
    normalizer limit.
    """
    if d1.dim != d2.dim:
        raise ContractError("mls_vmf: dimension mismatch")
    k1 = np.asarray(d1.kappa)[..., None]
    k2 = np.asarray(d2.kappa)[..., None]
    combined = k1 * d1.mu + k2 * d2.mu
    kappa3 = np.linalg.norm(combined, axis=-1)
    out = (vmf_log_normalizer(d1.dim, d1.kappa)
           + vmf_log_normalizer(d2.dim, d2.kappa)
           - vmf_log_normalizer(d1.dim, kappa3))
    return float(out) if np.ndim(out) == 0 else out


def score(d1: PredictedDistribution, d2: PredictedDistribution,
          kind: ScoringKind, rng: np.random.Generator | None = None) -> float:
    """Dispatch a single-pair similarity for the given scoring kind."""
    if kind.family == "mean":
        return mean_score(d1, d2, kind.metric)
    if kind.family == "sampled":
        if rng is None:
            raise ContractError("sampled scoring requires an rng")
        return sampled_score(d1, d2, kind.samples, kind.metric, rng)
    # MLS
    if isinstance(d1, DiagonalNormal) and isinstance(d2, DiagonalNormal):
        return float(mls_normal(d1, d2))
    if isinstance(d1, VonMisesFisher) and isinstance(d2, VonMisesFisher):
        return float(mls_vmf(d1, d2))
    raise ConfigurationError("MLS between mixed distribution families")


# Batched scoring -----------------------------------------------------

def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    g = a @ b.T
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * g
    return np.maximum(sq, 0.0)


def _normalize_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError("cosine scoring: zero-norm mean")
    return m / norms


def score_matrix(dq: PredictedDistribution, dg: PredictedDistribution,
                 kind: ScoringKind, rng: np.random.Generator | None = None,
                 chunk: int = 128) -> np.ndarray:
    """(N, M) score matrix between batched query and gallery distributions."""
    if type(dq) is not type(dg):
        raise ConfigurationError("score_matrix: mixed distribution families")
    if kind.family == "mean":
        mq, mg = dq.mu, dg.mu
        if kind.metric == "cosine":
            return _normalize_rows(mq) @ _normalize_rows(mg).T
        return -np.sqrt(_pairwise_sq_dists(mq, mg))
    if kind.family == "sampled":
        if rng is None:
            raise ContractError("sampled scoring requires an rng")
        zq = _draws(dq, kind.samples, rng)  # (K, N, D)
        zg = _draws(dg, kind.samples, rng)
        if kind.metric == "cosine":
            zq = zq / np.linalg.norm(zq, axis=-1, keepdims=True)
            zg = zg / np.linalg.norm(zg, axis=-1, keepdims=True)
            return zq.mean(axis=0) @ zg.mean(axis=0).T  # mean cos = dot of means
        k, n, _ = zq.shape
        m = zg.shape[1]
        out = np.zeros((n, m))
        for i in range(k):
            for j in range(k):
                sq = _pairwise_sq_dists(zq[i], zg[j])
                out += sq if kind.metric == "sq_l2" else np.sqrt(sq)
        return -out / (k * k)
    # MLS
    if isinstance(dq, DiagonalNormal):
        n, m = len(dq), len(dg)
        out = np.empty((n, m))
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            d1 = DiagonalNormal(dq.mu[lo:hi, None, :], dq.log_var[lo:hi, None, :])
            d2 = DiagonalNormal(dg.mu[None, :, :], dg.log_var[None, :, :])
            out[lo:hi] = mls_normal(d1, d2)
        return out
    kq = np.asarray(dq.kappa)
    kg = np.asarray(dg.kappa)
    combined_sq = (kq ** 2)[:, None] + (kg ** 2)[None, :] + \
        2.0 * (kq[:, None] * kg[None, :]) * (dq.mu @ dg.mu.T)
    kappa3 = np.sqrt(np.maximum(combined_sq, 0.0))
    zq = vmf_log_normalizer(dq.dim, kq)
    zg = vmf_log_normalizer(dg.dim, kg)
    return zq[:, None] + zg[None, :] - vmf_log_normalizer(dq.dim, kappa3)
