"""Training objectives: margin-softmax classification (CosFace/ArcFace),
pair-based HIB, MLS maximization (PFE), sampled classification (DUL-cls),
density regression to class centroids (DUL-reg / SCF), posterior softmax
(vMF-FL) and the sampled-softmax objective with per-class concentrations.

Every function returns a scalar loss Node built on the autodiff graph.
Monte-Carlo losses accept a `draws` argument so a caller can pin the
random draws (gradient checks evaluate the loss twice with identical
draws).
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .distributions import LOG_2PI, log_unit_sphere_area, vmf_canonical_draws
from .encoder import EncoderModel, NormalNodes, VmfNodes
from .errors import ConfigurationError, ContractError

METHODS = ("cosface", "arcface", "hib", "pfe", "dul_cls", "dul_reg",
           "scf", "vmf_fl", "vmf_loss", "dul_reg_cls")


@dataclass
class LossConfig:
    method: str = "dul_cls"
    scale: float = 16.0
    margin: float = 0.1
    kl_weight: float = 0.01
    mc_samples: int = 8
    hib_alpha_init: float = 1.0
    hib_beta_init: float = 0.0
    vmf_beta_init: float = 10.0
    class_kappa_init: float = 20.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.scale <= 0:
            raise ConfigurationError("scale must be > 0")
        if self.margin < 0:
            raise ConfigurationError("margin must be >= 0")
        if self.kl_weight < 0:
            raise ConfigurationError("kl_weight must be >= 0")
        if self.mc_samples < 1:
            raise ConfigurationError("mc_samples must be >= 1")


@dataclass(frozen=True)
class StageFlags:
    train_backbone: bool = True
    train_targets: bool = True
    train_uncertainty: bool = True

    def __post_init__(self):
        if not (self.train_backbone or self.train_targets or self.train_uncertainty):
            raise ConfigurationError("at least one stage flag must be set")


# graph-level distribution formulas -----------------------------------

def normal_log_pdf_nodes(dist: NormalNodes, z) -> Node:
    """log N(z; mu, sigma^2) per row; z is a constant array or Node."""
    z = ad.as_node(z)
    lv = dist.log_var
    quad = ad.power(z - dist.mu, 2.0) * ad.exp(-lv)
    terms = quad + lv + LOG_2PI
    return -0.5 * ad.reduce_sum(_broadcast_like(terms, quad), axis=-1)


def _broadcast_like(node: Node, like: Node) -> Node:
    # additions already broadcast; sum needs full width when log_var is shared
    if node.value.shape == like.value.shape:
        return node
    return node + ad.constant(np.zeros(like.value.shape))


def vmf_log_normalizer_nodes(dim: int, kappa: Node) -> Node:
    v = dim / 2.0 - 1.0
    return v * ad.log(kappa) - (dim / 2.0) * LOG_2PI - ad.log_bessel_i(v, kappa)


def vmf_log_pdf_nodes(dist: VmfNodes, z) -> Node:
    z = ad.as_node(z)
    cos = ad.reduce_sum(dist.mu * z, axis=-1, keepdims=True)
    out = vmf_log_normalizer_nodes(dist.mu.shape[-1], dist.kappa) + dist.kappa * cos
    return ad.reduce_sum(out, axis=-1)  # (B, 1) -> (B,)


def kl_to_standard_nodes(dist: NormalNodes) -> Node:
    lv = dist.log_var
    terms = ad.exp(lv) + ad.power(dist.mu, 2.0) - 1.0 - lv
    return 0.5 * ad.reduce_sum(terms, axis=-1)


def mls_normal_nodes(mu1: Node, lv1: Node, mu2: Node, lv2: Node) -> Node:
    vsum = ad.exp(lv1) + ad.exp(lv2)
    quad = ad.power(mu1 - mu2, 2.0) * ad.power(vsum, -1.0)
    terms = quad + _broadcast_like(ad.log(vsum) + LOG_2PI, quad)
    return -0.5 * ad.reduce_sum(terms, axis=-1)


def mls_vmf_nodes(dim: int, mu1: Node, k1: Node, mu2: Node, k2: Node) -> Node:
    combined = k1 * mu1 + k2 * mu2
    k3 = ad.sqrt(ad.reduce_sum(ad.power(combined, 2.0), axis=-1, keepdims=True) + 1e-24)
    out = (vmf_log_normalizer_nodes(dim, k1)
           + vmf_log_normalizer_nodes(dim, k2)
           - vmf_log_normalizer_nodes(dim, k3))
    return ad.reduce_sum(out, axis=-1)


def sample_normal_nodes(dist: NormalNodes, eps: np.ndarray) -> Node:
    """Reparameterized draw with fixed eps; differentiable in mu, log_var."""
    return dist.mu + ad.exp(0.5 * dist.log_var) * ad.constant(eps)


def sample_vmf_nodes(mu: Node, canonical: np.ndarray) -> Node:
    """Householder reflection carrying e1 onto each unit row of mu,
    applied to constant canonical draws; differentiable in mu only."""
    d = mu.shape[-1]
    e1 = np.zeros(d)
    e1[0] = 1.0
    u_raw = mu - ad.constant(e1)
    n2 = ad.reduce_sum(ad.power(u_raw, 2.0), axis=-1, keepdims=True)
    u = u_raw * ad.power(n2 + 1e-24, -0.5)
    c = ad.constant(canonical)
    dots = ad.reduce_sum(u * c, axis=-1, keepdims=True)
    return c - 2.0 * u * dots


# classification heads -------------------------------------------------

def _prep_logits(logits: Node, y) -> tuple[Node, np.ndarray]:
    if logits.value.ndim == 1:
        logits = ad.reshape(logits, (1, logits.value.shape[0]))
        y = np.asarray([y], dtype=int)
    else:
        y = np.asarray(y, dtype=int)
    n_classes = logits.value.shape[1]
    if np.any(y < 0) or np.any(y >= n_classes):
        raise ContractError(f"class index out of range [0, {n_classes})")
    return logits, y


def _one_hot(y: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((y.size, n_classes))
    out[np.arange(y.size), y] = 1.0
    return out


def _cross_entropy(adjusted: Node, onehot: np.ndarray) -> Node:
    picked = ad.reduce_sum(adjusted * ad.constant(onehot), axis=1)
    return ad.reduce_mean(ad.log_sum_exp(adjusted, axis=1) - picked)


def cosface_loss(logits: Node, y, scale: float, margin: float) -> Node:
    """Additive-margin softmax: the true-class cosine is reduced by the
    margin, everything is scaled, then standard cross-entropy."""
    logits, y = _prep_logits(logits, y)
    onehot = _one_hot(y, logits.value.shape[1])
    adjusted = scale * (logits - margin * ad.constant(onehot))
    return _cross_entropy(adjusted, onehot)


def arcface_loss(logits: Node, y, scale: float, margin: float) -> Node:
    """Angular-margin softmax: the true-class logit becomes
    cos(arccos(logit) + margin), via the trig identity so only graph
    primitives are used."""
    logits, y = _prep_logits(logits, y)
    if np.any(np.abs(logits.value) > 1.0 + 1e-6):
        raise ContractError("arcface_loss: logits must lie in [-1, 1]")
    z = ad.clip(logits, -1.0, 1.0)
    onehot = _one_hot(y, logits.value.shape[1])
    sin_theta = ad.sqrt(1.0 - ad.power(z, 2.0) + 1e-14)
    modified = math.cos(margin) * z - math.sin(margin) * sin_theta
    oh = ad.constant(onehot)
    adjusted = scale * (z * (1.0 - oh) + modified * oh)
    return _cross_entropy(adjusted, onehot)


# probabilistic objectives ---------------------------------------------

def hib_match_prob(z1: Node, z2: Node, alpha: Node, beta: Node) -> Node:
    """Mean over all sample pairs of sigmoid(-alpha * ||z1 - z2|| + beta).

    z1, z2 have shape (K, D) for one pair or (K, B, D) for a batch of
    pairs; the result is scalar or (B,).
    """
    if z1.value.ndim == 2:
        z1 = ad.reshape(z1, (z1.value.shape[0], 1, z1.value.shape[1]))
        z2 = ad.reshape(z2, (z2.value.shape[0], 1, z2.value.shape[1]))
        squeeze = True
    else:
        squeeze = False
    k1, b, d = z1.value.shape
    k2 = z2.value.shape[0]
    z1e = ad.reshape(z1, (k1, 1, b, d))
    z2e = ad.reshape(z2, (1, k2, b, d))
    dist = ad.sqrt(ad.reduce_sum(ad.power(z1e - z2e, 2.0), axis=-1) + 1e-24)
    match = ad.sigmoid(-alpha * dist + beta)
    p = ad.reduce_mean(ad.reduce_mean(match, axis=0), axis=0)
    return ad.reduce_sum(p) if squeeze else p


def hib_loss(x1: np.ndarray, x2: np.ndarray, same: np.ndarray,
             model: EncoderModel, alpha: Node, beta: Node,
             cfg: LossConfig, rng: np.random.Generator | None,
             draws: tuple[np.ndarray, np.ndarray] | None = None) -> Node:
    """Binary cross-entropy on the sampled match probability plus the
    KL regularizer that keeps both predicted normals near N(0, I)."""
    if model.config.normalize_mean or model.config.shared_variance:
        raise ConfigurationError(
            "hib_loss expects unnormalized means and per-dimension variance")
    d1, _ = model.forward_nodes(x1)
    d2, _ = model.forward_nodes(x2)
    if not isinstance(d1, NormalNodes):
        raise ConfigurationError("hib_loss requires the normal distribution")
    k = cfg.mc_samples
    b, e = d1.mu.value.shape
    if draws is None:
        eps1 = rng.standard_normal((k, b, e))
        eps2 = rng.standard_normal((k, b, e))
    else:
        eps1, eps2 = draws
    z1 = sample_normal_nodes(d1, eps1)
    z2 = sample_normal_nodes(d2, eps2)
    p = hib_match_prob(z1, z2, alpha, beta)
    p = ad.clip(p, 1e-12, 1.0 - 1e-12)
    same = np.asarray(same, dtype=np.float64)
    bce = -(ad.constant(same) * ad.log(p)
            + ad.constant(1.0 - same) * ad.log(1.0 - p))
    kl = kl_to_standard_nodes(d1) + kl_to_standard_nodes(d2)
    return ad.reduce_mean(bce + cfg.kl_weight * kl)


def pfe_loss(x: np.ndarray, y: np.ndarray, model: EncoderModel,
             cfg: LossConfig) -> Node | None:
    """Mean negative MLS over all same-class pairs in the batch.

    Returns None (skip-batch signal) when the batch has no positive pair.
    """
    y = np.asarray(y)
    ii, jj = np.triu_indices(y.size, k=1)
    keep = y[ii] == y[jj]
    ii, jj = ii[keep], jj[keep]
    if ii.size == 0:
        return None
    dist, _ = model.forward_nodes(x)
    if isinstance(dist, NormalNodes):
        mls = mls_normal_nodes(ad.take(dist.mu, ii), ad.take(dist.log_var, ii),
                               ad.take(dist.mu, jj), ad.take(dist.log_var, jj))
    else:
        mls = mls_vmf_nodes(dist.mu.shape[-1],
                            ad.take(dist.mu, ii), ad.take(dist.kappa, ii),
                            ad.take(dist.mu, jj), ad.take(dist.kappa, jj))
    return -ad.reduce_mean(mls)


def dul_cls_loss(x: np.ndarray, y: np.ndarray, model: EncoderModel,
                 targets: Node, cfg: LossConfig,
                 rng: np.random.Generator | None,
                 draws: list[np.ndarray] | None = None) -> Node:
    """Expected margin-softmax loss over reparameterized samples plus a
    KL regularizer.

    Samples are L2-normalized before the classification head.  The vMF
    variant draws through the Householder map (no kappa gradient and no
    KL term; kappa trains only through density-based objectives).
    """
    dist, _ = model.forward_nodes(x)
    y = np.asarray(y, dtype=int)
    a_t = ad.transpose(ad.l2_normalize(targets, axis=-1))
    k = cfg.mc_samples
    total: Node | None = None
    for i in range(k):
        if isinstance(dist, NormalNodes):
            if draws is None:
                eps = rng.standard_normal(dist.mu.value.shape)
            else:
                eps = draws[i]
            z = sample_normal_nodes(dist, eps)
        else:
            if draws is None:
                canon = vmf_canonical_draws(dist.kappa.value[:, 0],
                                            dist.mu.value.shape[-1], rng)
            else:
                canon = draws[i]
            z = sample_vmf_nodes(dist.mu, canon)
        logits = ad.l2_normalize(z, axis=-1) @ a_t
        ce = cosface_loss(logits, y, cfg.scale, cfg.margin)
        total = ce if total is None else total + ce
    loss = (1.0 / k) * total
    if isinstance(dist, NormalNodes):
        loss = loss + cfg.kl_weight * ad.reduce_mean(kl_to_standard_nodes(dist))
    return loss


def dul_reg_loss(x: np.ndarray, y: np.ndarray, model: EncoderModel,
                 target_matrix: np.ndarray, cfg: LossConfig) -> Node:
    """Negative log-density of the frozen class centroid under the
    predicted distribution (regression to targets)."""
    y = np.asarray(y, dtype=int)
    goals = np.asarray(target_matrix, dtype=np.float64)[y]
    dist, _ = model.forward_nodes(x)
    if isinstance(dist, NormalNodes):
        lp = normal_log_pdf_nodes(dist, goals)
    else:
        lp = vmf_log_pdf_nodes(dist, goals)
    return -ad.reduce_mean(lp)


def vmf_fl_loss(x: np.ndarray, y: np.ndarray, model: EncoderModel,
                targets: Node, cfg: LossConfig) -> Node:
    """Softmax over per-class log densities evaluated at the centroids;
    shared normalizers cancel, so the vMF form reduces to a softmax over
    kappa-scaled cosines."""
    dist, _ = model.forward_nodes(x)
    y = np.asarray(y, dtype=int)
    a_n = ad.l2_normalize(targets, axis=-1)
    if isinstance(dist, VmfNodes):
        scores = dist.kappa * (dist.mu @ ad.transpose(a_n))
    else:
        b, d = dist.mu.value.shape
        c = targets.value.shape[0]
        mu = ad.reshape(dist.mu, (b, 1, d))
        lv = ad.reshape(dist.log_var, (b, 1, dist.log_var.value.shape[-1]))
        cents = ad.reshape(a_n, (1, c, d))
        quad = ad.power(cents - mu, 2.0) * ad.exp(-lv)
        scores = -0.5 * ad.reduce_sum(quad + _broadcast_like(lv + LOG_2PI, quad),
                                      axis=-1)
    onehot = _one_hot(y, scores.value.shape[1])
    return _cross_entropy(scores, onehot)


def vmf_sampled_softmax_loss(x: np.ndarray, y: np.ndarray, model: EncoderModel,
                             targets: Node, class_kappa: Node, beta: Node,
                             cfg: LossConfig, rng: np.random.Generator | None,
                             draws: list[tuple[np.ndarray, np.ndarray]] | None = None
                             ) -> Node:
    """Monte-Carlo softmax over cosines between a draw from the predicted
    embedding distribution and one draw from every class distribution."""
    dist, _ = model.forward_nodes(x)
    if not isinstance(dist, VmfNodes):
        raise ConfigurationError("vmf_sampled_softmax_loss requires the vMF variant")
    y = np.asarray(y, dtype=int)
    d = dist.mu.value.shape[-1]
    a_n = ad.l2_normalize(targets, axis=-1)
    k = cfg.mc_samples
    onehot = _one_hot(y, targets.value.shape[0])
    total: Node | None = None
    for i in range(k):
        if draws is None:
            canon_b = vmf_canonical_draws(dist.kappa.value[:, 0], d, rng)
            canon_c = vmf_canonical_draws(np.asarray(class_kappa.value), d, rng)
        else:
            canon_b, canon_c = draws[i]
        z = sample_vmf_nodes(dist.mu, canon_b)
        zc = sample_vmf_nodes(a_n, canon_c)
        scores = beta * (z @ ad.transpose(zc))
        ce = _cross_entropy(scores, onehot)
        total = ce if total is None else total + ce
    return (1.0 / k) * total
