"""Diagonal-normal and von Mises-Fisher distributions over embedding space.

Containers hold plain float64 arrays and support batching: parameter
arrays of shape (D,) describe one distribution, (N, D) describe N of
them.  Densities, samplers, KL terms and scalar confidences are all
vectorized over the batch dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ContractError, DomainError, NumericalError
from .special import log_bessel_i

LOG_2PI = math.log(2.0 * math.pi)
_UNIT_TOL = 1e-9


def _check_finite(name: str, a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise ContractError(f"{name}: non-finite values")


@dataclass
class DiagonalNormal:
    """Normal with diagonal covariance; variance kept as log sigma^2.

    log_var broadcasts against mu, so a trailing dimension of 1 encodes a
    shared (isotropic) variance.
    """

    mu: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.log_var = np.asarray(self.log_var, dtype=np.float64)
        _check_finite("DiagonalNormal.mu", self.mu)
        _check_finite("DiagonalNormal.log_var", self.log_var)

    @property
    def dim(self) -> int:
        return self.mu.shape[-1]

    def __len__(self) -> int:
        return 1 if self.mu.ndim == 1 else self.mu.shape[0]

    def __getitem__(self, idx) -> "DiagonalNormal":
        return DiagonalNormal(self.mu[idx], self.log_var[idx])


@dataclass
class VonMisesFisher:
    """von Mises-Fisher on the unit sphere: unit mean direction mu and
    concentration kappa (kappa = 0 allowed for density evaluation only)."""

    mu: np.ndarray
    kappa: Union[np.ndarray, float]

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.kappa = np.asarray(self.kappa, dtype=np.float64)
        _check_finite("VonMisesFisher.mu", self.mu)
        _check_finite("VonMisesFisher.kappa", self.kappa)
        norms = np.linalg.norm(self.mu, axis=-1)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise ContractError("VonMisesFisher.mu must be unit-norm")
        if np.any(self.kappa < 0.0):
            raise ContractError("VonMisesFisher.kappa must be >= 0")

    @property
    def dim(self) -> int:
        return self.mu.shape[-1]

    def __len__(self) -> int:
        return 1 if self.mu.ndim == 1 else self.mu.shape[0]

    def __getitem__(self, idx) -> "VonMisesFisher":
        return VonMisesFisher(self.mu[idx], np.asarray(self.kappa)[idx])


PredictedDistribution = Union[DiagonalNormal, VonMisesFisher]


def normal_log_pdf(d: DiagonalNormal, z: np.ndarray):
    """log N(z; mu, diag(sigma^2)); batched over leading dimensions."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != d.dim:
        raise ContractError(
            f"normal_log_pdf: dimension mismatch {z.shape[-1]} vs {d.dim}")
    var = np.exp(d.log_var)
    quad = (z - d.mu) ** 2 / var
    terms = LOG_2PI + np.broadcast_to(d.log_var, quad.shape) + quad
    out = -0.5 * terms.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def log_unit_sphere_area(dim: int) -> float:
    """log surface area of the unit (dim-1)-sphere embedded in R^dim."""
    return math.log(2.0) + (dim / 2.0) * math.log(math.pi) - math.lgamma(dim / 2.0)


def vmf_log_normalizer(dim: int, kappa):
    """log C_dim(kappa) of the vMF density; kappa = 0 uses the analytic
    limit (uniform distribution on the sphere)."""
    if dim < 2:
        raise DomainError(f"vmf_log_normalizer: dim must be >= 2, got {dim}")
    kappa = np.asarray(kappa, dtype=np.float64)
    if np.any(kappa < 0.0):
        raise DomainError("vmf_log_normalizer: kappa must be >= 0")
    v = dim / 2.0 - 1.0
    out = np.full(kappa.shape, -log_unit_sphere_area(dim))
    pos = kappa > 0.0
    if np.any(pos):
        kp = kappa[pos] if kappa.ndim else kappa
        val = v * np.log(kp) - (dim / 2.0) * LOG_2PI - log_bessel_i(v, kp)
        if kappa.ndim:
            out[pos] = val
        else:
            out = np.asarray(val)
    return float(out) if out.ndim == 0 else out


def vmf_log_pdf(d: VonMisesFisher, z: np.ndarray):
    """log vMF(z; mu, kappa) for unit z (checked to 1e-6)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != d.dim:
        raise ContractError(
            f"vmf_log_pdf: dimension mismatch {z.shape[-1]} vs {d.dim}")
    norms = np.linalg.norm(z, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ContractError("vmf_log_pdf: z must be unit-norm")
    cos = (d.mu * z).sum(axis=-1)
    out = vmf_log_normalizer(d.dim, d.kappa) + d.kappa * cos
    return float(out) if np.ndim(out) == 0 else out


def sample_normal(d: DiagonalNormal, eps: np.ndarray) -> np.ndarray:
    """Reparameterized draw z = mu + sigma * eps for caller-provided eps."""
    eps = np.asarray(eps, dtype=np.float64)
    return d.mu + np.exp(0.5 * d.log_var) * eps


def _vmf_axial(kappa: np.ndarray, dim: int, rng: np.random.Generator,
               max_rounds: int = 1000) -> np.ndarray:
    """Axial components w = mu^T z via the Wood (1994) rejection scheme,
    one accepted value per kappa entry."""
    k = np.asarray(kappa, dtype=np.float64).ravel()
    d = dim - 1
    b = d / (np.sqrt(4.0 * k * k + d * d) + 2.0 * k)
    x0 = (1.0 - b) / (1.0 + b)
    c = k * x0 + d * np.log1p(-x0 * x0)
    w = np.empty(k.shape)
    pending = np.arange(k.size)
    for _ in range(max_rounds):
        if pending.size == 0:
            return w
        z = rng.beta(d / 2.0, d / 2.0, size=pending.size)
        prop = (1.0 - (1.0 + b[pending]) * z) / (1.0 - (1.0 - b[pending]) * z)
        logu = np.log(rng.uniform(size=pending.size))
        ok = k[pending] * prop + d * np.log1p(-x0[pending] * prop) - c[pending] >= logu
        w[pending[ok]] = prop[ok]
        pending = pending[~ok]
    raise NumericalError("sample_vmf: rejection sampler exceeded retry cap")


def vmf_canonical_draws(kappa, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draws from vMF with mean direction e1, one per kappa entry.

    Returns an array of shape kappa.shape + (dim,).
    """
    k = np.asarray(kappa, dtype=np.float64)
    if np.any(k <= 0.0):
        raise DomainError("sample_vmf: kappa must be > 0 for sampling")
    flat = k.ravel()
    w = _vmf_axial(flat, dim, rng)
    v = rng.standard_normal((flat.size, dim - 1))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    out = np.empty((flat.size, dim))
    out[:, 0] = w
    out[:, 1:] = np.sqrt(np.maximum(1.0 - w * w, 0.0))[:, None] * v
    return out.reshape(k.shape + (dim,))


def householder_apply(mu: np.ndarray, canonical: np.ndarray) -> np.ndarray:
    """Apply the reflection mapping e1 to each unit row of mu.

    mu has shape (..., D) and canonical the same; rows where mu ~= e1 use
    the identity (the reflection is degenerate there).
    """
    u = mu.copy()
    u[..., 0] -= 1.0
    n2 = (u * u).sum(axis=-1, keepdims=True)
    scale = np.where(n2 < 1e-24, 0.0, 2.0 / np.where(n2 == 0.0, 1.0, n2))
    dots = (u * canonical).sum(axis=-1, keepdims=True)
    return canonical - scale * dots * u


def sample_vmf(d: VonMisesFisher, size: int, rng: np.random.Generator) -> np.ndarray:
    """Exact vMF draws: Wood rejection for the axial part, then a
    Householder reflection carrying e1 onto mu.

    For a single distribution returns (size, D); for a batch of N
    distributions returns (size, N, D).
    """
    kappa = np.asarray(d.kappa, dtype=np.float64)
    if d.mu.ndim == 1:
        ks = np.broadcast_to(kappa, (size,))
        canon = vmf_canonical_draws(ks, d.dim, rng)
        return householder_apply(np.broadcast_to(d.mu, canon.shape), canon)
    n = d.mu.shape[0]
    ks = np.broadcast_to(kappa, (size, n))
    canon = vmf_canonical_draws(ks, d.dim, rng)
    return householder_apply(np.broadcast_to(d.mu, canon.shape), canon)


def kl_normal_to_standard(d: DiagonalNormal):
    """KL( N(mu, diag sigma^2) || N(0, I) ), always >= 0."""
    lv = np.broadcast_to(d.log_var, d.mu.shape)
    out = 0.5 * (np.exp(lv) + d.mu ** 2 - 1.0 - lv).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def confidence_of(d: PredictedDistribution):
    """Scalar confidence, decreasing in the distribution's entropy:
    -mean(log sigma^2) for normals, kappa for vMF."""
    if isinstance(d, DiagonalNormal):
        lv = np.broadcast_to(d.log_var, d.mu.shape)
        out = -lv.mean(axis=-1)
        return float(out) if out.ndim == 0 else out
    if isinstance(d, VonMisesFisher):
        out = np.asarray(d.kappa, dtype=np.float64)
        return float(out) if out.ndim == 0 else out + 0.0
    raise ContractError(f"confidence_of: unsupported distribution {type(d)!r}")
