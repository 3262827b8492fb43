"""Prediction pipeline: MLP backbone, affine mean head, 3-layer
uncertainty head, plus the classification head's target embeddings.

The same parameter Nodes serve training (graph building via
forward_nodes) and inference (encode, which evaluates the graph and
returns value-level distribution containers).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .distributions import DiagonalNormal, PredictedDistribution, VonMisesFisher
from .errors import ConfigurationError, ContractError

MODEL_MAGIC = b"PEMB1"


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int
    hidden_dims: tuple = (64, 64)
    embed_dim: int = 16
    distribution: str = "normal"  # "normal" | "vmf"
    normalize_mean: bool = True
    shared_variance: bool = True
    kappa_floor: float = 1e-3

    def __post_init__(self):
        if self.embed_dim < 2:
            raise ConfigurationError("embed_dim must be >= 2")
        if not self.hidden_dims:
            raise ConfigurationError("hidden_dims must be nonempty")
        if self.distribution not in ("normal", "vmf"):
            raise ConfigurationError(f"unknown distribution {self.distribution!r}")


@dataclass
class NormalNodes:
    """Graph-valued diagonal normal: mu (B, D), log_var (B, D) or (B, 1)."""
    mu: Node
    log_var: Node


@dataclass
class VmfNodes:
    """Graph-valued vMF: unit mu (B, D), kappa (B, 1) positive."""
    mu: Node
    kappa: Node


@dataclass
class EncoderModel:
    config: EncoderConfig
    params: dict[str, Node]
    targets: Optional[Node] = None

    def backbone_nodes(self, x: np.ndarray) -> Node:
        h: Node = ad.constant(np.atleast_2d(x))
        i = 0
        while f"backbone.{i}.w" in self.params:
            h = ad.relu(h @ self.params[f"backbone.{i}.w"] + self.params[f"backbone.{i}.b"])
            i += 1
        return h

    def forward_nodes(self, x: np.ndarray):
        """Build the graph for a batch; returns (dist nodes, prenorm mean)."""
        h = self.backbone_nodes(x)
        pre = h @ self.params["mean.w"] + self.params["mean.b"]
        mu = ad.l2_normalize(pre, axis=-1) if self.config.normalize_mean else pre
        u = ad.relu(h @ self.params["unc.0.w"] + self.params["unc.0.b"])
        u = ad.relu(u @ self.params["unc.1.w"] + self.params["unc.1.b"])
        raw = u @ self.params["unc.2.w"] + self.params["unc.2.b"]
        if self.config.distribution == "normal":
            return NormalNodes(mu=mu, log_var=raw), pre
        kappa = ad.softplus(raw) + self.config.kappa_floor
        return VmfNodes(mu=mu, kappa=kappa), pre

    @property
    def target_embeddings(self) -> np.ndarray:
        """Row-normalized class centroid matrix (value view)."""
        if self.targets is None:
            raise ConfigurationError("model has no classification head")
        t = self.targets.value
        return t / np.linalg.norm(t, axis=1, keepdims=True)

    def target_nodes(self) -> Node:
        if self.targets is None:
            raise ConfigurationError("model has no classification head")
        return ad.l2_normalize(self.targets, axis=-1)


def init_encoder(config: EncoderConfig, rng: np.random.Generator) -> EncoderModel:
    """He-initialized MLP encoder.

    The uncertainty head's final bias starts at 0 for normals (sigma^2 = 1)
    and at 10 for vMF so that training begins at a usable concentration.
    """
    params: dict[str, Node] = {}
    dims = [config.input_dim] + list(config.hidden_dims)
    for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
        params[f"backbone.{i}.w"] = ad.parameter(
            rng.standard_normal((din, dout)) * np.sqrt(2.0 / din), f"backbone.{i}.w")
        params[f"backbone.{i}.b"] = ad.parameter(np.zeros(dout), f"backbone.{i}.b")
    feat = dims[-1]
    params["mean.w"] = ad.parameter(
        rng.standard_normal((feat, config.embed_dim)) * np.sqrt(1.0 / feat), "mean.w")
    params["mean.b"] = ad.parameter(np.zeros(config.embed_dim), "mean.b")
    if config.distribution == "normal":
        out_dim = 1 if config.shared_variance else config.embed_dim
        final_bias = np.zeros(out_dim)
    else:
        out_dim = 1
        final_bias = np.full(out_dim, 10.0)
    widths = [feat, feat, feat, out_dim]
    for i in range(3):
        params[f"unc.{i}.w"] = ad.parameter(
            rng.standard_normal((widths[i], widths[i + 1])) * np.sqrt(2.0 / widths[i]),
            f"unc.{i}.w")
        params[f"unc.{i}.b"] = ad.parameter(
            final_bias if i == 2 else np.zeros(widths[i + 1]), f"unc.{i}.b")
    return EncoderModel(config=config, params=params)


def init_targets(n_classes: int, embed_dim: int, rng: np.random.Generator) -> Node:
    t = rng.standard_normal((n_classes, embed_dim))
    return ad.parameter(t / np.linalg.norm(t, axis=1, keepdims=True), "targets")


def encode(model: EncoderModel, x: np.ndarray) -> PredictedDistribution:
    """Value-level prediction; batched input gives a batched distribution."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    dist, _ = model.forward_nodes(x)
    if isinstance(dist, NormalNodes):
        out = DiagonalNormal(dist.mu.value, dist.log_var.value)
    else:
        out = VonMisesFisher(dist.mu.value, dist.kappa.value[:, 0])
    return out[0] if single else out


def prenorm_magnitude(model: EncoderModel, x: np.ndarray):
    """L2 norm of the mean-head output before normalization."""
    if not model.config.normalize_mean:
        raise ContractError("prenorm_magnitude requires normalize_mean")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    _, pre = model.forward_nodes(x)
    mags = np.linalg.norm(pre.value, axis=-1)
    return float(mags[0]) if single else mags


def class_logits(targets: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Cosine similarities between unit mu and the unit class centroids."""
    targets = np.asarray(targets, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(np.abs(np.linalg.norm(targets, axis=-1) - 1.0) > 1e-6):
        raise ContractError("class_logits: target rows must be unit-norm")
    if np.any(np.abs(np.linalg.norm(mu, axis=-1) - 1.0) > 1e-6):
        raise ContractError("class_logits: mu must be unit-norm")
    return np.clip(mu @ targets.T, -1.0, 1.0)


def class_logits_nodes(targets: Node, mu: Node) -> Node:
    """Graph version: rows of the raw target matrix are normalized in-graph."""
    return mu @ ad.transpose(ad.l2_normalize(targets, axis=-1))


def snapshot(model: EncoderModel, extras: dict[str, Node] | None = None) -> dict[str, np.ndarray]:
    out = {name: p.value.copy() for name, p in model.params.items()}
    if model.targets is not None:
        out["targets"] = model.targets.value.copy()
    for name, node in (extras or {}).items():
        out[f"extra.{name}"] = node.value.copy()
    return out


def restore(model: EncoderModel, snap: dict[str, np.ndarray],
            extras: dict[str, Node] | None = None) -> None:
    for name, p in model.params.items():
        p.value = snap[name].copy()
    if model.targets is not None and "targets" in snap:
        model.targets.value = snap["targets"].copy()
    for name, node in (extras or {}).items():
        node.value = snap[f"extra.{name}"].copy()


def save_model(model: EncoderModel, path, extras: dict[str, Node] | None = None) -> None:
    """Flat binary container: magic, then (name length, name, rank,
    extents, float64 little-endian values) per parameter."""
    entries = snapshot(model, extras)
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        for name in sorted(entries):
            arr = np.ascontiguousarray(entries[name], dtype=np.float64)
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype("<f8").tobytes())


def read_model_arrays(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        magic = f.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise ContractError(f"{path}: not a model file (bad magic)")
        out: dict[str, np.ndarray] = {}
        while True:
            head = f.read(4)
            if not head:
                break
            (name_len,) = struct.unpack("<I", head)
            name = f.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{rank}I", f.read(4 * rank)) if rank else ()
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * count), dtype="<f8")
            out[name] = data.reshape(shape).astype(np.float64)
    return out


def load_model(path, config: EncoderConfig) -> tuple[EncoderModel, dict[str, Node]]:
    """Rebuild a model (and any extra trainable scalars) from disk."""
    arrays = read_model_arrays(path)
    rng = np.random.default_rng(0)
    model = init_encoder(config, rng)
    for name, p in model.params.items():
        if name not in arrays:
            raise ContractError(f"{path}: missing parameter {name!r}")
        if arrays[name].shape != p.value.shape:
            raise ContractError(
                f"{path}: shape mismatch for {name!r}: "
                f"{arrays[name].shape} vs {p.value.shape}")
        p.value = arrays[name]
    if "targets" in arrays:
        model.targets = ad.parameter(arrays["targets"], "targets")
    extras = {name[len("extra."):]: ad.parameter(arr, name)
              for name, arr in arrays.items() if name.startswith("extra.")}
    return model, extras
