"""Training loop, method registry, multi-seed benchmark and ablation
drivers.

A method name resolves to a distribution family, an inference scoring
kind, stage flags (which parameter groups train) and, for fine-tuning
methods, a deterministic pretraining run whose backbone, mean head or
target embeddings are reused.  One master seed per run derives separate
streams for data generation, initialization, shuffling and Monte-Carlo
sampling, so repeated invocations are bit-identical.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import losses as L
from .autodiff import Node
from .config import RunConfig, StageOverrides
from .data import (LabeledDataset, corrupt, generate, sample_verification_pairs,
                   split_classes)
from .distributions import confidence_of
from .encoder import (EncoderConfig, EncoderModel, encode, init_encoder,
                      init_targets, restore, snapshot)
from .errors import ConfigurationError, NonFiniteError, TrainingError
from .evaluation import (ConfidenceRecords, baseline_confidences, ceda,
                         filter_out_curve, retrieval_metrics, spearman,
                         verification_accuracy)
from .losses import LossConfig, StageFlags
from .scoring import ScoringKind, parse_scoring, score_matrix
from .seeds import stream

DEFAULT_FILTER_RATES = [round(0.1 * i, 1) for i in range(10)]


@dataclass(frozen=True)
class MethodSpec:
    name: str
    loss: str                      # one of losses.METHODS
    distribution: Optional[str]    # default family; None = deterministic
    allowed_distributions: tuple
    scoring: str                   # default inference scoring label
    stages: StageFlags
    pretrain: Optional[str] = None  # method whose run seeds this one
    pair_based: bool = False
    has_targets: bool = True


_FULL = StageFlags(True, True, True)

METHOD_SPECS: dict[str, MethodSpec] = {
    "cosface": MethodSpec("cosface", "cosface", None, (), "mean_cosine",
                          StageFlags(True, True, False)),
    "arcface": MethodSpec("arcface", "arcface", None, (), "mean_cosine",
                          StageFlags(True, True, False)),
    "hib": MethodSpec("hib", "hib", "normal", ("normal",), "sampled_l2",
                      StageFlags(True, False, True), pair_based=True,
                      has_targets=False),
    "pfe": MethodSpec("pfe", "pfe", "normal", ("normal", "vmf"), "mls",
                      StageFlags(False, False, True), pretrain="cosface"),
    "dul_cls": MethodSpec("dul_cls", "dul_cls", "normal", ("normal", "vmf"),
                          "mean_cosine", _FULL),
    "dul_reg": MethodSpec("dul_reg", "dul_reg", "normal", ("normal", "vmf"),
                          "mean_cosine", StageFlags(True, False, True),
                          pretrain="cosface"),
    "scf": MethodSpec("scf", "dul_reg", "vmf", ("vmf", "normal"), "mls",
                      StageFlags(False, False, True), pretrain="cosface"),
    "vmf_fl": MethodSpec("vmf_fl", "vmf_fl", "vmf", ("vmf", "normal"),
                         "mean_cosine", _FULL),
    "vmf_loss": MethodSpec("vmf_loss", "vmf_loss", "vmf", ("vmf",),
                           "sampled_cosine", _FULL),
    "dul_reg_cls": MethodSpec("dul_reg_cls", "dul_reg", "normal",
                              ("normal", "vmf"), "mean_cosine",
                              StageFlags(True, False, True), pretrain="dul_cls"),
}

BENCH_METHODS = ["cosface", "hib", "pfe", "dul_cls", "dul_reg", "scf",
                 "vmf_fl", "vmf_loss"]


def resolve_method(name: str) -> MethodSpec:
    try:
        return METHOD_SPECS[name]
    except KeyError:
        raise ConfigurationError(f"unknown method {name!r}") from None


@dataclass
class TrainResult:
    method: str
    model: EncoderModel
    extras: dict[str, Node]
    dataset: LabeledDataset
    scoring: ScoringKind
    log: list = field(default_factory=list)  # (epoch, train_loss, val_map_at_r)
    best_val: float = float("nan")
    loss_config: LossConfig = field(default_factory=LossConfig)


class SGD:
    """SGD with momentum and (coupled) weight decay over LR groups."""

    def __init__(self, groups: list[tuple[list[Node], float]],
                 momentum: float, weight_decay: float):
        self.groups = groups
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: dict[int, np.ndarray] = {}

    @property
    def params(self) -> list[Node]:
        return [p for group, _ in self.groups for p in group]

    def step(self, grads: dict[Node, np.ndarray]) -> None:
        for group, lr in self.groups:
            for p in group:
                g = grads[p] + self.weight_decay * p.value
                v = self.velocity.get(id(p))
                v = g if v is None else self.momentum * v + g
                self.velocity[id(p)] = v
                p.value = p.value - lr * v


def build_dataset(config: RunConfig, master_seed: int) -> LabeledDataset:
    base = config.dataset.seed if config.dataset.seed is not None else master_seed
    ds = generate(config.dataset.classes, config.dataset.per_class,
                  config.dataset.input_dim, config.dataset.kappa,
                  stream(base, "data"))
    ds = dataclasses.replace(ds, seed=int(base))
    return split_classes(ds, stream(base, "data", 1))


def dataset_base_seed(config: RunConfig, master_seed: int) -> int:
    return int(config.dataset.seed if config.dataset.seed is not None else master_seed)


def _encoder_config(config: RunConfig, spec: MethodSpec,
                    distribution: Optional[str]) -> EncoderConfig:
    dist = distribution or config.distribution or spec.distribution or "normal"
    if spec.allowed_distributions and dist not in spec.allowed_distributions:
        raise ConfigurationError(
            f"method {spec.name!r} does not support the {dist!r} distribution")
    hib_like = spec.name == "hib"
    return EncoderConfig(
        input_dim=config.dataset.input_dim,
        hidden_dims=tuple(config.encoder.hidden_dims),
        embed_dim=config.encoder.embed_dim,
        distribution="normal" if spec.distribution is None else dist,
        normalize_mean=not hib_like,
        shared_variance=not hib_like,
    )


def _scoring_kind(config: RunConfig, spec: MethodSpec,
                  scoring: Optional[str]) -> ScoringKind:
    label = scoring or config.scoring or spec.scoring
    return parse_scoring(label, config.loss.mc_samples)


def _class_remap(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    classes = np.unique(y)
    lookup = {c: i for i, c in enumerate(classes)}
    return classes, np.asarray([lookup[c] for c in y], dtype=int)


def _hib_pair_batch(y: np.ndarray, size: int, rng: np.random.Generator
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Indices for a half-positive/half-negative batch of training pairs."""
    n_pos = size // 2
    classes = np.unique(y)
    members = {c: np.flatnonzero(y == c) for c in classes}
    weights = np.array([len(members[c]) * (len(members[c]) - 1) for c in classes],
                       dtype=float)
    weights /= weights.sum()
    i = np.empty(size, dtype=int)
    j = np.empty(size, dtype=int)
    pick = rng.choice(len(classes), size=n_pos, p=weights)
    for t in range(n_pos):
        a, b = rng.choice(members[classes[pick[t]]], size=2, replace=False)
        i[t], j[t] = a, b
    for t in range(n_pos, size):
        while True:
            a, b = rng.integers(0, len(y), size=2)
            if y[a] != y[b]:
                i[t], j[t] = a, b
                break
    same = np.zeros(size, dtype=bool)
    same[:n_pos] = True
    return i, j, same


def _trainable(model: EncoderModel, extras: dict[str, Node],
               stages: StageFlags) -> tuple[list[Node], list[Node]]:
    """(backbone-rate params, classifier-rate params) honoring the flags."""
    backbone: list[Node] = []
    classifier: list[Node] = []
    for name, p in model.params.items():
        if name.startswith("unc."):
            if stages.train_uncertainty:
                backbone.append(p)
        elif stages.train_backbone:
            backbone.append(p)
    if stages.train_targets and model.targets is not None:
        classifier.append(model.targets)
    backbone.extend(extras.values())
    return backbone, classifier


def _batch_loss(spec: MethodSpec, model: EncoderModel, extras: dict[str, Node],
                target_matrix: Optional[np.ndarray], x: np.ndarray,
                y: np.ndarray, cfg: LossConfig, mc_rng: np.random.Generator
                ) -> Optional[Node]:
    if spec.loss == "cosface" or spec.loss == "arcface":
        dist, _ = model.forward_nodes(x)
        logits = dist.mu @ ad.transpose(ad.l2_normalize(model.targets, axis=-1))
        fn = L.cosface_loss if spec.loss == "cosface" else L.arcface_loss
        return fn(logits, y, cfg.scale, cfg.margin)
    if spec.loss == "pfe":
        return L.pfe_loss(x, y, model, cfg)
    if spec.loss == "dul_cls":
        return L.dul_cls_loss(x, y, model, model.targets, cfg, mc_rng)
    if spec.loss == "dul_reg":
        return L.dul_reg_loss(x, y, model, target_matrix, cfg)
    if spec.loss == "vmf_fl":
        return L.vmf_fl_loss(x, y, model, model.targets, cfg)
    if spec.loss == "vmf_loss":
        return L.vmf_sampled_softmax_loss(
            x, y, model, model.targets, extras["class_kappa"], extras["vmf_beta"],
            cfg, mc_rng)
    raise ConfigurationError(f"no batch loss for {spec.loss!r}")


def _validation_map(model: EncoderModel, val: LabeledDataset, kind: ScoringKind,
                    master_seed: int, stage: int) -> float:
    dist = encode(model, val.x)
    scores = score_matrix(dist, dist, kind, stream(master_seed, "eval_mc", stage))
    return retrieval_metrics(scores, val.y)[1]


def train(config: RunConfig, seed: int, method: Optional[str] = None,
          distribution: Optional[str] = None, scoring: Optional[str] = None,
          stage: int = 0, pretrained: Optional[TrainResult] = None,
          dataset: Optional[LabeledDataset] = None) -> TrainResult:
    """Train one method for one master seed and return the best-validation
    snapshot plus the training log.

    Two-stage methods (pretraining chains) recurse with distinct stage
    ids so every stage draws from its own seed streams.
    """
    name = method or config.loss.method
    spec = resolve_method(name)
    if name == "dul_reg_cls":
        return run_dul_reg_cls(config, seed, distribution=distribution,
                               scoring=scoring, dataset=dataset,
                               stage1=pretrained)

    enc_config = _encoder_config(config, spec, distribution)
    kind = _scoring_kind(config, spec, scoring)
    cfg = config.loss
    ds = dataset if dataset is not None else build_dataset(config, seed)
    train_split = ds.subset("train")
    val_split = ds.subset("val")
    class_ids, y_local = _class_remap(train_split.y)

    if spec.pretrain is not None and pretrained is None:
        pretrained = train(config, seed, method=spec.pretrain,
                           stage=stage + 1, dataset=ds)
    if pretrained is not None and pretrained.method != spec.pretrain:
        raise ConfigurationError(
            f"{name!r} expects a {spec.pretrain!r} pretraining run")

    init_rng = stream(seed, "init", stage)
    model = init_encoder(enc_config, init_rng)
    target_matrix = None
    if pretrained is not None:
        for pname, p in pretrained.model.params.items():
            if pname.startswith(("backbone.", "mean.")):
                model.params[pname].value = p.value.copy()
        target_matrix = pretrained.model.target_embeddings.copy()
        model.targets = ad.constant(target_matrix, name="targets")
    elif spec.has_targets:
        model.targets = init_targets(len(class_ids), enc_config.embed_dim, init_rng)

    extras: dict[str, Node] = {}
    if spec.loss == "hib":
        extras["hib_alpha"] = ad.parameter(cfg.hib_alpha_init, "hib_alpha")
        extras["hib_beta"] = ad.parameter(cfg.hib_beta_init, "hib_beta")
    if spec.loss == "vmf_loss":
        extras["vmf_beta"] = ad.parameter(cfg.vmf_beta_init, "vmf_beta")
        extras["class_kappa"] = ad.parameter(
            np.full(len(class_ids), cfg.class_kappa_init), "class_kappa")

    backbone_params, classifier_params = _trainable(model, extras, spec.stages)
    opt = SGD([(backbone_params, config.optimizer.lr_backbone),
               (classifier_params, config.optimizer.lr_classifier)],
              config.optimizer.momentum, config.optimizer.weight_decay)

    shuffle_rng = stream(seed, "shuffle", stage)
    mc_rng = stream(seed, "mc", stage)
    n = len(train_split)
    batch = config.train.batch_size
    n_batches = max(1, math.ceil(n / batch))

    result = TrainResult(method=name, model=model, extras=extras, dataset=ds,
                         scoring=kind, loss_config=cfg)
    best_snap = None
    best_val = -math.inf
    stale = 0
    for epoch in range(config.train.epochs):
        epoch_losses = []
        if spec.pair_based:
            batches = [_hib_pair_batch(train_split.y, batch, shuffle_rng)
                       for _ in range(n_batches)]
        else:
            perm = shuffle_rng.permutation(n)
            batches = [perm[b * batch:(b + 1) * batch] for b in range(n_batches)]
        for b, part in enumerate(batches):
            try:
                if spec.pair_based:
                    i, j, same = part
                    loss = L.hib_loss(train_split.x[i], train_split.x[j], same,
                                      model, extras["hib_alpha"],
                                      extras["hib_beta"], cfg, mc_rng)
                else:
                    idx = part
                    loss = _batch_loss(spec, model, extras, target_matrix,
                                       train_split.x[idx], y_local[idx],
                                       cfg, mc_rng)
                if loss is None:
                    continue  # skip-batch signal (no positive pair)
                grads = ad.gradients(loss, opt.params)
                opt.step(grads)
                epoch_losses.append(float(loss.value))
            except NonFiniteError as exc:
                raise TrainingError(
                    f"non-finite loss: method={name} stage={stage} "
                    f"epoch={epoch} batch={b}") from exc
        val_map = _validation_map(model, val_split, kind, seed, stage)
        train_loss = float(np.mean(epoch_losses)) if epoch_losses else math.nan
        result.log.append((epoch, train_loss, val_map))
        if val_map > best_val:
            best_val, best_snap, stale = val_map, snapshot(model, extras), 0
        else:
            stale += 1
        if stale >= config.train.patience:
            break
    if best_snap is not None:
        restore(model, best_snap, extras)
    result.best_val = best_val if best_snap is not None else math.nan
    return result


def _stage2_config(config: RunConfig) -> RunConfig:
    over = config.stage2 or StageOverrides()
    cfg = dataclasses.replace(config)
    if over.epochs is not None or over.patience is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(
            config.train,
            epochs=config.train.epochs if over.epochs is None else over.epochs,
            patience=config.train.patience if over.patience is None else over.patience))
    if over.lr_backbone is not None or over.lr_classifier is not None:
        cfg = dataclasses.replace(cfg, optimizer=dataclasses.replace(
            config.optimizer,
            lr_backbone=over.lr_backbone or config.optimizer.lr_backbone,
            lr_classifier=over.lr_classifier or config.optimizer.lr_classifier))
    if over.kl_weight is not None:
        cfg = dataclasses.replace(cfg, loss=dataclasses.replace(
            config.loss, kl_weight=over.kl_weight))
    return cfg


def run_dul_reg_cls(config: RunConfig, seed: int,
                    distribution: Optional[str] = None,
                    scoring: Optional[str] = None,
                    dataset: Optional[LabeledDataset] = None,
                    stage1: Optional[TrainResult] = None) -> TrainResult:
    """Two-stage method: density regression fine-tuning against target
    embeddings pretrained from scratch by the sampled-classification
    stage.  A zero-epoch second stage returns the stage-1 model."""
    ds = dataset if dataset is not None else build_dataset(config, seed)
    if stage1 is None:
        stage1 = train(config, seed, method="dul_cls", stage=2, dataset=ds,
                       distribution=None, scoring=scoring)
    elif stage1.method != "dul_cls":
        raise ConfigurationError("dul_reg_cls stage 1 must be a dul_cls run")
    cfg2 = _stage2_config(config)
    if cfg2.train.epochs == 0:
        out = dataclasses.replace(stage1)
        out.method = "dul_reg_cls"
        return out
    result = train(cfg2, seed, method="dul_reg", stage=3,
                   distribution=distribution, scoring=scoring,
                   pretrained=stage1, dataset=ds)
    result.method = "dul_reg_cls"
    return result


# evaluation of a finished run -----------------------------------------

@dataclass
class MetricRow:
    method: str
    axis_value: str
    seed: str
    status: str
    recall_at_1: Optional[float] = None
    map_at_r: Optional[float] = None
    verification_accuracy: Optional[float] = None
    ceda: Optional[float] = None
    spearman: Optional[float] = None

    METRIC_FIELDS = ("recall_at_1", "map_at_r", "verification_accuracy",
                     "ceda", "spearman")


@dataclass
class BenchmarkReport:
    rows: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)  # (method, axis, seed) -> points


def method_confidences(result: TrainResult, xs: np.ndarray) -> np.ndarray:
    """The method's own confidence: max posterior for deterministic
    methods (which predict no distribution), entropy surrogate otherwise."""
    if result.method in ("cosface", "arcface"):
        return baseline_confidences(result.model, xs, "max_posterior",
                                    result.loss_config.scale)
    return np.atleast_1d(confidence_of(encode(result.model, xs)))


def evaluate_run(result: TrainResult, config: RunConfig, seed: int,
                 scoring: Optional[ScoringKind] = None
                 ) -> tuple[dict, list]:
    """All clean-test metrics plus corrupted-split Spearman and the
    filter-out curve for one trained model."""
    kind = scoring or result.scoring
    base = dataset_base_seed(config, seed)
    test = result.dataset.subset("test")
    dist = encode(result.model, test.x)
    scores = score_matrix(dist, dist, kind, stream(seed, "eval_mc", 50))
    recall1, mapr, nn_correct = retrieval_metrics(scores, test.y)
    pairs = sample_verification_pairs(test, stream(base, "pairs"))
    ver_acc = verification_accuracy(pairs, scores[pairs.i, pairs.j])
    conf_clean = method_confidences(result, test.x)
    ceda_val = ceda(ConfidenceRecords(conf_clean, nn_correct))

    corrupted = corrupt(test, stream(base, "corrupt"))
    conf_corr = method_confidences(result, corrupted.x)
    spear = spearman(conf_corr, corrupted.quality)
    dist_corr = encode(result.model, corrupted.x)
    scores_corr = score_matrix(dist_corr, dist_corr, kind,
                               stream(seed, "eval_mc", 51))
    _, _, nn_corr_c = retrieval_metrics(scores_corr, corrupted.y)

    def subset_map(kept: np.ndarray) -> Optional[float]:
        if kept.size < 2:
            return None
        sub = scores_corr[np.ix_(kept, kept)]
        return retrieval_metrics(sub, corrupted.y[kept])[1]

    records = ConfidenceRecords(conf_corr, nn_corr_c, corrupted.quality)
    curve = filter_out_curve(records, DEFAULT_FILTER_RATES, subset_map)
    metrics = {
        "recall_at_1": recall1,
        "map_at_r": mapr,
        "verification_accuracy": ver_acc,
        "ceda": ceda_val,
        "spearman": spear,
    }
    return metrics, curve


def _aggregate(rows: list[MetricRow]) -> list[MetricRow]:
    out = []
    keys = []
    for row in rows:
        key = (row.method, row.axis_value)
        if key not in keys and row.status == "ok":
            keys.append(key)
    for method, axis_value in keys:
        group = [r for r in rows if (r.method, r.axis_value) == (method, axis_value)
                 and r.status == "ok"]
        agg = MetricRow(method, axis_value, "all", "aggregate")
        for name in MetricRow.METRIC_FIELDS:
            values = [getattr(r, name) for r in group]
            values = [v for v in values if v is not None and not math.isnan(v)]
            if not values:
                continue
            mean = float(np.mean(values))
            std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
            setattr(agg, name, (mean, std))
        out.append(agg)
    return out


def run_benchmark(config: RunConfig, methods: Optional[list[str]] = None,
                  seeds: Optional[list[int]] = None) -> BenchmarkReport:
    """Train every method for every seed and evaluate the full metric set;
    individual failures are recorded per row without aborting the rest."""
    methods = methods if methods is not None else BENCH_METHODS
    seeds = seeds if seeds is not None else [int(s) for s in config.seeds]
    for m in methods:
        resolve_method(m)
    report = BenchmarkReport()
    for method in methods:
        for seed in seeds:
            try:
                result = train(config, seed, method=method)
                metrics, curve = evaluate_run(result, config, seed)
                report.rows.append(MetricRow(method, "", str(seed), "ok", **metrics))
                report.curves[(method, "", str(seed))] = curve
            except TrainingError as exc:
                report.rows.append(MetricRow(method, "", str(seed),
                                             f"error: {exc}"))
    report.aggregates = _aggregate(report.rows)
    return report


# ablations ------------------------------------------------------------

SCORING_ABLATION = {
    "hib": (["mean_l2", "sampled_l2", "mls"], []),
    "pfe": (["sampled_cosine", "mls"],
            [("mean_cosine", "mean scoring equals the deterministic backbone")]),
    "dul_cls": (["mean_cosine", "sampled_cosine", "mls"], []),
    "dul_reg": (["mean_cosine", "sampled_cosine", "mls"], []),
    "scf": (["sampled_cosine", "mls"],
            [("mean_cosine", "mean scoring equals the deterministic backbone")]),
    "vmf_fl": (["mean_cosine", "sampled_cosine", "mls"], []),
    "vmf_loss": (["mean_cosine", "sampled_cosine", "mls"], []),
}

DISTRIBUTION_ABLATION = {
    "pfe": (["normal", "vmf"], []),
    "dul_cls": (["normal", "vmf"], []),
    "dul_reg": (["normal", "vmf"], []),
    "scf": (["vmf", "normal"], []),
    "vmf_fl": (["vmf", "normal"], []),
    "hib": ([], [("vmf", "unnormalized embeddings cannot be modeled on the sphere")]),
    "vmf_loss": ([], [("normal", "objective is tied to the vMF family")]),
}

TARGET_ABLATION = {
    "dul_reg": (["cosface", "dul_cls"], []),
}


def run_ablation(config: RunConfig, method: str, axis: str,
                 seeds: Optional[list[int]] = None) -> BenchmarkReport:
    """Re-evaluate (scoring axis) or retrain (distribution/target axes)
    one method across every layout value; excluded combinations become
    skip records."""
    tables = {"scoring": SCORING_ABLATION, "distribution": DISTRIBUTION_ABLATION,
              "target": TARGET_ABLATION}
    if axis not in tables:
        raise ConfigurationError(f"unknown ablation axis {axis!r}")
    table = tables[axis]
    if method not in table:
        raise ConfigurationError(
            f"ablation axis {axis!r} is not defined for method {method!r}")
    values, skips = table[method]
    seeds = seeds if seeds is not None else [int(s) for s in config.seeds]
    report = BenchmarkReport()
    for value, reason in skips:
        report.rows.append(MetricRow(method, value, "", f"skipped: {reason}"))
    for seed in seeds:
        trained: dict[str, TrainResult] = {}
        for value in values:
            try:
                if axis == "scoring":
                    if "base" not in trained:
                        trained["base"] = train(config, seed, method=method)
                    result = trained["base"]
                    metrics, curve = evaluate_run(result, config, seed,
                                                  scoring=parse_scoring(
                                                      value, config.loss.mc_samples))
                elif axis == "distribution":
                    result = train(config, seed, method=method,
                                   distribution=value)
                    metrics, curve = evaluate_run(result, config, seed)
                else:  # target
                    if value == "dul_cls":
                        result = run_dul_reg_cls(config, seed)
                    else:
                        result = train(config, seed, method=method)
                    metrics, curve = evaluate_run(result, config, seed)
                report.rows.append(MetricRow(method, value, str(seed), "ok",
                                             **metrics))
                report.curves[(method, value, str(seed))] = curve
            except TrainingError as exc:
                report.rows.append(MetricRow(method, value, str(seed),
                                             f"error: {exc}"))
    report.aggregates = _aggregate(report.rows)
    return report


def random_search(config: RunConfig, method: str) -> RunConfig:
    """Seeded log-uniform random search over the two learning rates,
    selecting by validation MAP@R on the first seed."""
    if config.search is None:
        return config
    seed = int(config.seeds[0])
    rng = stream(seed, "search")
    best = (-math.inf, config.optimizer)
    for _ in range(config.search.trials):
        lo, hi = config.search.lr_backbone_range
        lr_b = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        lo, hi = config.search.lr_classifier_range
        lr_c = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        trial_cfg = dataclasses.replace(config, optimizer=dataclasses.replace(
            config.optimizer, lr_backbone=lr_b, lr_classifier=lr_c))
        try:
            result = train(trial_cfg, seed, method=method)
        except TrainingError:
            continue
        if result.best_val > best[0]:
            best = (result.best_val, trial_cfg.optimizer)
    return dataclasses.replace(config, optimizer=best[1])
