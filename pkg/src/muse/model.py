"""Model assembly: score combination, loss, bilevel search, retraining.

A batch is grouped by modality-presence pattern in the fixed order
(text+image, image-only, text-only). Each group is enhanced per the
guidance rule, run through the enabled paths, and the per-path scores
are fused with learnable weights:

    y = sigmoid(beta * Scale(y1) + gamma * Scale(y2) + delta * Scale(y3))

Scale is a sigmoid squash to (0,1). The outer sigmoid keeps y a valid
BCE probability under unconstrained learnable weights; a softmax
combiner (convex weights, no outer squash) is available via config.
The weighted terms are added left to right and a disabled path is
skipped entirely, so freezing delta at 0 is bit-identical to building
the model without the static path (parameter init draws come from
per-name streams and never shift when a path is dropped).

Search alternates single first-order steps: operator/head weights on a
training batch, then architecture logits on a validation batch.
Retraining discretizes both chains and trains weights alone, keeping a
best-validation-accuracy snapshot.
"""

from __future__ import annotations

import base64
import copy
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autograd as ag
from . import rng
from .autograd import make_optimizer
from .cells import CellChain, DiscreteChain, _edge_tag, genotype_lines
from .errors import ConfigError, ContractError, DataError, ParseError, ShapeError
from .features import enhance_rows
from .layers import Linear
from .paths import (
    ClusterReference,
    LinearPath,
    SequencePath,
    StaticSiamese,
    mean_positions,
    static_cluster_reference,
)

__all__ = [
    "ModelConfig", "Prediction", "BatchOutput", "MuseModel",
    "scale", "combine", "bce_loss",
    "predict_proba", "classify", "accuracy",
    "SearchResult", "bilevel_search", "train_weights",
    "RetrainResult", "retrain_discrete",
    "save_checkpoint", "load_checkpoint", "config_to_dict", "config_from_dict",
]

PATH_NAMES = ("linear", "sequence", "static")

# presence patterns in fixed processing order: (text_present, image_present)
_PATTERNS = ((True, True), (False, True), (True, False))

BCE_EPS = 1e-7

CHECKPOINT_FORMAT = "muse-checkpoint"
CHECKPOINT_VERSION = 1

# config fields holding operator-name tuples (JSON lists on disk)
_TUPLE_FIELDS = ("paths", "fusion_ops", "linear_ops", "sequence_ops")


@dataclass
class ModelConfig:
    """Architecture plus training hyperparameters, echoed into reports."""

    d_h: int = 8
    n_linear: int = 3
    m_seq: int = 3
    topology: str = "chain"
    paths: tuple[str, ...] = PATH_NAMES
    static_variant: str = "siamese"
    cluster_k: int = 2
    cluster_iters: int = 20
    combiner: str = "sigmoid"
    fusion_ops: tuple[str, ...] | None = None
    linear_ops: tuple[str, ...] | None = None
    sequence_ops: tuple[str, ...] | None = None
    epochs: int = 10
    retrain_epochs: int = 20
    batch_size: int = 64
    lr_w: float = 1e-2
    lr_alpha: float = 5e-3
    optimizer: str = "adam"

    def __post_init__(self):
        self.paths = tuple(self.paths)
        for p in self.paths:
            if p not in PATH_NAMES:
                raise ConfigError(f"unknown path {p!r}; valid paths are {PATH_NAMES}")
        if not self.paths:
            raise ConfigError("at least one path must be enabled")
        if len(set(self.paths)) != len(self.paths):
            raise ConfigError(f"duplicate path names in {self.paths}")
        if self.combiner not in ("sigmoid", "softmax"):
            raise ConfigError(f"unknown combiner {self.combiner!r}")
        if self.static_variant not in ("siamese", "cluster_reference"):
            raise ConfigError(f"unknown static variant {self.static_variant!r}")
        if self.topology not in ("chain", "dag"):
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        for name in ("fusion_ops", "linear_ops", "sequence_ops"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, tuple(v))
        if self.epochs < 1 or self.retrain_epochs < 1:
            raise ConfigError("epoch budgets must be >= 1")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_w <= 0 or self.lr_alpha < 0:
            raise ConfigError("lr_w must be > 0 and lr_alpha >= 0")
        if self.d_h < 1 or self.n_linear < 1 or self.m_seq < 1:
            raise ConfigError("d_h, n_linear, m_seq must all be >= 1")
        if self.cluster_k < 1 or self.cluster_iters < 1:
            raise ConfigError("cluster_k and cluster_iters must be >= 1")


def config_to_dict(config: ModelConfig) -> dict:
    d = asdict(config)
    for name in _TUPLE_FIELDS:
        if d[name] is not None:
            d[name] = list(d[name])
    return d


def config_from_dict(d: dict) -> ModelConfig:
    known = {f for f in ModelConfig.__dataclass_fields__}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    return ModelConfig(**d)


# ---------------------------------------------------------------------------
# score combination and loss


def scale(score: ag.Tensor) -> ag.Tensor:
    """Squash a raw path score to the shared (0,1) interval."""
    return ag.sigmoid(score)


@dataclass
class Prediction:
    y: ag.Tensor
    components: tuple  # post-Scale component per path slot, None when absent


def combine(scores, weights, mode: str = "sigmoid") -> Prediction:
    """Fuse per-path scores with learnable weights into one probability.

    ``scores`` and ``weights`` align by position; a None score means the
    path is disabled and contributes nothing (not even a zero term, so
    the weighted sum of the remaining paths is bit-identical to a model
    that never had the path). sigmoid mode wraps the weighted sum in an
    outer sigmoid; softmax mode uses convex weights and no outer squash.
    """
    if len(scores) != len(weights):
        raise ContractError(f"{len(scores)} scores vs {len(weights)} weights")
    scaled = [scale(s) if s is not None else None for s in scores]
    live = [(w, sc) for w, sc in zip(weights, scaled) if sc is not None]
    if not live:
        raise ConfigError("combine needs at least one enabled path")
    if mode == "sigmoid":
        acc = ag.smul(live[0][1], live[0][0])
        for w, sc in live[1:]:
            acc = ag.add(acc, ag.smul(sc, w))
        y = ag.sigmoid(acc)
    elif mode == "softmax":
        col = ag.concat([ag.reshape(w, (1, 1)) for w, _ in live], axis=0)
        coeffs = ag.softmax(col, axis=0)
        acc = None
        for j, (_, sc) in enumerate(live):
            term = ag.smul(sc, ag.row_slice(coeffs, j, j + 1))
            acc = term if acc is None else ag.add(acc, term)
        y = acc
    else:
        raise ConfigError(f"unknown combiner {mode!r}")
    return Prediction(y=y, components=tuple(scaled))


def bce_loss(y: ag.Tensor, labels: np.ndarray, eps: float = BCE_EPS) -> ag.Tensor:
    """Mean binary cross entropy with epsilon-clamped probabilities."""
    if y.values.ndim != 2 or y.shape[1] != 1:
        raise ShapeError(f"bce_loss expects (B, 1) probabilities, got {y.shape}")
    arr = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if arr.shape[0] != y.shape[0]:
        raise ShapeError(f"{y.shape[0]} probabilities vs {arr.shape[0]} labels")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise DataError("labels must be 0 or 1")
    yc = ag.clamp(y, eps, 1.0 - eps)
    pos = ag.mul(ag.tensor(arr), ag.log(yc))
    neg = ag.mul(ag.tensor(1.0 - arr), ag.log(ag.add_scalar(ag.neg(yc), 1.0)))
    return ag.neg(ag.reduce_mean(ag.add(pos, neg)))


# ---------------------------------------------------------------------------
# the assembled model


@dataclass
class BatchOutput:
    """Forward results in group order plus the permutation back."""

    y: ag.Tensor                    # (B, 1) probabilities, group order
    order: np.ndarray               # row r of y belongs to samples[order[r]]
    y1: ag.Tensor | None
    y2: ag.Tensor | None
    y3: ag.Tensor | None
    components: tuple = ()
    cluster_features: np.ndarray | None = None

    def probabilities(self) -> np.ndarray:
        """Per-sample probabilities in the original batch order."""
        out = np.empty(len(self.order))
        out[self.order] = self.y.values[:, 0]
        return out


def _group_indices(samples) -> list[tuple[tuple[bool, bool], list[int]]]:
    groups = []
    seen = 0
    for pattern in _PATTERNS:
        idx = [i for i, s in enumerate(samples)
               if (s.text.present, s.image.present) == pattern]
        if idx:
            groups.append((pattern, idx))
            seen += len(idx)
    if seen != len(samples):
        raise DataError("batch contains a sample with neither modality present")
    return groups


class MuseModel:
    """Triple-path model over raw modality widths d_t and d_v.

    ``mode`` is "search" (mixed operators, architecture logits live) or
    "discrete" (one operator per edge, no logits). ``discretize`` shares
    parameter tensors with the source model as a warm start, so training
    the discrete model mutates the searched model's weights too.
    """

    def __init__(self, d_t: int, d_v: int, config: ModelConfig | None = None, seed: int = 0):
        if d_t < 1 or d_v < 1:
            raise ConfigError(f"modality widths must be >= 1, got d_t={d_t} d_v={d_v}")
        self.d_t = d_t
        self.d_v = d_v
        self.config = config if config is not None else ModelConfig()
        self.seed = seed
        self.mode = "search"
        cfg = self.config
        self.fc_guid_t = Linear("guidance.fc_t", d_v, d_t, seed, bias=True)
        self.fc_guid_i = Linear("guidance.fc_i", d_t, d_v, seed, bias=True)
        self.linear_path: LinearPath | None = None
        self.sequence_path: SequencePath | None = None
        self.static_path = None
        if "linear" in cfg.paths:
            chain = CellChain(
                "linear", cfg.d_h, cfg.n_linear, seed, name="linear_path.chain",
                topology=cfg.topology, fusion_names=cfg.fusion_ops,
                transform_names=cfg.linear_ops,
            )
            self.linear_path = LinearPath(d_t, d_v, chain, seed)
        if "sequence" in cfg.paths:
            chain = CellChain(
                "sequence", cfg.d_h, cfg.m_seq, seed, name="sequence_path.chain",
                topology=cfg.topology, transform_names=cfg.sequence_ops,
            )
            self.sequence_path = SequencePath(d_t, d_v, chain, seed)
        if "static" in cfg.paths:
            if cfg.static_variant == "siamese":
                self.static_path = StaticSiamese(d_t, d_v, cfg.d_h, seed)
            else:
                if self.linear_path is None and self.sequence_path is None:
                    raise ConfigError(
                        "cluster_reference averages dynamic scores; enable linear or sequence"
                    )
                self.static_path = ClusterReference(cfg.cluster_k, seed, cfg.cluster_iters)
        # signed init: sigmoid-scaled scores are strictly positive, so an
        # all-positive weight start can never push the combined logit below
        # zero; reals then sit at exactly 0.5 with vanishing gradients once
        # the paths saturate. Starting one path negative keeps a
        # below-threshold direction reachable from step one.
        self.beta = ag.parameter(np.array([1.0]))
        self.gamma = ag.parameter(np.array([-1.0]))
        self.delta = ag.parameter(np.array([1.0]))

    # -- parameter tables ---------------------------------------------------

    def parameters(self) -> dict[str, ag.Tensor]:
        named = {
            "combine.beta": self.beta,
            "combine.gamma": self.gamma,
            "combine.delta": self.delta,
        }
        named.update(self.fc_guid_t.parameters())
        named.update(self.fc_guid_i.parameters())
        for path in (self.linear_path, self.sequence_path, self.static_path):
            if path is not None:
                named.update(path.parameters())
        return named

    def arch_parameters(self) -> dict[str, ag.Tensor]:
        named: dict[str, ag.Tensor] = {}
        for path in (self.linear_path, self.sequence_path):
            if path is not None:
                named.update(path.arch_parameters())
        return named

    # -- forward ------------------------------------------------------------

    def _check_dims(self, samples, idx) -> tuple[int, int]:
        first = samples[idx[0]]
        k_t, d_t = first.text.shape
        k_v, d_v = first.image.shape
        if d_t != self.d_t or d_v != self.d_v:
            raise ShapeError(
                f"sample widths ({d_t},{d_v}) do not match model widths ({self.d_t},{self.d_v})"
            )
        for i in idx:
            if samples[i].text.shape != (k_t, d_t) or samples[i].image.shape != (k_v, d_v):
                raise ShapeError("all samples in a batch must share K_T, D_T, K_V, D_V")
        return k_t, k_v

    @staticmethod
    def _stack_positions(samples, idx, modality: str) -> list[ag.Tensor]:
        arr = np.stack([getattr(samples[i], modality).values for i in idx])
        return [ag.tensor(arr[:, k, :]) for k in range(arr.shape[1])]

    @staticmethod
    def _zero_positions(b: int, k: int, d: int) -> list[ag.Tensor]:
        return [ag.tensor(np.zeros((b, d))) for _ in range(k)]

    def _enhance_group(self, samples, idx, pattern):
        """Per-group guidance rule: enhance both, or raw/zero substitution."""
        text_present, image_present = pattern
        k_t, k_v = self._check_dims(samples, idx)
        b = len(idx)
        if text_present and image_present:
            t_pos = self._stack_positions(samples, idx, "text")
            i_pos = self._stack_positions(samples, idx, "image")
            gate_t = self.fc_guid_t(mean_positions(i_pos))
            gate_i = self.fc_guid_i(mean_positions(t_pos))
            return (
                [enhance_rows(p, gate_t) for p in t_pos],
                [enhance_rows(p, gate_i) for p in i_pos],
            )
        if text_present:
            return (
                self._stack_positions(samples, idx, "text"),
                self._zero_positions(b, k_v, self.d_v),
            )
        return (
            self._zero_positions(b, k_t, self.d_t),
            self._stack_positions(samples, idx, "image"),
        )

    def forward(self, samples) -> BatchOutput:
        if not samples:
            raise DataError("forward on an empty batch")
        groups = _group_indices(samples)
        order = np.concatenate([np.asarray(idx, dtype=np.int64) for _, idx in groups])
        y1_parts: list[ag.Tensor] = []
        y2_parts: list[ag.Tensor] = []
        y3_parts: list[ag.Tensor] = []
        feat_parts: list[np.ndarray] = []
        cluster_mode = isinstance(self.static_path, ClusterReference)
        for pattern, idx in groups:
            t_enh, i_enh = self._enhance_group(samples, idx, pattern)
            if self.linear_path is not None:
                _, y1 = self.linear_path.forward(t_enh, i_enh)
                y1_parts.append(y1)
            if self.sequence_path is not None:
                _, y2 = self.sequence_path.forward(t_enh, i_enh)
                y2_parts.append(y2)
            if self.static_path is not None:
                pooled_t = mean_positions(t_enh)
                pooled_i = mean_positions(i_enh)
                if cluster_mode:
                    feat_parts.append(
                        np.concatenate([pooled_t.values, pooled_i.values], axis=1)
                    )
                else:
                    _, y3 = self.static_path.forward(pooled_t, pooled_i, *pattern)
                    y3_parts.append(y3)
        y1 = ag.concat(y1_parts, axis=0) if y1_parts else None
        y2 = ag.concat(y2_parts, axis=0) if y2_parts else None
        y3 = ag.concat(y3_parts, axis=0) if y3_parts else None
        cluster_features = None
        if cluster_mode:
            cluster_features = np.concatenate(feat_parts, axis=0)
            if y1 is not None and y2 is not None:
                dyn = ag.mul_scalar(ag.add(y1, y2), 0.5)
            else:
                dyn = y1 if y1 is not None else y2
            scores = dyn.values[:, 0]  # reference values only; no gradient
            k_eff = min(self.config.cluster_k, len(samples))
            z3 = static_cluster_reference(
                cluster_features, scores, k_eff, self.seed, self.config.cluster_iters
            )
            y3 = ag.tensor(z3.reshape(-1, 1))
        pred = combine(
            [y1, y2, y3],
            [self.beta, self.gamma, self.delta],
            mode=self.config.combiner,
        )
        return BatchOutput(
            y=pred.y, order=order, y1=y1, y2=y2, y3=y3,
            components=pred.components, cluster_features=cluster_features,
        )

    def loss(self, out: BatchOutput, labels: np.ndarray) -> ag.Tensor:
        grouped = np.asarray(labels, dtype=np.float64)[out.order]
        return bce_loss(out.y, grouped)

    # -- structure transforms -------------------------------------------------

    def genotype(self) -> str:
        chains = [p.chain for p in (self.linear_path, self.sequence_path) if p is not None]
        if not chains:
            return "# no dynamic chains"
        return genotype_lines(*chains)

    def discretize(self) -> "MuseModel":
        """Argmax operator per edge; shares parameter tensors (warm start)."""
        if self.mode != "search":
            raise ContractError("model is already discrete")
        clone = copy.copy(self)
        if self.linear_path is not None:
            lp = copy.copy(self.linear_path)
            lp.chain = self.linear_path.chain.discretize()
            clone.linear_path = lp
        if self.sequence_path is not None:
            sp = copy.copy(self.sequence_path)
            sp.chain = self.sequence_path.chain.discretize()
            clone.sequence_path = sp
        clone.mode = "discrete"
        return clone

    def with_chain(self, which: str, chain) -> "MuseModel":
        """Shallow copy with one dynamic chain replaced (ablation loop)."""
        clone = copy.copy(self)
        if which == "linear":
            if self.linear_path is None:
                raise ConfigError("model has no linear path")
            lp = copy.copy(self.linear_path)
            lp.chain = chain
            clone.linear_path = lp
        elif which == "sequence":
            if self.sequence_path is None:
                raise ConfigError("model has no sequence path")
            sp = copy.copy(self.sequence_path)
            sp.chain = chain
            clone.sequence_path = sp
        else:
            raise ConfigError(f"unknown dynamic path {which!r}")
        return clone


# ---------------------------------------------------------------------------
# evaluation helpers


def predict_proba(model: MuseModel, samples, batch_size: int | None = None) -> np.ndarray:
    """Probabilities in sample order, fixed consecutive evaluation batches.

    The batch boundary matters for the cluster-reference variant (its
    reference is in-batch), so evaluation always chunks deterministically.
    """
    if batch_size is None:
        batch_size = model.config.batch_size
    probs = np.empty(len(samples))
    with ag.no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start:start + batch_size]
            probs[start:start + len(chunk)] = model.forward(chunk).probabilities()
    return probs


def classify(probs: np.ndarray) -> np.ndarray:
    """Hard labels at the 0.5 threshold (0.5 itself maps to class 1)."""
    return (np.asarray(probs) >= 0.5).astype(np.int64)


def accuracy(model: MuseModel, samples, batch_size: int | None = None) -> float:
    labels = np.array([s.label for s in samples])
    return float(np.mean(classify(predict_proba(model, samples, batch_size)) == labels))


# ---------------------------------------------------------------------------
# training


def _batch_indices(n: int, batch_size: int, g) -> list[np.ndarray]:
    idx = g.permutation(n)
    return [idx[s:s + batch_size] for s in range(0, n, batch_size)]


def _labels_of(samples) -> np.ndarray:
    return np.array([s.label for s in samples], dtype=np.int64)


@dataclass
class SearchResult:
    model: MuseModel
    genotypes: list[str]          # one snapshot per epoch
    train_losses: list[float]     # per-epoch means
    valid_losses: list[float]


def bilevel_search(
    train_samples,
    valid_samples,
    config: ModelConfig | None = None,
    seed: int = 0,
    d_t: int | None = None,
    d_v: int | None = None,
) -> SearchResult:
    """First-order alternating search: w on train batches, logits on valid.

    lr_alpha == 0 disables architecture steps entirely, leaving the
    logits at their initial values bit-exactly.
    """
    config = config if config is not None else ModelConfig()
    if not train_samples or not valid_samples:
        raise DataError("bilevel search needs nonempty train and valid splits")
    if d_t is None:
        d_t = train_samples[0].text.d
    if d_v is None:
        d_v = train_samples[0].image.d
    model = MuseModel(d_t, d_v, config, seed)
    w_params = list(model.parameters().values())
    a_params = list(model.arch_parameters().values())
    everything = w_params + a_params
    opt_w = make_optimizer(config.optimizer, w_params, config.lr_w)
    opt_a = None
    if a_params and config.lr_alpha > 0:
        opt_a = make_optimizer(config.optimizer, a_params, config.lr_alpha)
    t_labels = _labels_of(train_samples)
    v_labels = _labels_of(valid_samples)
    genotypes: list[str] = []
    train_hist: list[float] = []
    valid_hist: list[float] = []
    for epoch in range(config.epochs):
        g_t = rng.stream(seed, f"search.shuffle.train.{epoch}")
        g_v = rng.stream(seed, f"search.shuffle.valid.{epoch}")
        t_batches = _batch_indices(len(train_samples), config.batch_size, g_t)
        v_batches = _batch_indices(len(valid_samples), config.batch_size, g_v)
        epoch_t: list[float] = []
        epoch_v: list[float] = []
        for step, bidx in enumerate(t_batches):
            out = model.forward([train_samples[j] for j in bidx])
            loss = model.loss(out, t_labels[bidx])
            ag.zero_grads(everything)
            ag.backward(loss)
            opt_w.step()
            epoch_t.append(loss.item())
            if opt_a is not None:
                vidx = v_batches[step % len(v_batches)]
                out_v = model.forward([valid_samples[j] for j in vidx])
                loss_v = model.loss(out_v, v_labels[vidx])
                ag.zero_grads(everything)
                ag.backward(loss_v)
                opt_a.step()
                epoch_v.append(loss_v.item())
        genotypes.append(model.genotype())
        train_hist.append(float(np.mean(epoch_t)))
        valid_hist.append(float(np.mean(epoch_v)) if epoch_v else float("nan"))
    return SearchResult(model, genotypes, train_hist, valid_hist)


def train_weights(
    model: MuseModel,
    train_samples,
    config: ModelConfig,
    epochs: int,
    stream_prefix: str = "train",
    epoch_offset: int = 0,
) -> list[float]:
    """Weight-only epochs (architecture logits frozen); per-epoch mean losses."""
    if not train_samples:
        raise DataError("weight training needs a nonempty split")
    w_params = list(model.parameters().values())
    everything = w_params + list(model.arch_parameters().values())
    opt = make_optimizer(config.optimizer, w_params, config.lr_w)
    labels = _labels_of(train_samples)
    history: list[float] = []
    for epoch in range(epoch_offset, epoch_offset + epochs):
        g = rng.stream(model.seed, f"{stream_prefix}.shuffle.{epoch}")
        losses: list[float] = []
        for bidx in _batch_indices(len(train_samples), config.batch_size, g):
            out = model.forward([train_samples[j] for j in bidx])
            loss = model.loss(out, labels[bidx])
            ag.zero_grads(everything)
            ag.backward(loss)
            opt.step()
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
    return history


@dataclass
class RetrainResult:
    model: MuseModel              # discrete, restored to the best snapshot
    best_epoch: int
    best_accuracy: float
    losses: list[float]


def retrain_discrete(
    state: MuseModel,
    train_samples,
    valid_samples=None,
    config: ModelConfig | None = None,
) -> RetrainResult:
    """Discretize both chains, then train weights with a best-valid snapshot.

    Checkpoint selection uses validation accuracy (training split when no
    validation split is given); ties keep the earliest epoch.
    """
    if state.mode != "search":
        raise ContractError("retrain_discrete expects a searched (mixed) state")
    config = config if config is not None else state.config
    if not train_samples:
        raise DataError("retraining needs a nonempty training split")
    eval_samples = valid_samples if valid_samples else train_samples
    model = state.discretize()
    params = model.parameters()
    best_values = {name: p.values.copy() for name, p in params.items()}
    best_acc = accuracy(model, eval_samples)
    best_epoch = -1  # the untouched warm start may already be best
    losses: list[float] = []
    for epoch in range(config.retrain_epochs):
        losses.extend(
            train_weights(model, train_samples, config, 1,
                          stream_prefix="retrain", epoch_offset=epoch)
        )
        acc = accuracy(model, eval_samples)
        if acc > best_acc:
            best_acc = acc
            best_epoch = epoch
            best_values = {name: p.values.copy() for name, p in params.items()}
    for name, p in params.items():
        p.values = best_values[name]
    return RetrainResult(model, best_epoch, best_acc, losses)


# ---------------------------------------------------------------------------
# checkpoint container


def _encode_array(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.astype("<f8").tobytes()).decode("ascii"),
    }


def _decode_array(rec: dict) -> np.ndarray:
    raw = base64.b64decode(rec["data"])
    arr = np.frombuffer(raw, dtype="<f8").reshape(rec["shape"])
    return arr.copy()  # frombuffer views are read-only


def _chosen_names(model: MuseModel) -> dict:
    chosen: dict[str, dict[str, str]] = {}
    for which, path in (("linear", model.linear_path), ("sequence", model.sequence_path)):
        if path is not None:
            chosen[which] = {
                _edge_tag(edge): name for edge, name in path.chain.chosen_names().items()
            }
    return chosen


def save_checkpoint(path: str, model: MuseModel, extra: dict | None = None) -> None:
    """Self-describing JSON container; f64 little-endian parameter payloads.

    The PRNG scheme derives every stream from (seed, name), so the seed
    is the complete generator state and round-trips exactly.
    """
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "mode": model.mode,
        "seed": model.seed,
        "d_t": model.d_t,
        "d_v": model.d_v,
        "config": config_to_dict(model.config),
        "genotype": model.genotype(),
        "rng": {"scheme": "blake2b-keyed-philox", "seed": model.seed},
        "params": {n: _encode_array(p.values) for n, p in sorted(model.parameters().items())},
        "arch": {n: _encode_array(p.values) for n, p in sorted(model.arch_parameters().items())},
        "extra": extra if extra is not None else {},
    }
    if model.mode == "discrete":
        payload["chosen"] = _chosen_names(model)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _discretize_to(model: MuseModel, chosen: dict) -> MuseModel:
    clone = copy.copy(model)
    for which in ("linear", "sequence"):
        path = model.linear_path if which == "linear" else model.sequence_path
        if path is None:
            if which in chosen:
                raise ParseError(f"checkpoint names a {which} chain the config disables")
            continue
        if which not in chosen:
            raise ParseError(f"discrete checkpoint lacks chosen operators for the {which} chain")
        table = chosen[which]
        picks = {}
        for edge in path.chain.searched_edges:
            tag = _edge_tag(edge)
            if tag not in table:
                raise ParseError(f"discrete checkpoint lacks an operator for edge {tag}")
            names = [op.name for op in path.chain.ops_by_edge[edge]]
            if table[tag] not in names:
                raise ParseError(f"edge {tag}: operator {table[tag]!r} is not in the search space")
            picks[edge] = path.chain.ops_by_edge[edge][names.index(table[tag])]
        new_path = copy.copy(path)
        new_path.chain = DiscreteChain(path.chain, picks)
        if which == "linear":
            clone.linear_path = new_path
        else:
            clone.sequence_path = new_path
    clone.mode = "discrete"
    return clone


def load_checkpoint(path: str) -> MuseModel:
    """Rebuild a model from a checkpoint; bit-exact parameter round-trip."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"checkpoint is not valid JSON: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"not a model checkpoint: format={payload.get('format')!r}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {payload.get('version')!r}")
    config = config_from_dict(payload["config"])
    model = MuseModel(payload["d_t"], payload["d_v"], config, payload["seed"])
    if payload["mode"] == "discrete":
        model = _discretize_to(model, payload.get("chosen", {}))
    elif payload["mode"] != "search":
        raise ParseError(f"unknown checkpoint mode {payload['mode']!r}")
    for key, live in (("params", model.parameters()), ("arch", model.arch_parameters())):
        stored = payload.get(key, {})
        missing = sorted(set(live) - set(stored))
        stray = sorted(set(stored) - set(live))
        if missing or stray:
            raise ParseError(
                f"checkpoint {key} table mismatch: missing={missing[:3]} stray={stray[:3]}"
            )
        for name, tensor in live.items():
            arr = _decode_array(stored[name])
            if arr.shape != tensor.values.shape:
                raise ParseError(
                    f"{name}: stored shape {arr.shape} vs model shape {tensor.values.shape}"
                )
            tensor.values = arr
    return model
