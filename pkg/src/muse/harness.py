"""Experiment drivers: metrics, the concat baseline, ablation loops,
and deterministic report emission.

Reports serialize two ways. The CSV is the canonical machine artifact
and excludes wall-clock time, so a replayed pipeline is byte-identical;
the aligned text table is for humans and appends the timing line.
"""

from __future__ import annotations

import contextlib
import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import rng
from .autograd import make_optimizer
from .data import DatasetSplit, generate_synthetic
from .errors import ConfigError, DataError, MuseError
from .layers import Linear
from .model import (
    ModelConfig,
    MuseModel,
    bce_loss,
    bilevel_search,
    predict_proba,
    retrain_discrete,
    train_weights,
)

__all__ = [
    "ClassMetrics", "Metrics", "compute_metrics", "evaluate_model",
    "ConcatBaseline", "train_baseline",
    "ReportRow", "ExperimentReport",
    "run_experiment", "run_operator_ablation", "run_path_ablation",
    "PATH_ABLATION_LABELS",
]

PATH_ABLATION_LABELS = ("MUSE", "w/o Linear", "w/o Sequence", "w/o Auxiliary")


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    fake: ClassMetrics
    real: ClassMetrics
    n: int


def _one_class(pred_pos: np.ndarray, label_pos: np.ndarray) -> ClassMetrics:
    tp = int(np.sum(pred_pos & label_pos))
    fp = int(np.sum(pred_pos & ~label_pos))
    fn = int(np.sum(~pred_pos & label_pos))
    tn = int(np.sum(~pred_pos & ~label_pos))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassMetrics(precision, recall, f1, tp, fp, fn, tn)


def compute_metrics(predictions, labels) -> Metrics:
    """Per-class scores with fake (label 1) and real (label 0) each
    treated as the positive class; decision threshold 0.5."""
    y = np.asarray(predictions, dtype=np.float64).reshape(-1)
    lab = np.asarray(labels).reshape(-1)
    if y.size == 0:
        raise DataError("compute_metrics needs at least one prediction")
    if y.shape != lab.shape:
        raise DataError(f"{y.size} predictions vs {lab.size} labels")
    if not np.all(np.isin(lab, (0, 1))):
        raise DataError("labels must be 0 or 1")
    pred_fake = y >= 0.5
    is_fake = lab == 1
    fake = _one_class(pred_fake, is_fake)
    real = _one_class(~pred_fake, ~is_fake)
    return Metrics((fake.tp + fake.tn) / y.size, fake, real, int(y.size))


def _labels_of(samples) -> np.ndarray:
    return np.array([s.label for s in samples], dtype=np.int64)


def evaluate_model(model, samples) -> Metrics:
    return compute_metrics(predict_proba(model, samples), _labels_of(samples))


# ---------------------------------------------------------------------------
# reference baseline: pooled concat through two linear layers


class ConcatBaseline:
    """Pooled text and image concatenated, then two linear layers and a
    sigmoid. No hidden activation: the score is affine in the pooled
    features, which is exactly the reference point the planted rules
    are built to defeat. Absent modalities contribute zeros without
    being read.
    """

    def __init__(self, d_t: int, d_v: int, d_h: int, seed: int):
        self.d_t = d_t
        self.d_v = d_v
        self.seed = seed
        self.fc1 = Linear("baseline.fc1", d_t + d_v, d_h, seed)
        self.fc2 = Linear("baseline.fc2", d_h, 1, seed)

    def parameters(self) -> dict[str, ag.Tensor]:
        return {**self.fc1.parameters(), **self.fc2.parameters()}

    def _features(self, samples) -> np.ndarray:
        rows = []
        for s in samples:
            t = s.text.values.mean(axis=0) if s.text.present else np.zeros(self.d_t)
            v = s.image.values.mean(axis=0) if s.image.present else np.zeros(self.d_v)
            rows.append(np.concatenate([t, v]))
        return np.stack(rows)

    def forward(self, samples) -> ag.Tensor:
        x = ag.tensor(self._features(samples))
        return ag.sigmoid(self.fc2(self.fc1(x)))

    def predict_proba(self, samples, batch_size: int = 64) -> np.ndarray:
        out = []
        with ag.no_grad():
            for start in range(0, len(samples), batch_size):
                out.append(self.forward(samples[start:start + batch_size]).values[:, 0])
        return np.concatenate(out)


def train_baseline(train_samples, config: ModelConfig, seed: int) -> ConcatBaseline:
    """Same optimizer, learning rate, and total epoch budget as the
    full pipeline (search epochs plus retraining epochs)."""
    if not train_samples:
        raise DataError("baseline training needs a nonempty split")
    d_t = train_samples[0].text.d
    d_v = train_samples[0].image.d
    baseline = ConcatBaseline(d_t, d_v, config.d_h, seed)
    params = list(baseline.parameters().values())
    opt = make_optimizer(config.optimizer, params, config.lr_w)
    labels = _labels_of(train_samples)
    for epoch in range(config.epochs + config.retrain_epochs):
        g = rng.stream(seed, f"baseline.shuffle.{epoch}")
        order = g.permutation(len(train_samples))
        for start in range(0, len(order), config.batch_size):
            bidx = order[start:start + config.batch_size]
            y = baseline.forward([train_samples[j] for j in bidx])
            loss = bce_loss(y, labels[bidx])
            ag.zero_grads(params)
            ag.backward(loss)
            opt.step()
    return baseline


# ---------------------------------------------------------------------------
# reports


@dataclass
class ReportRow:
    label: str
    metrics: Metrics


@dataclass
class ExperimentReport:
    config_echo: str
    genotype: str
    rows: list[ReportRow]
    seed: int
    wall_clock: float

    _COLUMNS = ("label", "n", "accuracy",
                "fake_precision", "fake_recall", "fake_f1",
                "real_precision", "real_recall", "real_f1")

    def _cells(self, row: ReportRow) -> list[str]:
        m = row.metrics
        return [row.label, str(m.n)] + [
            "%.6f" % v for v in (
                m.accuracy,
                m.fake.precision, m.fake.recall, m.fake.f1,
                m.real.precision, m.real.recall, m.real.f1,
            )
        ]

    def to_csv(self) -> str:
        """Canonical artifact: excludes wall-clock so replays are byte-identical."""
        lines = ["# muse-report 1", f"# seed = {self.seed}"]
        for line in self.config_echo.splitlines():
            lines.append(f"# config: {line}")
        for line in self.genotype.splitlines():
            lines.append(f"# genotype: {line}")
        lines.append(",".join(self._COLUMNS))
        for row in self.rows:
            lines.append(",".join(self._cells(row)))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        table = [list(self._COLUMNS)] + [self._cells(r) for r in self.rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(self._COLUMNS))]
        out = []
        for row in table:
            out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if self.genotype:
            out.append("")
            out.append(self.genotype.rstrip())
        out.append("")
        out.append(f"seed: {self.seed}")
        out.append("wall clock: %.2f s" % self.wall_clock)
        return "\n".join(out) + "\n"


def merge_reports(reports) -> ExperimentReport:
    """One table from many single-row reports (ablation output)."""
    if not reports:
        raise DataError("nothing to merge")
    rows = [row for rep in reports for row in rep.rows]
    genotype = "\n\n".join(rep.genotype for rep in reports if rep.genotype)
    wall = sum(rep.wall_clock for rep in reports)
    return ExperimentReport(reports[0].config_echo, genotype, rows,
                            reports[0].seed, wall)


@contextlib.contextmanager
def _stage(name: str):
    """Re-raise pipeline errors tagged with the stage that hit them."""
    try:
        yield
    except MuseError as exc:
        raise type(exc)(f"[stage {name}] {exc}") from exc


# ---------------------------------------------------------------------------
# drivers


def run_experiment(
    data_config=None,
    model_config: ModelConfig | None = None,
    seed: int = 0,
    dataset: DatasetSplit | None = None,
    config_echo: str = "",
) -> ExperimentReport:
    """Full pipeline: data, search, evaluate, retrain discrete, evaluate.

    Emits the searched mixed model as the MUSE row and the retrained
    discrete model as MUSE-discrete.
    """
    t0 = time.perf_counter()
    config = model_config if model_config is not None else ModelConfig()
    with _stage("data"):
        ds = dataset if dataset is not None else generate_synthetic(data_config)
        if not ds.test:
            raise DataError("experiment needs a nonempty test split")
    with _stage("search"):
        result = bilevel_search(ds.train, ds.valid, config, seed)
    with _stage("eval"):
        rows = [ReportRow("MUSE", evaluate_model(result.model, ds.test))]
    with _stage("retrain"):
        retrained = retrain_discrete(result.model, ds.train, ds.valid, config)
    with _stage("eval-discrete"):
        rows.append(ReportRow("MUSE-discrete", evaluate_model(retrained.model, ds.test)))
    genotype = result.model.genotype() + "\n" + retrained.model.genotype()
    return ExperimentReport(config_echo, genotype, rows, seed,
                            time.perf_counter() - t0)


def run_operator_ablation(
    searched: MuseModel,
    dataset: DatasetSplit,
    config: ModelConfig | None = None,
    which: str = "linear",
    config_echo: str = "",
) -> list[ExperimentReport]:
    """Iterated pruning: drop each edge's lowest-weight operator, retrain
    the weights (architecture frozen), evaluate; repeat down to one
    operator. One single-row report per retained count, so each keeps
    its own genotype.
    """
    if which not in ("linear", "sequence"):
        raise ConfigError(f"operator ablation targets 'linear' or 'sequence', not {which!r}")
    if searched.mode != "search":
        raise ConfigError("operator ablation starts from a searched (mixed) model")
    config = config if config is not None else searched.config
    path = searched.linear_path if which == "linear" else searched.sequence_path
    if path is None:
        raise ConfigError(f"model has no {which} path to ablate")
    with _stage("data"):
        if not dataset.train or not dataset.test:
            raise DataError("operator ablation needs train and test splits")

    chain = path.chain
    edges = chain.prunable_edges(chain.transform_kind)
    total = len(chain.op_names(edges[0]))
    model = searched
    reports = []
    for count in range(total, 0, -1):
        t0 = time.perf_counter()
        label = "All Operators" if count == total else f"{count} Operators"
        if count < total:
            with _stage(f"prune-{count}"):
                chain = chain.prune_lowest(chain.transform_kind)
                model = model.with_chain(which, chain)
            with _stage(f"retrain-{count}"):
                train_weights(model, dataset.train, config, config.retrain_epochs,
                              stream_prefix=f"ablate.{which}.{count}")
        with _stage(f"eval-{count}"):
            row = ReportRow(label, evaluate_model(model, dataset.test))
        reports.append(ExperimentReport(config_echo, model.genotype(), [row],
                                        searched.seed, time.perf_counter() - t0))
    return reports


def run_path_ablation(
    data_config=None,
    model_config: ModelConfig | None = None,
    seed: int = 0,
    dataset: DatasetSplit | None = None,
    config_echo: str = "",
) -> list[ExperimentReport]:
    """Search the full model and each single-path knockout under the
    same seed; per-parameter init streams keep the shared parameters
    bit-identical across variants.
    """
    config = model_config if model_config is not None else ModelConfig()
    for needed in ("linear", "sequence", "static"):
        if needed not in config.paths:
            raise ConfigError(f"path ablation needs all three paths; missing {needed!r}")
    with _stage("data"):
        ds = dataset if dataset is not None else generate_synthetic(data_config)
        if not ds.test:
            raise DataError("path ablation needs a nonempty test split")
    variants = [
        ("MUSE", config.paths),
        ("w/o Linear", tuple(p for p in config.paths if p != "linear")),
        ("w/o Sequence", tuple(p for p in config.paths if p != "sequence")),
        ("w/o Auxiliary", tuple(p for p in config.paths if p != "static")),
    ]
    reports = []
    for label, paths in variants:
        t0 = time.perf_counter()
        variant_cfg = dataclasses.replace(config, paths=paths)
        with _stage(f"search[{label}]"):
            result = bilevel_search(ds.train, ds.valid, variant_cfg, seed)
        with _stage(f"eval[{label}]"):
            row = ReportRow(label, evaluate_model(result.model, ds.test))
        reports.append(ExperimentReport(config_echo, result.model.genotype(),
                                        [row], seed, time.perf_counter() - t0))
    return reports
