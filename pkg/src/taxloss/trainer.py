"""Linear-softmax classifier trained with an optional taxonomy regularizer.

Four methods share one loop:

* ``baseline``  -- mean cross-entropy over leaf-labelled examples;
* ``symbolic``  -- plus ``w`` times the mean taxonomy semantic loss;
* ``gcn``       -- plus ``w`` times the backbone-graph regularizer;
* ``l1only``    -- plus ``w`` times the flat one-hot semantic loss.

Optimisation is plain mini-batch gradient descent with a seeded per-epoch
shuffle, so a (config, seed) pair fixes the whole trajectory.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import SupervisionRecord, feature_matrix
from .gcnreg import GcnParams, build_backbone, node_inputs, reg_gradients
from .semloss import DEFAULT_EPS, Mode, SemanticLossContext, SemiAggregation, batch_semantic
from .taxonomy import Taxonomy, parse_taxonomy

SCHEMA_VERSION = 1


class Method(str, enum.Enum):
    BASELINE = "baseline"
    SYMBOLIC = "symbolic"
    GCN = "gcn"
    L1_ONLY = "l1only"


@dataclass
class TrainConfig:
    method: Method = Method.BASELINE
    w: float = 0.1
    epochs: int = 10
    batch_size: int = 32
    lr: float = 0.1
    seeds: tuple[int, ...] = (0, 1, 2)
    symbolic_mode: str = "auto"  # auto | supervised | semi
    semi_aggregation: str = "deepest"
    epsilon: float = DEFAULT_EPS
    gcn_layers: int = 1
    gcn_hidden: int | None = None
    init_scale: float = 0.01
    gcn_lr: float | None = None  # step size for graph-convolution parameters; None uses lr
    shuffle: bool = True

    def __post_init__(self):
        self.method = Method(self.method)
        self.seeds = tuple(int(s) for s in self.seeds)
        SemiAggregation(self.semi_aggregation)
        if self.symbolic_mode not in ("auto", "supervised", "semi"):
            raise ValueError(f"unknown symbolic_mode {self.symbolic_mode!r}")
        if self.w < 0:
            raise ValueError("regularizer weight w must be non-negative")
        if self.gcn_lr is not None and self.gcn_lr <= 0:
            raise ValueError("gcn_lr must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("epochs and batch_size must be positive, lr > 0")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in d.items() if k in known})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["seeds"] = list(self.seeds)
        return d


@dataclass
class ClassifierParams:
    W: np.ndarray  # (d, n_classes)
    b: np.ndarray  # (n_classes,)
    seed: int = 0

    @classmethod
    def init(cls, dim: int, n_classes: int, seed: int, scale: float = 0.01,
             rng: np.random.Generator | None = None) -> "ClassifierParams":
        rng = rng if rng is not None else np.random.default_rng(seed)
        return cls(rng.normal(0.0, scale, (dim, n_classes)), np.zeros(n_classes), seed)

    def copy(self) -> "ClassifierParams":
        return ClassifierParams(self.W.copy(), self.b.copy(), self.seed)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(params: ClassifierParams, features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != params.W.shape[0]:
        raise ValueError(f"expected {params.W.shape[0]} features, got {x.shape[-1]}")
    return softmax(x @ params.W + params.b)


# --- objective ---------------------------------------------------------------


@dataclass
class Objective:
    loss: float
    ce: float
    reg: float
    dW: np.ndarray
    db: np.ndarray
    gcn_grads: GcnParams | None = None
    acc: float = math.nan
    wmc_sat: float | None = None


def semantic_context(tax: Taxonomy, cfg: TrainConfig, records: Sequence[SupervisionRecord]):
    if cfg.method is Method.L1_ONLY:
        mode = Mode.L1_ONLY
    elif cfg.method is Method.SYMBOLIC:
        mode = cfg.symbolic_mode
        if mode == "auto":
            mode = "semi" if any(r.leaf_label is None for r in records) else "supervised"
        mode = Mode.SUPERVISED if mode == "supervised" else Mode.SEMI
    else:
        return None
    return SemanticLossContext(tax, mode, cfg.epsilon, cfg.semi_aggregation)


def objective(
    cfg: TrainConfig,
    params: ClassifierParams,
    batch: Sequence[SupervisionRecord],
    tax: Taxonomy,
    ctx: SemanticLossContext | None = None,
    gcn: GcnParams | None = None,
) -> Objective:
    """Total batch loss and exact gradients for the configured method."""
    X = feature_matrix(batch)
    z = X @ params.W + params.b
    z = z - z.max(axis=1, keepdims=True)
    logP = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    P = np.exp(logP)
    B, n = P.shape
    lab = np.array([r.leaf_label is not None for r in batch])
    y = np.array([r.leaf_label if r.leaf_label is not None else -1 for r in batch])

    dz = np.zeros_like(P)
    n_lab = int(lab.sum())
    ce = 0.0
    acc = math.nan
    if n_lab:
        rows = np.flatnonzero(lab)
        ce = float(-logP[rows, y[rows]].mean())
        onehot = np.zeros((n_lab, n))
        onehot[np.arange(n_lab), y[rows]] = 1.0
        dz[rows] = (P[rows] - onehot) / n_lab
        acc = float(np.mean(P[rows].argmax(axis=1) == y[rows]))

    reg = 0.0
    wmc_sat = None
    gcn_grads = None
    dP = None
    method = cfg.method
    if method in (Method.SYMBOLIC, Method.L1_ONLY):
        if ctx is None:
            raise ValueError(f"method {method.value} needs a semantic loss context")
        if ctx.mode is Mode.SUPERVISED:
            rows = np.flatnonzero(lab)
            targets = [int(y[i]) for i in rows]
        elif ctx.mode is Mode.SEMI:
            rows = np.flatnonzero(~lab)
            targets = [batch[i].known_node for i in rows]
        else:
            rows = np.arange(B)
            targets = [None] * B
        dP = np.zeros_like(P)
        if len(rows):
            sem = batch_semantic(ctx, P[rows], targets)
            reg = float(sem.losses.mean())
            dP[rows] = sem.grads / len(rows)
            wmc_sat = float(np.mean(sem.sat)) if sem.sat else None
    elif method is Method.GCN:
        if gcn is None:
            raise ValueError("method gcn needs graph convolution parameters")
        g = build_backbone(tax, batch)
        rg = reg_gradients(g, node_inputs(g, gcn, X), gcn, P)
        reg = rg.value
        dP = rg.dP
        gcn_grads = GcnParams([cfg.w * d for d in rg.dW], cfg.w * rg.dX[: g.n_tax])

    if dP is not None:
        dP = cfg.w * dP
        dz = dz + P * (dP - np.sum(dP * P, axis=1, keepdims=True))
    loss = ce + cfg.w * reg if method is not Method.BASELINE else ce
    return Objective(loss, ce, reg, X.T @ dz, dz.sum(axis=0), gcn_grads, acc, wmc_sat)


# --- training ----------------------------------------------------------------


@dataclass
class HistoryRow:
    iter: int
    loss: float
    acc: float
    wmc_sat: float | None


@dataclass
class TrainResult:
    params: ClassifierParams
    history: list[HistoryRow]
    gcn: GcnParams | None = None
    iters_per_epoch: int = 0
    seed: int = 0

    def __iter__(self):  # unpacks as (params, history)
        return iter((self.params, self.history))


def _streams(seed: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def train(
    cfg: TrainConfig,
    records: Sequence[SupervisionRecord],
    tax: Taxonomy,
    seed: int | None = None,
) -> TrainResult:
    if not records:
        raise ValueError("cannot train on an empty dataset")
    if not any(r.leaf_label is not None for r in records):
        raise ValueError("training needs at least one leaf-labelled example")
    dim = records[0].features.shape[0]
    for r in records:
        if r.features.shape[0] != dim:
            raise ValueError(f"record {r.id!r} has {r.features.shape[0]} features, expected {dim}")
        if r.known_node >= len(tax) or (r.leaf_label is not None and r.leaf_label >= tax.n_classes):
            raise ValueError(f"record {r.id!r} does not fit the taxonomy")

    seed = cfg.seeds[0] if seed is None else seed
    init_rng, shuffle_rng, gcn_rng = _streams(seed)
    params = ClassifierParams.init(dim, tax.n_classes, seed, cfg.init_scale, init_rng)
    ctx = semantic_context(tax, cfg, records)
    gcn = None
    if cfg.method is Method.GCN:
        gcn = GcnParams.init(len(tax), dim, tax.n_classes, gcn_rng, cfg.gcn_layers, cfg.gcn_hidden)

    N = len(records)
    bs = min(cfg.batch_size, N)
    per_epoch = math.ceil(N / bs)
    history: list[HistoryRow] = []
    it = 0
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(N) if cfg.shuffle else np.arange(N)
        for start in range(0, N, bs):
            batch = [records[i] for i in order[start : start + bs]]
            obj = objective(cfg, params, batch, tax, ctx, gcn)
            params.W -= cfg.lr * obj.dW
            params.b -= cfg.lr * obj.db
            if gcn is not None:
                glr = cfg.lr if cfg.gcn_lr is None else cfg.gcn_lr
                for W, dW in zip(gcn.weights, obj.gcn_grads.weights):
                    W -= glr * dW
                gcn.node_features -= glr * obj.gcn_grads.node_features
            it += 1
            history.append(HistoryRow(it, obj.loss, obj.acc, obj.wmc_sat))
    return TrainResult(params, history, gcn, per_epoch, seed)


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def history_csv(history: Sequence[HistoryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter", "loss", "acc", "wmc_sat"])
    for h in history:
        w.writerow([h.iter, _fmt(h.loss), _fmt(h.acc), _fmt(h.wmc_sat)])
    return buf.getvalue()


def read_history_csv(text: str) -> list[HistoryRow]:
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append(HistoryRow(
            int(r["iter"]), float(r["loss"]),
            float(r["acc"]) if r["acc"] else math.nan,
            float(r["wmc_sat"]) if r["wmc_sat"] else None,
        ))
    return rows


# --- evaluation --------------------------------------------------------------


@dataclass
class MetricsReport:
    accuracy: float
    macro_avg_f1: float
    weighted_avg_f1: float
    precision: list[float] = field(default_factory=list)
    recall: list[float] = field(default_factory=list)
    f1: list[float] = field(default_factory=list)
    support: list[int] = field(default_factory=list)

    def to_dict(self, class_names: Sequence[str] | None = None) -> dict:
        names = class_names or [str(k) for k in range(len(self.f1))]
        return {
            "accuracy": self.accuracy,
            "macro_avg_f1": self.macro_avg_f1,
            "weighted_avg_f1": self.weighted_avg_f1,
            "per_class": [
                {"class": nm, "precision": p, "recall": r, "f1": f, "support": s}
                for nm, p, r, f, s in zip(names, self.precision, self.recall, self.f1, self.support)
            ],
        }


def metrics_from_predictions(y_true, y_pred, n_classes: int) -> MetricsReport:
    """Per-class and averaged scores.

    Classes that are neither predicted nor present score F1 = 0 and still
    count in the macro average.
    """
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValueError("need equally sized, non-empty label arrays")
    tp = np.bincount(y_true[y_true == y_pred], minlength=n_classes)[:n_classes]
    support = np.bincount(y_true, minlength=n_classes)[:n_classes]
    predicted = np.bincount(y_pred, minlength=n_classes)[:n_classes]
    prec = [float(t / p) if p else 0.0 for t, p in zip(tp, predicted)]
    rec = [float(t / s) if s else 0.0 for t, s in zip(tp, support)]
    f1 = [float(2 * t / (p + s)) if p + s else 0.0 for t, p, s in zip(tp, predicted, support)]
    N = y_true.size
    return MetricsReport(
        accuracy=float(tp.sum() / N),
        macro_avg_f1=float(sum(f1) / n_classes),
        weighted_avg_f1=float(sum(s * f for s, f in zip(support, f1)) / N),
        precision=prec,
        recall=rec,
        f1=f1,
        support=[int(s) for s in support],
    )


def evaluate(params: ClassifierParams, test: Sequence[SupervisionRecord], tax: Taxonomy) -> MetricsReport:
    if not test:
        raise ValueError("cannot evaluate on an empty test set")
    unlabeled = [r.id for r in test if r.leaf_label is None]
    if unlabeled:
        raise ValueError(f"test records without leaf labels: {unlabeled[:5]}")
    P = forward(params, feature_matrix(test))
    return metrics_from_predictions([r.leaf_label for r in test], P.argmax(axis=1), tax.n_classes)


@dataclass
class SeedSweep:
    runs: list[TrainResult]
    reports: list[MetricsReport]

    @property
    def best_index(self) -> int:
        # ties go to the earliest seed
        return max(range(len(self.reports)), key=lambda i: (self.reports[i].macro_avg_f1, -i))

    @property
    def best(self) -> tuple[TrainResult, MetricsReport]:
        i = self.best_index
        return self.runs[i], self.reports[i]


def sweep_seeds(cfg: TrainConfig, train_set, test_set, tax: Taxonomy) -> SeedSweep:
    """Train once per seed and keep every run; ``best`` picks the top macro F1."""
    runs, reports = [], []
    for s in cfg.seeds:
        res = train(cfg, train_set, tax, seed=s)
        runs.append(res)
        reports.append(evaluate(res.params, test_set, tax))
    return SeedSweep(runs, reports)


# --- artifacts ---------------------------------------------------------------


def model_json(params: ClassifierParams, tax: Taxonomy, cfg: TrainConfig) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "method": cfg.method.value,
        "seed": params.seed,
        "taxonomy": tax.serialize(),
        "taxonomy_sha256": tax.digest(),
        "leaf_order": [tax.nodes[v].name for v in tax.leaf_order],
        "W": params.W.tolist(),
        "b": params.b.tolist(),
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_model(text: str) -> tuple[ClassifierParams, Taxonomy]:
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema {doc.get('schema_version')!r}")
    tax = parse_taxonomy(doc["taxonomy"])
    if tax.digest() != doc["taxonomy_sha256"]:
        raise ValueError("taxonomy hash mismatch: model file is corrupt")
    if [tax.nodes[v].name for v in tax.leaf_order] != doc["leaf_order"]:
        raise ValueError("leaf order in model does not match its taxonomy")
    W = np.array(doc["W"], dtype=float)
    b = np.array(doc["b"], dtype=float)
    return ClassifierParams(W, b, int(doc["seed"])), tax


def report_json(report: MetricsReport, tax: Taxonomy, cfg: TrainConfig, seed: int,
                per_seed: Sequence[tuple[int, MetricsReport]] = ()) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "method": cfg.method.value,
        "seed": seed,
        "config": cfg.to_dict(),
        **report.to_dict([tax.nodes[v].name for v in tax.leaf_order]),
    }
    if per_seed:
        doc["per_seed"] = [
            {"seed": s, "accuracy": r.accuracy, "macro_avg_f1": r.macro_avg_f1,
             "weighted_avg_f1": r.weighted_avg_f1}
            for s, r in per_seed
        ]
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
