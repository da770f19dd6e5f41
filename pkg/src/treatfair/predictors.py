"""Outcome predictors with demographic-parity / equalized-odds post-processing.

These classifiers answer a different question than the causal audit: they make
the *label* fair to predict, not the treatment assignment fair to receive.
``audit_under_policy`` glues the two together by re-running the disparity
audit on the rows a (post-processed) predictor accepts.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit
from sklearn.linear_model import LogisticRegression

from .errors import DegenerateData, EmptyGroup, SchemaError, SchemaMismatch
from .metrics import DisparityConfig, DisparityReport, disparity_report
from .schema import CATEGORICAL, CONTINUOUS, OUTCOME, Dataset, FeatureSchema
from .scm import Scm

DEMOGRAPHIC_PARITY = "demographic_parity"
EQUALIZED_ODDS = "equalized_odds"
CRITERIA = (DEMOGRAPHIC_PARITY, EQUALIZED_ODDS)

# Candidate decision thresholds searched during post-processing.
THRESHOLD_GRID = np.arange(501) * 0.002


@dataclass(frozen=True)
class PredictorModel:
    """Logistic score over the non-outcome columns plus per-group thresholds.

    ``terms`` lists the design columns: ``(name, None)`` is the column itself
    (standardized via ``means``/``scales`` when continuous), ``(name, level)``
    is the one-hot indicator ``column == level`` for a categorical level.
    """

    terms: tuple[tuple[str, float | None], ...]
    weights: np.ndarray
    intercept: float
    means: np.ndarray
    scales: np.ndarray
    group_column: str
    thresholds: dict[float, float]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.terms):
            raise SchemaMismatch("one weight per design term required")
        if np.any(np.asarray(self.scales) == 0.0):
            raise SchemaError("standardization scales must be nonzero")
        for value, t in self.thresholds.items():
            if not 0.0 <= t <= 1.0:
                raise SchemaError(f"threshold for group {value!r} outside [0, 1]")

    # --- scoring -------------------------------------------------------
    def design(self, data: Dataset) -> np.ndarray:
        cols = []
        for name, level in self.terms:
            v = data.column(name)
            cols.append((v == level).astype(float) if level is not None else v)
        raw = np.column_stack(cols) if cols else np.empty((data.n, 0))
        return (raw - self.means) / self.scales

    def scores(self, data: Dataset) -> np.ndarray:
        """P(outcome = 1 | features) under the logistic model, per row."""
        return expit(self.design(data) @ self.weights + self.intercept)

    def decide(self, data: Dataset) -> np.ndarray:
        """Boolean accept decision per row: score >= the row's group threshold."""
        group = data.column(self.group_column)
        s = self.scores(data)
        out = np.zeros(data.n, dtype=bool)
        seen = np.zeros(data.n, dtype=bool)
        for value, t in self.thresholds.items():
            m = group == value
            out[m] = s[m] >= t
            seen |= m
        if not seen.all():
            extra = sorted(set(group[~seen]))
            raise SchemaMismatch(f"no threshold for group value(s) {extra}")
        return out

    # --- serialization ---------------------------------------------------
    def to_doc(self) -> dict:
        return {
            "kind": "logistic_predictor",
            "terms": [[name, level] for name, level in self.terms],
            "weights": [float(w) for w in self.weights],
            "intercept": float(self.intercept),
            "means": [float(v) for v in self.means],
            "scales": [float(v) for v in self.scales],
            "group_column": self.group_column,
            "thresholds": [[float(v), float(t)] for v, t in sorted(self.thresholds.items())],
            "metadata": self.metadata,
        }

    @staticmethod
    def from_doc(doc: dict) -> "PredictorModel":
        if doc.get("kind") != "logistic_predictor":
            raise SchemaMismatch(f"not a predictor document: kind={doc.get('kind')!r}")
        return PredictorModel(
            terms=tuple((name, None if level is None else float(level)) for name, level in doc["terms"]),
            weights=np.asarray(doc["weights"], dtype=float),
            intercept=float(doc["intercept"]),
            means=np.asarray(doc["means"], dtype=float),
            scales=np.asarray(doc["scales"], dtype=float),
            group_column=str(doc["group_column"]),
            thresholds={float(v): float(t) for v, t in doc["thresholds"]},
            metadata=dict(doc.get("metadata", {})),
        )


def _design_terms(schema: FeatureSchema) -> tuple[tuple[str, float | None], ...]:
    terms: list[tuple[str, float | None]] = []
    for col in schema:
        if col.role == OUTCOME:
            continue
        if col.kind == CATEGORICAL:
            terms.extend((col.name, float(level)) for level in range(col.cardinality))
        else:
            terms.append((col.name, None))
    return tuple(terms)


def split_indices(
    labels: np.ndarray, seed: int, train_fraction: float = 0.6
) -> tuple[np.ndarray, np.ndarray]:
    """Stratified train/test row indices (per-label shuffle, then re-sorted).

    Sorting keeps each split in original row order so downstream subsets stay
    order-preserving.
    """
    labels = np.asarray(labels, dtype=float)
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for label in np.unique(labels):
        idx = np.flatnonzero(labels == label)
        perm = idx[rng.permutation(idx.size)]
        k = int(round(train_fraction * idx.size))
        train_parts.append(perm[:k])
        test_parts.append(perm[k:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))


def train(
    data: Dataset,
    seed: int = 0,
    group_column: str | None = None,
    train_fraction: float = 0.6,
) -> PredictorModel:
    """Fit a class-balanced logistic predictor of the outcome on a stratified split.

    Continuous features are standardized (moments from the training rows);
    binary features enter raw; categorical features are one-hot encoded.  Both
    group thresholds start at 0.5 — run :func:`postprocess` to move them.
    """
    schema = data.schema
    y = data.column(schema.outcome)
    if np.unique(y).size < 2:
        raise DegenerateData("outcome has a single class; nothing to learn")
    train_idx, _ = split_indices(y, seed, train_fraction)
    y_train = y[train_idx]
    if np.unique(y_train).size < 2:
        raise DegenerateData("a class is absent from the training split")

    terms = _design_terms(schema)
    cols = []
    for name, level in terms:
        v = data.column(name)
        cols.append((v == level).astype(float) if level is not None else v)
    raw = np.column_stack(cols)

    means = np.zeros(len(terms))
    scales = np.ones(len(terms))
    for j, (name, level) in enumerate(terms):
        if level is None and schema.column(name).kind == CONTINUOUS:
            chunk = raw[train_idx, j]
            means[j] = chunk.mean()
            spread = chunk.std()
            scales[j] = spread if spread > 0 else 1.0
    design = (raw - means) / scales

    clf = LogisticRegression(class_weight="balanced", max_iter=2000)
    clf.fit(design[train_idx], y_train)

    column = group_column if group_column is not None else schema.sensitive[0]
    thresholds = {float(v): 0.5 for v in np.unique(data.column(column))}
    metadata = {
        "objective": "balanced_accuracy",
        "split_seed": int(seed),
        "train_fraction": float(train_fraction),
        "criterion": None,
    }
    return PredictorModel(
        terms=terms,
        weights=clf.coef_[0].copy(),
        intercept=float(clf.intercept_[0]),
        means=means,
        scales=scales,
        group_column=column,
        thresholds=thresholds,
        metadata=metadata,
    )


def _counts_at_or_above(scores: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """#(scores >= t) for every grid threshold t, via one sort."""
    ordered = np.sort(scores)
    return ordered.size - np.searchsorted(ordered, grid, side="left")


def postprocess(model: PredictorModel, data: Dataset, criterion: str) -> PredictorModel:
    """Pick per-group thresholds maximizing balanced accuracy under a fairness cap.

    The constraint — positive-rate gap <= 0.02 (demographic parity) or
    max(TPR gap, FPR gap) <= 0.03 (equalized odds) — is evaluated on the same
    training split the model was fit on (recovered from its split seed).  Ties
    break toward higher plain accuracy, then the lexicographically smaller
    threshold pair.  If no grid point satisfies the cap, the best-gap point is
    returned with a warning instead of an error.  Weights are never touched.
    """
    if criterion not in CRITERIA:
        raise SchemaError(f"unknown post-processing criterion {criterion!r}")
    values = sorted(model.thresholds)
    if len(values) != 2:
        raise DegenerateData("threshold post-processing requires exactly two groups")

    y = data.column(data.schema.outcome)
    train_idx, _ = split_indices(y, model.metadata["split_seed"], model.metadata["train_fraction"])
    scores = model.scores(data)[train_idx]
    labels = y[train_idx]
    group = data.column(model.group_column)[train_idx]

    grid = THRESHOLD_GRID
    # Per-group curves: true/false positives as a function of the threshold.
    tp_curves, fp_curves, pos_rate_curves = [], [], []
    n_pos_by_group, n_neg_by_group, n_by_group = [], [], []
    for value in values:
        m = group == value
        if not m.any():
            raise EmptyGroup(f"no training rows with {model.group_column} == {value!r}")
        tp_curves.append(_counts_at_or_above(scores[m & (labels == 1.0)], grid))
        fp_curves.append(_counts_at_or_above(scores[m & (labels == 0.0)], grid))
        pos_rate_curves.append(_counts_at_or_above(scores[m], grid) / m.sum())
        n_pos_by_group.append(int((m & (labels == 1.0)).sum()))
        n_neg_by_group.append(int((m & (labels == 0.0)).sum()))
        n_by_group.append(int(m.sum()))

    n_pos, n_neg = float((labels == 1.0).sum()), float((labels == 0.0).sum())
    tp = tp_curves[0][:, None] + tp_curves[1][None, :]
    fp = fp_curves[0][:, None] + fp_curves[1][None, :]
    tn = n_neg - fp
    tpr = tp / n_pos
    tnr = tn / n_neg
    bacc = 0.5 * (tpr + tnr)
    acc = (tp + tn) / (n_pos + n_neg)

    if criterion == DEMOGRAPHIC_PARITY:
        gap = np.abs(pos_rate_curves[0][:, None] - pos_rate_curves[1][None, :])
        limit = 0.02
    else:
        if min(n_pos_by_group) == 0 or min(n_neg_by_group) == 0:
            raise DegenerateData("equalized odds needs both labels in both groups")
        tpr_gap = np.abs(
            tp_curves[0][:, None] / n_pos_by_group[0] - tp_curves[1][None, :] / n_pos_by_group[1]
        )
        fpr_gap = np.abs(
            fp_curves[0][:, None] / n_neg_by_group[0] - fp_curves[1][None, :] / n_neg_by_group[1]
        )
        gap = np.maximum(tpr_gap, fpr_gap)
        limit = 0.03

    feasible = gap <= limit
    satisfied = bool(feasible.any())
    if not satisfied:
        warnings.warn(
            f"no threshold pair meets the {criterion} cap {limit}; "
            f"returning the best achievable gap {gap.min():.4f}"
        )
        feasible = gap == gap.min()

    best = np.where(feasible, bacc, -np.inf)
    tied = best == best.max()
    tied_acc = np.where(tied, acc, -np.inf)
    final = tied_acc == tied_acc.max()
    flat = int(np.argmax(final))  # first True in C order = smallest (t0, t1)
    i0, i1 = divmod(flat, grid.size)

    thresholds = {values[0]: float(grid[i0]), values[1]: float(grid[i1])}
    metadata = {
        **model.metadata,
        "criterion": criterion,
        "constraint_gap": float(gap[i0, i1]),
        "constraint_satisfied": satisfied,
        "train_balanced_accuracy": float(bacc[i0, i1]),
    }
    return replace(model, thresholds=thresholds, metadata=metadata)


def evaluate(model: PredictorModel, data: Dataset, rows: np.ndarray | None = None) -> dict:
    """Accuracy and group-fairness gaps of the thresholded decisions.

    ``rows`` restricts the evaluation (e.g. to a train or test split); rate
    gaps are reported as 0 when a group lacks the relevant label.
    """
    if rows is not None:
        keep = np.zeros(data.n, dtype=bool)
        keep[np.asarray(rows, dtype=int)] = True
        data = data.subset(keep)
    decisions = model.decide(data).astype(float)
    y = data.column(data.schema.outcome)
    group = data.column(model.group_column)
    values = sorted(model.thresholds)

    def rate(mask: np.ndarray) -> float:
        return float(decisions[mask].mean()) if mask.any() else 0.0

    pos_rates = [rate(group == v) for v in values]
    tprs = [rate((group == v) & (y == 1.0)) for v in values]
    fprs = [rate((group == v) & (y == 0.0)) for v in values]
    n_pos, n_neg = (y == 1.0).sum(), (y == 0.0).sum()
    tpr = float(decisions[y == 1.0].mean()) if n_pos else 0.0
    tnr = float(1.0 - decisions[y == 0.0].mean()) if n_neg else 0.0
    return {
        "n": int(data.n),
        "accuracy": float((decisions == y).mean()),
        "balanced_accuracy": 0.5 * (tpr + tnr),
        "positive_rate_gap": float(abs(pos_rates[0] - pos_rates[1])) if len(values) == 2 else 0.0,
        "tpr_gap": float(abs(tprs[0] - tprs[1])) if len(values) == 2 else 0.0,
        "fpr_gap": float(abs(fprs[0] - fprs[1])) if len(values) == 2 else 0.0,
        "positive_rates": {str(v): pos_rates[i] for i, v in enumerate(values)},
        "thresholds": {str(v): model.thresholds[v] for v in values},
    }


def audit_under_policy(
    data: Dataset, model: Scm, predictor: PredictorModel, config: DisparityConfig
) -> DisparityReport:
    """Disparity report restricted to the rows the predictor accepts."""
    accepted = predictor.decide(data)
    if not accepted.any():
        raise EmptyGroup("the predictor accepted no rows")
    return disparity_report(data.subset(accepted), model, config)
