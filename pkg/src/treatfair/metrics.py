"""Counterfactual treatment-disparity metrics.

For rows of one sensitive group, compare factual treatments against the
treatments the model assigns in the counterfactual world where the sensitive
value is flipped — either along all causal paths (total disparity, TTD) or
only along the direct sensitive→treatment edges with covariates pinned
(direct disparity, DTD). The -E variants measure how often applying the
counterfactual treatments would have flipped the factual outcome label.

Multi-valued sensitive attributes aggregate per-candidate disparities with
average / max / variance aggregators. The average and variance aggregators
divide by (k-1)k/2 where k counts the attribute's values — the normalizer is
kept exactly as published even though the sum has k-1 terms; pass
``corrected_mean=True`` for the conventional /(k-1) scaling.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Mapping

import numpy as np

from .errors import EmptyGroup, SchemaError, UnknownValue
from .schema import CONTINUOUS, Dataset
from .scm import InterventionPlan, Scm, counterfactual, downstream_outcome, path_specific_counterfactual

DELTAS = ("difference", "abs_difference")
STATISTICS = ("mean", "median")
AGGREGATORS = (None, "avg", "max", "var")


@dataclass(frozen=True)
class DisparityConfig:
    group_pair: tuple[float, float] = (0.0, 1.0)
    sensitive_column: str | None = None
    delta: str = "difference"
    statistic: str = "median"
    aggregator: str | None = None
    values: tuple | None = None
    corrected_mean: bool = False

    def __post_init__(self) -> None:
        if self.group_pair[0] == self.group_pair[1]:
            raise SchemaError("group_pair values must differ")
        if self.delta not in DELTAS:
            raise SchemaError(f"delta must be one of {DELTAS}")
        if self.statistic not in STATISTICS:
            raise SchemaError(f"statistic must be one of {STATISTICS}")
        if self.aggregator not in AGGREGATORS:
            raise SchemaError(f"aggregator must be one of {AGGREGATORS}")


@dataclass
class DisparityReport:
    """Full audit for one group pair: treatment shifts and label-flip rates."""

    config: dict
    counts: dict[str, int]
    ttd: dict[str, dict[str, float]]
    dtd: dict[str, dict[str, float]]
    ttd_e: dict[str, float]
    dtd_e: dict[str, float]

    def to_doc(self) -> dict:
        return {
            "config": self.config,
            "counts": self.counts,
            "ttd": self.ttd,
            "dtd": self.dtd,
            "ttd_e": self.ttd_e,
            "dtd_e": self.dtd_e,
        }

    def to_csv_rows(self) -> list[tuple[str, str, str, str]]:
        rows: list[tuple[str, str, str, str]] = [("metric", "dimension", "statistic", "value")]
        for name, table in (("ttd", self.ttd), ("dtd", self.dtd)):
            for stat, cols in table.items():
                for col, v in cols.items():
                    rows.append((name, col, stat, repr(float(v))))
        for name, table in (("ttd_e", self.ttd_e), ("dtd_e", self.dtd_e)):
            for label, v in table.items():
                rows.append((name, f"y={label}", "percent", f"{v:.2f}"))
        return rows


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _sensitive_column(data: Dataset, config: DisparityConfig) -> str:
    col = config.sensitive_column or data.schema.sensitive[0]
    if col not in data.schema.sensitive:
        raise SchemaError(f"{col!r} is not a Sensitive column")
    return col


def _group_mask(data: Dataset, col: str, value: float) -> np.ndarray:
    mask = data.column(col) == value
    if not mask.any():
        raise EmptyGroup(f"no rows with {col} == {value!r}")
    return mask


def _audit_pair(data: Dataset, config: DisparityConfig) -> tuple[str, float, float, np.ndarray]:
    """Resolve the sensitive column and group pair; both sides must have rows
    (a counterfactual flip into an unpopulated group has no overlap support)."""
    col = _sensitive_column(data, config)
    s_f, s_p = config.group_pair
    mask = _group_mask(data, col, s_f)
    _group_mask(data, col, s_p)
    return col, s_f, s_p, mask


def _delta(data: Dataset, cf_cols: Mapping[str, np.ndarray], kind: str) -> dict[str, np.ndarray]:
    out = {}
    for col in data.schema.treatments:
        if data.schema.column(col).kind == CONTINUOUS:
            d = cf_cols[col] - data.column(col)
            out[col] = np.abs(d) if kind == "abs_difference" else d
        else:
            # categorical/binary treatments report flip indicators
            out[col] = (cf_cols[col] != data.column(col)).astype(float)
    return out


def _stat(values: np.ndarray, statistic: str) -> float:
    return float(np.median(values) if statistic == "median" else np.mean(values))


def _total_cf(data: Dataset, model: Scm, col: str, target) -> dict[str, np.ndarray]:
    return counterfactual(model, dict(data.cols), {col: target})


def _direct_cf(data: Dataset, model: Scm, col: str, target) -> dict[str, np.ndarray]:
    pinned = {c: data.column(c) for c in data.schema.covariates}
    stages = ({col: target}, pinned) if pinned else ({col: target},)
    plan = InterventionPlan(stages)
    return path_specific_counterfactual(model, dict(data.cols), plan)


# ---------------------------------------------------------------------------
# single-pair metrics
# ---------------------------------------------------------------------------

def ttd(data: Dataset, model: Scm, config: DisparityConfig) -> dict[str, float]:
    """Per-treatment statistic of the total counterfactual treatment shift."""
    col, s_f, s_p, mask = _audit_pair(data, config)
    cf = _total_cf(data, model, col, s_p)
    dz = _delta(data, cf, config.delta)
    return {c: _stat(d[mask], config.statistic) for c, d in dz.items()}


def dtd(data: Dataset, model: Scm, config: DisparityConfig) -> dict[str, float]:
    """Per-treatment statistic of the direct-path counterfactual shift."""
    col, s_f, s_p, mask = _audit_pair(data, config)
    cf = _direct_cf(data, model, col, s_p)
    dz = _delta(data, cf, config.delta)
    return {c: _stat(d[mask], config.statistic) for c, d in dz.items()}


def _effect(data: Dataset, model: Scm, cf_cols: Mapping[str, np.ndarray], mask: np.ndarray) -> dict[str, float]:
    z_hat = {c: cf_cols[c] for c in data.schema.treatments}
    y_cf = downstream_outcome(model, dict(data.cols), z_hat)
    y = data.column(data.schema.outcome)
    out = {}
    for label in (0.0, 1.0):
        m = mask & (y == label)
        out[str(int(label))] = float(100.0 * (y_cf[m] != label).mean()) if m.any() else 0.0
    return out


def ttd_e(data: Dataset, model: Scm, config: DisparityConfig) -> dict[str, float]:
    """Percent of rows, per factual label, whose label flips under z^SCF."""
    col, s_f, s_p, mask = _audit_pair(data, config)
    return _effect(data, model, _total_cf(data, model, col, s_p), mask)


def dtd_e(data: Dataset, model: Scm, config: DisparityConfig) -> dict[str, float]:
    """Percent of rows, per factual label, whose label flips under z^SPCF."""
    col, s_f, s_p, mask = _audit_pair(data, config)
    return _effect(data, model, _direct_cf(data, model, col, s_p), mask)


# ---------------------------------------------------------------------------
# multi-valued sensitive attributes
# ---------------------------------------------------------------------------

def _candidates(data: Dataset, col: str, config: DisparityConfig) -> list:
    if config.values is None or len(config.values) < 2:
        raise SchemaError("multi-sensitive metrics need a value set of size >= 2")
    if config.aggregator is None:
        raise SchemaError("multi-sensitive metrics need an aggregator")
    out = []
    for v in config.values:
        if isinstance(v, Mapping):
            for c, val in v.items():
                if val not in np.unique(data.column(c)):
                    raise UnknownValue(f"{c} == {val!r} not present in the data")
            out.append(dict(v))
        else:
            if v == config.group_pair[0]:
                continue
            if v not in np.unique(data.column(col)):
                raise UnknownValue(f"{col} == {v!r} not present in the data")
            out.append(v)
    return out


def _norm_constant(k: int, corrected: bool) -> float:
    return float(k - 1) if corrected else (k - 1) * k / 2.0


def ttd_multi(data: Dataset, model: Scm, config: DisparityConfig) -> dict[str, float]:
    """Aggregated absolute treatment shift over all counterfactual values.

    Candidates are the value set minus the factual value (scalars flip the
    audited column; mappings flip several sensitive columns jointly). The
    per-row aggregate — avg: sum/|norm|, max, var: sum of squares/|norm| —
    is averaged over the factual group's rows.
    """
    col = _sensitive_column(data, config)
    s_f = config.group_pair[0]
    mask = _group_mask(data, col, s_f)
    cands = _candidates(data, col, config)
    k = len(cands) + 1
    norm = _norm_constant(k, config.corrected_mean)

    per_cand: list[dict[str, np.ndarray]] = []
    for cand in cands:
        do = cand if isinstance(cand, dict) else {col: cand}
        cf = counterfactual(model, dict(data.cols), do)
        per_cand.append(_delta(data, cf, "abs_difference"))

    out = {}
    for c in data.schema.treatments:
        stack = np.stack([d[c] for d in per_cand])  # (m, n)
        if config.aggregator == "max":
            agg = stack.max(axis=0)
        elif config.aggregator == "avg":
            agg = stack.sum(axis=0) / norm
        else:
            agg = (stack ** 2).sum(axis=0) / norm
        out[c] = float(agg[mask].mean())
    return out


def aggregate_flip_indicators(flips: np.ndarray, aggregator: str) -> float:
    """Row-level label-flip aggregation: worst case (max), mean, or variance."""
    flips = np.asarray(flips, float)
    if aggregator == "max":
        return float(flips.max())
    if aggregator == "avg":
        return float(flips.mean())
    return float(flips.var())


def ttd_e_multi(data: Dataset, model: Scm, config: DisparityConfig) -> dict[str, float]:
    """Aggregated label-flip percentage over all counterfactual values.

    ``max`` is worst-case: per row, the flip indicator of the candidate with
    the largest treatment shift (first such candidate on ties).
    """
    col = _sensitive_column(data, config)
    s_f = config.group_pair[0]
    mask = _group_mask(data, col, s_f)
    cands = _candidates(data, col, config)
    y = data.column(data.schema.outcome)

    flip_rows, shift_rows = [], []
    for cand in cands:
        do = cand if isinstance(cand, dict) else {col: cand}
        cf = counterfactual(model, dict(data.cols), do)
        z_hat = {c: cf[c] for c in data.schema.treatments}
        y_cf = downstream_outcome(model, dict(data.cols), z_hat)
        flip_rows.append((y_cf != y).astype(float))
        dz = _delta(data, cf, "abs_difference")
        shift_rows.append(np.max(np.stack([dz[c] for c in data.schema.treatments]), axis=0))

    flips = np.stack(flip_rows)   # (m, n)
    shifts = np.stack(shift_rows)
    if config.aggregator == "max":
        pick = np.argmax(shifts, axis=0)
        agg = flips[pick, np.arange(data.n)]
    elif config.aggregator == "avg":
        agg = flips.mean(axis=0)
    else:
        agg = flips.var(axis=0)

    out = {}
    for label in (0.0, 1.0):
        m = mask & (y == label)
        out[str(int(label))] = float(100.0 * agg[m].mean()) if m.any() else 0.0
    return out


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------

def disparity_report(data: Dataset, model: Scm, config: DisparityConfig) -> DisparityReport:
    """Compute the complete audit: TTD/DTD under both statistics plus effects.

    Medians are what the report tables lead with; means are carried alongside
    since the definitions are expectations.
    """
    col, s_f, s_p, mask = _audit_pair(data, config)
    other = data.column(col) == s_p

    cf_total = _total_cf(data, model, col, s_p)
    cf_direct = _direct_cf(data, model, col, s_p)
    dz_total = _delta(data, cf_total, config.delta)
    dz_direct = _delta(data, cf_direct, config.delta)

    def both_stats(dz: dict[str, np.ndarray]) -> dict[str, dict[str, float]]:
        return {
            stat: {c: _stat(d[mask], stat) for c, d in dz.items()}
            for stat in ("median", "mean")
        }

    cfg = asdict(config)
    cfg["sensitive_column"] = col
    return DisparityReport(
        config=cfg,
        counts={str(s_f): int(mask.sum()), str(s_p): int(other.sum())},
        ttd=both_stats(dz_total),
        dtd=both_stats(dz_direct),
        ttd_e=_effect(data, model, cf_total, mask),
        dtd_e=_effect(data, model, cf_direct, mask),
    )
