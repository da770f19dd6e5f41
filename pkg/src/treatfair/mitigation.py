"""Disparity mitigation: fair datasets, fair risk scores, stakeholder losses.

``build_fair_dataset`` rewrites the disadvantaged group's treatments to their
sensitive-counterfactual values and recomputes the outcomes those treatments
would have caused, leaving everything else untouched. ``fair_risk_scores``
marginalizes treatment disparities out of default-risk estimates by averaging
the interventional default probability over a treatment policy. ``lgd`` and
``esi`` price datasets from the lender's and the applicant's side.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyGroup,
    EmptyPolicy,
    MissingColumn,
    NegativeRate,
    NonHarmViolation,
    SchemaError,
    SchemaMismatch,
)
from .schema import Dataset
from .scm import Scm, ThresholdMechanism, counterfactual, downstream_outcome

POLICY_KINDS = ("factual", "empirical_conditional", "sensitive_counterfactual")


@dataclass(frozen=True)
class TreatmentPolicy:
    """Distribution over treatment assignments used for risk scoring.

    * ``factual`` — each row keeps its own treatments (degenerate policy).
    * ``empirical_conditional`` — treatments resampled jointly (whole Z rows,
      preserving within-treatment correlation) from the reference group
      ``group_column == group_value``; ``reference`` defaults to the scored
      data itself.
    * ``sensitive_counterfactual`` — each row's treatments replaced by its
      own counterfactual treatment under do(sensitive -> target_value).
    """

    kind: str = "factual"
    group_column: str | None = None
    group_value: float | None = None
    reference: Dataset | None = None
    sensitive_column: str | None = None
    target_value: float | None = None
    seed: int = 0
    sample_count: int = 256

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise SchemaError(f"policy kind must be one of {POLICY_KINDS}")
        if self.sample_count < 1:
            raise SchemaError("sample_count must be >= 1")
        if self.kind == "empirical_conditional" and self.group_value is None:
            raise SchemaError("empirical_conditional policy needs a group_value")
        if self.kind == "sensitive_counterfactual" and self.target_value is None:
            raise SchemaError("sensitive_counterfactual policy needs a target_value")


# ---------------------------------------------------------------------------
# fair dataset
# ---------------------------------------------------------------------------

def build_fair_dataset(
    data: Dataset,
    model: Scm,
    disadvantaged: float,
    advantaged: float,
    sensitive_column: str | None = None,
) -> Dataset:
    """Replace the disadvantaged group's treatments and outcomes.

    Disadvantaged rows get the treatment block of their total counterfactual
    under do(sensitive -> advantaged) and the outcome that treatment causes
    (factual sensitive/covariate values and abducted outcome noise kept).
    Advantaged rows are copied bit-exact. Raises NonHarmViolation if the
    rewrite would lower the disadvantaged group's empirical repayment rate.
    """
    schema = data.schema
    col = sensitive_column or schema.sensitive[0]
    s = data.column(col)
    dis = s == disadvantaged
    if not dis.any():
        raise EmptyGroup(f"no rows with {col} == {disadvantaged!r}")
    if not (s == advantaged).any():
        raise EmptyGroup(f"no rows with {col} == {advantaged!r}")

    cf = counterfactual(model, dict(data.cols), {col: advantaged})
    z_hat = {c: cf[c] for c in schema.treatments}
    y_cf = downstream_outcome(model, dict(data.cols), z_hat)

    y_name = schema.outcome
    out_cols: dict[str, np.ndarray] = {}
    for name in schema.names():
        if name in schema.treatments:
            out_cols[name] = np.where(dis, cf[name], data.column(name))
        elif name == y_name:
            out_cols[name] = np.where(dis, y_cf, data.column(name))
        else:
            out_cols[name] = data.column(name).copy()

    factual_rate = float(data.column(y_name)[dis].mean())
    fair_rate = float(out_cols[y_name][dis].mean())
    if fair_rate < factual_rate:
        raise NonHarmViolation(
            f"intervened-group repayment rate fell from {factual_rate:.6f} "
            f"to {fair_rate:.6f}"
        )

    prov = dict(data.provenance)
    prov.setdefault("transforms", [])
    prov["transforms"] = list(prov["transforms"]) + [{
        "op": "build_fair_dataset",
        "sensitive_column": col,
        "disadvantaged": float(disadvantaged),
        "advantaged": float(advantaged),
        "factual_rate": factual_rate,
        "fair_rate": fair_rate,
    }]
    return Dataset(schema, out_cols, prov)


# ---------------------------------------------------------------------------
# fair risk scores
# ---------------------------------------------------------------------------

def _outcome_threshold(model: Scm) -> ThresholdMechanism:
    mech = model.mechanisms[model.schema.outcome]
    if not isinstance(mech, ThresholdMechanism):
        raise SchemaMismatch("risk scoring requires a threshold outcome mechanism")
    return mech


def _default_prob(model: Scm, values: dict[str, np.ndarray]) -> np.ndarray:
    """Interventional P(Y=0 | non-outcome values), outcome noise from its prior."""
    mech = _outcome_threshold(model)
    return mech.prob_zero(values, model.noise[model.schema.outcome])


def _policy_reference(data: Dataset, policy: TreatmentPolicy) -> np.ndarray:
    ref = policy.reference if policy.reference is not None else data
    col = policy.group_column or ref.schema.sensitive[0]
    mask = ref.column(col) == policy.group_value
    if not mask.any():
        raise EmptyPolicy(f"no reference rows with {col} == {policy.group_value!r}")
    return np.column_stack([ref.column(c)[mask] for c in ref.schema.treatments])


def fair_risk_scores(
    data: Dataset,
    model: Scm,
    policy: TreatmentPolicy,
    threads: int | None = None,
) -> np.ndarray:
    """Per-row expected default probability under the treatment policy.

    Policy draws use one RNG stream per row, seeded (policy seed, row index),
    so scores do not depend on the thread count.
    """
    schema = data.schema
    z_names = schema.treatments
    fixed = [n for n in schema.names() if n not in z_names and n != schema.outcome]

    if policy.kind == "factual":
        values = {n: data.column(n) for n in schema.names() if n != schema.outcome}
        return _default_prob(model, values)

    if policy.kind == "sensitive_counterfactual":
        col = policy.sensitive_column or schema.sensitive[0]
        cf = counterfactual(model, dict(data.cols), {col: policy.target_value})
        values = {n: data.column(n) for n in fixed}
        values.update({n: cf[n] for n in z_names})
        return _default_prob(model, values)

    ref = _policy_reference(data, policy)
    m = policy.sample_count
    row_fixed = {n: data.column(n) for n in fixed}

    def score_row(i: int) -> float:
        rng = np.random.default_rng([policy.seed, i])
        take = ref[rng.integers(0, len(ref), m)]
        values = {n: np.full(m, row_fixed[n][i]) for n in fixed}
        values.update({n: take[:, j] for j, n in enumerate(z_names)})
        return float(np.mean(_default_prob(model, values)))

    out = np.empty(data.n)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, v in enumerate(pool.map(score_row, range(data.n))):
                out[i] = v
    else:
        for i in range(data.n):
            out[i] = score_row(i)
    return out


def fair_risk_score(row, model: Scm, policy: TreatmentPolicy, row_index: int = 0) -> float:
    """Score a single instance; `row_index` fixes its policy RNG stream."""
    schema = model.schema
    cols = {n: np.atleast_1d(np.asarray(row[n], float)) for n in schema.names()}
    one = Dataset(schema, cols, {})
    if policy.kind == "empirical_conditional":
        if policy.reference is None:
            raise EmptyPolicy("single-row scoring needs an explicit policy reference")
        ref = _policy_reference(one, policy)
        rng = np.random.default_rng([policy.seed, row_index])
        take = ref[rng.integers(0, len(ref), policy.sample_count)]
        fixed = [n for n in schema.names() if n not in schema.treatments and n != schema.outcome]
        values = {n: np.full(policy.sample_count, float(cols[n][0])) for n in fixed}
        values.update({n: take[:, j] for j, n in enumerate(schema.treatments)})
        return float(np.mean(_default_prob(model, values)))
    return float(fair_risk_scores(one, model, policy)[0])


def risk_cdf(scores: np.ndarray) -> np.ndarray:
    """Empirical CDF of scores on the fixed 101-point grid over [0, 1]."""
    scores = np.asarray(scores, float)
    if scores.size and (scores.min() < 0.0 or scores.max() > 1.0):
        raise SchemaError("risk scores must lie in [0, 1]")
    grid = np.linspace(0.0, 1.0, 101)
    vals = (scores[None, :] <= grid[:, None]).mean(axis=1)
    return np.column_stack([grid, vals])


def ks_distance(scores_a: np.ndarray, scores_b: np.ndarray) -> float:
    """Kolmogorov sup-distance between two score CDFs on the shared grid."""
    return float(np.abs(risk_cdf(scores_a)[:, 1] - risk_cdf(scores_b)[:, 1]).max())


# ---------------------------------------------------------------------------
# stakeholder losses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateDuration:
    """Simple interest actually paid: y * amount * rate% * months/12."""

    duration_column: str
    rate: float = 10.0


@dataclass(frozen=True)
class AnnuityAmount:
    """Interest implied by annuities over a fixed term: annuity*12*years - amount."""

    annuity_column: str
    duration_years: float = 15.0


@dataclass
class LossReport:
    tag: str
    groups: dict[float, dict[str, float]]

    def to_doc(self) -> dict:
        return {
            "tag": self.tag,
            "groups": {str(g): dict(v) for g, v in self.groups.items()},
        }


def _group_values(data: Dataset, group_column: str | None) -> tuple[str, np.ndarray]:
    col = group_column or data.schema.sensitive[0]
    if col not in data.cols:
        raise MissingColumn(f"no column {col!r}")
    return col, np.unique(data.column(col))


def lgd(data: Dataset, amount_column: str, group_column: str | None = None) -> dict[float, float]:
    """Group-wise expected loss given default: mean of (1 - y) * amount."""
    if amount_column not in data.cols:
        raise MissingColumn(f"no column {amount_column!r}")
    col, groups = _group_values(data, group_column)
    y = data.column(data.schema.outcome)
    a = data.column(amount_column)
    g = data.column(col)
    return {float(v): float(((1.0 - y) * a)[g == v].mean()) for v in groups}


def esi(data: Dataset, amount_column: str, formula, group_column: str | None = None) -> dict[float, float]:
    """Group-wise expected simple interest under the chosen convention."""
    if amount_column not in data.cols:
        raise MissingColumn(f"no column {amount_column!r}")
    col, groups = _group_values(data, group_column)
    y = data.column(data.schema.outcome)
    a = data.column(amount_column)
    g = data.column(col)
    if isinstance(formula, RateDuration):
        if formula.rate < 0:
            raise NegativeRate(f"rate {formula.rate} is negative")
        if formula.duration_column not in data.cols:
            raise MissingColumn(f"no column {formula.duration_column!r}")
        d = data.column(formula.duration_column)
        val = y * a * (formula.rate / 100.0) * d / 12.0
    elif isinstance(formula, AnnuityAmount):
        if formula.annuity_column not in data.cols:
            raise MissingColumn(f"no column {formula.annuity_column!r}")
        ann = data.column(formula.annuity_column)
        val = ann * 12.0 * formula.duration_years - a
    else:
        raise SchemaError(f"unknown ESI formula {formula!r}")
    return {float(v): float(val[g == v].mean()) for v in groups}


def loss_report(
    data: Dataset,
    amount_column: str,
    formula,
    group_column: str | None = None,
    tag: str = "",
) -> LossReport:
    l_ = lgd(data, amount_column, group_column)
    e_ = esi(data, amount_column, formula, group_column)
    return LossReport(tag=tag, groups={g: {"lgd": l_[g], "esi": e_[g]} for g in l_})
