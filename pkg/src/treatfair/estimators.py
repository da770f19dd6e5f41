"""Learn a structural causal model from observational data.

Two learners: an oracle adapter that passes a known model through unchanged,
and an additive-noise learner that fits one regression per column — ridge
least squares for continuous columns, logistic for binary ones — using as
parents every column of strictly earlier blocks plus earlier columns of the
same block. Within-block order is taken from the schema; counterfactuals
that depend on within-block edges are therefore convention-dependent and
only block-level queries should be trusted from a fitted model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.linear_model import LogisticRegression

from .errors import SchemaError, SchemaMismatch, Underdetermined
from .schema import BINARY, CONTINUOUS, COVARIATE, SENSITIVE, Column, Dataset, FeatureSchema
from .scm import (
    LearnedAdditive,
    LearnedThreshold,
    Mechanism,
    NoiseSpec,
    RootMechanism,
    Scm,
    ThresholdMechanism,
    _basis_matrix,
)

LEARNERS = ("additive_noise", "oracle")
BASES = ("linear", "linear_plus_pairwise")


@dataclass(frozen=True)
class EstimatorConfig:
    learner: str = "additive_noise"
    basis: str = "linear_plus_pairwise"
    regularization: float = 100.0
    train_split: tuple[float, ...] = (0.8, 0.1, 0.1)
    oracle_model: Scm | None = None

    def __post_init__(self) -> None:
        if self.learner not in LEARNERS:
            raise SchemaError(f"learner must be one of {LEARNERS}")
        if self.basis not in BASES:
            raise SchemaError(f"basis must be one of {BASES}")
        if not np.isfinite(self.regularization) or self.regularization < 0:
            raise SchemaError("regularization must be finite and >= 0")
        if any(f <= 0 for f in self.train_split):
            raise SchemaError("train_split fractions must be positive")
        if abs(sum(self.train_split) - 1.0) > 1e-9:
            raise SchemaError("train_split fractions must sum to 1")
        if self.learner == "oracle" and self.oracle_model is None:
            raise SchemaError("oracle learner requires oracle_model")


def split_dataset(data: Dataset, fractions: tuple[float, ...]) -> tuple[Dataset, ...]:
    """Contiguous row split by the given fractions (train first)."""
    n = data.n
    bounds = np.floor(np.cumsum(fractions) * n).astype(int)
    bounds[-1] = n
    parts, start = [], 0
    for stop in bounds:
        mask = np.zeros(n, bool)
        mask[start:stop] = True
        parts.append(data.subset(mask))
        start = stop
    return tuple(parts)


def _parent_sets(schema: FeatureSchema) -> dict[str, tuple[str, ...]]:
    names = schema.names()
    return {name: tuple(names[:i]) for i, name in enumerate(names)}


def _basis_terms(schema: FeatureSchema, parents: tuple[str, ...], basis: str) -> tuple[tuple, ...]:
    terms: list[tuple] = [("lin", p) for p in parents]
    if basis == "linear_plus_pairwise":
        sens = [p for p in parents if schema.column(p).role == SENSITIVE]
        covs = [p for p in parents if schema.column(p).role == COVARIATE]
        terms += [("prod", s, x) for s in sens for x in covs]
    return tuple(terms)


def _ridge(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Least squares with an unpenalized intercept prepended to X."""
    n, p = X.shape
    Z = np.column_stack([np.ones(n), X])
    if lam == 0.0:
        w, _, rank, _ = np.linalg.lstsq(Z, y, rcond=None)
        if rank < p + 1:
            raise Underdetermined("design matrix is rank-deficient with no regularization")
        return w
    J = np.eye(p + 1)
    J[0, 0] = 0.0
    try:
        return np.linalg.solve(Z.T @ Z + lam * J, Z.T @ y)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - PD for lam > 0
        raise Underdetermined(str(exc)) from exc


def fit(data: Dataset, schema: FeatureSchema, config: EstimatorConfig) -> Scm:
    """Fit one mechanism per column on the train fraction of the data.

    Continuous columns get ridge additive-noise regressions with Gaussian
    residual noise; binary columns get logistic threshold mechanisms with
    standard logistic noise; the first column gets its empirical marginal.
    """
    if tuple(c.name for c in data.schema) != tuple(c.name for c in schema):
        raise SchemaMismatch("data schema does not match the requested schema")
    if config.learner == "oracle":
        return config.oracle_model

    train = split_dataset(data, config.train_split)[0]
    parent_sets = _parent_sets(schema)
    mechanisms: dict[str, Mechanism] = {}
    noise: dict[str, NoiseSpec] = {}

    for col in schema:
        parents = parent_sets[col.name]
        y = train.column(col.name)
        if not parents:
            mechanisms[col.name] = RootMechanism(col.name)
            if col.kind == BINARY:
                noise[col.name] = NoiseSpec.bernoulli(float(y.mean()))
            else:
                noise[col.name] = NoiseSpec.gaussian(float(y.mean()), float(y.var()))
            continue

        terms = _basis_terms(schema, parents, config.basis)
        if train.n < 10 * (len(terms) + 1):
            raise Underdetermined(
                f"{col.name}: {train.n} train rows < 10x the {len(terms) + 1} coefficients"
            )
        X = _basis_matrix(terms, {p: train.column(p) for p in parents}, train.n)

        if col.kind == CONTINUOUS:
            w = _ridge(X, y, config.regularization)
            mech = LearnedAdditive(
                node=col.name, parents=parents, terms=terms,
                coefs=w[1:], intercept=float(w[0]),
            )
            resid = y - mech._loc({p: train.column(p) for p in parents})
            mech.residual_scale = float(resid.std())
            mechanisms[col.name] = mech
            noise[col.name] = NoiseSpec.gaussian(0.0, float(resid.var()))
        else:
            classes = np.unique(y)
            if len(classes) < 2:
                raise Underdetermined(f"{col.name}: only one class present in train rows")
            C = 1.0 / config.regularization if config.regularization > 0 else 1e12
            lr = LogisticRegression(C=C, max_iter=2000)
            lr.fit(X, y)
            mechanisms[col.name] = LearnedThreshold(
                node=col.name, parents=parents, terms=terms,
                coefs=lr.coef_[0], intercept=float(lr.intercept_[0]),
            )
            noise[col.name] = NoiseSpec.logistic(0.0, 1.0)

    return Scm(schema, mechanisms, noise)


def goodness(model: Scm, holdout: Dataset) -> dict:
    """Per-column mean log-likelihood and residual moments on held-out rows."""
    report: dict[str, dict[str, float]] = {}
    values = {name: holdout.column(name) for name in holdout.schema.names()}
    total = 0.0
    for col in model.schema:
        mech = model.mechanisms[col.name]
        spec = model.noise[col.name]
        y = values[col.name]
        if isinstance(mech, ThresholdMechanism):
            p1 = np.clip(mech.prob_one(values, spec), 1e-12, 1.0 - 1e-12)
            ll = np.where(y == 1.0, np.log(p1), np.log1p(-p1))
            resid = y - p1
        elif isinstance(mech, RootMechanism) and spec.family == "bernoulli":
            p = np.clip(spec.params[0], 1e-12, 1.0 - 1e-12)
            ll = np.where(y == 1.0, np.log(p), np.log1p(-p))
            resid = y - spec.params[0]
        else:
            u = mech.abduct(values, y, spec)
            ll = spec.logpdf(u)
            resid = u
        entry = {
            "loglik": float(ll.mean()),
            "residual_mean": float(resid.mean()),
            "residual_std": float(resid.std()),
        }
        report[col.name] = entry
        total += entry["loglik"]
    return {"per_node": report, "total_loglik": total}


def model_to_doc(model: Scm) -> dict:
    """JSON-ready document for a fitted model (learned mechanisms only).

    Oracle models built from closures have no serialized form — rebuild those
    from their generator config instead.
    """
    mech_docs: dict[str, dict] = {}
    for name, mech in model.mechanisms.items():
        if isinstance(mech, (LearnedAdditive, LearnedThreshold)):
            mech_docs[name] = mech.to_doc()
        elif isinstance(mech, RootMechanism):
            mech_docs[name] = {"form": "root", "node": name}
        else:
            raise SchemaMismatch(f"mechanism for {name!r} has no serialized form")
    return {
        "kind": "fitted_scm",
        "schema": [
            {"name": c.name, "role": c.role, "kind": c.kind, "cardinality": c.cardinality}
            for c in model.schema
        ],
        "mechanisms": mech_docs,
        "noise": {
            name: {"family": spec.family, "params": list(spec.params)}
            for name, spec in model.noise.items()
        },
    }


def model_from_doc(doc: dict) -> Scm:
    if doc.get("kind") != "fitted_scm":
        raise SchemaMismatch(f"not a fitted model document: kind={doc.get('kind')!r}")
    schema = FeatureSchema(
        tuple(
            Column(d["name"], d["role"], d["kind"], int(d.get("cardinality", 0)))
            for d in doc["schema"]
        )
    )
    mechanisms: dict[str, Mechanism] = {}
    for name, mdoc in doc["mechanisms"].items():
        form = mdoc.get("form")
        if form == "root":
            mechanisms[name] = RootMechanism(node=name)
        elif form == "learned_additive":
            mechanisms[name] = LearnedAdditive.from_doc(mdoc)
        elif form == "learned_threshold":
            mechanisms[name] = LearnedThreshold.from_doc(mdoc)
        else:
            raise SchemaMismatch(f"unknown mechanism form {form!r} for column {name!r}")
    noise = {
        name: NoiseSpec(nd["family"], tuple(float(p) for p in nd["params"]))
        for name, nd in doc["noise"].items()
    }
    return Scm(schema, mechanisms, noise)
