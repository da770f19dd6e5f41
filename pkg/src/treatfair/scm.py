"""Structural causal models over role-tagged feature blocks.

The model is a DAG of mechanisms, one per schema column, each reading only
columns that appear strictly earlier in schema order. Everything a
counterfactual query needs reduces to three primitives:

* ``abduct``   — invert each mechanism to recover the exogenous noise that
  reproduces an observed instance,
* ``predict``  — re-evaluate mechanisms in causal order from given noise,
  with do-style overrides that sever a column from its mechanism,
* splicing     — combine exogenous vectors from different intervention stages
  (``path_specific_counterfactual``).

Continuous mechanisms must be strictly monotone in their noise so abduction
has a unique solution; binary mechanisms are thresholds on a latent score and
abduction stores the midpoint of the noise-quantile interval consistent with
the observed value, so repeated counterfactuals are deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import special, stats

from .errors import (
    Inconsistent,
    MissingColumn,
    NonInvertible,
    PlanOrderViolation,
    SchemaError,
    SchemaMismatch,
)
from .schema import BINARY, CATEGORICAL, Column, Dataset, FeatureSchema

Arrays = Mapping[str, np.ndarray]

_ROUNDTRIP_ATOL = 1e-9
_BISECT_LO, _BISECT_HI = -1e6, 1e6
_BISECT_TOL = 1e-10


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Exogenous noise distribution for one column.

    Families: bernoulli(p), gaussian(mean, variance), gamma(shape, scale),
    point_mass(value), logistic(loc, scale). The gaussian is parameterized by
    its variance; gamma by shape and scale.
    """

    family: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        p = self.params
        if self.family == "bernoulli":
            if not 0.0 <= p[0] <= 1.0:
                raise SchemaError("bernoulli p must be in [0, 1]")
        elif self.family == "gaussian":
            if p[1] < 0:
                raise SchemaError("gaussian variance must be >= 0")
        elif self.family == "gamma":
            if p[0] <= 0 or p[1] <= 0:
                raise SchemaError("gamma shape and scale must be > 0")
        elif self.family == "logistic":
            if p[1] <= 0:
                raise SchemaError("logistic scale must be > 0")
        elif self.family != "point_mass":
            raise SchemaError(f"unknown noise family {self.family!r}")

    # constructors
    @staticmethod
    def bernoulli(p: float) -> "NoiseSpec":
        return NoiseSpec("bernoulli", (float(p),))

    @staticmethod
    def gaussian(mean: float, variance: float) -> "NoiseSpec":
        return NoiseSpec("gaussian", (float(mean), float(variance)))

    @staticmethod
    def gamma(shape: float, scale: float) -> "NoiseSpec":
        return NoiseSpec("gamma", (float(shape), float(scale)))

    @staticmethod
    def point_mass(value: float) -> "NoiseSpec":
        return NoiseSpec("point_mass", (float(value),))

    @staticmethod
    def logistic(loc: float = 0.0, scale: float = 1.0) -> "NoiseSpec":
        return NoiseSpec("logistic", (float(loc), float(scale)))

    @property
    def deterministic(self) -> bool:
        return self.family == "point_mass" or (
            self.family == "gaussian" and self.params[1] == 0.0
        )

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "bernoulli":
            return rng.binomial(1, self.params[0], n).astype(float)
        if self.family == "gaussian":
            mean, var = self.params
            return rng.normal(mean, np.sqrt(var), n)
        if self.family == "gamma":
            return rng.gamma(self.params[0], self.params[1], n)
        if self.family == "logistic":
            return rng.logistic(self.params[0], self.params[1], n)
        return np.full(n, self.params[0])

    def cdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        if self.family == "gaussian":
            mean, var = self.params
            if var == 0.0:
                return (x >= mean).astype(float)
            return special.ndtr((x - mean) / np.sqrt(var))
        if self.family == "logistic":
            loc, scale = self.params
            return special.expit((x - loc) / scale)
        if self.family == "gamma":
            return stats.gamma.cdf(x, self.params[0], scale=self.params[1])
        if self.family == "point_mass":
            return (x >= self.params[0]).astype(float)
        raise SchemaError(f"cdf not defined for {self.family}")

    def ppf(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, float)
        if self.family == "gaussian":
            mean, var = self.params
            return mean + np.sqrt(var) * special.ndtri(q)
        if self.family == "logistic":
            loc, scale = self.params
            return loc + scale * special.logit(q)
        if self.family == "gamma":
            return stats.gamma.ppf(q, self.params[0], scale=self.params[1])
        if self.family == "point_mass":
            return np.full_like(q, self.params[0])
        raise SchemaError(f"ppf not defined for {self.family}")

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        if self.family == "gaussian":
            mean, var = self.params
            if var == 0.0:
                return np.where(x == mean, 0.0, -np.inf)
            return -0.5 * (np.log(2 * np.pi * var) + (x - mean) ** 2 / var)
        if self.family == "bernoulli":
            p = np.clip(self.params[0], 1e-12, 1 - 1e-12)
            return np.where(x == 1, np.log(p), np.log1p(-p))
        if self.family == "gamma":
            return stats.gamma.logpdf(x, self.params[0], scale=self.params[1])
        if self.family == "logistic":
            z = (x - self.params[0]) / self.params[1]
            return -z - 2 * np.log1p(np.exp(-z)) - np.log(self.params[1])
        return np.where(x == self.params[0], 0.0, -np.inf)


# ---------------------------------------------------------------------------
# mechanisms
# ---------------------------------------------------------------------------

class Mechanism:
    """One structural equation: value = F(parents, u)."""

    node: str
    parents: tuple[str, ...]

    def evaluate(self, values: Arrays, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def abduct(self, values: Arrays, observed: np.ndarray, noise: NoiseSpec) -> np.ndarray:
        raise NotImplementedError


@dataclass
class RootMechanism(Mechanism):
    """Identity mechanism for root nodes: value = u."""

    node: str
    parents: tuple[str, ...] = ()

    def evaluate(self, values: Arrays, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, float)

    def abduct(self, values: Arrays, observed: np.ndarray, noise: NoiseSpec) -> np.ndarray:
        return np.asarray(observed, float)


@dataclass
class ContinuousMechanism(Mechanism):
    """Strictly monotone-in-noise continuous mechanism.

    `forward` maps (parent values, u) to the column value. `inverse`, when
    given, must be its exact inverse in u; otherwise abduction falls back to
    bisection on [-1e6, 1e6], which requires monotonicity over that bracket.
    """

    node: str
    parents: tuple[str, ...]
    forward: Callable[[Arrays, np.ndarray], np.ndarray]
    inverse: Callable[[Arrays, np.ndarray], np.ndarray] | None = None

    def evaluate(self, values: Arrays, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.forward(values, np.asarray(u, float)), float)

    def abduct(self, values: Arrays, observed: np.ndarray, noise: NoiseSpec) -> np.ndarray:
        observed = np.asarray(observed, float)
        if self.inverse is not None:
            u = np.asarray(self.inverse(values, observed), float)
        else:
            u = self._bisect(values, observed)
        if not np.all(np.isfinite(u)):
            raise NonInvertible(f"mechanism for {self.node!r} not invertible at some rows")
        check = self.evaluate(values, u)
        err = np.abs(check - observed)
        tol = _ROUNDTRIP_ATOL + 1e-9 * np.abs(observed)
        if np.any(err > np.maximum(tol, 1e-8)):
            raise NonInvertible(
                f"inversion of {self.node!r} failed round-trip (max err {err.max():.3g})"
            )
        return u

    def _bisect(self, values: Arrays, observed: np.ndarray) -> np.ndarray:
        n = len(observed)
        lo = np.full(n, _BISECT_LO)
        hi = np.full(n, _BISECT_HI)
        f_lo = self.evaluate(values, lo)
        f_hi = self.evaluate(values, hi)
        increasing = np.all(f_hi >= f_lo)
        decreasing = np.all(f_hi <= f_lo)
        if not (increasing or decreasing):
            raise NonInvertible(f"mechanism for {self.node!r} is not monotone in its noise")
        if decreasing:
            lo, hi, f_lo, f_hi = hi, lo, f_hi, f_lo
        if np.any(observed < np.minimum(f_lo, f_hi)) or np.any(observed > np.maximum(f_lo, f_hi)):
            raise NonInvertible(f"observed {self.node!r} outside the invertible bracket")
        # ~60 halvings of a 2e6 bracket reach well below the 1e-10 tolerance
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            f_mid = self.evaluate(values, mid)
            take_hi = f_mid >= observed
            hi = np.where(take_hi, mid, hi)
            lo = np.where(take_hi, lo, mid)
            if np.max(hi - lo) < _BISECT_TOL:
                break
        return 0.5 * (lo + hi)


def _basis_matrix(terms: Sequence[tuple], values: Arrays, n: int) -> np.ndarray:
    cols = []
    for term in terms:
        if term[0] == "lin":
            cols.append(np.asarray(values[term[1]], float))
        elif term[0] == "prod":
            cols.append(np.asarray(values[term[1]], float) * np.asarray(values[term[2]], float))
        else:  # pragma: no cover - construction guards this
            raise SchemaError(f"unknown basis term {term!r}")
    if not cols:
        return np.empty((n, 0))
    return np.column_stack(cols)


@dataclass
class LearnedAdditive(ContinuousMechanism):
    """Fitted additive-noise mechanism: value = basis(parents) @ coefs + intercept + u."""

    node: str = ""
    parents: tuple[str, ...] = ()
    terms: tuple[tuple, ...] = ()
    coefs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    intercept: float = 0.0
    residual_scale: float = 1.0
    forward: Callable[[Arrays, np.ndarray], np.ndarray] | None = None
    inverse: Callable[[Arrays, np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        self.coefs = np.asarray(self.coefs, float)

    def _loc(self, values: Arrays) -> np.ndarray:
        n = len(next(iter(values.values()))) if values else 1
        X = _basis_matrix(self.terms, values, n)
        return X @ self.coefs + self.intercept

    def evaluate(self, values: Arrays, u: np.ndarray) -> np.ndarray:
        return self._loc(values) + np.asarray(u, float)

    def abduct(self, values: Arrays, observed: np.ndarray, noise: NoiseSpec) -> np.ndarray:
        return np.asarray(observed, float) - self._loc(values)

    def to_doc(self) -> dict:
        return {
            "form": "learned_additive",
            "node": self.node,
            "parents": list(self.parents),
            "terms": [list(t) for t in self.terms],
            "coefs": [float(c) for c in self.coefs],
            "intercept": float(self.intercept),
            "residual_scale": float(self.residual_scale),
        }

    @staticmethod
    def from_doc(doc: dict) -> "LearnedAdditive":
        return LearnedAdditive(
            node=doc["node"],
            parents=tuple(doc["parents"]),
            terms=tuple(tuple(t) for t in doc["terms"]),
            coefs=np.asarray(doc["coefs"], float),
            intercept=float(doc["intercept"]),
            residual_scale=float(doc["residual_scale"]),
        )


@dataclass
class ThresholdMechanism(Mechanism):
    """Binary mechanism: value = 1{score(parents) + coef(parents) * u >= 0}.

    ``coef`` scales the exogenous term and may vanish on some rows, in which
    case those rows are deterministic given parents. Abduction returns the
    midpoint of the noise-quantile interval consistent with the observed
    label (a canonical, reproducible representative of the latent region);
    deterministic rows abduct to the noise's point value and raise
    Inconsistent when the observed label cannot be reproduced at all.
    """

    node: str
    parents: tuple[str, ...]
    score: Callable[[Arrays], np.ndarray]
    coef: Callable[[Arrays], np.ndarray] | None = None  # None means coef == 0

    def _score_coef(self, values: Arrays) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(self.score(values), float)
        if self.coef is None:
            c = np.zeros_like(s)
        else:
            c = np.broadcast_to(np.asarray(self.coef(values), float), s.shape)
        return s, c

    def evaluate(self, values: Arrays, u: np.ndarray) -> np.ndarray:
        s, c = self._score_coef(values)
        return (s + c * np.asarray(u, float) >= 0.0).astype(float)

    def prob_one(self, values: Arrays, noise: NoiseSpec) -> np.ndarray:
        """Interventional P(value = 1 | parents): noise integrated from its prior."""
        s, c = self._score_coef(values)
        if noise.deterministic:
            return (s + c * noise.params[0] >= 0.0).astype(float)
        out = (s >= 0.0).astype(float)  # c == 0 rows
        live = c != 0
        if np.any(live):
            cut = np.where(live, -s / np.where(live, c, 1.0), 0.0)
            q = noise.cdf(cut)
            # c > 0: value 1 iff u >= cut; c < 0: value 1 iff u <= cut
            out = np.where(live, np.where(c > 0, 1.0 - q, q), out)
        return out

    def prob_zero(self, values: Arrays, noise: NoiseSpec) -> np.ndarray:
        """Interventional P(value = 0 | parents), computed directly so that
        probabilities far below float resolution of 1 are not rounded away."""
        s, c = self._score_coef(values)
        if noise.deterministic:
            return (s + c * noise.params[0] < 0.0).astype(float)
        out = (s < 0.0).astype(float)  # c == 0 rows
        live = c != 0
        if np.any(live):
            cut = np.where(live, -s / np.where(live, c, 1.0), 0.0)
            q = noise.cdf(cut)
            out = np.where(live, np.where(c > 0, q, 1.0 - q), out)
        return out

    def abduct(self, values: Arrays, observed: np.ndarray, noise: NoiseSpec) -> np.ndarray:
        observed = np.asarray(observed, float)
        s, c = self._score_coef(values)
        if noise.family == "point_mass" or noise.deterministic:
            u = np.full_like(s, noise.params[0])
        else:
            # rows with c == 0 accept any u; the canonical midpoint is the median
            u = np.full_like(s, float(noise.ppf(np.asarray(0.5))))
        det = (c == 0.0) | noise.deterministic
        if np.any(det):
            pred = (s[det] + c[det] * u[det] >= 0.0).astype(float)
            if np.any(pred != observed[det]):
                bad = int(np.sum(pred != observed[det]))
                raise Inconsistent(
                    f"{bad} observed value(s) of {self.node!r} cannot be reproduced "
                    "by the deterministic mechanism"
                )
        live = ~det
        if np.any(live):
            cut = -s[live] / c[live]
            q = noise.cdf(cut)
            # consistent region is the upper noise tail iff (c>0) == (value==1)
            upper = (c[live] > 0) == (observed[live] == 1.0)
            q_mid = np.where(upper, 0.5 * (q + 1.0), 0.5 * q)
            q_mid = np.clip(q_mid, 1e-12, 1.0 - 1e-12)
            u[live] = noise.ppf(q_mid)
        return u


@dataclass
class LearnedThreshold(ThresholdMechanism):
    """Fitted binary mechanism: logistic score over a feature basis."""

    node: str = ""
    parents: tuple[str, ...] = ()
    terms: tuple[tuple, ...] = ()
    coefs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    intercept: float = 0.0
    score: Callable[[Arrays], np.ndarray] | None = None
    coef: Callable[[Arrays], np.ndarray] | None = None

    def __post_init__(self) -> None:
        self.coefs = np.asarray(self.coefs, float)
        self.score = self._score_fn
        self.coef = lambda values: 1.0

    def _score_fn(self, values: Arrays) -> np.ndarray:
        n = len(next(iter(values.values()))) if values else 1
        X = _basis_matrix(self.terms, values, n)
        return X @ self.coefs + self.intercept

    def to_doc(self) -> dict:
        return {
            "form": "learned_threshold",
            "node": self.node,
            "parents": list(self.parents),
            "terms": [list(t) for t in self.terms],
            "coefs": [float(c) for c in self.coefs],
            "intercept": float(self.intercept),
        }

    @staticmethod
    def from_doc(doc: dict) -> "LearnedThreshold":
        return LearnedThreshold(
            node=doc["node"],
            parents=tuple(doc["parents"]),
            terms=tuple(tuple(t) for t in doc["terms"]),
            coefs=np.asarray(doc["coefs"], float),
            intercept=float(doc["intercept"]),
        )


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scm:
    """Immutable structural causal model: schema + one mechanism and noise per column."""

    schema: FeatureSchema
    mechanisms: Mapping[str, Mechanism]
    noise: Mapping[str, NoiseSpec]

    def __post_init__(self) -> None:
        names = self.schema.names()
        for name in names:
            if name not in self.mechanisms:
                raise SchemaError(f"no mechanism for column {name!r}")
            if name not in self.noise:
                raise SchemaError(f"no noise spec for column {name!r}")
        order = {n: i for i, n in enumerate(names)}
        for name in names:
            for p in self.mechanisms[name].parents:
                if p not in order:
                    raise SchemaError(f"mechanism for {name!r} has unknown parent {p!r}")
                if order[p] >= order[name]:
                    raise SchemaError(
                        f"parent {p!r} of {name!r} does not precede it in schema order"
                    )

    def ancestors(self, name: str) -> set[str]:
        out: set[str] = set()
        stack = list(self.mechanisms[name].parents)
        while stack:
            p = stack.pop()
            if p not in out:
                out.add(p)
                stack.extend(self.mechanisms[p].parents)
        return out


@dataclass(frozen=True)
class InterventionPlan:
    """Ordered do-assignment stages for sequential (path-specific) counterfactuals."""

    stages: tuple[Mapping[str, object], ...]

    def __post_init__(self) -> None:
        for stage in self.stages:
            if not stage:
                raise SchemaError("empty intervention stage")


# ---------------------------------------------------------------------------
# batch plumbing
# ---------------------------------------------------------------------------

def _as_arrays(x, schema: FeatureSchema) -> tuple[dict[str, np.ndarray], bool]:
    """Normalize an Instance mapping / Dataset to column arrays. Returns (cols, was_scalar)."""
    if isinstance(x, Dataset):
        return dict(x.cols), False
    if not isinstance(x, Mapping):
        raise SchemaMismatch("expected a mapping of column -> value or a Dataset")
    missing = [n for n in schema.names() if n not in x]
    if missing:
        raise SchemaMismatch(f"instance lacks columns {missing}")
    scalar = all(np.ndim(v) == 0 for v in x.values())
    cols = {n: np.atleast_1d(np.asarray(x[n], float)) for n in schema.names()}
    lengths = {len(v) for v in cols.values()}
    if len(lengths) > 1:
        raise SchemaMismatch("ragged instance batch")
    return cols, scalar


def _pack(values: dict[str, np.ndarray], like, schema: FeatureSchema, scalar: bool):
    if isinstance(like, Dataset):
        return Dataset(schema, values, dict(like.provenance))
    if scalar:
        return {n: float(v[0]) for n, v in values.items()}
    return values


def _sanitize(col: Column, v: np.ndarray) -> np.ndarray:
    # clamp to valid range, then floor, for discrete kinds (after any intervention)
    if col.kind == BINARY:
        return np.floor(np.clip(v, 0.0, 1.0))
    if col.kind == CATEGORICAL:
        return np.floor(np.clip(v, 0.0, col.cardinality - 1))
    return v


def _broadcast_do(do: Mapping[str, object] | None, n: int, schema: FeatureSchema) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for k, v in (do or {}).items():
        schema.column(k)  # raises MissingColumn for unknown targets
        arr = np.asarray(v, float)
        out[k] = np.broadcast_to(np.atleast_1d(arr), (n,)).astype(float)
    return out


def _evaluate(model: Scm, u: Arrays, overrides: Mapping[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
    overrides = overrides or {}
    values: dict[str, np.ndarray] = {}
    for col in model.schema:
        if col.name in overrides:
            v = np.array(overrides[col.name], float, copy=True)
        else:
            v = model.mechanisms[col.name].evaluate(values, u[col.name])
        values[col.name] = _sanitize(col, v)
    return values


def _abduct(model: Scm, values: Arrays) -> dict[str, np.ndarray]:
    u: dict[str, np.ndarray] = {}
    for col in model.schema:
        mech = model.mechanisms[col.name]
        u[col.name] = mech.abduct(values, values[col.name], model.noise[col.name])
    return u


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def sample(model: Scm, n: int, seed: int) -> Dataset:
    """Forward-simulate the model: draw all noise, evaluate mechanisms in causal order.

    Deterministic given the seed; noise is drawn column-by-column in schema
    order from one generator stream.
    """
    if n < 1:
        raise SchemaError("n must be >= 1")
    rng = np.random.default_rng(seed)
    u = {col.name: model.noise[col.name].sample(rng, n) for col in model.schema}
    values = _evaluate(model, u)
    return Dataset(model.schema, values, {"generator": "scm.sample", "seed": int(seed), "n": int(n)})


def abduct(model: Scm, instance):
    """Recover the exogenous vector that reproduces the observed instance."""
    cols, scalar = _as_arrays(instance, model.schema)
    u = _abduct(model, cols)
    if scalar:
        return {k: float(v[0]) for k, v in u.items()}
    return u


def predict(model: Scm, u, overrides: Mapping[str, object] | None = None):
    """Evaluate mechanisms in causal order from exogenous values.

    Columns named in `overrides` are pinned to the given values (do-semantics:
    their mechanisms are not evaluated). Binary and categorical outputs are
    clamped to range and floored.
    """
    if isinstance(u, Mapping):
        scalar = all(np.ndim(v) == 0 for v in u.values())
        arrs = {k: np.atleast_1d(np.asarray(v, float)) for k, v in u.items()}
    else:
        raise SchemaMismatch("exogenous input must be a mapping")
    n = len(next(iter(arrs.values())))
    ov = _broadcast_do(overrides, n, model.schema)
    values = _evaluate(model, arrs, ov)
    if scalar:
        return {k: float(v[0]) for k, v in values.items()}
    return values


def counterfactual(model: Scm, instance, do: Mapping[str, object] | None):
    """Three-step counterfactual: abduction, action, prediction.

    Total-effect semantics: every descendant of an intervened column is
    recomputed under the intervention.
    """
    cols, scalar = _as_arrays(instance, model.schema)
    n = len(next(iter(cols.values())))
    u = _abduct(model, cols)
    ov = _broadcast_do(do, n, model.schema)
    values = _evaluate(model, u, ov)
    return _pack(values, instance, model.schema, scalar)


def _check_plan(model: Scm, plan: InterventionPlan) -> None:
    # a later stage may not intervene on an ancestor of an earlier stage's target
    seen = [set(stage) for stage in plan.stages]
    for i, earlier in enumerate(seen):
        earlier_anc: set[str] = set()
        for t in earlier:
            earlier_anc |= model.ancestors(t)
        for later in seen[i + 1:]:
            bad = later & earlier_anc
            if bad:
                raise PlanOrderViolation(
                    f"stage intervenes on {sorted(bad)} after a downstream stage"
                )


def path_specific_counterfactual(model: Scm, instance, plan: InterventionPlan):
    """Sequential-intervention counterfactual via exogenous splicing.

    Each stage abducts the current instance, applies its do-set, and records
    the post-intervention exogenous values of its targets. The final instance
    is predicted from the spliced vector: stage-recorded noise for intervened
    columns, factual noise everywhere else. With the two-stage plan
    [flip sensitive, pin covariates to factual] this isolates the direct
    sensitive -> treatment paths.
    """
    _check_plan(model, plan)
    cols, scalar = _as_arrays(instance, model.schema)
    n = len(next(iter(cols.values())))
    u_comb = _abduct(model, cols)
    current = cols
    for stage in plan.stages:
        ov = _broadcast_do(stage, n, model.schema)
        u_cur = _abduct(model, current)
        nxt = _evaluate(model, u_cur, ov)
        u_nxt = _abduct(model, nxt)
        for name in ov:
            u_comb[name] = u_nxt[name]
        current = nxt
    values = _evaluate(model, u_comb)
    return _pack(values, instance, model.schema, scalar)


def downstream_outcome(model: Scm, instance, z_hat):
    """Outcome under do(treatment block -> z_hat), everything else factual.

    `z_hat` is a mapping over treatment column names, or an array/sequence in
    treatment-block order. Returns the outcome value(s).
    """
    treatments = model.schema.treatments
    if isinstance(z_hat, Mapping):
        do = dict(z_hat)
        if set(do) != set(treatments):
            raise SchemaMismatch(f"z_hat must cover exactly the treatment block {treatments}")
    else:
        arr = np.asarray(z_hat, float)
        if arr.ndim == 1 and len(treatments) == 1:
            do = {treatments[0]: arr}
        else:
            arr = np.atleast_2d(arr)
            if arr.shape[-1] != len(treatments):
                raise SchemaMismatch(f"z_hat needs {len(treatments)} treatment values per row")
            do = {name: arr[..., j] for j, name in enumerate(treatments)}
    out = counterfactual(model, instance, do)
    y = model.schema.outcome
    if isinstance(out, Dataset):
        return out.column(y)
    if isinstance(out, Mapping) and np.ndim(out[y]) == 0:
        return float(out[y])
    return out[y]


def direct_sensitive_label_effect(model: Scm, instance, do_s: Mapping[str, object]):
    """Outcome with the sensitive columns flipped but covariates and treatments
    pinned to their factual values — isolates the direct sensitive -> outcome edge."""
    cols, scalar = _as_arrays(instance, model.schema)
    pinned = model.schema.covariates + model.schema.treatments
    stage2 = {name: cols[name] for name in pinned}
    plan = InterventionPlan((dict(do_s), stage2))
    out = path_specific_counterfactual(model, cols, plan)
    y = out[model.schema.outcome]
    return float(y[0]) if scalar else y
