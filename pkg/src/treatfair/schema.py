"""Feature schemas and the columnar Dataset container.

A schema assigns every column a causal role (sensitive / covariate /
treatment / outcome) and a kind (continuous / binary / categorical), and fixes
the causal block ordering: all sensitive columns come first, then covariates,
then treatments, then the single binary outcome.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .errors import MissingColumn, SchemaError, SchemaMismatch

SENSITIVE = "sensitive"
COVARIATE = "covariate"
TREATMENT = "treatment"
OUTCOME = "outcome"
ROLE_ORDER = (SENSITIVE, COVARIATE, TREATMENT, OUTCOME)

CONTINUOUS = "continuous"
BINARY = "binary"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    name: str
    role: str
    kind: str = CONTINUOUS
    cardinality: int = 0  # categorical only

    def __post_init__(self) -> None:
        if self.role not in ROLE_ORDER:
            raise SchemaError(f"unknown role {self.role!r} for column {self.name!r}")
        if self.kind not in (CONTINUOUS, BINARY, CATEGORICAL):
            raise SchemaError(f"unknown kind {self.kind!r} for column {self.name!r}")
        if self.kind == CATEGORICAL and self.cardinality < 2:
            raise SchemaError(f"categorical column {self.name!r} needs cardinality >= 2")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature columns with causal roles and kinds."""

    columns: tuple[Column, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        outcomes = [c for c in self.columns if c.role == OUTCOME]
        if len(outcomes) != 1:
            raise SchemaError("exactly one outcome column required")
        if outcomes[0].kind != BINARY:
            raise SchemaError("the outcome column must be binary")
        if not any(c.role == SENSITIVE for c in self.columns):
            raise SchemaError("at least one sensitive column required")
        if not any(c.role == TREATMENT for c in self.columns):
            raise SchemaError("at least one treatment column required")
        ranks = [ROLE_ORDER.index(c.role) for c in self.columns]
        if ranks != sorted(ranks):
            raise SchemaError("columns must be block-ordered sensitive -> covariate -> treatment -> outcome")

    # --- lookups -----------------------------------------------------------
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise MissingColumn(f"no column named {name!r}")

    def index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise MissingColumn(f"no column named {name!r}")

    def role(self, role: str) -> list[str]:
        """Names of all columns with the given role, in schema order."""
        return [c.name for c in self.columns if c.role == role]

    @property
    def outcome(self) -> str:
        return self.role(OUTCOME)[0]

    @property
    def sensitive(self) -> list[str]:
        return self.role(SENSITIVE)

    @property
    def covariates(self) -> list[str]:
        return self.role(COVARIATE)

    @property
    def treatments(self) -> list[str]:
        return self.role(TREATMENT)

    def __iter__(self) -> Iterator[Column]:
        return iter(self.columns)


def schema_from_roles(
    sensitive: list[str],
    covariates: list[str],
    treatments: list[str],
    outcome: str,
    kinds: Mapping[str, str] | None = None,
    cardinalities: Mapping[str, int] | None = None,
) -> FeatureSchema:
    """Convenience constructor from role lists; kinds default to continuous."""
    kinds = dict(kinds or {})
    cards = dict(cardinalities or {})
    cols = []
    for role, names in ((SENSITIVE, sensitive), (COVARIATE, covariates), (TREATMENT, treatments)):
        for name in names:
            cols.append(Column(name, role, kinds.get(name, CONTINUOUS), cards.get(name, 0)))
    cols.append(Column(outcome, OUTCOME, BINARY))
    return FeatureSchema(tuple(cols))


@dataclass
class Dataset:
    """Column-major numeric dataset bound to a FeatureSchema.

    `provenance` records where the rows came from (source path or generator
    seed) and what has been done to them; mitigation and I/O append to it.
    """

    schema: FeatureSchema
    cols: dict[str, np.ndarray]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        names = self.schema.names()
        missing = [n for n in names if n not in self.cols]
        if missing:
            raise SchemaMismatch(f"dataset lacks columns {missing}")
        lengths = {len(self.cols[n]) for n in names}
        if len(lengths) > 1:
            raise SchemaMismatch("ragged columns")
        self.cols = {n: np.asarray(self.cols[n], dtype=float) for n in names}

    @property
    def n(self) -> int:
        return len(self.cols[self.schema.columns[0].name])

    def column(self, name: str) -> np.ndarray:
        if name not in self.cols:
            raise MissingColumn(f"no column named {name!r}")
        return self.cols[name]

    def block(self, role: str) -> np.ndarray:
        """(n, k) matrix of the columns with the given role."""
        names = self.schema.role(role)
        return np.column_stack([self.cols[n] for n in names])

    def row(self, i: int) -> dict[str, float]:
        return {n: float(self.cols[n][i]) for n in self.schema.names()}

    def subset(self, mask: np.ndarray) -> "Dataset":
        sub = {n: v[mask] for n, v in self.cols.items()}
        return Dataset(self.schema, sub, dict(self.provenance))

    def copy(self) -> "Dataset":
        return Dataset(self.schema, {n: v.copy() for n, v in self.cols.items()}, dict(self.provenance))

    def validate(self) -> None:
        """Check kind constraints: finite values, binary in {0,1}, categorical codes in range."""
        for col in self.schema:
            v = self.cols[col.name]
            if not np.all(np.isfinite(v)):
                raise SchemaMismatch(f"non-finite values in column {col.name!r}")
            if col.kind == BINARY and not np.all((v == 0) | (v == 1)):
                raise SchemaMismatch(f"binary column {col.name!r} has values outside {{0,1}}")
            if col.kind == CATEGORICAL:
                if not np.all((v >= 0) & (v < col.cardinality) & (v == np.floor(v))):
                    raise SchemaMismatch(f"categorical column {col.name!r} has out-of-range codes")
