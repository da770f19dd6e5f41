"""CSV and schema-config ingestion/serialization.

The schema config is a JSON document with keys ``sensitive``, ``covariates``,
``treatments`` (lists of column names), ``outcome`` (one name), ``kinds``
(column -> continuous/binary/categorical) and ``categorical_codes`` (column ->
ordered list of raw string labels; a label's position is its numeric code).

Missing cells (empty, ``NA``, ``NaN``) drop the whole row; the count lands in
the dataset's provenance as ``dropped_rows``.  Categorical cells are matched
against the declared label list first, with integral in-range numerics
accepted as pre-encoded codes so that saved files load back unchanged.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IoFailure,
    NonNumericCell,
    OutcomeNotBinary,
    RoleMissing,
    SchemaError,
    SchemaMismatch,
    UnknownColumn,
)
from .schema import CATEGORICAL, Dataset, FeatureSchema, schema_from_roles

_MISSING = {"", "na", "nan"}


@dataclass(frozen=True)
class SchemaConfig:
    """A FeatureSchema plus the label lists used to encode categorical columns."""

    schema: FeatureSchema
    categorical_codes: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for col in self.schema:
            if col.kind == CATEGORICAL:
                codes = self.categorical_codes.get(col.name)
                if codes is None:
                    raise SchemaError(f"categorical column {col.name!r} needs categorical_codes")
                if len(codes) != col.cardinality:
                    raise SchemaMismatch(
                        f"column {col.name!r}: {len(codes)} codes vs cardinality {col.cardinality}"
                    )

    def to_doc(self) -> dict:
        return {
            "sensitive": self.schema.sensitive,
            "covariates": self.schema.covariates,
            "treatments": self.schema.treatments,
            "outcome": self.schema.outcome,
            "kinds": {c.name: c.kind for c in self.schema if c.name != self.schema.outcome},
            "categorical_codes": {k: list(v) for k, v in self.categorical_codes.items()},
        }


def schema_config_from_doc(doc: dict) -> SchemaConfig:
    for key in ("sensitive", "covariates", "treatments", "outcome"):
        if key not in doc:
            raise SchemaError(f"schema config lacks the {key!r} key")
    kinds = dict(doc.get("kinds", {}))
    codes = {str(k): [str(x) for x in v] for k, v in doc.get("categorical_codes", {}).items()}
    # A declared code list implies the categorical kind.
    for name in codes:
        kinds.setdefault(name, CATEGORICAL)
    schema = schema_from_roles(
        sensitive=[str(n) for n in doc["sensitive"]],
        covariates=[str(n) for n in doc["covariates"]],
        treatments=[str(n) for n in doc["treatments"]],
        outcome=str(doc["outcome"]),
        kinds=kinds,
        cardinalities={name: len(v) for name, v in codes.items()},
    )
    return SchemaConfig(schema=schema, categorical_codes=codes)


def load_schema_config(path: str) -> SchemaConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read schema config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema config {path} is not valid JSON: {exc}") from exc
    return schema_config_from_doc(doc)


def save_schema_config(config: SchemaConfig, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(config.to_doc(), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write schema config {path}: {exc}") from exc


def _parse_cell(raw: str, name: str, codes: list[str] | None, row_num: int) -> float | None:
    """One cell -> float value, or None when the cell is missing."""
    text = raw.strip()
    if text.lower() in _MISSING:
        return None
    if codes is not None:
        if text in codes:
            return float(codes.index(text))
        try:
            value = float(text)
        except ValueError:
            raise NonNumericCell(
                f"row {row_num}, column {name!r}: {raw!r} is not one of {codes}"
            ) from None
        if value == np.floor(value) and 0 <= value < len(codes):
            return value  # pre-encoded numeric code (e.g. from save_csv)
        raise NonNumericCell(f"row {row_num}, column {name!r}: code {raw!r} out of range")
    try:
        return float(text)
    except ValueError:
        raise NonNumericCell(f"row {row_num}, column {name!r}: {raw!r} is not numeric") from None


def load_csv(path: str, config: SchemaConfig) -> Dataset:
    """Parse a headered CSV into a Dataset, dropping (and counting) rows with gaps."""
    schema = config.schema
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise IoFailure(f"{path}: no header row") from None
            rows = list(reader)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    header = [h.strip() for h in header]
    known = set(schema.names())
    orphans = [h for h in header if h not in known]
    if orphans:
        raise RoleMissing(f"{path}: no role for column(s) {orphans}")
    absent = [n for n in schema.names() if n not in header]
    if absent:
        raise UnknownColumn(f"{path}: schema column(s) {absent} not in file")

    positions = {name: header.index(name) for name in schema.names()}
    columns: dict[str, list[float]] = {name: [] for name in schema.names()}
    dropped = 0
    for row_num, row in enumerate(rows, start=2):  # header is line 1
        if len(row) != len(header):
            raise SchemaMismatch(f"{path}: row {row_num} has {len(row)} fields, expected {len(header)}")
        parsed: dict[str, float] = {}
        missing = False
        for name in schema.names():
            value = _parse_cell(
                row[positions[name]], name, config.categorical_codes.get(name), row_num
            )
            if value is None:
                missing = True
                break
            parsed[name] = value
        if missing:
            dropped += 1
            continue
        for name, value in parsed.items():
            columns[name].append(value)

    outcome = np.asarray(columns[schema.outcome], dtype=float)
    if not np.all((outcome == 0.0) | (outcome == 1.0)):
        bad = sorted(set(outcome) - {0.0, 1.0})
        raise OutcomeNotBinary(f"{path}: outcome {schema.outcome!r} has values {bad}")

    data = Dataset(
        schema,
        {name: np.asarray(vals, dtype=float) for name, vals in columns.items()},
        provenance={"source": path, "dropped_rows": dropped},
    )
    data.validate()
    return data


def save_csv(data: Dataset, path: str, sidecar: bool = True) -> None:
    """Write the dataset as CSV (schema column order, shortest round-trip decimals).

    With ``sidecar`` a ``<path>.meta.json`` file records the provenance so a
    later run can reconstruct where the rows came from.
    """
    names = data.schema.names()
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            cols = [data.column(n) for n in names]
            for i in range(data.n):
                writer.writerow([repr(float(col[i])) for col in cols])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    if sidecar:
        try:
            with open(path + ".meta.json", "w", encoding="utf-8") as fh:
                json.dump({"provenance": data.provenance, "columns": names}, fh, indent=2, default=str)
                fh.write("\n")
        except OSError as exc:
            raise IoFailure(f"cannot write {path}.meta.json: {exc}") from exc


def read_sidecar(path: str) -> dict | None:
    """Provenance recorded next to a CSV by save_csv, or None if there is none."""
    try:
        with open(path + ".meta.json", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        return None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}.meta.json: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}.meta.json is not valid JSON: {exc}") from exc
