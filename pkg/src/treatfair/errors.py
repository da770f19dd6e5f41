"""Exception taxonomy shared across the library and mapped to CLI exit codes."""
from __future__ import annotations


class TreatfairError(Exception):
    """Base class for all library errors."""


class SchemaError(TreatfairError):
    """Schema construction or validation failed."""


class SchemaMismatch(TreatfairError):
    """Data and schema (or two schemas) disagree."""


class NonInvertible(TreatfairError):
    """A mechanism could not be inverted at the requested point."""


class Inconsistent(TreatfairError):
    """No exogenous value can reproduce an observed discrete value."""


class PlanOrderViolation(TreatfairError):
    """A later intervention stage targets an ancestor of an earlier stage."""


class EmptyGroup(TreatfairError):
    """An audit or mitigation group selected no rows."""


class EmptyPolicy(TreatfairError):
    """A treatment policy resolved to an empty reference set."""


class UnknownValue(TreatfairError):
    """A requested counterfactual value is outside the data support."""


class Underdetermined(TreatfairError):
    """Design matrix is rank-deficient beyond what regularization repairs."""


class DegenerateData(TreatfairError):
    """Training data lacks a class or group needed by the operation."""


class NonHarmViolation(TreatfairError):
    """The corrected dataset lowered the intervened group's outcome rate."""


class MissingColumn(TreatfairError):
    """A named column is absent from the dataset."""


class NonNumericCell(TreatfairError):
    """A CSV cell could not be parsed as a number (and is not missing)."""


class OutcomeNotBinary(TreatfairError):
    """The outcome column contains values other than 0 and 1."""


class IoFailure(TreatfairError):
    """Reading or writing an external file failed."""


class UnknownColumn(TreatfairError):
    """A schema config names a column the file does not contain."""


class RoleMissing(TreatfairError):
    """A file column has no role assignment in the schema config."""


class NegativeRate(TreatfairError):
    """An interest rate argument is negative."""
