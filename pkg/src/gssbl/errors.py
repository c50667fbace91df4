"""Exception hierarchy.

Each class carries an ``exit_code`` so the CLI can map failures onto its
three exit classes (usage=2, data=3, numeric=4).
"""


class GsSblError(Exception):
    exit_code = 1


class ConfigurationError(GsSblError, ValueError):
    """Bad parameters or an experiment that cannot be set up."""

    exit_code = 2


class DataError(GsSblError):
    exit_code = 3


class SchemaError(DataError, ValueError):
    """Input file is missing columns or fields."""


class EmptyDatasetError(DataError, ValueError):
    """No usable rows remain (empty file or empty split)."""


class SchemaVersionError(DataError):
    pass


class IntegrityError(DataError, ValueError):
    """A stored model violates a model invariant."""


class NumericError(GsSblError, ArithmeticError):
    exit_code = 4


class DomainError(NumericError, ValueError):
    """Argument outside the mathematical domain (e.g. non-positive distance)."""


class DegenerateColumnError(NumericError):
    """Sensing column with zero norm."""


class NoCandidateError(NumericError):
    """Every candidate voxel is excluded or degenerate."""


class DegenerateModelError(NumericError):
    """Model reconstruction is identically zero."""
