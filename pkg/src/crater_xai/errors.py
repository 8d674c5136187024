"""Domain-specific exceptions shared across modules."""


class GeometryError(RuntimeError):
    """Scene geometry is inconsistent with the camera (e.g. plane behind it)."""


class RenderGeometryError(GeometryError):
    """Camera does not look at the ground plane."""


class DatasetIOError(IOError):
    """Dataset directory is missing files or holds malformed records."""


class UndefinedCorrelationError(ArithmeticError):
    """Pearson correlation requested on a constant-valued input."""


class NumericalDegeneracyError(ArithmeticError):
    """Degenerate numerical input (e.g. parallel 6d rotation vectors)."""


class ConfigError(ValueError):
    """Invalid or unschematic run configuration.  CLI exit code 2."""


class MissingPrerequisiteError(FileNotFoundError):
    """A required artifact does not exist yet.  CLI exit code 3."""


class NumericalFailureError(RuntimeError):
    """Training diverged or produced non-finite values.  CLI exit code 4."""
