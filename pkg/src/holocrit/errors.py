"""Exception types shared across the package."""


class HolocritError(Exception):
    """Base class for all package errors."""


class StructuralError(HolocritError, ValueError):
    """Missing jet entries or mismatched dimensions between inputs."""


class CurvatureError(HolocritError, ValueError):
    """Curvature matrix is not definite or is numerically degenerate."""


class SpanningError(HolocritError, ValueError):
    """The ensemble fails the 2-jet spanning property at the requested point."""


class KernelError(HolocritError, RuntimeError):
    """A basis-function derivative oracle failed."""


class ConfigurationError(HolocritError, ValueError):
    """Invalid run configuration (harness level)."""
