"""Typed exception hierarchy for the superapprox runtime."""


class SuperApproxError(Exception):
    """Base exception for superapprox failures."""


class ConfigurationError(SuperApproxError):
    """Raised when an experiment configuration is missing or invalid."""


class ValidationError(SuperApproxError):
    """Raised when input payloads are invalid."""


class ZeroValuationError(ValidationError):
    """Raised when the p-adic valuation of zero is requested."""


class ModulusError(ValidationError):
    """Raised when a modulus cannot be parsed, factored or used with q0."""


class LevelError(ValidationError):
    """Raised when a congruence level exceeds the modulus exponent."""


class NotInKernelError(ValidationError):
    """Raised when a matrix is not in the requested congruence kernel."""


class EmptyLeafSetError(ValidationError):
    """Raised when a tree operation receives an empty leaf set."""


class ConstantInSpanError(ValidationError):
    """Raised when the constant function lies in the span of a map's components."""


class QuotientTooLargeError(SuperApproxError):
    """Raised when a quotient closure exceeds the configured order guard."""

    def __init__(self, count: int, max_order: int):
        super().__init__(
            f"quotient too large: reached {count} elements (max_order={max_order})"
        )
        self.count = count
        self.max_order = max_order


class EnumerationGuardError(SuperApproxError):
    """Raised when a brute-force enumeration would exceed its size guard."""


class PrecisionError(SuperApproxError):
    """Raised when a truncated p-adic computation runs out of precision."""


class HenselError(SuperApproxError):
    """Raised when a Hensel iteration precondition fails or stalls."""


class SpectralError(SuperApproxError):
    """Raised when an eigen-solve contradicts the walk operator's structure."""
