from pairedprobit.utils.enums import CensoringConvention, Dichotomization


class PairedProbitError(Exception):
    """Base class for every error raised by pairedprobit."""
    def __init__(self, message="pairedprobit failed"):
        self.message = message
        super().__init__(self.message)


class UsageError(PairedProbitError):
    """Invalid input: bad data file, bad option, bad scenario."""


class NumericalError(PairedProbitError):
    """The data or the model made the computation fail."""


class DimensionMismatchError(UsageError):
    """Exception raised when a parameter vector and a pair disagree on k."""
    def __init__(self, expected=None, got=None):
        super().__init__(f"Covariate dimension mismatch: expected {expected}, got {got}")


class MalformedRowError(UsageError):
    """Exception raised for a row of a pair CSV file that cannot be parsed."""
    def __init__(self, line=None, column=None, reason=""):
        self.line = line
        self.column = column
        super().__init__(f"Malformed row at line {line}, column '{column}': {reason}")


class InconsistentDimensionError(UsageError):
    """Exception raised when pairs of one dataset carry different k."""
    def __init__(self, message="All pairs of a dataset must share the same covariate dimension"):
        super().__init__(message)


class EmptyFileError(UsageError):
    """Exception raised for a pair CSV without data rows."""
    def __init__(self, path=None):
        super().__init__(f"No data rows found in '{path}'")


class UnknownConventionError(UsageError):
    """Exception raised for an unknown censoring or dichotomization convention."""
    def __init__(self, invalid_name=None):
        valid = ", ".join([c.value for c in CensoringConvention] + [c.value for c in Dichotomization])
        super().__init__(f"Unknown convention '{invalid_name}'. Value must be one of: {valid}")


class QuadratureOrderError(UsageError):
    """Exception raised for a Gauss-Hermite order outside 1..128."""
    def __init__(self, order=None):
        super().__init__(f"Quadrature order must be between 1 and 128, got {order}")


class InvalidScenarioError(UsageError):
    """Exception raised for an inconsistent simulation scenario."""
    def __init__(self, message="Invalid simulation scenario"):
        super().__init__(message)


class InvalidTauSpecError(UsageError):
    """Exception raised for a group-effect law that cannot be parsed."""
    def __init__(self, spec=None):
        super().__init__(
            f"Cannot parse group-effect law '{spec}'. Examples: normal:0,0.1257  uniform:-4,4  "
            f"t:3  cauchy  mixture:0.5,-6,9,6,9"
        )


class MissingInferenceError(UsageError):
    """Exception raised when a Wald test is requested without standard errors."""
    def __init__(self, message="Standard errors are not available; request inference first"):
        super().__init__(message)


class NoDiscordantPairsError(NumericalError):
    """Exception raised when no pair has exactly one positive outcome."""
    def __init__(self, message="The dataset has no discordant pairs; the conditional likelihood is empty"):
        super().__init__(message)


class NonConvergenceError(NumericalError):
    """Exception raised when an optimizer stopped before meeting its tolerance."""
    def __init__(self, iterations=None, gradient_norm=None):
        self.iterations = iterations
        self.gradient_norm = gradient_norm
        super().__init__(
            f"Optimizer did not converge after {iterations} iterations (gradient max-norm {gradient_norm})"
        )


class SingularSigmaError(NumericalError):
    """Exception raised when the plug-in information matrix is numerically singular."""
    def __init__(self, message="Plug-in Sigma matrix is numerically singular; asymptotic variance is undefined"):
        super().__init__(message)


class PropensityDegenerateError(NumericalError):
    """Exception raised when the propensity model cannot be estimated."""
    def __init__(self, message="Propensity model is degenerate (empty treatment group or separation)"):
        super().__init__(message)


class NonIntegrableError(NumericalError):
    """Exception raised when the odds-ratio integral does not converge."""
    def __init__(self, message="Quadrature of E[Phi(lambda + tau)] did not converge"):
        super().__init__(message)


class AllReplicationsFailedError(NumericalError):
    """Exception raised when no replication produced a usable estimate."""
    def __init__(self, replications=None):
        super().__init__(f"All {replications} replications failed for every estimator")


class SeparationWarning(UserWarning):
    """Discordant outcomes are perfectly predicted; the estimate diverges."""
