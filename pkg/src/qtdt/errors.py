"""Exception hierarchy shared across the package."""


class QTDTError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(QTDTError, ValueError):
    """A model parameter lies outside its admissible range."""


class MendelianInconsistencyError(QTDTError, ValueError):
    """An offspring genotype cannot arise from the given parents."""


class CalibrationError(QTDTError, ValueError):
    """A residual parameter cannot be solved for the requested heritability."""


class ConfigurationError(QTDTError, ValueError):
    """Inconsistent combination of options (trait count, missing type, strategy...)."""


class SingularDesignError(QTDTError, ValueError):
    """Design matrix is rank deficient."""


class EstimationError(QTDTError, ValueError):
    """Too few usable records to estimate a quantity."""


class TransformError(QTDTError, ValueError):
    """Log transform applied to a nonpositive value."""
