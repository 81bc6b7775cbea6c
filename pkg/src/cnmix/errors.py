"""Exception hierarchy shared by the fitting code."""


class CNMixError(Exception):
    """Base class for all errors raised by :mod:`cnmix`."""


class NotPositiveDefiniteError(CNMixError, ValueError):
    """A scale matrix could not be Cholesky-factorized."""

    def __init__(self, matrix, context=""):
        self.matrix = matrix
        msg = "matrix is not symmetric positive definite"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(f"{msg}\n{matrix}")


class DegenerateFitError(CNMixError):
    """The weighted scatter is rank deficient, so no covariance update exists."""


class EmptyComponentError(CNMixError):
    """A component lost (numerically) all of its posterior mass."""


class NumericFailureError(CNMixError):
    """Non-finite densities or likelihood values were produced."""

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
