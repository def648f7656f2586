"""Exception types shared across the package."""


class SelmodError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SelmodError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SupportError(SelmodError, ValueError):
    """A response value lies outside the support of its distribution."""


class SchemaError(SelmodError, ValueError):
    """A data file or model-spec file violates the expected schema."""


class NonConvergenceError(SelmodError, RuntimeError):
    """An iterative fit failed to converge."""

    def __init__(self, message, grad_norm=None, iterations=None):
        super().__init__(message)
        self.grad_norm = grad_norm
        self.iterations = iterations


class HessianNotPDError(SelmodError, RuntimeError):
    """Observed information is not positive definite; standard errors withheld."""

    def __init__(self, min_eigenvalue):
        super().__init__(
            f"negative Hessian is not positive definite "
            f"(smallest eigenvalue {min_eigenvalue:.3e}); standard errors withheld"
        )
        self.min_eigenvalue = min_eigenvalue
