"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class DegenerateModelError(ValueError):
    """The model has no density on the ranking cone (e.g. rho == 1)."""


class NumericalError(ArithmeticError):
    """Quadrature produced an inconsistent result; refine the grid."""


class InsufficientAcceptanceError(RuntimeError):
    """Rejection sampling ran out of proposals before reaching its target."""

    def __init__(self, accepted: int, proposed: int, target: int):
        self.accepted = accepted
        self.proposed = proposed
        self.target = target
        rate = accepted / proposed if proposed else 0.0
        super().__init__(
            f"only {accepted} of {target} required acceptances after "
            f"{proposed} proposals (observed rate {rate:.3g})"
        )


class SingularCovarianceError(ValueError):
    """Covariance matrix is not positive definite."""
