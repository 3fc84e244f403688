"""Exception types raised across the package."""


class SpoError(Exception):
    """Base class for all estimator and configuration errors."""


class EmptyDataset(SpoError, ValueError):
    pass


class EmptyArm(SpoError, ValueError):
    def __init__(self, arm, message=None):
        self.arm = arm
        super().__init__(message or f"treatment arm {arm} empty")


class DimensionMismatch(SpoError, ValueError):
    pass


class SingularMomentMatrix(SpoError, ArithmeticError):
    def __init__(self, arm, sigma_min, sigma_max):
        self.arm = arm
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        super().__init__(
            f"M[Z,X|T={arm}] is numerically singular "
            f"(sigma_min={sigma_min:.3e}, sigma_max={sigma_max:.3e})"
        )


class RankDeficient(SpoError, ArithmeticError):
    pass


class LengthMismatch(SpoError, ValueError):
    pass


class DegenerateHankel(SpoError, ArithmeticError):
    pass


class ComplexAtoms(SpoError, ArithmeticError):
    pass


class OutOfRange(SpoError, ValueError):
    pass


class NonBinaryData(SpoError, ValueError):
    pass


class ConfigError(SpoError, ValueError):
    pass


class ConvergenceFailure(SpoError, RuntimeWarning):
    """Issued as a warning when ALS hits its iteration cap.

    The decomposition still returns its best iterate; the failure is also
    recorded on ``MixtureFactors.converged``.
    """
