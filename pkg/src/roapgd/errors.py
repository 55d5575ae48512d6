"""Exception types shared across the package."""


class RoapgdError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(RoapgdError):
    """Invalid experiment configuration.

    Carries every violation found during validation, not just the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnsupportedRegionError(RoapgdError):
    """Region/operation combination outside the supported set.

    The 1-norm and max-norm projections are only available for an identity
    shape matrix; the closed-form boundary update has no such restriction.
    """


class DegenerateGradientError(RoapgdError):
    """Gradient too small to define a boundary update direction."""


class UnsupportedBackendError(RoapgdError):
    """Gradient backend cannot serve this simulator kind (costate needs a
    differentiable built-in step)."""


class DegenerateRegionError(RoapgdError):
    """No radius above the floor passes the criterion.

    Usually means the equilibrium is unstable under the given policy, or the
    terminal tolerance is smaller than the search can certify.
    """


class TransportError(RoapgdError):
    """External simulator failed: timeout, bad handshake, protocol violation
    or unexpected process exit."""
