"""Exception types and warnings shared across the package."""


class TorusSwarmError(Exception):
    """Base class for package errors."""


class InvalidParameter(TorusSwarmError, ValueError):
    """A parameter is outside its documented domain."""


class ConfigError(TorusSwarmError):
    """Trial configuration is malformed or violates a precondition."""


class MassMismatchError(TorusSwarmError):
    """Current and target densities carry different total mass."""

    def __init__(self, mass: float, target_mass: float, tol: float):
        self.mass = mass
        self.target_mass = target_mass
        super().__init__(
            f"density mass {mass:.12g} does not match target mass "
            f"{target_mass:.12g} (tolerance {tol:.3g})"
        )


class StepRejected(TorusSwarmError):
    """Explicit step rejected by the CFL audit. Carries an admissible dt."""

    def __init__(self, cfl: float, dt: float, admissible_dt: float):
        self.cfl = cfl
        self.dt = dt
        self.admissible_dt = admissible_dt
        super().__init__(
            f"CFL number {cfl:.4g} exceeds 1 at dt={dt:.6g}; "
            f"largest admissible dt is {admissible_dt:.6g}"
        )


class NumericalFault(TorusSwarmError):
    """Non-finite state or other unrecoverable numerical failure."""


class NoGuarantee(TorusSwarmError):
    """The disturbance bound offers no guarantee (decay rate <= 0)."""


class CflWarning(UserWarning):
    """CFL number is above 0.9 but still admissible."""


class ZeroMeanProjection(UserWarning):
    """Control source had a nonzero mean beyond tolerance; projected out."""
