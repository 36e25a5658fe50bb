"""Exception types shared across the package."""


class VhipError(Exception):
    """Base class for all errors raised by this package."""


class SingularStateError(VhipError):
    """CoM coincides with the CoP, so the leg direction is undefined."""


class DegenerateStateError(VhipError):
    """CoM is at or below the contact plane (foot-frame height <= 0)."""


class UnsupportedOrientationError(VhipError):
    """Contact surface is vertical or nearly so."""


class NoValidVirtualTimeError(VhipError):
    """No virtual-time initialization keeps the critical ballistic point valid."""


class NotCapturableError(VhipError):
    """Operation requires a 0-step capturable configuration."""


class ControllerDomainError(VhipError):
    """Controller was evaluated outside its stabilizable domain."""


class InfeasibleCbpError(VhipError):
    """Critical ballistic point left the contact surface."""


class NumericalBlowupError(VhipError):
    """Integration produced a non-finite state."""


class ScenarioError(VhipError):
    """Scenario document failed parsing or validation."""
