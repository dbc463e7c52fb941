"""Exception types raised across the package."""


class AspireError(Exception):
    """Base class for all package errors."""


class ControlLimitError(AspireError, ValueError):
    """A control input exceeds the configured velocity limits."""


class DegenerateGeometryError(AspireError, ValueError):
    """Range/bearing is undefined because robot and target coincide."""


class DegenerateUpdateError(AspireError):
    """Every particle has zero likelihood under the received measurement."""


class PlanningInfeasibleError(AspireError):
    """No collision-free motion primitive exists at the current pose."""


class ConfigError(AspireError, ValueError):
    """Scenario configuration is malformed or inconsistent."""
