"""Exception types shared across the simulator."""


class VineSimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(VineSimError, ValueError):
    """A configuration document or domain type violates an invariant.

    The message names the violated invariant so callers (CLI, service)
    can surface it verbatim.
    """


class CommandError(VineSimError, ValueError):
    """An operator command was rejected; simulation state is unchanged."""


class InfeasibleBendError(VineSimError, ValueError):
    """A requested bend exceeds the calibration curve's maximum."""
