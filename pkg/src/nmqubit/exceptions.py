"""Errors raised by nmqubit."""


class NMQubitError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NMQubitError, ValueError):
    """An operation was evaluated outside of its mathematical domain."""


class ValidationError(NMQubitError, ValueError):
    """An input object does not satisfy its invariants."""


class TimeRangeError(NMQubitError, ValueError):
    """A time lies outside of the range covered by a coefficient table."""


class ConfigError(ValidationError):
    """A configuration value is invalid.

    Args
    ----
        field : str
                Dotted name of the offending field, e.g. ``reservoir.eta``.
        message : str
                What is wrong with it.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__("{}: {}".format(field, message))


class ConfigParseError(NMQubitError, ValueError):
    """A configuration document could not be parsed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = "line {}, column {}: {}".format(line, column, message)
        super().__init__(message)


class ResourceError(NMQubitError, MemoryError):
    """A requested grid does not fit into the configured memory budget."""

    def __init__(self, requested, available):
        self.requested = requested
        self.available = available
        super().__init__(
            "requested {} grid samples, but only {} fit into the "
            "budget".format(requested, available)
        )


class IntegrationError(NMQubitError, RuntimeError):
    """The stochastic integrator produced a non-finite state."""

    def __init__(self, t, state, control, trajectory_index=None):
        self.t = t
        self.state = state
        self.control = control
        self.trajectory_index = trajectory_index
        where = (
            ""
            if trajectory_index is None
            else " in trajectory {}".format(trajectory_index)
        )
        super().__init__(
            "non-finite state{} at t={!r} (state={}, control={})".format(
                where, t, state, control
            )
        )


class PolicyError(NMQubitError, RuntimeError):
    """A control policy failed or returned malformed controls."""
