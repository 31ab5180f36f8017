class RydsimError(Exception):
    """Base class for library errors."""


class ConfigurationError(RydsimError, ValueError):
    """Invalid physical or run configuration."""


class IntegrationError(RydsimError, RuntimeError):
    """The master-equation integration failed.

    ``time`` is the simulation time (us) at which the failure was detected.
    """

    def __init__(self, message: str, time: float | None = None):
        self.time = time
        if time is not None:
            message = f"{message} (t = {time:.6g} us)"
        super().__init__(message)


class CheckpointError(RydsimError):
    """An optimizer checkpoint could not be read or does not match the run."""
