"""Exception types shared across the simulator."""


class ModelViolation(RuntimeError):
    """The simulated system reached a state the channel model forbids."""


class PreconditionError(ValueError):
    """An operation was called with arguments outside its contract."""
