class ConvergenceError(RuntimeError):
    """A numerical refinement loop hit its cap without meeting its tolerance."""


class FitError(RuntimeError):
    """A fit failed to converge or its input cannot determine the model."""


class PoleProximityError(ValueError):
    """The cavity frequency sits inside the guard band of a transmon transition."""

    def __init__(self, message, transition=None, detuning=None):
        super().__init__(message)
        self.transition = transition
        self.detuning = detuning


class BracketError(RuntimeError):
    """A monotone root search could not bracket its target."""


class ConfigError(ValueError):
    """Invalid project configuration; ``path`` locates the offending field."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason
