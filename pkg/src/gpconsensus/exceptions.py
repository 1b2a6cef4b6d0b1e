class ValidationError(ValueError):
    """Malformed input: bad dimensions, disconnected graph, non-SPD weight, ..."""


class SynthesisError(RuntimeError):
    """No certificate could be produced for the requested design."""


class DivergenceError(FloatingPointError):
    """The integrator produced a non-finite value."""

    def __init__(self, t: float):
        super().__init__(f"divergence detected at t = {t:.6g} s")
        self.t = t


class ScenarioError(ValidationError):
    """A scenario file failed validation; ``problems`` lists every violation."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.problems))
