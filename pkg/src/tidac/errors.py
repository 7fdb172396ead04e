"""Exception types shared across the simulator."""


class TidacError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(TidacError, ValueError):
    """Invalid or inconsistent configuration (filters, quantizers, scenarios)."""


class SimulationDiverged(TidacError, RuntimeError):
    """A non-finite value appeared inside the modulator loop."""

    def __init__(self, tick, value):
        self.tick = tick
        self.value = value
        super().__init__(f"modulator diverged at tick {tick} (w={value!r})")


class ScheduleCollision(TidacError, RuntimeError):
    """An element was triggered while still holding a previous duty pulse."""

    def __init__(self, element, tick, previous):
        self.element = element
        self.tick = tick
        self.previous = previous
        super().__init__(
            f"element {element} retriggered at tick {tick} while busy since tick {previous}"
        )


class AnalysisError(TidacError, ValueError):
    """Spectral analysis precondition not met."""


class RunError(TidacError):
    """A module error raised while running one case of a scenario."""

    def __init__(self, scenario, case, cause):
        self.scenario = scenario
        self.case = case
        self.cause = cause
        super().__init__(f"{scenario}: case {case}: {type(cause).__name__}: {cause}")


class ScenarioError(ConfigurationError):
    """Problem in a scenario file, optionally tied to a path and line."""

    def __init__(self, message, path=None, line=None):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(self.location() + message)

    def location(self):
        if self.path is None:
            return ""
        if self.line is None:
            return f"{self.path}: "
        return f"{self.path}:{self.line}: "
