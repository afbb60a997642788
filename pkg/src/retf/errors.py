"""Exception types shared across the simulator."""


class RetfError(Exception):
    """Base class for simulator errors."""


class InvalidScenarioError(RetfError, ValueError):
    """Geometry or parameters that the models cannot evaluate."""


class ConstraintViolation(RetfError):
    """A deployment violates the switching-time or grouping constraints."""


class ConfigError(RetfError, ValueError):
    """Scenario file failed validation.

    ``problems`` holds every ``(field_path, message)`` pair found, not just
    the first one.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
