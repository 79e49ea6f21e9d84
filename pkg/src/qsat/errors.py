"""Exception types shared across the package."""


class CapabilityError(ValueError):
    """Requested size exceeds a configured memory/compute limit."""


class ParseError(ValueError):
    """Malformed DIMACS input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateWeightError(ValueError):
    """A mixing weight of zero would make the initial ground state degenerate."""


class StateError(RuntimeError):
    """An operation needs data that has not been computed yet (e.g. solutions)."""


class NumericalError(RuntimeError):
    """Iterative eigensolver failed to converge."""

    def __init__(self, message: str, f: float | None = None, iterations: int | None = None):
        self.f = f
        self.iterations = iterations
        super().__init__(f"{message} (f={f}, iterations={iterations})")
