"""Exception hierarchy for the DG kinetic solver."""

from __future__ import annotations


class DgkError(Exception):
    """Base class for all solver errors."""


class StateError(DgkError):
    """A physical state failed a validity check (solver blow-up or bad input).

    Attributes:
        quantity: Name of the offending quantity ("density", "pressure")
        value: Offending value
        index: Flat index of the first offending entry in the evaluated array
        cell: (i, j, k) cell index once known
        location: Where the state was evaluated ("x-face", "volume", ...)
        side: Which trace of a face failed ("minus", "plus"), None for in-cell or merged states
        time: Simulation time once known
        stage: Time-stepping stage once known
    """

    quantity = "state"

    def __init__(self, value: float, index: int = 0):
        self.value = float(value)
        self.index = int(index)
        self.cell: tuple[int, int, int] | None = None
        self.location: str | None = None
        self.side: str | None = None
        self.time: float | None = None
        self.stage: str | None = None
        super().__init__(self._describe())

    def locate(
        self,
        cell: tuple[int, int, int] | None = None,
        location: str | None = None,
        side: str | None = None,
        time: float | None = None,
        stage: str | None = None,
    ) -> StateError:
        """Attach location details that are only known further up the call stack."""
        if cell is not None:
            self.cell = cell
        if location is not None:
            self.location = location
        if side is not None:
            self.side = side
        if time is not None:
            self.time = time
        if stage is not None:
            self.stage = stage
        self.args = (self._describe(),)
        return self

    def _describe(self) -> str:
        parts = [f"non-positive {self.quantity} {self.value:.6g}"]
        if self.cell is not None:
            parts.append(f"cell {self.cell}")
        if self.location:
            parts.append(self.location)
        if self.side:
            parts.append(f"{self.side} trace")
        if self.time is not None:
            parts.append(f"t={self.time:.6g}")
        if self.stage:
            parts.append(f"stage={self.stage}")
        return ", ".join(parts)


class NonPositiveDensity(StateError):
    quantity = "density"


class NonPositivePressure(StateError):
    quantity = "pressure"


class UnsupportedDegree(DgkError, ValueError):
    """Requested polynomial degree has no basis/quadrature setup."""


class NonPositiveDt(DgkError):
    """Step control produced a time step that is not strictly positive and finite."""


class KernelError(DgkError):
    """A worker kernel raised while processing a range of cells."""

    def __init__(self, start: int, stop: int, cause: BaseException):
        self.start = start
        self.stop = stop
        self.cause = cause
        super().__init__(f"kernel failed on cells [{start}, {stop}): {cause!r}")


class ConfigError(DgkError, ValueError):
    """Invalid run configuration; names the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
