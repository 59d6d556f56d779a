"""
🌀 nhicyl.types.orbits

Contains the trajectory containers produced by `nhicyl.flow` together
with the event (section) specification used to stop integrations.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

__all__ = (
    "EventKind",
    "EventDirection",
    "EventSpec",
    "OrbitSegment",
    "VariationalSegment",
    "EventHit",
)


EventKind = Literal["u1", "v1", "diag_plus", "diag_minus", "x", "y", "ball"]
"""
The event surfaces understood by the integrator.

- `u1`, `v1`: coordinate sections {u_1 = level}, {v_1 = level} of the local chart.
- `diag_plus`, `diag_minus`: the diagonal sections {u_1 = v_1}, {u_1 = -v_1}.
- `x`, `y`: the coordinate planes {x_i = level}, {y_i = level}, i = `index`.
- `ball`: the sphere |w| = level (local chart) or |z| = level (original chart).
"""

EventDirection = Literal["increasing", "decreasing", "any"]

_LOCAL_KINDS = {"u1", "v1", "diag_plus", "diag_minus"}
_ORIGINAL_KINDS = {"x", "y"}


class EventSpec(BaseModel):
    """
    A surface g(z) = 0 at which an integration stops.
    """

    model_config = ConfigDict(frozen=True)

    kind: EventKind
    level: float = 0.0
    """
    Level of the surface; ignored by the diagonal kinds.
    """
    direction: EventDirection = "any"
    """
    Sign of dg/dt required for a crossing to count.
    """
    chart: Literal["xy", "uv"] = "uv"
    """
    Coordinates the event function is evaluated in.
    """
    index: int = 0
    """
    Component index for the `x` and `y` kinds.
    """
    label: Optional[str] = None

    @model_validator(mode="after")
    def _check_chart(self) -> "EventSpec":
        if not np.isfinite(self.level):
            raise ValueError("Event level must be finite")
        if self.kind in _LOCAL_KINDS and self.chart != "uv":
            raise ValueError(f"Event kind '{self.kind}' lives in the local chart")
        if self.kind in _ORIGINAL_KINDS and self.chart != "xy":
            raise ValueError(f"Event kind '{self.kind}' lives in the original chart")
        return self

    @property
    def sign(self) -> int:
        return {"increasing": 1, "decreasing": -1, "any": 0}[self.direction]


# ----------------------------------------------------------------------------
# Trajectories
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitSegment:
    """
    A sampled trajectory of the Hamiltonian flow with its dense output.

    `dense` maps a time in [times[0], times[-1]] to a phase point; segments
    built from raw samples (for instance synthetic test curves) fall back to
    linear interpolation.
    """

    times: np.ndarray
    states: np.ndarray
    energy: float
    dense: Optional[Callable[[float], np.ndarray]] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def duration(self) -> float:
        return self.t_end - self.t0

    @property
    def start(self) -> np.ndarray:
        return self.states[0].copy()

    @property
    def end(self) -> np.ndarray:
        return self.states[-1].copy()

    def __call__(self, t: float) -> np.ndarray:
        if self.dense is not None:
            return np.asarray(self.dense(float(t)), dtype=float)
        return np.array(
            [np.interp(t, self.times, self.states[:, i]) for i in range(self.dim)]
        )

    def translated(self, shift: np.ndarray) -> "OrbitSegment":
        """Adds `shift` to the first len(shift) coordinates (a lattice translate)."""
        shift = np.asarray(shift, dtype=float)
        k = shift.shape[0]
        states = self.states.copy()
        states[:, :k] += shift
        dense = None
        if self.dense is not None:
            base = self.dense

            def dense(t: float) -> np.ndarray:
                z = np.array(base(t), dtype=float)
                z[:k] += shift
                return z

        return replace(self, states=states, dense=dense)


@dataclass(frozen=True)
class VariationalSegment:
    """
    An orbit segment together with its fundamental matrices Psi(t),
    Psi(t0) = I, solving d Psi / dt = D X_H(z(t)) Psi.
    """

    base: OrbitSegment
    fundamental: np.ndarray
    """
    Shape (N, 2n, 2n), aligned with `base.times`.
    """
    dense_fundamental: Optional[Callable[[float], np.ndarray]] = field(
        default=None, repr=False
    )

    @property
    def final(self) -> np.ndarray:
        return self.fundamental[-1].copy()

    def at(self, t: float) -> np.ndarray:
        if self.dense_fundamental is not None:
            return np.asarray(self.dense_fundamental(float(t)), dtype=float)
        index = int(np.argmin(np.abs(self.base.times - t)))
        return self.fundamental[index].copy()


@dataclass(frozen=True)
class EventHit:
    """
    The result of an integration stopped at an event surface.
    """

    segment: OrbitSegment
    """
    The trajectory from the initial point up to and including the hit.
    """
    t_hit: float
    z_hit: np.ndarray
    """
    Lifted phase point on the event surface.
    """
    event: EventSpec
    event_index: int = 0
    """
    Position of `event` in the list of events the integration watched.
    """
    w_hit: Optional[np.ndarray] = None
    """
    Local chart coordinates of the hit, taken relative to `lattice_shift`.
    """
    lattice_shift: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    rate: float = 0.0
    """
    dg/dt at the hit.
    """
    variational: Optional[VariationalSegment] = None

    @property
    def fundamental(self) -> Optional[np.ndarray]:
        if self.variational is None:
            return None
        return self.variational.final
