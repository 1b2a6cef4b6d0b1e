"""The adaptive consensus protocol: control inputs, pair-weight adaptation,
switch-time resets and the coupled state/weight vector field."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exceptions import ValidationError
from .graphs import Graph, WeightState, pair_arrays
from .riccati import GainSet, PlantModel

HOOK_CODES = {"none": 0, "sin": 1, "tabulated": 2}


@dataclass(frozen=True)
class NonlinearityHook:
    """Component-wise drift ``f`` added to every agent.

    ``sin``: ``f(x)[target] = scale * sin(x[source])``.
    ``tabulated``: ``f(x)[target] = interp(x[source], grid, values)``, constant
    beyond the table ends.
    Indices are 0-based here; scenario files use 1-based components.
    """

    kind: Literal["none", "sin", "tabulated"] = "none"
    source: int = 0
    target: int = 0
    scale: float = 0.0
    mu: float = 0.0
    grid: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in HOOK_CODES:
            raise ValidationError(f"unknown nonlinearity kind {self.kind!r}")
        if self.mu < 0:
            raise ValidationError("Lipschitz constant must be nonnegative")
        if self.kind == "tabulated":
            g = np.asarray(self.grid, float)
            if len(g) < 2 or len(g) != len(self.values) or np.any(np.diff(g) <= 0):
                raise ValidationError("tabulated hook needs a strictly increasing grid "
                                      "with matching values")
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def code(self) -> int:
        return HOOK_CODES[self.kind]

    def check_dimension(self, d: int) -> None:
        if self.kind != "none" and not (0 <= self.source < d and 0 <= self.target < d):
            raise ValidationError(f"nonlinearity components outside 0..{d - 1}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on one state ``(d,)`` or a stack ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.kind == "sin":
            out[..., self.target] = self.scale * np.sin(x[..., self.source])
        elif self.kind == "tabulated":
            out[..., self.target] = np.interp(x[..., self.source], self.grid, self.values)
        return out


NO_HOOK = NonlinearityHook()


@dataclass
class SystemState:
    t: float
    x: np.ndarray          # (N, d)
    weights: WeightState

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        if self.x.ndim != 2:
            raise ValidationError(f"state must be (N, d), got {self.x.shape}")
        if self.weights.n != self.x.shape[0]:
            raise ValidationError("weight state and agent count disagree")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @classmethod
    def initial(cls, x0) -> "SystemState":
        x0 = np.array(x0, dtype=float)
        return cls(0.0, x0, WeightState.ones(x0.shape[0]))

    def copy(self) -> "SystemState":
        return SystemState(self.t, self.x.copy(), self.weights.copy())


def _differences(x: np.ndarray) -> np.ndarray:
    i, k = pair_arrays(x.shape[0])
    return x[k] - x[i]


def control_inputs(state: SystemState, graph: Graph, K_u) -> np.ndarray:
    """``u_i = K_u * sum_{k in N_i} w_ik (x_k - x_i)``, shape ``(N, p)``."""
    K_u = np.atleast_2d(np.asarray(K_u, float))
    x = state.x
    if graph.n != x.shape[0] or K_u.shape[1] != x.shape[1]:
        raise ValidationError("dimension mismatch between state, graph and K_u")
    i, k = pair_arrays(x.shape[0])
    contrib = (state.weights.values * graph.edge_mask())[:, None] * (x[k] - x[i])
    s = np.zeros_like(x)
    np.add.at(s, i, contrib)
    np.add.at(s, k, -contrib)
    return s @ K_u.T


def weight_rates(state: SystemState, K_w) -> WeightState:
    """``(x_k - x_i)^T K_w (x_k - x_i)`` for every pair, edge or not."""
    K_w = np.atleast_2d(np.asarray(K_w, float))
    d = state.x.shape[1]
    if K_w.shape != (d, d):
        raise ValidationError(f"K_w is {K_w.shape}, state dimension is {d}")
    if np.linalg.eigvalsh(0.5 * (K_w + K_w.T))[0] < -1e-10 * max(1.0, np.abs(K_w).max()):
        raise ValidationError("K_w is not positive semidefinite")
    D = _differences(state.x)
    rates = np.einsum("pi,ij,pj->p", D, K_w, D)
    return WeightState(state.n, np.maximum(rates, 0.0))


def system_derivative(
    state: SystemState, graph: Graph, plant: PlantModel, gains: GainSet,
    hook: NonlinearityHook = NO_HOOK,
) -> tuple[np.ndarray, WeightState]:
    """Agent-wise vector field ``x_i' = A x_i + f(x_i) + B u_i`` and weight rates."""
    if plant.d != state.x.shape[1]:
        raise ValidationError(f"plant has d = {plant.d}, state has {state.x.shape[1]}")
    hook.check_dimension(plant.d)
    u = control_inputs(state, graph, gains.K_u)
    dx = state.x @ plant.A.T + u @ plant.B.T + hook(state.x)
    return dx, weight_rates(state, gains.K_w)


def apply_switch(state: SystemState, old_graph: Graph, new_graph: Graph) -> SystemState:
    """Reset to 1 the weight of every pair that is an edge of ``new_graph`` but not of ``old_graph``."""
    if old_graph.n != new_graph.n or new_graph.n != state.n:
        raise ValidationError("node-count mismatch at switch")
    out = state.copy()
    added = new_graph.edge_mask() & ~old_graph.edge_mask()
    out.weights.values[added] = 1.0
    return out


def added_edges_mask(old_graph: Graph, new_graph: Graph) -> np.ndarray:
    return new_graph.edge_mask() & ~old_graph.edge_mask()
