"""Fixed-step RK4 simulation of the closed loop over a switching schedule.

Steps never straddle a switch: each segment is integrated separately, with
the last step shortened to land on the next breakpoint, and edge weights are
reset between segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .exceptions import DivergenceError, ValidationError
from .graphs import SwitchingSchedule, SwitchingSet, WeightState, pair_arrays
from .performance import cost_rate_series, disagreement_series, trapezoid_cumulative
from .protocol import NO_HOOK, NonlinearityHook, SystemState
from .riccati import GainSet, PlantModel


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 1e-3
    horizon: float = 20.0
    method: str = "rk4"

    def __post_init__(self):
        if not self.step > 0:
            raise ValidationError(f"step must be positive, got {self.step}")
        if not self.horizon > 0:
            raise ValidationError(f"horizon must be positive, got {self.horizon}")
        if self.method != "rk4":
            raise ValidationError(f"unsupported method {self.method!r}; only 'rk4'")


@dataclass
class Trace:
    """Sampled closed-loop trajectory.

    The sample at a switch instant carries the post-switch weights and graph;
    ``pre_switch_w[m]`` holds the left-limit weights at ``switch_times[m]``.
    """

    t: np.ndarray                  # (S,)
    x: np.ndarray                  # (S, N, d)
    w: np.ndarray                  # (S, P)
    graph_index: np.ndarray        # (S,)
    cost_rate: np.ndarray          # (S,)
    J_x: np.ndarray                # (S,)
    disagreement: np.ndarray       # (S,)
    plant: PlantModel
    gains: GainSet
    Q: np.ndarray
    switching: SwitchingSet
    schedule: SwitchingSchedule
    hook: NonlinearityHook = NO_HOOK
    switch_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pre_switch_w: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    seed: int | None = None
    backend: str = ""

    @property
    def N(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.x.shape[2]

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    def segment_slices(self) -> list[slice]:
        """Sample ranges ``[t_m, t_{m+1}]`` of each switch-free segment.

        The closing sample of a segment is also the opening sample of the
        next one and carries post-reset weights; use ``pre_switch_w`` for the
        left limit.
        """
        idx = [0] + [int(np.searchsorted(self.t, ts)) for ts in self.switch_times] + [len(self.t) - 1]
        return [slice(a, b + 1) for a, b in zip(idx, idx[1:])]


def step_sizes(length: float, h: float) -> np.ndarray:
    """Steps of size ``h`` covering ``length``; the last one is shortened to land exactly."""
    n = max(1, math.ceil(length / h - 1e-9))
    steps = np.full(n, h)
    steps[-1] = length - (n - 1) * h
    return steps


def rk4_step(derivative: Callable[[SystemState], tuple], state: SystemState, h: float) -> SystemState:
    """One classical RK4 step of ``x`` and all pair weights jointly.

    ``derivative(state)`` returns ``(dx, dw)`` with ``dw`` an array or a
    :class:`WeightState`.
    """
    if not h > 0:
        raise ValidationError(f"step must be positive, got {h}")

    def evaluate(s):
        dx, dw = derivative(s)
        dw = dw.values if isinstance(dw, WeightState) else np.asarray(dw, float)
        dx = np.asarray(dx, float)
        if not (np.isfinite(dx).all() and np.isfinite(dw).all()):
            raise DivergenceError(s.t)
        return dx, dw

    def shifted(s, c, k):
        return SystemState(s.t + c, s.x + c * k[0], WeightState(s.n, s.weights.values + c * k[1]))

    k1 = evaluate(state)
    k2 = evaluate(shifted(state, 0.5 * h, k1))
    k3 = evaluate(shifted(state, 0.5 * h, k2))
    k4 = evaluate(shifted(state, h, k3))
    x = state.x + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    w = state.weights.values + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    if not (np.isfinite(x).all() and np.isfinite(w).all()):
        raise DivergenceError(state.t + h)
    return SystemState(state.t + h, x, WeightState(state.n, w))


def run_closed_loop(
    plant: PlantModel,
    gains: GainSet,
    Q: np.ndarray,
    switching: SwitchingSet,
    schedule: SwitchingSchedule,
    x0,
    config: IntegratorConfig = IntegratorConfig(),
    hook: NonlinearityHook = NO_HOOK,
    *,
    backend: str | None = None,
    seed: int | None = None,
) -> Trace:
    x0 = np.array(x0, dtype=float)
    N, d = x0.shape
    if N < 2:
        raise ValidationError("need at least 2 agents")
    if d != plant.d or gains.K_u.shape != (plant.p, d):
        raise ValidationError("gains inconsistent with plant")
    if switching.n != N:
        raise ValidationError(f"graphs have {switching.n} nodes, state has {N} agents")
    if not np.isfinite(x0).all():
        raise ValidationError("initial states must be finite")
    hook.check_dimension(d)
    gaps = np.diff(schedule.breakpoints)
    if gaps.size and config.step > gaps.min() + 1e-12:
        raise ValidationError(f"step {config.step} exceeds the shortest segment {gaps.min()}")

    backend_name, impl = kernels.get_backend(backend)
    first, second = pair_arrays(N)
    BK = plant.B @ gains.K_u
    masks = [g.edge_mask() for g in switching.graphs]
    h = config.step

    times = [np.zeros(1)]
    xs = [x0[None]]
    ws = [np.ones((1, first.size))]
    gidx = []
    switch_times, pre_w = [], []
    x, w = x0, ws[0][0]
    segments = schedule.segments(config.horizon)
    for m, (t0, t1, g) in enumerate(segments):
        if m == 0:
            gidx.append(np.array([g]))
        else:
            prev = segments[m - 1][2]
            switch_times.append(t0)
            pre_w.append(w.copy())
            w = w.copy()
            w[masks[g] & ~masks[prev]] = 1.0
            ws[-1][-1] = w
            gidx[-1][-1] = g
        steps = step_sizes(t1 - t0, h)
        X, W, fail = impl.integrate(
            x, w, masks[g].astype(np.uint8), first, second, plant.A, BK, gains.K_u,
            hook.code, hook.source, hook.target, hook.scale,
            np.asarray(hook.grid, float), np.asarray(hook.values, float), steps,
        )
        if fail >= 0:
            raise DivergenceError(t0 + float(np.sum(steps[: fail + 1])))
        n = steps.size
        tt = t0 + h * np.arange(1, n + 1)
        tt[-1] = t1
        times.append(tt)
        xs.append(X[1:])
        ws.append(W[1:].copy())
        gidx.append(np.full(n, g))
        x, w = X[-1], W[-1]

    t = np.concatenate(times)
    X = np.concatenate(xs)
    Wt = np.concatenate(ws)
    rate = cost_rate_series(X, Q)
    return Trace(
        t=t, x=X, w=Wt, graph_index=np.concatenate(gidx).astype(int),
        cost_rate=rate, J_x=trapezoid_cumulative(t, rate), disagreement=disagreement_series(X),
        plant=plant, gains=gains, Q=np.asarray(Q, float), switching=switching, schedule=schedule,
        hook=hook, switch_times=np.array(switch_times), pre_switch_w=np.array(pre_w).reshape(-1, first.size),
        seed=seed, backend=backend_name,
    )


def simulate(scenario, *, gains: GainSet | None = None, schedule: SwitchingSchedule | None = None,
             backend: str | None = None) -> Trace:
    """Synthesize (unless ``gains`` is given), sample the schedule and integrate a scenario."""
    gains = scenario.synthesize() if gains is None else gains
    schedule = scenario.schedule() if schedule is None else schedule
    return run_closed_loop(
        scenario.plant, gains, scenario.performance.Q, scenario.switching, schedule,
        scenario.x0, scenario.integrator, scenario.hook, backend=backend, seed=scenario.seed,
    )
