"""Cost functional, guaranteed-cost bound and trace diagnostics.

Stacked states may be passed either as ``(N*d,)`` vectors (agent-major) or as
``(N, d)`` arrays; the ``*_series`` helpers take ``(S, N, d)`` sample stacks.
The quadratic forms against the complete-graph projection
``L_N = I - 11^T/N`` are evaluated by centring: ``x^T (L_N kron M) x`` equals
``sum_i (x_i - xbar)^T M (x_i - xbar)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg as sla

from .exceptions import ValidationError
from .graphs import pair_arrays
from .protocol import NonlinearityHook

if TYPE_CHECKING:
    from .riccati import GainSet
    from .simulate import Trace

LYAPUNOV_TOL = 1e-6
GAMMA_PAD = 1e-9


def _agents(x, N: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if N is None or x.size % N:
            raise ValidationError(f"cannot split a length-{x.size} vector into {N} agents")
        return x.reshape(N, -1)
    if x.ndim != 2 or (N is not None and x.shape[0] != N):
        raise ValidationError(f"state shape {x.shape} inconsistent with N = {N}")
    return x


def _centered(X: np.ndarray) -> np.ndarray:
    return X - X.mean(axis=-2, keepdims=True)


def projected_form_series(X: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``x^T (L_N kron M) x`` for every sample of an ``(S, N, d)`` stack."""
    Z = _centered(np.asarray(X, float))
    return np.einsum("snj,jk,snk->s", Z, M, Z)


def cost_rate(x, Q, N: int | None = None) -> float:
    """Instantaneous cost ``x^T (2 L_N kron Q) x``."""
    X = _agents(x, N)
    Q = np.asarray(Q, float)
    if Q.shape != (X.shape[1], X.shape[1]):
        raise ValidationError(f"Q is {Q.shape}, agent dimension is {X.shape[1]}")
    return float(2.0 * projected_form_series(X[None], Q)[0])


def cost_rate_pairwise(x, Q, N: int | None = None) -> float:
    """Same quantity as :func:`cost_rate` written as ``(1/N) sum_i sum_k e_ik^T Q e_ik``."""
    X = _agents(x, N)
    n = X.shape[0]
    total = 0.0
    for i in range(n):
        for k in range(n):
            e = X[k] - X[i]
            total += e @ Q @ e
    return total / n


def cost_rate_series(X: np.ndarray, Q) -> np.ndarray:
    return 2.0 * projected_form_series(X, np.asarray(Q, float))


def disagreement_norm(x, N: int | None = None) -> float:
    """``sqrt(x^T (L_N kron I) x)``; zero exactly at consensus."""
    Z = _centered(_agents(x, N))
    return float(np.sqrt(np.sum(Z * Z)))


def disagreement_series(X: np.ndarray) -> np.ndarray:
    Z = _centered(np.asarray(X, float))
    return np.sqrt(np.einsum("snj,snj->s", Z, Z))


def disagreement_decomposition(x, N: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal split into consensus part ``(11^T/N kron I) x`` and the remainder.

    Both parts are returned in the shape of the input.
    """
    x_arr = np.asarray(x, dtype=float)
    X = _agents(x_arr, N)
    xc = np.broadcast_to(X.mean(axis=0), X.shape).copy()
    xcbar = X - xc
    return xc.reshape(x_arr.shape), xcbar.reshape(x_arr.shape)


def max_pairwise_difference(x) -> float:
    """Largest Euclidean distance between two agents."""
    X = np.asarray(x, float)
    i, k = pair_arrays(X.shape[0])
    return float(np.linalg.norm(X[k] - X[i], axis=1).max())


def trapezoid_cumulative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


def cumulative_cost(trace: "Trace", Q=None) -> np.ndarray:
    """Running ``J_x(t)`` by trapezoid integration of the cost rate."""
    Q = trace.Q if Q is None else np.asarray(Q, float)
    return trapezoid_cumulative(trace.t, cost_rate_series(trace.x, Q))


# -- guaranteed cost ----------------------------------------------------------

@dataclass(frozen=True)
class CostReport:
    J_x_final: float
    J_star: float
    J_star_initial: float
    J_star_integral: float
    satisfied: bool
    margin: float
    horizon: float
    pathwise_ok: bool
    tail_estimate: float
    decay_time: float
    J_star_gain_factor: float | None = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _decay_time(t: np.ndarray, y: np.ndarray) -> float:
    """Time constant of the final quarter of a decaying positive series (inf if not decaying)."""
    start = int(0.75 * len(t))
    tt, yy = t[start:], y[start:]
    keep = yy > 0
    if keep.sum() < 2:
        return 0.0
    slope = np.polyfit(tt[keep], np.log(yy[keep]), 1)[0]
    return float(-1.0 / slope) if slope < 0 else float("inf")


def _same_gains(a: "GainSet", b: "GainSet") -> bool:
    return (
        a.K_u.shape == b.K_u.shape and np.array_equal(a.K_u, b.K_u)
        and np.array_equal(a.certificate, b.certificate) and a.gamma == b.gamma
    )


def guaranteed_cost_bound(trace: "Trace", gains: "GainSet | None" = None) -> CostReport:
    """Horizon-truncated ``J* = J*_x(0) + J*_x(t)`` with the certificate of ``gains``.

    The integral term uses ``gamma * x^T (L_N kron K_w) x`` (``K_w`` equals
    ``R B B^T R``).  ``pathwise_ok`` checks the running bound
    ``J_x(t) <= J*_x(0) + J*_x(t)|_0^t`` at every sample.
    """
    if gains is None:
        gains = trace.gains
    elif not _same_gains(gains, trace.gains):
        raise ValidationError("gains do not match the gains used to produce the trace")
    if gains.certificate.shape != (trace.d, trace.d):
        raise ValidationError("certificate dimension does not match the trace")
    J0 = float(projected_form_series(trace.x[:1], gains.certificate)[0])
    integrand = gains.gamma * projected_form_series(trace.x, gains.K_w)
    running = trapezoid_cumulative(trace.t, integrand)
    J_int = float(running[-1])
    J_x = trace.J_x
    J_star = J0 + J_int
    tau = _decay_time(trace.t, integrand)
    tail = float(integrand[-1] * tau) if np.isfinite(tau) else float("inf")
    eps_form = None
    if gains.eps is not None:
        BB = trace.plant.B @ trace.plant.B.T
        eps = gains.eps
        eps_form = float(
            eps * projected_form_series(trace.x[:1], np.eye(trace.d))[0]
            + gains.gamma * eps**2 * trapezoid_cumulative(
                trace.t, projected_form_series(trace.x, BB))[-1]
        )
    slack = 1e-12 * max(1.0, J_star)
    return CostReport(
        J_x_final=float(J_x[-1]), J_star=J_star, J_star_initial=J0, J_star_integral=J_int,
        satisfied=bool(J_x[-1] <= J_star), margin=J_star - float(J_x[-1]),
        horizon=trace.horizon, pathwise_ok=bool(np.all(J_x <= J0 + running + slack)),
        tail_estimate=tail, decay_time=tau, J_star_gain_factor=eps_form,
    )


# -- Lyapunov monitor ---------------------------------------------------------

@dataclass
class LyapunovReport:
    t: np.ndarray
    V: np.ndarray
    quadratic: np.ndarray
    edge_term: np.ndarray
    budget_term: np.ndarray
    gamma_estimates: np.ndarray
    increases: list[tuple[float, float]] = field(default_factory=list)
    jumps: list[tuple[float, float]] = field(default_factory=list)
    max_step_change: float = -np.inf   # largest dV between consecutive samples of one segment

    @property
    def ok(self) -> bool:
        return not self.increases

    @property
    def max_increase(self) -> float:
        return max((inc for _, inc in self.increases), default=0.0)


def weight_maxima(trace: "Trace") -> np.ndarray:
    m = trace.w.max(axis=0)
    if trace.pre_switch_w.size:
        m = np.maximum(m, trace.pre_switch_w.max(axis=0))
    return m


def _lyapunov_terms(X, W, masks, R, gamma, gamma_est):
    N = X.shape[1]
    quad = projected_form_series(X, R)
    edge = np.sum(masks * (W - 1.0) ** 2, axis=1)
    budget = (2.0 * gamma / N) * np.sum(gamma_est - W, axis=1)
    return quad, edge, budget


def lyapunov_diagnostic(trace: "Trace", gains: "GainSet | None" = None,
                        gamma_estimates=None, tol: float = LYAPUNOV_TOL) -> LyapunovReport:
    """Evaluate the three-term Lyapunov function along a trace.

    Terms: ``zeta^T (I kron R) zeta``; ``sum over current edges (w - 1)^2``
    (each undirected edge counted from both ends, halved); and
    ``(gamma/N) sum_{i != k} (gamma_ik - w_ik)`` with ``gamma_ik`` the
    observed per-pair maxima.  Increases above ``tol`` inside a switch-free
    segment are flagged; jumps at switch instants are only logged.
    """
    gains = trace.gains if gains is None else gains
    R = gains.certificate
    gest = weight_maxima(trace) + GAMMA_PAD if gamma_estimates is None else np.asarray(gamma_estimates, float)
    masks_by_graph = np.array([g.edge_mask() for g in trace.switching.graphs], dtype=float)
    masks = masks_by_graph[trace.graph_index]
    quad, edge, budget = _lyapunov_terms(trace.x, trace.w, masks, R, gains.gamma, gest)
    V = quad + edge + budget
    report = LyapunovReport(trace.t, V, quad, edge, budget, gest)

    slices = trace.segment_slices()
    for m, sl in enumerate(slices):
        seg_V = V[sl].copy()
        is_last = m == len(slices) - 1
        if not is_last:
            # closing sample of this segment: left limit (old graph, pre-reset weights)
            j = sl.stop - 1
            old_mask = masks_by_graph[trace.graph_index[sl.start]][None]
            q, e, b = _lyapunov_terms(trace.x[j:j + 1], trace.pre_switch_w[m][None], old_mask,
                                      R, gains.gamma, gest)
            left = float(q[0] + e[0] + b[0])
            report.jumps.append((float(trace.t[j]), float(V[j] - left)))
            seg_V[-1] = left
        dV = np.diff(seg_V)
        if dV.size:
            report.max_step_change = max(report.max_step_change, float(dV.max()))
        for idx in np.nonzero(dV > tol)[0]:
            report.increases.append((float(trace.t[sl][idx + 1]), float(dV[idx])))
    return report


# -- Lipschitz check ----------------------------------------------------------

@dataclass(frozen=True)
class LipschitzCheck:
    ratio: float
    mu: float
    passed: bool

    @property
    def margin(self) -> float:
        """Observed ratio over declared constant (>1 means violated)."""
        return self.ratio / self.mu if self.mu > 0 else (0.0 if self.ratio == 0 else float("inf"))


def verify_lipschitz(hook: NonlinearityHook, mu: float | None = None, samples: int = 2000,
                     seed: int = 0, d: int | None = None, spread: float = 10.0) -> LipschitzCheck:
    """Largest ``|f(x) - f(y)| / |x - y|`` over seeded random pairs."""
    mu = hook.mu if mu is None else mu
    if mu < 0:
        raise ValidationError("mu must be nonnegative")
    d = d if d is not None else max(hook.source, hook.target) + 1
    rng = np.random.default_rng(seed)
    x = rng.uniform(-spread, spread, size=(samples, d))
    # a third far apart, a third close in a random direction, a third close along one axis
    kind = rng.integers(0, 3, size=(samples, 1))
    axis = np.eye(d)[rng.integers(0, d, size=samples)] * rng.normal(scale=1e-4, size=(samples, 1))
    y = x + np.where(kind == 0, rng.uniform(-spread, spread, size=(samples, d)),
                     np.where(kind == 1, rng.normal(scale=1e-3, size=(samples, d)), axis))
    num = np.linalg.norm(hook(x) - hook(y), axis=1)
    den = np.linalg.norm(x - y, axis=1)
    ratio = float(np.max(num[den > 0] / den[den > 0]))
    return LipschitzCheck(ratio, mu, bool(ratio <= mu * (1 + 1e-9)))


# -- trace-level invariants ---------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    note: str = ""


@dataclass
class TraceAnalysis:
    disagreement: np.ndarray
    lyapunov: LyapunovReport
    weight_maxima: np.ndarray


def analyze_trace(trace: "Trace") -> TraceAnalysis:
    return TraceAnalysis(trace.disagreement, lyapunov_diagnostic(trace), weight_maxima(trace))


def control_sum_series(trace: "Trace") -> np.ndarray:
    """Largest entry of ``|sum_i u_i|`` at every sample."""
    N = trace.N
    i, k = pair_arrays(N)
    masks = np.array([g.edge_mask() for g in trace.switching.graphs], dtype=float)[trace.graph_index]
    D = trace.x[:, k] - trace.x[:, i]
    c = (trace.w * masks)[:, :, None] * D
    S = np.zeros((N, i.size))
    S[i, np.arange(i.size)] = 1.0
    S[k, np.arange(i.size)] = -1.0
    s = np.einsum("np,spd->snd", S, c)
    U = s @ trace.gains.K_u.T
    return np.abs(U.sum(axis=1)).max(axis=1)


def mean_state_error(trace: "Trace", max_points: int = 2001) -> tuple[float, float]:
    """Max deviation of the agent average from ``expm(A t) xbar(0)`` and the allowed bound."""
    A = trace.plant.A
    xbar = trace.x.mean(axis=1)
    stride = max(1, len(trace.t) // (max_points - 1))
    idx = np.unique(np.r_[np.arange(0, len(trace.t), stride), len(trace.t) - 1])
    err = max(np.linalg.norm(sla.expm(A * trace.t[j]) @ xbar[0] - xbar[j]) for j in idx)
    h = float(np.max(np.diff(trace.t)))
    bound = 10.0 * h**4 * trace.horizon * (1.0 + np.linalg.norm(A, 2)) ** 4
    return float(err), float(bound)


def check_invariants(trace: "Trace", *, linear: bool | None = None) -> list[Check]:
    """Protocol and integrator invariants along a trace."""
    linear = trace.hook.kind == "none" if linear is None else linear
    checks = []
    w_min = float(min(trace.w.min(), trace.pre_switch_w.min() if trace.pre_switch_w.size else np.inf))
    checks.append(Check("weights >= 1", w_min >= 1.0, w_min, 1.0))

    worst = 0.0
    masks = np.array([g.edge_mask() for g in trace.switching.graphs])
    for m, sl in enumerate(trace.segment_slices()):
        W = trace.w[sl].copy()
        if m < len(trace.switch_times):
            W[-1] = trace.pre_switch_w[m]
        if len(W) > 1:
            worst = min(worst, float(np.diff(W, axis=0).min()))
    checks.append(Check("weights nondecreasing between switches", worst >= 0.0, worst, 0.0))

    bad_reset = 0.0
    for m, ts in enumerate(trace.switch_times):
        j = int(np.searchsorted(trace.t, ts))
        old = masks[trace.graph_index[j - 1]]
        new = masks[trace.graph_index[j]]
        added = new & ~old
        kept = ~added
        bad_reset = max(bad_reset, float(np.abs(trace.w[j][added] - 1.0).max(initial=0.0)))
        bad_reset = max(bad_reset, float(np.abs(trace.w[j][kept] - trace.pre_switch_w[m][kept]).max(initial=0.0)))
    checks.append(Check("reset to 1 exactly on added edges only", bad_reset == 0.0, bad_reset, 0.0))

    usum = float(control_sum_series(trace).max())
    checks.append(Check("sum_i u_i = 0", usum <= 1e-9, usum, 1e-9))

    dJ = float(np.diff(trace.J_x).min(initial=0.0))
    checks.append(Check("J_x nondecreasing", dJ >= 0.0, dJ, 0.0))

    if linear:
        err, bound = mean_state_error(trace)
        checks.append(Check("mean state follows xbar' = A xbar", err <= bound, err, bound))
    return checks
