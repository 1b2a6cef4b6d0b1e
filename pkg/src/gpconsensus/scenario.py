"""Scenario files: YAML description of a plant, topology set and run settings.

Node indices in edge lists are 1-based, as in :class:`Graph`.  State
components in the nonlinearity block are 1-based in files and 0-based in
memory.  Bundled scenarios live in the
``scenarios`` package directory; ``GPCONSENSUS_SCENARIO_DIR`` is searched first.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .exceptions import ScenarioError, ValidationError
from .graphs import Graph, SwitchingSchedule, SwitchingSet, is_connected, sample_switching_signal
from .protocol import NO_HOOK, NonlinearityHook
from .riccati import (
    GainSet, PerformanceSpec, PlantModel, is_spd, synthesize_linear,
    synthesize_linear_eps, synthesize_lipschitz, synthesize_lipschitz_eps,
)
from .simulate import IntegratorConfig

ENV_DIR = "GPCONSENSUS_SCENARIO_DIR"
BUNDLED_DIR = Path(__file__).parent / "scenarios"


@dataclass
class Scenario:
    name: str
    plant: PlantModel
    performance: PerformanceSpec
    switching: SwitchingSet
    x0: np.ndarray
    interval: float
    seed: int
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    hook: NonlinearityHook = NO_HOOK
    synthesis: str = "riccati"
    source: Path | None = None

    @property
    def N(self) -> int:
        return self.x0.shape[0]

    @property
    def d(self) -> int:
        return self.plant.d

    @property
    def nonlinear(self) -> bool:
        return self.hook.kind != "none"

    def synthesize(self, *, eps: float | None = None) -> GainSet:
        """Gains for this scenario.

        ``riccati`` solves at the scenario's ``gamma``; ``gain_factor`` runs
        the ``gamma`` search for ``eps`` (the scenario value unless given).
        """
        perf = self.performance
        mu = perf.mu if self.nonlinear else 0.0
        if self.synthesis == "riccati" and eps is None:
            if self.nonlinear:
                return synthesize_lipschitz(self.plant, perf)
            return synthesize_linear(self.plant, perf)
        eps = perf.eps if eps is None else eps
        if eps is None:
            raise ValidationError("gain-factor synthesis needs eps")
        if self.nonlinear:
            return synthesize_lipschitz_eps(self.plant, perf.Q, eps, mu)[1]
        return synthesize_linear_eps(self.plant, perf.Q, eps)[1]

    def schedule(self) -> SwitchingSchedule:
        return sample_switching_signal(self.switching, self.integrator.horizon, self.interval, self.seed)


def scenario_path(name_or_path: str | os.PathLike) -> Path:
    """Resolve a file path or a bundled scenario name."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    names = [p.name] if p.suffix else [p.name + ".yaml", p.name + ".yml"]
    dirs = [Path(os.environ[ENV_DIR])] if os.environ.get(ENV_DIR) else []
    dirs.append(BUNDLED_DIR)
    for d in dirs:
        for n in names:
            if (d / n).is_file():
                return d / n
    raise ScenarioError([f"scenario {str(name_or_path)!r} not found (searched {', '.join(map(str, dirs))})"])


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.yaml"))


class _Collector:
    """Accumulates validation problems with their field path."""

    def __init__(self):
        self.problems: list[str] = []

    def fail(self, path: str, msg: str) -> None:
        self.problems.append(f"{path}: {msg}")

    def matrix(self, raw, path, shape=None):
        try:
            M = np.array(raw, dtype=float)
        except (TypeError, ValueError):
            self.fail(path, "not a numeric array")
            return None
        if M.ndim == 1 and shape is not None and len(shape) == 2 and shape[1] == 1:
            M = M[:, None]
        if M.ndim != 2:
            self.fail(path, f"expected a 2-D array, got {M.ndim}-D")
            return None
        if not np.isfinite(M).all():
            self.fail(path, "non-finite entries")
            return None
        if shape is not None and any(s is not None and s != m for s, m in zip(shape, M.shape)):
            self.fail(path, f"shape {M.shape} != expected {tuple(shape)}")
            return None
        return M

    def number(self, raw, path, positive=False, required=True):
        if raw is None:
            if required:
                self.fail(path, "missing")
            return None
        try:
            v = float(raw)
        except (TypeError, ValueError):
            self.fail(path, f"not a number: {raw!r}")
            return None
        if positive and not v > 0:
            self.fail(path, f"must be positive, got {v}")
            return None
        return v


def _parse_hook(raw, c: _Collector, d: int, mu: float) -> NonlinearityHook:
    if raw is None or raw == "none" or (isinstance(raw, dict) and raw.get("kind", "none") == "none"):
        return NO_HOOK
    if not isinstance(raw, dict):
        c.fail("nonlinearity", "expected a mapping")
        return NO_HOOK
    kind = raw.get("kind")
    src, tgt = raw.get("source"), raw.get("target")
    for key, v in (("source", src), ("target", tgt)):
        if not isinstance(v, int) or not 1 <= v <= d:
            c.fail(f"nonlinearity.{key}", f"component must be an integer in 1..{d}")
    if c.problems and any(p.startswith("nonlinearity.") for p in c.problems):
        return NO_HOOK
    try:
        if kind == "sin":
            scale = c.number(raw.get("scale"), "nonlinearity.scale")
            return NonlinearityHook("sin", src - 1, tgt - 1, scale or 0.0, mu=mu)
        if kind == "tabulated":
            return NonlinearityHook("tabulated", src - 1, tgt - 1, mu=mu,
                                    grid=tuple(raw.get("grid", ())), values=tuple(raw.get("values", ())))
    except (ValidationError, TypeError, ValueError) as exc:
        c.fail("nonlinearity", str(exc))
        return NO_HOOK
    c.fail("nonlinearity.kind", f"unknown kind {kind!r}; expected none, sin or tabulated")
    return NO_HOOK


def _parse_graphs(raw, c: _Collector, N: int) -> list[Graph]:
    graphs = []
    if not isinstance(raw, list) or not raw:
        c.fail("topology.graphs", "expected a non-empty list")
        return graphs
    for j, g in enumerate(raw):
        path = f"topology.graphs[{j}]"
        name = g.get("name", f"G{j + 1}") if isinstance(g, dict) else f"G{j + 1}"
        edges = g.get("edges") if isinstance(g, dict) else g
        try:
            graph = Graph(N, [(int(a), int(b)) for a, b in edges], name=name)
        except (ValidationError, TypeError, ValueError) as exc:
            c.fail(path, f"bad edge list: {exc}")
            continue
        if not is_connected(graph):
            c.fail(path, f"graph {name!r} is not connected")
            continue
        graphs.append(graph)
    return graphs


def parse_scenario(data: dict, name: str = "scenario", source: Path | None = None) -> Scenario:
    """Validate a parsed YAML mapping; every problem is reported together."""
    if not isinstance(data, dict):
        raise ScenarioError(["<root>: expected a mapping"])
    c = _Collector()
    plant_raw = data.get("plant") or {}
    A = c.matrix(plant_raw.get("A"), "plant.A")
    d = A.shape[0] if A is not None else None
    if A is not None and A.shape[0] != A.shape[1]:
        c.fail("plant.A", f"must be square, got {A.shape}")
        A = None
    B = c.matrix(plant_raw.get("B"), "plant.B", shape=(d, 1) if d is not None and
                 np.ndim(plant_raw.get("B")) == 1 else (d, None))

    perf_raw = data.get("performance") or {}
    Q = c.matrix(perf_raw.get("Q"), "performance.Q", shape=(d, d))
    if Q is not None and not is_spd(0.5 * (Q + Q.T)):
        c.fail("performance.Q", "Q not positive definite")
    elif Q is not None and not np.allclose(Q, Q.T):
        c.fail("performance.Q", "Q must be symmetric")
    gamma = c.number(perf_raw.get("gamma"), "performance.gamma", positive=True, required=False)
    eps = c.number(perf_raw.get("eps"), "performance.eps", positive=True, required=False)
    mu = c.number(perf_raw.get("mu", 0.0), "performance.mu") or 0.0
    if mu < 0:
        c.fail("performance.mu", "must be nonnegative")
    if gamma is None and eps is None:
        c.fail("performance", "need gamma (Riccati route) or eps (gain-factor route)")

    x0 = c.matrix(data.get("initial_states"), "initial_states", shape=(None, d))
    N = x0.shape[0] if x0 is not None else None
    if N is not None and N < 2:
        c.fail("initial_states", "need at least 2 agents")
        N = None

    topo = data.get("topology") or {}
    graphs = _parse_graphs(topo.get("graphs"), c, N) if N is not None else []
    dwell = c.number(topo.get("dwell"), "topology.dwell", positive=True)
    interval = c.number(topo.get("interval", dwell), "topology.interval", positive=True)
    if dwell is not None and interval is not None and interval < dwell:
        c.fail("topology.interval", f"{interval} shorter than dwell {dwell}")
    seed = topo.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        c.fail("topology.seed", "must be a nonnegative integer")

    integ = data.get("integrator") or {}
    step = c.number(integ.get("step", 1e-3), "integrator.step", positive=True)
    horizon = c.number(integ.get("horizon", 20.0), "integrator.horizon", positive=True)
    method = integ.get("method", "rk4")
    if method != "rk4":
        c.fail("integrator.method", f"unsupported {method!r}; only rk4")

    hook = _parse_hook(data.get("nonlinearity"), c, d or 0, mu) if d else NO_HOOK
    synthesis = data.get("synthesis", "riccati" if gamma is not None else "gain_factor")
    if synthesis not in ("riccati", "gain_factor"):
        c.fail("synthesis", f"expected riccati or gain_factor, got {synthesis!r}")
    elif synthesis == "riccati" and gamma is None:
        c.fail("synthesis", "riccati synthesis needs performance.gamma")

    if c.problems:
        raise ScenarioError(c.problems)
    try:
        return Scenario(
            name=str(data.get("name", name)),
            plant=PlantModel(A, B),
            performance=PerformanceSpec(Q, gamma=gamma, eps=eps, mu=mu),
            switching=SwitchingSet(graphs, dwell),
            x0=x0, interval=interval, seed=seed,
            integrator=IntegratorConfig(step=step, horizon=horizon),
            hook=hook, synthesis=synthesis, source=source,
        )
    except ValidationError as exc:
        raise ScenarioError([str(exc)]) from exc


def load_scenario(name_or_path: str | os.PathLike) -> Scenario:
    """Load and validate a scenario file (or a bundled scenario by name)."""
    path = scenario_path(name_or_path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError([f"{path}: parse error: {exc}"]) from exc
    return parse_scenario(data, name=path.stem, source=path)
