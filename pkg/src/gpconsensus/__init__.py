"""Adaptive guaranteed-performance consensus for multiagent systems on switching graphs."""

from .exceptions import DivergenceError, ScenarioError, SynthesisError, ValidationError
from .graphs import (
    Graph, SwitchingSchedule, SwitchingSet, WeightState, algebraic_connectivity,
    complete_graph, complete_projection, is_connected, laplacian_01, laplacian_spectrum,
    pair_list, path_graph, ring_graph, sample_switching_signal, star_graph, weighted_laplacian,
)
from .kernels import BACKENDS, DEFAULT_BACKEND
from .performance import (
    CostReport, LyapunovReport, TraceAnalysis, analyze_trace, check_invariants, cost_rate,
    cost_rate_pairwise, cumulative_cost, disagreement_decomposition, disagreement_norm,
    guaranteed_cost_bound, lyapunov_diagnostic, verify_lipschitz,
)
from .protocol import (
    NO_HOOK, NonlinearityHook, SystemState, apply_switch, control_inputs, system_derivative,
    weight_rates,
)
from .riccati import (
    GainSet, LmiMargin, PerformanceSpec, PlantModel, lmi_margin_linear, lmi_margin_lipschitz,
    riccati_residual, solve_care, synthesize_linear, synthesize_linear_eps,
    synthesize_lipschitz, synthesize_lipschitz_eps,
)
from .scenario import Scenario, load_scenario
from .simulate import IntegratorConfig, Trace, rk4_step, run_closed_loop, simulate
from .traceio import export_trace, import_trace

__version__ = "0.1.0"
