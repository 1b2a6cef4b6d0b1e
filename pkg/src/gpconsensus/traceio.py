"""CSV export/import of traces and gain sets.

A trace CSV has the columns ``t, x_1_1..x_N_d, Jx, disagreement, V`` followed
by one ``w_i_k`` column per pair in lexicographic order, all with 9
significant digits.  The sibling ``.meta`` file (JSON) carries everything
needed to rebuild the trace: plant, gains, Q, graphs, schedule, hook, seed,
left-limit weights at the switches and the J* components.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .graphs import Graph, SwitchingSchedule, SwitchingSet, pair_list
from .performance import cost_rate_series, guaranteed_cost_bound, lyapunov_diagnostic
from .protocol import NonlinearityHook
from .riccati import GainSet, PlantModel
from .simulate import Trace

TRACE_DIGITS = 9
MATRIX_DIGITS = 12


def _fmt(v: float, digits: int) -> str:
    return f"{v:.{digits}g}"


def trace_header(N: int, d: int) -> list[str]:
    xs = [f"x_{i}_{j}" for i in range(1, N + 1) for j in range(1, d + 1)]
    ws = [f"w_{i}_{k}" for i, k in pair_list(N)]
    return ["t", *xs, "Jx", "disagreement", "V", *ws]


def meta_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".meta")


def gains_to_dict(g: GainSet) -> dict:
    return {
        "K_u": g.K_u.tolist(), "K_w": g.K_w.tolist(), "certificate": g.certificate.tolist(),
        "gamma": g.gamma, "mode": g.mode, "mu": g.mu, "eps": g.eps,
        "residual": g.residual, "slack": g.slack,
    }


def gains_from_dict(d: dict) -> GainSet:
    return GainSet(np.array(d["K_u"]), np.array(d["K_w"]), np.array(d["certificate"]),
                   gamma=d["gamma"], mode=d["mode"], mu=d["mu"], eps=d["eps"],
                   residual=d["residual"], slack=d["slack"])


def export_trace(trace: Trace, path: str | Path) -> Path:
    """Write ``path`` (CSV) and its ``.meta`` sibling; returns the meta path."""
    path = Path(path)
    V = lyapunov_diagnostic(trace).V
    cols = np.column_stack([
        trace.t, trace.x.reshape(len(trace.t), -1), trace.J_x, trace.disagreement, V, trace.w,
    ])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_header(trace.N, trace.d))
        for row in cols:
            writer.writerow([_fmt(v, TRACE_DIGITS) for v in row])

    report = guaranteed_cost_bound(trace)
    meta = {
        "N": trace.N, "d": trace.d, "seed": trace.seed, "backend": trace.backend,
        "plant": {"A": trace.plant.A.tolist(), "B": trace.plant.B.tolist()},
        "Q": trace.Q.tolist(),
        "gains": gains_to_dict(trace.gains),
        "graphs": [{"name": g.name, "edges": [list(e) for e in g.sorted_edges()]}
                   for g in trace.switching.graphs],
        "dwell": trace.switching.dwell,
        "schedule": {"breakpoints": list(trace.schedule.breakpoints),
                     "indices": list(trace.schedule.indices)},
        "switch_times": trace.switch_times.tolist(),
        # rounded like the CSV columns so that resets compare exactly on re-import
        "pre_switch_w": [[float(_fmt(v, TRACE_DIGITS)) for v in row] for row in trace.pre_switch_w],
        "hook": asdict(trace.hook),
        "J_star": {"initial": report.J_star_initial, "integral": report.J_star_integral,
                   "total": report.J_star, "truncated_at": report.horizon,
                   "tail_estimate": report.tail_estimate},
    }
    mp = meta_path(path)
    mp.write_text(json.dumps(meta, indent=1))
    return mp


def import_trace(path: str | Path) -> Trace:
    """Rebuild a :class:`Trace` from an exported CSV and its ``.meta`` file."""
    path = Path(path)
    meta = json.loads(meta_path(path).read_text())
    N, d = meta["N"], meta["d"]
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != trace_header(N, d):
            raise ValueError(f"{path}: header does not match N={N}, d={d}")
        data = np.array([[float(v) for v in row] for row in reader])
    t = data[:, 0]
    x = data[:, 1:1 + N * d].reshape(-1, N, d)
    J_x = data[:, 1 + N * d]
    disagreement = data[:, 2 + N * d]
    w = data[:, 4 + N * d:]

    graphs = [Graph(N, g["edges"], name=g["name"]) for g in meta["graphs"]]
    switching = SwitchingSet(graphs, meta["dwell"])
    schedule = SwitchingSchedule(tuple(meta["schedule"]["breakpoints"]), tuple(meta["schedule"]["indices"]),
                                 dwell=meta["dwell"], n_graphs=len(graphs))
    hook = meta["hook"]
    hook = NonlinearityHook(**{**hook, "grid": tuple(hook["grid"]), "values": tuple(hook["values"])})
    Q = np.array(meta["Q"])
    switch_times = np.array(meta["switch_times"], dtype=float)
    # breakpoints at or past the horizon were never applied, so index by the recorded switches
    graph_index = np.array(schedule.indices)[np.searchsorted(switch_times, t, side="right")]
    P = len(pair_list(N))
    return Trace(
        t=t, x=x, w=w, graph_index=graph_index, cost_rate=cost_rate_series(x, Q), J_x=J_x,
        disagreement=disagreement,
        plant=PlantModel(np.array(meta["plant"]["A"]), np.array(meta["plant"]["B"])),
        gains=gains_from_dict(meta["gains"]), Q=Q, switching=switching, schedule=schedule, hook=hook,
        switch_times=switch_times,
        pre_switch_w=np.array(meta["pre_switch_w"], dtype=float).reshape(-1, P),
        seed=meta["seed"], backend=meta["backend"],
    )


def write_matrix_csv(M: np.ndarray, path: str | Path) -> None:
    M = np.atleast_2d(np.asarray(M, float))
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in M:
            writer.writerow([_fmt(v, MATRIX_DIGITS) for v in row])


def read_matrix_csv(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def export_gains(gains: GainSet, outdir: str | Path) -> Path:
    """``gains.json`` plus one CSV per matrix in ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in ("K_u", "K_w", "certificate"):
        write_matrix_csv(getattr(gains, name), outdir / f"{name}.csv")
    out = outdir / "gains.json"
    out.write_text(json.dumps(gains_to_dict(gains), indent=1))
    return out


def load_gains(path: str | Path) -> GainSet:
    return gains_from_dict(json.loads(Path(path).read_text()))
