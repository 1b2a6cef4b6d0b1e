"""Riccati and LMI conditions for adaptive guaranteed-performance consensus.

Two design routes are provided:

* ``synthesize_linear`` / ``synthesize_lipschitz`` take a translation factor
  ``gamma`` and solve the corresponding Riccati equation (tightened by a small
  slack so the inequality holds strictly);
* ``synthesize_linear_eps`` / ``synthesize_lipschitz_eps`` take a gain factor
  ``eps`` and scan ``gamma`` upward until the certificate satisfies
  ``certificate <= eps * I`` and the block LMI built from its inverse is
  strictly negative.

All Riccati equations here have the form ``X A + A^T X - X M X + C = 0`` and are
solved through the stable invariant subspace of the Hamiltonian
``[[A, -M], [-C, -A^T]]`` followed by Newton-Kleinman refinement.  ``M`` may be
indefinite (Lipschitz case).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
import scipy.linalg as sla

from .exceptions import SynthesisError, ValidationError

Mode = Literal["linear", "lipschitz"]

STRICT_SLACK = 1e-6
RESIDUAL_TOL = 1e-8
LMI_TOL = 1e-9
GAMMA_GRID = (1e-2, 1e4, 1.1)


def _sym(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValidationError(f"{name} must be a matrix")
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{name} has non-finite entries")
    return M


def is_spd(X: np.ndarray, rtol: float = 1e-12) -> bool:
    """Cholesky test with a pivot floor of ``rtol * trace(X)``."""
    X = np.asarray(X, dtype=float)
    if not np.allclose(X, X.T, rtol=0, atol=1e-12 * max(1.0, np.abs(X).max(initial=0))):
        return False
    tr = float(np.trace(X))
    if tr <= 0:
        return False
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return False
    return bool(np.min(np.diag(L)) ** 2 > rtol * tr)


@dataclass(frozen=True)
class PlantModel:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ValidationError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValidationError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class PerformanceSpec:
    """Cost weight ``Q`` plus the design factors.

    ``gamma`` is the translation factor used by the Riccati route, ``eps`` the
    gain factor used by the LMI route, ``mu`` the Lipschitz constant of the
    agent nonlinearity (0 for linear agents).
    """

    Q: np.ndarray
    gamma: float | None = None
    eps: float | None = None
    mu: float = 0.0

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        if Q.shape[0] != Q.shape[1]:
            raise ValidationError(f"Q must be square, got {Q.shape}")
        if not is_spd(Q):
            raise ValidationError("Q not positive definite")
        object.__setattr__(self, "Q", Q)
        if self.gamma is not None and not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if self.eps is not None and not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if not self.mu >= 0:
            raise ValidationError(f"mu must be nonnegative, got {self.mu}")


@dataclass(frozen=True)
class GainSet:
    K_u: np.ndarray
    K_w: np.ndarray
    certificate: np.ndarray
    gamma: float
    mode: Mode = "linear"
    mu: float = 0.0
    eps: float | None = None
    residual: float = float("nan")
    slack: float = 0.0

    def __post_init__(self):
        K_u = _as_matrix(self.K_u, "K_u")
        K_w = _as_matrix(self.K_w, "K_w")
        cert = _as_matrix(self.certificate, "certificate")
        if K_w.shape != (K_u.shape[1], K_u.shape[1]):
            raise ValidationError(f"K_w shape {K_w.shape} does not match K_u {K_u.shape}")
        if not np.allclose(K_w, K_w.T, rtol=0, atol=1e-12 * max(1.0, np.abs(K_w).max())):
            raise ValidationError("K_w is not symmetric")
        if np.linalg.eigvalsh(_sym(K_w))[0] < -1e-10 * max(1.0, np.abs(K_w).max()):
            raise ValidationError("K_w is not positive semidefinite")
        object.__setattr__(self, "K_u", K_u)
        object.__setattr__(self, "K_w", K_w)
        object.__setattr__(self, "certificate", cert)

    @property
    def d(self) -> int:
        return self.K_u.shape[1]


@dataclass(frozen=True)
class LmiMargin:
    value: float
    feasible: bool
    normalization_ok: bool = True


# -- Riccati core -------------------------------------------------------------

def hamiltonian(A: np.ndarray, M: np.ndarray, C: np.ndarray) -> np.ndarray:
    return np.block([[A, -M], [-C, -A.T]])


def riccati_lhs(X, A, M, C) -> np.ndarray:
    return _sym(X @ A + A.T @ X - X @ M @ X + C)


def solve_riccati(A, M, C, *, refine_tol: float = 1e-10, max_newton: int = 10) -> np.ndarray:
    """Stabilizing solution of ``X A + A^T X - X M X + C = 0``.

    Raises
    ------
    SynthesisError
        If the Hamiltonian has eigenvalues on the imaginary axis, its stable
        invariant subspace is not the graph of a matrix, or refinement cannot
        bring the residual below tolerance.
    """
    A = _as_matrix(A, "A")
    M = _sym(_as_matrix(M, "M"))
    C = _sym(_as_matrix(C, "C"))
    d = A.shape[0]
    H = hamiltonian(A, M, C)
    scale = max(1.0, np.linalg.norm(H, 1))
    if np.min(np.abs(np.linalg.eigvals(H).real)) <= 1e-9 * scale:
        raise SynthesisError("no stabilizing solution: Hamiltonian has imaginary-axis eigenvalues")

    _, Z, sdim = sla.schur(H, output="real", sort="lhp")
    if sdim != d:
        raise SynthesisError("no stabilizing solution: stable subspace has wrong dimension")
    U1, U2 = Z[:d, :d], Z[d:, :d]
    if np.linalg.cond(U1) > 1e12:
        raise SynthesisError("no stabilizing solution: stable subspace is not a graph")
    X = _sym(np.linalg.solve(U1.T, U2.T).T)

    def resnorm(Y):
        return np.linalg.norm(riccati_lhs(Y, A, M, C), 2) / (1.0 + np.linalg.norm(Y, 2))

    best, best_res = X, resnorm(X)
    for _ in range(max_newton):
        if best_res <= refine_tol:
            break
        Acl = A - M @ X
        try:
            step = sla.solve_continuous_lyapunov(Acl.T, -riccati_lhs(X, A, M, C))
        except (np.linalg.LinAlgError, ValueError):
            break
        X = _sym(X + step)
        r = resnorm(X)
        if not np.isfinite(r) or r >= best_res:
            break
        best, best_res = X, r
    if best_res > RESIDUAL_TOL:
        raise SynthesisError(f"Riccati residual {best_res:.3e} above tolerance")
    return best


def solve_care(A, B, Q_eff, weight: float) -> np.ndarray:
    """Solve ``R A + A^T R - weight * R B B^T R + Q_eff = 0`` for SPD ``R``."""
    if not weight > 0:
        raise ValidationError(f"weight must be positive, got {weight}")
    B = _as_matrix(B, "B")
    R = solve_riccati(A, weight * B @ B.T, Q_eff)
    if not is_spd(R):
        raise SynthesisError("solution not positive definite")
    return R


def riccati_residual(
    certificate, plant: PlantModel, spec: PerformanceSpec, mode: Mode = "linear",
    gamma: float | None = None,
) -> float:
    """Largest eigenvalue of the Riccati-inequality left-hand side.

    ``<= tol`` certifies the inequality.  ``gamma`` defaults to ``spec.gamma``.
    """
    X = _as_matrix(certificate, "certificate")
    d = plant.d
    if X.shape != (d, d) or spec.Q.shape != (d, d):
        raise ValidationError(
            f"dimension mismatch: certificate {X.shape}, A {plant.A.shape}, Q {spec.Q.shape}"
        )
    g = spec.gamma if gamma is None else gamma
    if g is None:
        raise ValidationError("gamma is required")
    BB = plant.B @ plant.B.T
    if mode == "linear":
        lhs = riccati_lhs(X, plant.A, g * BB, 2.0 * spec.Q)
    elif mode == "lipschitz":
        lhs = riccati_lhs(X, plant.A, g * BB - np.eye(d), 2.0 * spec.Q + spec.mu**2 * np.eye(d))
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    return float(np.linalg.eigvalsh(lhs)[-1])


def _gains(plant: PlantModel, X: np.ndarray, **meta) -> GainSet:
    K_u = plant.B.T @ X
    # K_u^T K_u is R B B^T R evaluated so that the identity holds to rounding.
    return GainSet(K_u=K_u, K_w=K_u.T @ K_u, certificate=X, **meta)


def synthesize_linear(
    plant: PlantModel, spec: PerformanceSpec, *, slack: float = STRICT_SLACK
) -> GainSet:
    """Gains for linear agents at translation factor ``spec.gamma``."""
    if spec.gamma is None:
        raise ValidationError("synthesize_linear needs spec.gamma")
    d = plant.d
    if spec.Q.shape != (d, d):
        raise ValidationError(f"Q is {spec.Q.shape}, plant has d = {d}")
    R = solve_care(plant.A, plant.B, 2.0 * spec.Q + slack * np.eye(d), spec.gamma)
    res = riccati_residual(R, plant, spec, "linear")
    if res > RESIDUAL_TOL:
        raise SynthesisError(f"Riccati inequality residual {res:.3e} > {RESIDUAL_TOL}")
    return _gains(plant, R, gamma=float(spec.gamma), mode="linear", residual=res, slack=slack)


def synthesize_lipschitz(
    plant: PlantModel, spec: PerformanceSpec, *, slack: float = STRICT_SLACK
) -> GainSet:
    """Gains for Lipschitz-nonlinear agents; the quadratic term ``gamma BB^T - I`` may be indefinite."""
    if spec.gamma is None:
        raise ValidationError("synthesize_lipschitz needs spec.gamma")
    d = plant.d
    if spec.Q.shape != (d, d):
        raise ValidationError(f"Q is {spec.Q.shape}, plant has d = {d}")
    M = spec.gamma * plant.B @ plant.B.T - np.eye(d)
    C = 2.0 * spec.Q + (spec.mu**2 + slack) * np.eye(d)
    P = solve_riccati(plant.A, M, C)
    if not is_spd(P):
        raise SynthesisError("solution not positive definite")
    res = riccati_residual(P, plant, spec, "lipschitz")
    if res > RESIDUAL_TOL:
        raise SynthesisError(f"Riccati inequality residual {res:.3e} > {RESIDUAL_TOL}")
    return _gains(
        plant, P, gamma=float(spec.gamma), mode="lipschitz", mu=spec.mu, residual=res, slack=slack
    )


# -- LMI forms ----------------------------------------------------------------

def _normalized(plant: PlantModel) -> bool:
    return bool(np.linalg.eigvalsh(plant.B @ plant.B.T)[-1] <= 1.0 + 1e-12)


def lmi_matrix_linear(Rtilde, gamma: float, plant: PlantModel, Q) -> np.ndarray:
    Rt = _as_matrix(Rtilde, "Rtilde")
    Q = _as_matrix(Q, "Q")
    d = plant.d
    if Rt.shape != (d, d) or Q.shape != (d, d):
        raise ValidationError("dimension mismatch in LMI blocks")
    A, B = plant.A, plant.B
    top = A @ Rt + Rt @ A.T - gamma * B @ B.T
    return _sym(np.block([[top, 2.0 * Rt @ Q], [2.0 * Q @ Rt, -2.0 * Q]]))


def lmi_matrix_lipschitz(Ptilde, gamma: float, plant: PlantModel, Q, mu: float) -> np.ndarray:
    Pt = _as_matrix(Ptilde, "Ptilde")
    Q = _as_matrix(Q, "Q")
    d = plant.d
    if Pt.shape != (d, d) or Q.shape != (d, d):
        raise ValidationError("dimension mismatch in LMI blocks")
    A, B, I, Z = plant.A, plant.B, np.eye(d), np.zeros((d, d))
    top = A @ Pt + Pt @ A.T - gamma * B @ B.T + I
    return _sym(np.block([
        [top, 2.0 * Pt @ Q, mu * Pt],
        [2.0 * Q @ Pt, -2.0 * Q, Z],
        [mu * Pt, Z, -I],
    ]))


def lmi_margin_linear(Rtilde, gamma: float, plant: PlantModel, Q) -> LmiMargin:
    value = float(np.linalg.eigvalsh(lmi_matrix_linear(Rtilde, gamma, plant, Q))[-1])
    return LmiMargin(value, value < -LMI_TOL, _normalized(plant))


def lmi_margin_lipschitz(Ptilde, gamma: float, plant: PlantModel, Q, mu: float) -> LmiMargin:
    value = float(np.linalg.eigvalsh(lmi_matrix_lipschitz(Ptilde, gamma, plant, Q, mu))[-1])
    return LmiMargin(value, value < -LMI_TOL, _normalized(plant))


# -- gain-factor search -------------------------------------------------------

def gamma_grid(lo: float = GAMMA_GRID[0], hi: float = GAMMA_GRID[1],
               ratio: float = GAMMA_GRID[2]) -> np.ndarray:
    count = int(np.floor(np.log(hi / lo) / np.log(ratio) + 1e-9)) + 1
    return lo * ratio ** np.arange(count)


def _eps_search(plant, Q, eps, mu, mode: Mode, grid, slack):
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    if not _normalized(plant):
        raise SynthesisError("input-matrix normalization violated: lambda_max(B B^T) > 1")
    grid = gamma_grid() if grid is None else np.asarray(grid, dtype=float)
    for g in grid:
        spec = PerformanceSpec(Q, gamma=float(g), mu=mu)
        try:
            if mode == "linear":
                gains = synthesize_linear(plant, spec, slack=slack)
            else:
                gains = synthesize_lipschitz(plant, spec, slack=slack)
        except SynthesisError:
            continue
        X = gains.certificate
        if np.linalg.eigvalsh(X)[-1] > eps:
            continue
        Xt = np.linalg.inv(X)
        if mode == "linear":
            margin = lmi_margin_linear(Xt, g, plant, spec.Q)
        else:
            margin = lmi_margin_lipschitz(Xt, g, plant, spec.Q, mu)
        if margin.feasible:
            return float(g), replace(gains, eps=float(eps))
    raise SynthesisError("no feasible gamma in search range")


def synthesize_linear_eps(plant: PlantModel, Q, eps: float, *, grid=None,
                          slack: float = STRICT_SLACK) -> tuple[float, GainSet]:
    """Smallest grid ``gamma`` whose certificate satisfies ``R <= eps I`` with a strictly feasible LMI."""
    return _eps_search(plant, Q, eps, 0.0, "linear", grid, slack)


def synthesize_lipschitz_eps(plant: PlantModel, Q, eps: float, mu: float, *, grid=None,
                             slack: float = STRICT_SLACK) -> tuple[float, GainSet]:
    return _eps_search(plant, Q, eps, mu, "lipschitz", grid, slack)
