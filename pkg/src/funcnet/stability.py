"""Local stability of steady states: Jacobians, equilibrium classes,
the discrete Lyapunov criterion and measured perturbation decay.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .dynamics import Network, SimulationSettings, fixed_point_residual, sigmoid, simulate_to_steady_state, trajectory

BORDERLINE_TOL = 1e-9
LYAPUNOV_CAP = 64


class NotSteadyError(ValueError):
    """The state handed to a steady-state analysis is not a fixed point."""


def jacobian_at(net: Network, y, inputs, residual_tol: float = 1e-5) -> np.ndarray:
    """J_ij = k1_i f'(u_i) W_ij - k2_i delta_ij at the fixed point ``y``."""
    y = np.asarray(y, dtype=float)
    res = fixed_point_residual(net, y, inputs)
    if not res < residual_tol:
        raise NotSteadyError(f"state is not steady: residual {res:.3g} >= {residual_tol:g}")
    return jacobian_unchecked(net, y)


def jacobian_unchecked(net: Network, y) -> np.ndarray:
    s = sigmoid(net.weights @ np.asarray(y, dtype=float))
    return (net.k1 * s * (1 - s))[:, None] * net.weights - np.diag(net.k2)


class Classification(NamedTuple):
    tau: float
    delta: float
    kind: str
    borderline: bool


def classify_2d(J, tol: float = BORDERLINE_TOL) -> Classification:
    """Equilibrium class from the trace and determinant of a 2x2 Jacobian.

    A vanishing discriminant still yields a node (repeated eigenvalue) but
    sets ``borderline``; vanishing trace or determinant yields
    ``center/borderline``.
    """
    J = np.asarray(J, dtype=float)
    if J.shape != (2, 2):
        raise ValueError("classify_2d needs a 2x2 matrix")
    tau = float(J[0, 0] + J[1, 1])
    delta = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    disc = tau * tau - 4 * delta
    if delta < -tol:
        return Classification(tau, delta, "saddle", False)
    if abs(delta) <= tol or abs(tau) <= tol:
        return Classification(tau, delta, "center/borderline", True)
    side = "stable" if tau < 0 else "unstable"
    shape = "node" if disc >= -tol else "spiral"
    return Classification(tau, delta, f"{side} {shape}", abs(disc) <= tol)


def classify(J, tol: float = BORDERLINE_TOL) -> Classification:
    """2-D chart for 2x2 systems, leading-eigenvalue rule otherwise."""
    J = np.asarray(J, dtype=float)
    if J.shape == (2, 2):
        return classify_2d(J, tol)
    ev = np.linalg.eigvals(J)
    re = ev.real
    tau = float(np.trace(J))
    delta = float(np.linalg.det(J))
    if np.any(np.abs(re) <= tol):
        return Classification(tau, delta, "center/borderline", True)
    if np.any(re > 0) and np.any(re < 0):
        return Classification(tau, delta, "saddle", False)
    lead = ev[np.argmax(re)] if np.all(re < 0) else ev[np.argmin(re)]
    side = "stable" if np.all(re < 0) else "unstable"
    shape = "spiral" if abs(lead.imag) > tol else "node"
    return Classification(tau, delta, f"{side} {shape}", False)


def spectral_radius(A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(A, dtype=float)))))


class LyapunovResult(NamedTuple):
    P: Optional[np.ndarray]
    solvable: bool
    positive_definite: bool
    spectral_radius: float

    @property
    def agrees(self) -> bool:
        """PD verdict matches the spectral criterion rho < 1."""
        return self.positive_definite == (self.spectral_radius < 1)


def solve_discrete_lyapunov(W, Q) -> np.ndarray:
    """Solve P - W P W^T = Q through the Kronecker system (I - W kron W) vec P = vec Q."""
    W = np.asarray(W, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = W.shape[0]
    A = np.eye(n * n) - np.kron(W, W)
    P = np.linalg.solve(A, Q.reshape(-1)).reshape(n, n)
    return (P + P.T) / 2


def lyapunov_check(W, Q=None) -> LyapunovResult:
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ValueError("W must be square")
    if n > LYAPUNOV_CAP:
        raise ValueError(f"Lyapunov solve capped at {LYAPUNOV_CAP} nodes")
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    rho = spectral_radius(W)
    try:
        P = solve_discrete_lyapunov(W, Q)
    except np.linalg.LinAlgError:
        return LyapunovResult(None, False, False, rho)
    if not np.all(np.isfinite(P)):
        return LyapunovResult(None, False, False, rho)
    pd = bool(np.linalg.eigvalsh(P).min() > 0)
    return LyapunovResult(P, True, pd, rho)


class DecayResult(NamedTuple):
    norms: np.ndarray         # ||delta y_t|| for t = 0..T
    ratios: np.ndarray        # per-step contraction ratios while above the noise floor
    contraction: float        # geometric-mean ratio over the later steps
    euler_radius: float       # spectral radius of I + dt*J
    diverged: bool


def perturbation_decay(net: Network, y, inputs, magnitude: float = 1e-3, horizon: int = 60,
                       dt: float = 1.0, floor: float = 1e-11) -> DecayResult:
    """Push every component of the steady state by ``magnitude`` and track the gap.

    The gap is measured against the unperturbed trajectory from ``y`` so the
    residual drift of an approximate fixed point cancels out.
    """
    y = np.asarray(y, dtype=float)
    J = jacobian_at(net, y, inputs)
    radius = spectral_radius(np.eye(net.n_nodes) + dt * J)
    base = trajectory(net, y, inputs, horizon, dt)
    with np.errstate(over="ignore", invalid="ignore"):
        pert = trajectory(net, y + magnitude, inputs, horizon, dt)
    gap = pert - base
    diverged = not np.all(np.isfinite(gap))
    norms = np.linalg.norm(np.nan_to_num(gap, nan=np.inf), axis=1)
    if magnitude == 0:
        return DecayResult(norms, np.zeros(0), 0.0, radius, False)
    live = np.flatnonzero(norms > floor * magnitude)
    last = int(live.max()) if len(live) else 0
    ratios = norms[1:last + 1] / norms[:last]
    if last + 1 < len(norms) and last < horizon and norms[last + 1] == 0:
        ratios = np.append(ratios, 0.0)
    if diverged:
        contraction = float("inf")
    elif last == 0:
        contraction = float(norms[1] / norms[0]) if horizon else 0.0
    else:
        start = last // 2
        contraction = float((norms[last] / norms[start]) ** (1.0 / (last - start))) if last > start else float(ratios[-1])
    return DecayResult(norms, ratios, contraction, radius, diverged)


@dataclass
class StabilityReport:
    input_level: float
    steady_state: np.ndarray
    converged: bool
    jacobian: np.ndarray
    trace: float
    determinant: float
    kind: str
    borderline: bool
    eigenvalues: np.ndarray
    lyapunov_matrix: str
    lyapunov: LyapunovResult
    contraction: float
    euler_radius: float

    def to_dict(self) -> dict:
        return {
            "input_level": self.input_level,
            "steady_state": self.steady_state.tolist(),
            "converged": self.converged,
            "jacobian": self.jacobian.tolist(),
            "trace": self.trace,
            "determinant": self.determinant,
            "class": self.kind,
            "borderline": self.borderline,
            "eigenvalues_real": self.eigenvalues.real.tolist(),
            "eigenvalues_imag": self.eigenvalues.imag.tolist(),
            "lyapunov": {
                "tested_matrix": self.lyapunov_matrix,
                "solvable": self.lyapunov.solvable,
                "positive_definite": self.lyapunov.positive_definite,
                "spectral_radius": self.lyapunov.spectral_radius,
            },
            "perturbation_contraction": self.contraction,
            "euler_map_spectral_radius": self.euler_radius,
        }


def stability_report(net: Network, input_level: float = 0.0, settings: SimulationSettings = SimulationSettings(),
                     lyapunov_on: str = "euler_map") -> StabilityReport:
    """Analyse the steady state reached with ``input_level`` on every input node.

    ``lyapunov_on`` picks the matrix given to the discrete Lyapunov test:
    ``"euler_map"`` (I + dt J) or ``"weights"`` (W).
    """
    inputs = np.zeros(net.n_nodes)
    inputs[list(net.input_nodes)] = input_level
    ss = simulate_to_steady_state(net, inputs, settings)
    J = jacobian_at(net, ss.state, inputs, residual_tol=max(10 * settings.convergence_eps / settings.dt, 1e-12)) \
        if ss.converged else jacobian_unchecked(net, ss.state)
    cls = classify(J)
    if lyapunov_on == "euler_map":
        M = np.eye(net.n_nodes) + settings.dt * J
    elif lyapunov_on == "weights":
        M = net.weights
    else:
        raise ValueError("lyapunov_on must be 'euler_map' or 'weights'")
    lyap = lyapunov_check(M) if net.n_nodes <= LYAPUNOV_CAP else LyapunovResult(None, False, False, spectral_radius(M))
    if ss.converged:
        decay = perturbation_decay(net, ss.state, inputs, dt=settings.dt)
        contraction, radius = decay.contraction, decay.euler_radius
    else:
        contraction, radius = float("nan"), spectral_radius(np.eye(net.n_nodes) + settings.dt * J)
    return StabilityReport(float(input_level), ss.state, ss.converged, J, cls.tau, cls.delta, cls.kind,
                           cls.borderline, np.linalg.eigvals(J), lyapunov_on, lyap, contraction, radius)
