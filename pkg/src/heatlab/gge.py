"""Generalized Gibbs states and generalized-temperature fitting.

A state is rho = exp(-sum_i theta_i O_i) / Z over a commuting generator
family (energy first, then shared charges, then exclusive charges).  The
inverse problem, finding theta from prescribed charge expectations, is a
damped Newton iteration on the convex max-entropy dual

    F(theta) = log Z(theta) + theta . targets,

whose gradient is targets - <O> and whose Hessian is the generator
covariance matrix (exact for commuting generators).  Targets are accepted
only if they lie strictly inside the moment polytope, the convex hull of
the simultaneous eigenvalue tuples; boundary targets would need diverging
theta and are rejected up front.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .exceptions import (
    ConvergenceError,
    DimensionError,
    InfeasibleTargetError,
    RangeError,
)
from .models import SystemSpec, generators
from .operator_core import (
    EigenSystem,
    OperatorMatrix,
    commutator_norm,
    eigh,
    kron,
    simultaneous_eigh,
)

# Smallest admissible max-entropy weight for a target to count as interior.
INTERIOR_MARGIN = 1e-9
# Walkaway guard: |theta| beyond this means the target is effectively on
# the boundary of the moment polytope.
THETA_DIVERGENCE = 1e3


@dataclass(frozen=True)
class GGEState:
    """A generalized Gibbs state with its cached spectral data."""

    spec: SystemSpec
    theta: np.ndarray
    exponent: OperatorMatrix
    exponent_eigs: EigenSystem
    rho: OperatorMatrix
    log_z: float


@dataclass(frozen=True)
class FitInfo:
    iterations: int
    residual: float
    dual_values: tuple[float, ...]


def _generator_ops(spec: SystemSpec) -> list[OperatorMatrix]:
    return [op for _, op in generators(spec)]


def _check_theta(spec: SystemSpec, theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    n_ops = len(generators(spec))
    if theta.shape != (n_ops,):
        raise DimensionError(
            f"theta has length {theta.shape}, spec {spec.label} has {n_ops} generators"
        )
    if not np.all(np.isfinite(theta)):
        raise RangeError("theta entries must be finite")
    return theta


def gge_state(spec: SystemSpec, theta) -> GGEState:
    """Build rho = exp(-sum theta_i O_i)/Z.

    The log-partition function is computed by a max-shifted log-sum-exp
    over the exponent spectrum, so moderate |theta| never overflows.
    """
    theta = _check_theta(spec, theta)
    ops = _generator_ops(spec)
    ent = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    for coeff, op in zip(theta, ops):
        ent += coeff * op.entries
    exponent = OperatorMatrix.from_entries(ent, hermitian=True)
    eigs = eigh(exponent)
    log_z = float(logsumexp(-eigs.eigenvalues))
    weights = np.exp(-eigs.eigenvalues - log_z)
    if not np.all(np.isfinite(weights)) or weights.min() <= 0.0:
        raise RangeError(
            "state weights under/overflowed; reduce the magnitude of theta"
        )
    v = eigs.eigenvectors
    rho = OperatorMatrix.from_entries((v * weights) @ v.conj().T, hermitian=True)
    trace = float(np.trace(rho.entries).real)
    if abs(trace - 1.0) > 1e-12:
        raise RangeError(f"state trace {trace!r} deviates from 1 beyond 1e-12")
    for name, op in generators(spec):
        norm = commutator_norm(rho, op)
        if norm > 1e-10 * max(op.scale, 1e-300):
            raise RangeError(f"[rho, {name}] = {norm:.3e}; state is not stationary")
    return GGEState(
        spec=spec,
        theta=theta,
        exponent=exponent,
        exponent_eigs=eigs,
        rho=rho,
        log_z=log_z,
    )


def moments(state: GGEState) -> np.ndarray:
    """Generator expectations (Tr[rho H], Tr[rho I_1], ...) in theta order."""
    rho = state.rho.entries
    return np.array(
        [float(np.einsum("ij,ji->", rho, op.entries).real) for op in _generator_ops(state.spec)]
    )


def covariance_matrix(state: GGEState) -> np.ndarray:
    """C_jk = <O_j O_k> - <O_j><O_k>; minus the Jacobian of the moment map."""
    ops = [op.entries for op in _generator_ops(state.spec)]
    rho = state.rho.entries
    m = moments(state)
    k = len(ops)
    c = np.empty((k, k))
    rho_ops = [rho @ op for op in ops]
    for j in range(k):
        for l in range(j, k):
            val = float(np.einsum("ij,ji->", rho_ops[j], ops[l]).real)
            c[j, l] = c[l, j] = val - m[j] * m[l]
    return (c + c.T) / 2.0


def moment_tuples(spec: SystemSpec, tol: float = 1e-10) -> np.ndarray:
    """Simultaneous eigenvalue tuples of the generators, one row per state."""
    _, tuples = simultaneous_eigh(_generator_ops(spec), tol=tol)
    return tuples


def target_strictly_feasible(
    tuples: np.ndarray, targets: np.ndarray, margin: float = INTERIOR_MARGIN
) -> bool:
    """Is ``targets`` in the relative interior of the moment polytope?

    Solved exactly at desk scale: maximize eps subject to w >= eps,
    sum w = 1, tuples^T w = targets.  A point of the relative interior has
    a representation with all weights positive, so eps* > margin accepts.
    """
    d, k = tuples.shape
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    a_eq = np.zeros((1 + k, d + 1))
    a_eq[0, :d] = 1.0
    a_eq[1:, :d] = tuples.T
    b_eq = np.concatenate(([1.0], targets))
    a_ub = np.hstack([-np.eye(d), np.ones((d, 1))])
    b_ub = np.zeros(d)
    bounds = [(0.0, 1.0)] * d + [(None, 1.0)]
    res = linprog(
        cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs"
    )
    if not res.success:
        return False
    return float(-res.fun) > margin


def _log_z_of(spec: SystemSpec, theta: np.ndarray) -> float:
    ent = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    for coeff, op in zip(theta, _generator_ops(spec)):
        ent += coeff * op.entries
    lam = np.linalg.eigvalsh((ent + ent.conj().T) / 2.0)
    return float(logsumexp(-lam))


def fit_temperatures(
    spec: SystemSpec,
    targets,
    theta0=None,
    tol: float = 1e-10,
    max_iter: int = 200,
    full_output: bool = False,
):
    """Solve moments(gge_state(theta)) = targets for theta.

    Damped Newton with backtracking on the convex dual; the covariance
    matrix is the exact Jacobian and is Tikhonov-regularized when nearly
    singular (e.g. duplicated generators).  Raises InfeasibleTargetError
    for boundary/outside targets and ConvergenceError past max_iter.
    """
    n_ops = len(generators(spec))
    targets = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    if targets.shape != (n_ops,):
        raise DimensionError(
            f"targets have shape {targets.shape}, spec has {n_ops} generators"
        )
    if not np.all(np.isfinite(targets)):
        raise RangeError("targets must be finite")
    tuples = moment_tuples(spec)
    if not target_strictly_feasible(tuples, targets):
        raise InfeasibleTargetError(
            "targets lie on or outside the moment polytope "
            "(convex hull of simultaneous eigenvalue tuples)"
        )

    theta = (
        np.zeros(n_ops) if theta0 is None else _check_theta(spec, theta0).copy()
    )
    dual_values: list[float] = []
    residual = np.inf
    for iteration in range(max_iter):
        state = gge_state(spec, theta)
        m = moments(state)
        residual = float(np.max(np.abs(m - targets)))
        dual = state.log_z + float(theta @ targets)
        dual_values.append(dual)
        if residual <= tol:
            info = FitInfo(iteration, residual, tuple(dual_values))
            return (theta, info) if full_output else theta
        c = covariance_matrix(state)
        if np.linalg.cond(c) > 1e12:
            c = c + max(1e-12 * float(np.trace(c)) / len(c), 1e-14) * np.eye(len(c))
        step = np.linalg.solve(c, m - targets)
        grad = targets - m
        slope = float(grad @ step)  # negative for a descent direction
        s = 1.0
        while True:
            trial = theta + s * step
            trial_dual = _log_z_of(spec, trial) + float(trial @ targets)
            if trial_dual <= dual + 1e-4 * s * slope:
                break
            s /= 2.0
            if s < 1e-12:
                raise InfeasibleTargetError(
                    f"line search stalled at residual {residual:.3e}; "
                    "targets are numerically on the moment-polytope boundary"
                )
        theta = theta + s * step
        if float(np.max(np.abs(theta))) > THETA_DIVERGENCE:
            raise InfeasibleTargetError(
                "theta diverged; targets are on or outside the moment polytope"
            )
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations; residual {residual:.3e}"
    )


def product_initial_state(state_a: GGEState, state_b: GGEState) -> OperatorMatrix:
    """rho(0) = rho_A ⊗ rho_B on the joint space."""
    return kron(state_a.rho, state_b.rho)
