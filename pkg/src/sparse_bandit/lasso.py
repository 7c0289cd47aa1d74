"""Lasso by cyclic coordinate descent.

Minimises the unscaled objective

    G(theta) = ||Y - X^T theta||_2^2 + lam * ||theta||_1

where ``X`` is ``d x t`` with one sample per column.  There is no 1/t or 1/2
in front of the loss, so the regularisation schedule used by the bandit can
be plugged in unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np


@dataclass(frozen=True)
class LassoProblem:
    design: np.ndarray  # d x t, column j is the j-th observed context
    targets: np.ndarray  # length t
    lam: float

    def __post_init__(self):
        design = np.ascontiguousarray(self.design, dtype=float)
        targets = np.ascontiguousarray(self.targets, dtype=float).reshape(-1)
        if design.ndim != 2:
            raise ValueError(f"design must be 2-d, got shape {design.shape}")
        if design.shape[1] != targets.shape[0]:
            raise ValueError(
                f"design has {design.shape[1]} columns but targets has length {targets.shape[0]}"
            )
        if not self.lam >= 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def dim(self) -> int:
        return self.design.shape[0]

    @property
    def n_samples(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class SolverSettings:
    # None means the relative default 1e-8 * (1 + ||theta||_inf)
    tolerance: float | None = None
    max_sweeps: int = 10_000
    warm_start: np.ndarray | None = None

    def __post_init__(self):
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")


@dataclass
class LassoFit:
    theta: np.ndarray
    converged: bool
    n_sweeps: int
    objective: float
    history: np.ndarray = field(repr=False)


def soft_threshold(z, gamma):
    """Shrink ``z`` toward zero by ``gamma``; works on scalars and arrays."""
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("gamma must be non-negative")
    out = np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def lasso_objective(theta, problem: LassoProblem) -> float:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (problem.dim,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({problem.dim},)")
    resid = problem.targets - problem.design.T @ theta
    return float(resid @ resid + problem.lam * np.abs(theta).sum())


@numba.njit(cache=True)
def _sweep(X, sq_norms, theta, resid, lam, coords):
    max_change = 0.0
    half_lam = 0.5 * lam
    t = X.shape[1]
    for j in coords:
        nj = sq_norms[j]
        old = theta[j]
        if nj == 0.0:
            new = 0.0
        else:
            z = nj * old
            for i in range(t):
                z += X[j, i] * resid[i]
            if z > half_lam:
                new = (z - half_lam) / nj
            elif z < -half_lam:
                new = (z + half_lam) / nj
            else:
                new = 0.0
        delta = new - old
        if delta != 0.0:
            for i in range(t):
                resid[i] -= delta * X[j, i]
            theta[j] = new
            if abs(delta) > max_change:
                max_change = abs(delta)
    return max_change


@numba.njit(cache=True)
def _objective(resid, theta, lam):
    return resid @ resid + lam * np.abs(theta).sum()


@numba.njit(cache=True)
def _coordinate_descent(X, y, lam, theta, tol, relative_tol, max_sweeps):
    d = X.shape[0]
    sq_norms = np.empty(d)
    for j in range(d):
        sq_norms[j] = X[j] @ X[j]
    resid = y - X.T @ theta
    all_coords = np.arange(d)
    history = np.empty(max_sweeps + 1)
    history[0] = _objective(resid, theta, lam)
    sweeps = 0
    converged = False

    def threshold(theta):
        if relative_tol:
            return tol * (1.0 + np.abs(theta).max())
        return tol

    while sweeps < max_sweeps:
        change = _sweep(X, sq_norms, theta, resid, lam, all_coords)
        sweeps += 1
        history[sweeps] = _objective(resid, theta, lam)
        if change < threshold(theta):
            converged = True
            break
        # settle the active set before paying for another full sweep
        active = np.flatnonzero(theta)
        while sweeps < max_sweeps and active.size > 0:
            change = _sweep(X, sq_norms, theta, resid, lam, active)
            sweeps += 1
            history[sweeps] = _objective(resid, theta, lam)
            if change < threshold(theta):
                break
    return theta, converged, sweeps, history[: sweeps + 1]


def fit_lasso(problem: LassoProblem, settings: SolverSettings | None = None) -> LassoFit:
    """Solve the Lasso problem; returns the last (and best) iterate.

    The objective is recorded after every sweep and must never increase;
    an increase means the kernel is broken and raises ``AssertionError``.
    """
    settings = settings or SolverSettings()
    d, t = problem.design.shape
    if t < 1:
        raise ValueError("need at least one sample")
    if not (np.all(np.isfinite(problem.design)) and np.all(np.isfinite(problem.targets))):
        raise ValueError("design and targets must be finite")
    if settings.warm_start is None:
        theta0 = np.zeros(d)
    else:
        theta0 = np.array(settings.warm_start, dtype=float).reshape(-1)
        if theta0.shape != (d,):
            raise ValueError(f"warm start has shape {theta0.shape}, expected ({d},)")

    relative = settings.tolerance is None
    tol = 1e-8 if relative else settings.tolerance
    theta, converged, sweeps, history = _coordinate_descent(
        problem.design, problem.targets, problem.lam, theta0, tol, relative, settings.max_sweeps
    )
    # round-off slack only; every coordinate step is an exact minimisation
    slack = 1e-10 * (1.0 + np.abs(history[:-1]))
    if np.any(np.diff(history) > slack):
        raise AssertionError("coordinate descent objective increased between sweeps")
    return LassoFit(
        theta=theta,
        converged=bool(converged),
        n_sweeps=int(sweeps),
        objective=lasso_objective(theta, problem),
        history=history,
    )


def kkt_violation(theta, problem: LassoProblem) -> float:
    """Largest violation of the subgradient optimality conditions.

    With g = 2 X (X^T theta - Y): |g_j| <= lam where theta_j == 0, and
    g_j == -sign(theta_j) * lam elsewhere.
    """
    theta = np.asarray(theta, dtype=float)
    grad = 2.0 * problem.design @ (problem.design.T @ theta - problem.targets)
    zero = theta == 0
    viol = np.where(
        zero,
        np.maximum(np.abs(grad) - problem.lam, 0.0),
        np.abs(grad + np.sign(theta) * problem.lam),
    )
    return float(viol.max()) if viol.size else 0.0


def kkt_tolerance(lam: float) -> float:
    return 1e-6 * (1.0 + lam)
