"""Gaussian perturbations, coordinate censoring and censored-Gaussian variance."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class PerturbationSpec:
    """Perturbation law plus the censoring box and energy cap.

    Exactly one of ``sigma1`` (isotropic N(0, sigma1^2 I)) or ``covariance``
    (general N(0, Sigma)) is set.
    """

    censor_bounds: np.ndarray
    sigma1: float | None = None
    covariance: np.ndarray | None = None
    energy_cap: float | None = None

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.censor_bounds, dtype=float))
        if q.ndim != 1 or q.size == 0:
            raise ValueError("censor_bounds must be a non-empty vector")
        if not np.all(q > 0):
            raise ValueError("all censor bounds must be positive")
        object.__setattr__(self, "censor_bounds", q)

        if (self.sigma1 is None) == (self.covariance is None):
            raise ValueError("give exactly one of sigma1 or covariance")
        if self.sigma1 is not None:
            if not self.sigma1 > 0:
                raise ValueError(f"sigma1 must be positive, got {self.sigma1}")
            object.__setattr__(self, "sigma1", float(self.sigma1))
        else:
            cov = np.asarray(self.covariance, dtype=float)
            if cov.shape != (q.size, q.size):
                raise ValueError(f"covariance must be {q.size}x{q.size}, got {cov.shape}")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ValueError("covariance must be symmetric")
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise ValueError("covariance is not positive definite") from exc
            if np.linalg.eigvalsh(cov)[0] <= 1e-12:
                raise ValueError("covariance is not positive definite")
            object.__setattr__(self, "covariance", cov)
            object.__setattr__(self, "_chol", chol)

        cap = self.energy_cap
        if cap is None:
            # censoring already guarantees ||x||_2 <= ||q||_2
            cap = float(np.linalg.norm(q))
        if not cap > 0:
            raise ValueError("energy_cap must be positive")
        object.__setattr__(self, "energy_cap", float(cap))

    @classmethod
    def isotropic(cls, sigma1: float, d: int, q: float | None = None, energy_cap=None):
        """Isotropic spec with a common bound; ``q`` defaults to ``1 + 4 sigma1``."""
        q = 1.0 + 4.0 * sigma1 if q is None else q
        return cls(censor_bounds=np.full(d, float(q)), sigma1=sigma1, energy_cap=energy_cap)

    @property
    def dim(self) -> int:
        return self.censor_bounds.size

    @property
    def is_isotropic(self) -> bool:
        return self.sigma1 is not None

    def covariance_matrix(self) -> np.ndarray:
        if self.is_isotropic:
            return self.sigma1**2 * np.eye(self.dim)
        return self.covariance


def sample_perturbation(spec: PerturbationSpec, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(spec.dim)
    if spec.is_isotropic:
        return spec.sigma1 * z
    return spec._chol @ z


def censor_context(mu, e, q) -> np.ndarray:
    """Clamp ``mu + e`` coordinate-wise into ``[-q_j, q_j]``."""
    mu = np.asarray(mu, dtype=float)
    e = np.asarray(e, dtype=float)
    q = np.broadcast_to(np.asarray(q, dtype=float), mu.shape)
    bad = np.flatnonzero(np.abs(mu) > q)
    if bad.size:
        raise ValueError(f"raw context exceeds censor bound at coordinates {bad.tolist()}")
    return np.clip(mu + e, -q, q)


def _phi(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return np.where(np.isinf(x), 0.0, _INV_SQRT_2PI * np.exp(-0.5 * x * x))


def _xphi(x):
    # x * phi(x), with the 0 limit at +-inf
    x = np.asarray(x, dtype=float)
    finite = np.where(np.isinf(x), 0.0, x)
    return finite * _phi(finite) * np.isfinite(x)


def censored_variance(a, b, sigma1) -> float:
    """Variance of ``clip(e, a, b)`` for ``e ~ N(0, sigma1^2)`` and ``a <= 0 <= b``.

    Evaluated by the law of total variance over the three events
    {e < a}, {a <= e <= b}, {e > b}: the within-interval truncated variance
    weighted by its probability, plus the variance of the three-point
    conditional mean.
    """
    a, b, sigma1 = float(a), float(b), float(sigma1)
    if not sigma1 > 0:
        raise ValueError("sigma1 must be positive")
    if b < a:
        raise ValueError(f"empty interval [{a}, {b}]")
    if not (a <= 0.0 <= b):
        raise ValueError(f"interval [{a}, {b}] must contain 0")
    if a == b:
        return 0.0

    alpha, beta = a / sigma1, b / sigma1
    lower = float(ndtr(alpha))  # P(e < a)
    upper = float(ndtr(-beta))  # P(e > b)
    mass = 1.0 - lower - upper
    if mass <= 0.0:
        return 0.0
    phi_a, phi_b = float(_phi(alpha)), float(_phi(beta))
    rho = (phi_a - phi_b) / mass
    # mass * (1 + Lambda), without dividing by mass twice
    within = mass + float(_xphi(alpha)) - float(_xphi(beta)) - (phi_a - phi_b) * rho

    width = beta - alpha
    if np.isinf(width):
        # an infinite endpoint carries zero probability; drop its cross terms
        between = 0.0
        if np.isfinite(beta):
            between += mass * upper * (rho - beta) ** 2
        if np.isfinite(alpha):
            between += mass * lower * (rho - alpha) ** 2
    else:
        between = (
            (rho - beta) ** 2 * mass * (1.0 - mass)
            + 2.0 * width * (rho - beta) * mass * lower
            + width**2 * (1.0 - lower) * lower
        )
    return max(within + between, 0.0) * sigma1**2


def censored_variance_direct(a, b, sigma1) -> float:
    """Same quantity from raw moments E[x^2] - E[x]^2; used as a cross-check."""
    alpha, beta = a / sigma1, b / sigma1
    lo, hi = float(ndtr(alpha)), float(ndtr(-beta))
    mid = 1.0 - lo - hi
    phi_a, phi_b = float(_phi(alpha)), float(_phi(beta))
    edge_a = 0.0 if np.isinf(alpha) else alpha
    edge_b = 0.0 if np.isinf(beta) else beta
    m1 = edge_a * lo + (phi_a - phi_b) + edge_b * hi
    m2 = edge_a**2 * lo + (mid + float(_xphi(alpha)) - float(_xphi(beta))) + edge_b**2 * hi
    return max(m2 - m1 * m1, 0.0) * sigma1**2


def g_lower_bound(q_min: float, sigma1: float) -> float:
    """Worst-case censored variance over intervals of length ``2 q_min`` containing 0.

    The minimum sits at the one-sided placement [0, 2 q_min].  The guarantee
    is stated for ``q_min >= sigma1``; below that a warning is issued but the
    value is still returned.
    """
    if not q_min > 0:
        raise ValueError("q_min must be positive")
    if q_min < sigma1:
        warnings.warn(
            f"q_min={q_min} is below sigma1={sigma1}; the lower bound is outside its stated range",
            stacklevel=2,
        )
    return censored_variance(0.0, 2.0 * q_min, sigma1)


def perturbed_diversity_lambda0(spec: PerturbationSpec) -> float:
    """Lower bound on lambda_min(E[x x^T]) for one censored perturbed context."""
    if not spec.is_isotropic:
        raise NotImplementedError("lambda0 is only available for isotropic perturbations")
    return g_lower_bound(float(spec.censor_bounds.min()), spec.sigma1)
