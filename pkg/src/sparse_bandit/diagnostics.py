"""Analytic bounds and Monte-Carlo checks for the online Lasso guarantees.

Everything here either evaluates a closed-form threshold/bound or measures
an empirical counterpart of it.  The universal constants ``c, c', c''`` and
the tail exponent ``a`` are not pinned down analytically and default to 1,
so thresholds that depend on them hold only up to those constants.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .perturbation import PerturbationSpec, g_lower_bound

# Theorem-level constant in the high-dimensional exploration term (e)
HIGH_DIM_CONSTANT = 8196.0


def min_symmetric_eigenvalue(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - M.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    return float(np.linalg.eigvalsh(M)[0])


@dataclass(frozen=True)
class CovarianceSummary:
    lam_max: float
    lam_min: float
    q_sigma: float  # max diagonal entry
    min_diag: float

    @property
    def gamma_sq(self) -> float:
        return self.lam_min

    @property
    def cond(self) -> float:
        return self.lam_max / self.lam_min

    @classmethod
    def of(cls, Sigma) -> "CovarianceSummary":
        """Summarise ``Sigma`` and check lam_max >= max diag >= min diag >= lam_min > 0."""
        Sigma = np.asarray(Sigma, dtype=float)
        eig = np.linalg.eigvalsh(Sigma)
        diag = np.diag(Sigma)
        s = cls(lam_max=float(eig[-1]), lam_min=float(eig[0]),
                q_sigma=float(diag.max()), min_diag=float(diag.min()))
        slack = 1e-12 * max(1.0, s.lam_max)
        chain = (s.lam_max + slack >= s.q_sigma >= s.min_diag >= s.lam_min - slack) and s.lam_min > 0
        if not chain:
            raise ValueError(f"Rayleigh chain violated for covariance summary {s}")
        return s


@dataclass(frozen=True)
class BoundInputs:
    R: float
    k: int
    d: int
    T: int
    cov: CovarianceSummary
    q_min: float | None = None
    sigma1: float | None = None
    sigma: float = 0.0  # reward noise
    delta: float = 0.05
    a: float = 1.0
    c: float = 1.0
    c_prime: float = 1.0
    c_dprime: float = 1.0

    @classmethod
    def from_spec(cls, spec: PerturbationSpec, k: int, T: int, sigma: float = 0.0,
                  delta: float = 0.05, R: float | None = None, **constants) -> "BoundInputs":
        return cls(
            R=spec.energy_cap if R is None else float(R),
            k=k, d=spec.dim, T=T,
            cov=CovarianceSummary.of(spec.covariance_matrix()),
            q_min=float(spec.censor_bounds.min()),
            sigma1=spec.sigma1,
            sigma=sigma, delta=delta, **constants,
        )

    def lambda0(self) -> float:
        """g(2q/sigma1, 0) * sigma1^2 for the isotropic censored perturbation."""
        if self.sigma1 is None or self.q_min is None:
            raise ValueError("low-dimensional quantities need an isotropic sigma1 and q_min")
        return g_lower_bound(self.q_min, self.sigma1)


def exploration_length_low(inputs: BoundInputs) -> float:
    """2 R^2 / (g sigma1^2) * log(d T)."""
    return 2.0 * inputs.R**2 / inputs.lambda0() * math.log(inputs.d * inputs.T)


def lemma2_bound(t: int, inputs: BoundInputs) -> tuple[float, float, bool]:
    """Lower bound on lambda_min(X X^T) after ``t`` rounds: (bound, tau, valid)."""
    if t < 1:
        raise ValueError("t must be at least 1")
    lam0 = inputs.lambda0()
    tau = math.sqrt(2.0 * inputs.R**2 / (lam0 * t) * math.log(inputs.d * inputs.T))
    valid = t > exploration_length_low(inputs)
    return lam0 * (1.0 - tau) * t, tau, valid


@dataclass(frozen=True)
class HighDimThresholds:
    term_d: float
    term_e: float
    T_e: float
    ratio: float  # q(Sigma) / gamma^2
    ratio_at_least_one: bool
    ratio_within_cond: bool


def exploration_length_high(inputs: BoundInputs, t: int | None = None) -> HighDimThresholds:
    """Sample-size thresholds for the restricted eigenvalue guarantee.

    Term (e) uses ``log T``; pass ``t`` to evaluate the ``log t`` variant.
    """
    cov = inputs.cov
    gamma_sq = cov.gamma_sq
    ratio = cov.q_sigma / gamma_sq
    term_d = 4.0 * inputs.c_dprime * ratio * inputs.k * math.log(inputs.d)
    horizon = inputs.T if t is None else t
    term_e = (HIGH_DIM_CONSTANT * inputs.a * inputs.R**2 * cov.lam_max
              * math.log(horizon) / gamma_sq**2)
    eps = 1e-12
    return HighDimThresholds(
        term_d=term_d,
        term_e=term_e,
        T_e=max(term_d, term_e),
        ratio=ratio,
        ratio_at_least_one=ratio >= 1.0 - eps,
        ratio_within_cond=ratio <= cov.cond * (1.0 + eps),
    )


def re_constant_high(t: int, inputs: BoundInputs, log_horizon: bool = False) -> float:
    """h = gamma^2/64 - R sqrt(2 a lam_max log(t) / t).

    ``log_horizon=True`` swaps log t for log T, the form used for the
    curvature C in the recovery and regret bounds.
    """
    horizon = inputs.T if log_horizon else t
    cov = inputs.cov
    return cov.gamma_sq / 64.0 - inputs.R * math.sqrt(
        2.0 * inputs.a * cov.lam_max * math.log(horizon) / t
    )


def _curvature(t: int, inputs: BoundInputs, regime: str) -> tuple[float, float]:
    if regime == "low":
        _, tau, _ = lemma2_bound(t, inputs)
        return inputs.lambda0() * (1.0 - tau), exploration_length_low(inputs)
    if regime == "high":
        return re_constant_high(t, inputs, log_horizon=True), exploration_length_high(inputs).T_e
    raise ValueError(f"regime must be 'low' or 'high', got {regime!r}")


def recovery_bound(t: int, inputs: BoundInputs, regime: str,
                   curvature: float | None = None) -> tuple[float, bool]:
    """(3 sigma R / C) sqrt(2 k log(2d/delta) / t) and whether it applies at ``t``.

    ``curvature`` overrides C (useful to freeze it across t).
    """
    C, T_e = _curvature(t, inputs, regime)
    if curvature is not None:
        C = curvature
    valid = t > T_e and C > 0
    if C <= 0:
        return math.inf, False
    value = 3.0 * inputs.sigma * inputs.R / C * math.sqrt(
        2.0 * inputs.k * math.log(2.0 * inputs.d / inputs.delta) / t
    )
    return value, valid


def regret_bound(inputs: BoundInputs, T: int, regime: str) -> tuple[float, bool]:
    """2R (T_e + (6 sigma R / C) sqrt(2 k T log(2d) / delta)) after ``T`` rounds.

    C and T_e are evaluated once at the configured horizon ``inputs.T``, so
    the bound is a fixed increasing curve in ``T``.
    """
    C, T_e = _curvature(inputs.T, inputs, regime)
    if C <= 0:
        return math.inf, False
    value = 2.0 * inputs.R * (
        T_e + 6.0 * inputs.sigma * inputs.R / C
        * math.sqrt(2.0 * inputs.k * T * math.log(2.0 * inputs.d) / inputs.delta)
    )
    return value, T > T_e


# ---------------------------------------------------------------- cone sampling


@dataclass(frozen=True)
class ConeSpec:
    support: np.ndarray
    alpha: float = 3.0

    def __post_init__(self):
        support = np.unique(np.asarray(self.support, dtype=int))
        if support.size == 0:
            raise ValueError("cone support must be non-empty")
        if self.alpha < 1:
            raise ValueError("cone parameter alpha must be >= 1")
        object.__setattr__(self, "support", support)

    def contains(self, delta, slack: float = 1e-12) -> bool:
        delta = np.asarray(delta, dtype=float)
        on = np.abs(delta[self.support]).sum()
        off = np.abs(delta).sum() - on
        return bool(off <= self.alpha * on * (1.0 + slack))


def _cone_batch(cone: ConeSpec, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    S = cone.support
    if S.max() >= d:
        raise ValueError("cone support exceeds the dimension")
    off_idx = np.setdiff1d(np.arange(d), S)
    out = np.zeros((n, d))
    on = rng.standard_normal((n, S.size))
    out[:, S] = on
    if off_idx.size:
        tight = rng.random(n) < 0.5
        budget = np.where(tight, 1.0, rng.random(n)) * cone.alpha * np.abs(on).sum(axis=1)
        # off-support pattern: a random subset of random size, Gaussian weights
        n_active = rng.integers(1, off_idx.size + 1, size=n)
        ranks = rng.random((n, off_idx.size)).argsort(axis=1).argsort(axis=1)
        raw = rng.standard_normal((n, off_idx.size)) * (ranks < n_active[:, None])
        mass = np.abs(raw).sum(axis=1)
        raw *= (budget / np.where(mass > 0, mass, 1.0))[:, None]
        out[:, off_idx] = raw
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    return out


def sample_cone_vector(cone: ConeSpec, d: int, rng: np.random.Generator) -> np.ndarray:
    """A unit-norm vector in C(S; alpha); half the draws sit on the boundary."""
    return _cone_batch(cone, d, 1, rng)[0]


_CONE_CHUNK = 512


def iter_cone_samples(cone: ConeSpec, d: int, num_samples: int, seed):
    """Yield cone samples in fixed-size chunks with one child stream per chunk.

    The first ``n`` samples do not depend on ``num_samples``, so estimates
    over growing sample counts use nested sample sets.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_chunks = -(-num_samples // _CONE_CHUNK)
    for i, child in enumerate(ss.spawn(n_chunks)):
        batch = _cone_batch(cone, d, _CONE_CHUNK, np.random.default_rng(child))
        remaining = num_samples - i * _CONE_CHUNK
        yield batch[: min(remaining, _CONE_CHUNK)]


def re_constant_estimate(X, cone: ConeSpec, num_samples: int, seed=0) -> tuple[float, np.ndarray]:
    """min over sampled unit cone vectors of ||X^T delta||^2 / t.

    A sampled minimum can only overestimate the true cone constant.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be at least 1")
    X = np.asarray(X, dtype=float)
    d, t = X.shape
    best, best_vec = math.inf, None
    for batch in iter_cone_samples(cone, d, num_samples, seed):
        vals = ((batch @ X) ** 2).sum(axis=1) / t
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, best_vec = float(vals[i]), batch[i]
    return best, best_vec


# ---------------------------------------------------------------- Monte-Carlo checks


def fact1_threshold(t: int, sigma: float, R: float, d: int, delta: float) -> float:
    return sigma * R * math.sqrt(2.0 * t * math.log(2.0 * d / delta))


def fact1_check(d: int, t: int, sigma: float, R: float, delta: float, trials: int,
                rng: np.random.Generator, design: str = "uniform") -> float:
    """Fraction of trials with ||X eta||_inf above the noise sup-norm bound.

    ``design`` is ``"uniform"`` (entries U[-R, R]) or ``"rademacher"`` (+-R,
    the extreme case allowed by |X_ij| <= R).
    """
    if trials < 100:
        raise ValueError("use at least 100 trials")
    threshold = fact1_threshold(t, sigma, R, d, delta)
    hits = 0
    for _ in range(trials):
        if design == "uniform":
            X = rng.uniform(-R, R, size=(d, t))
        elif design == "rademacher":
            X = R * rng.choice([-1.0, 1.0], size=(d, t))
        else:
            raise ValueError(f"unknown design {design!r}")
        eta = sigma * rng.standard_normal(t)
        hits += np.abs(X @ eta).max() > threshold
    return hits / trials


def fact1_allowance(delta: float, trials: int) -> float:
    return delta + 3.0 * math.sqrt(delta / trials)


@dataclass(frozen=True)
class ChernoffCell:
    delta: float
    empirical: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.empirical <= self.bound


def matrix_chernoff_check(d: int, t: int, trials: int, deltas, rng: np.random.Generator):
    """Lower-tail check for sums of i.i.d. PSD rank-one terms x x^T.

    x is uniform on [-1, 1]^d, so E[x x^T] = I/3, psi_min = t/3 and
    lambda_max(x x^T) <= Q = d.
    """
    psi, Q = t / 3.0, float(d)
    mins = np.empty(trials)
    for i in range(trials):
        x = rng.uniform(-1.0, 1.0, size=(t, d))
        mins[i] = np.linalg.eigvalsh(x.T @ x)[0]
    return [
        ChernoffCell(delta=float(dl), empirical=float(np.mean(mins <= (1 - dl) * psi)),
                     bound=float(min(1.0, d * math.exp(-dl**2 * psi / (2.0 * Q)))))
        for dl in deltas
    ]


def subgaussian_tail_check(n: int, sigma: float, delta: float, trials: int,
                           rng: np.random.Generator) -> float:
    """Empirical P(sum a_i X_i <= -sqrt(2 sigma^2 ||a||^2 log(1/delta))) for Gaussian X_i."""
    a = rng.uniform(-1.0, 1.0, size=n)
    cut = -math.sqrt(2.0 * sigma**2 * (a @ a) * math.log(1.0 / delta))
    sums = (sigma * rng.standard_normal((trials, n))) @ a
    return float(np.mean(sums <= cut))


# ---------------------------------------------------------------- eigenvalue growth


@dataclass
class EigenGrowth:
    checkpoints: np.ndarray
    lambda_min: np.ndarray
    bound: np.ndarray
    valid: np.ndarray

    def slope(self, t_lo: int, t_hi: int) -> float:
        sel = (self.checkpoints >= t_lo) & (self.checkpoints <= t_hi)
        return float(np.polyfit(self.checkpoints[sel], self.lambda_min[sel], 1)[0])

    def bound_holds(self) -> bool:
        ok = self.lambda_min[self.valid] >= self.bound[self.valid]
        return bool(np.all(ok))


def eigen_growth(X, inputs: BoundInputs, every: int = 10) -> EigenGrowth:
    """lambda_min of the Gram matrix of the first t columns of ``X`` at checkpoints."""
    X = np.asarray(X, dtype=float)
    t_max = X.shape[1]
    cps = np.arange(every, t_max + 1, every)
    lam = np.empty(cps.size)
    bound = np.empty(cps.size)
    valid = np.empty(cps.size, dtype=bool)
    gram = np.zeros((X.shape[0], X.shape[0]))
    prev = 0
    for i, t in enumerate(cps):
        block = X[:, prev:t]
        gram += block @ block.T
        prev = t
        lam[i] = min_symmetric_eigenvalue(gram)
        bound[i], _, valid[i] = lemma2_bound(int(t), inputs)
    return EigenGrowth(cps, lam, bound, valid)


# ---------------------------------------------------------------- report


@dataclass
class DiagnosticsReport:
    exploration_low: float | None = None
    exploration_high: dict | None = None
    lambda0: float | None = None
    checkpoints: list = field(default_factory=list)
    lambda_min_trace: list = field(default_factory=list)
    lemma2_bound_trace: list = field(default_factory=list)
    lemma2_valid_trace: list = field(default_factory=list)
    re_constant_estimate: float | None = None
    recovery_bound_curve: list = field(default_factory=list)
    regret_bound: float | None = None
    monte_carlo: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj
