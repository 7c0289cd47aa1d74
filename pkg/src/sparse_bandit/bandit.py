"""Greedy online Lasso for the sparse linear contextual bandit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .environment import (
    BanditInstance,
    ContextStrategy,
    RoundContexts,
    apply_perturbed_adversary,
    best_arm,
    generate_raw_contexts,
    realize_reward,
)
from .lasso import LassoProblem, SolverSettings, fit_lasso
from .perturbation import PerturbationSpec
from .streams import Purpose, StreamFactory

VARIANTS = ("plain", "preconditioned")


@dataclass(frozen=True)
class ScheduleParams:
    sigma: float
    R: float
    d: int
    delta: float = 0.05
    # scales the whole schedule; 1.0 is the nominal choice
    multiplier: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.multiplier < 0:
            raise ValueError("multiplier must be non-negative")


def lambda_schedule(t: int, params: ScheduleParams, R: float | None = None) -> float:
    """lambda_t = 2 sigma R sqrt(2 t log(2d / delta)), times the multiplier."""
    if t < 1:
        raise ValueError("t must be at least 1")
    R = params.R if R is None else R
    return params.multiplier * 2.0 * params.sigma * R * math.sqrt(
        2.0 * t * math.log(2.0 * params.d / params.delta)
    )


class History:
    """Chosen contexts (as columns) and observed rewards, in round order."""

    def __init__(self, d: int, capacity: int = 64):
        self._X = np.empty((d, max(capacity, 1)))
        self._Y = np.empty(max(capacity, 1))
        self.t = 0

    @property
    def d(self) -> int:
        return self._X.shape[0]

    @property
    def X(self) -> np.ndarray:
        return self._X[:, : self.t]

    @property
    def Y(self) -> np.ndarray:
        return self._Y[: self.t]

    def append(self, x, r: float) -> None:
        if self.t == self._X.shape[1]:
            self._X = np.concatenate([self._X, np.empty_like(self._X)], axis=1)
            self._Y = np.concatenate([self._Y, np.empty_like(self._Y)])
        self._X[:, self.t] = x
        self._Y[self.t] = r
        self.t += 1


@dataclass
class LearnerState:
    theta: np.ndarray
    history: History
    schedule: ScheduleParams
    variant: str = "plain"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @classmethod
    def initial(cls, schedule: ScheduleParams, variant="plain", capacity=64):
        return cls(np.zeros(schedule.d), History(schedule.d, capacity), schedule, variant)


@dataclass(frozen=True)
class StepRecord:
    round: int
    chosen_arm: int
    inst_regret: float
    cum_regret: float
    est_error: float
    lambda_t: float
    converged: bool
    n_sweeps: int
    lambda_min: float | None = None


@dataclass
class RegretTrace:
    records: list[StepRecord] = field(default_factory=list)
    # chosen contexts as columns (d x T), kept only on request
    design: np.ndarray | None = None

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def cum_regret(self) -> np.ndarray:
        return self.column("cum_regret")

    @property
    def est_error(self) -> np.ndarray:
        return self.column("est_error")


def select_arm(theta, contexts: RoundContexts) -> int:
    """Greedy choice; ties go to the lowest index."""
    return int(np.argmax(contexts.perturbed @ np.asarray(theta, dtype=float)))


def precondition_design(X, Y):
    """Map the regression so every nonzero singular value of the design becomes 1.

    With A = X^T = U S V^T (thin SVD, nonzero part only) this returns
    ``(Ã^T, Ỹ)`` where ``Ã = U V^T`` and ``Ỹ = U S^+ U^T Y``; the first item
    keeps the ``d x t`` column-per-sample layout of ``X``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    A = X.T
    if A.size == 0:
        return X.copy(), Y.copy()
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    rank_tol = s.max(initial=0.0) * max(A.shape) * np.finfo(float).eps
    keep = s > rank_tol
    if not keep.any():
        return X.copy(), Y.copy()
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    A_tilde = U @ Vt
    Y_tilde = U @ ((U.T @ Y) / s)
    return np.ascontiguousarray(A_tilde.T), Y_tilde


def bandit_step(state: LearnerState, contexts: RoundContexts, instance: BanditInstance,
                rng: np.random.Generator, round_: int | None = None, cum_regret: float = 0.0,
                solver: SolverSettings | None = None) -> tuple[LearnerState, StepRecord]:
    """One round: greedy pick, observe, append, refit with a warm start."""
    arm = select_arm(state.theta, contexts)
    x = contexts.perturbed[arm]
    reward = realize_reward(x, instance, rng)
    # pseudo-regret: difference of expected rewards on the perturbed contexts,
    # both read off one product so the difference is exactly non-negative
    values = contexts.perturbed @ instance.theta_star
    best, _ = best_arm(contexts, instance)
    inst_regret = float(values[best] - values[arm])

    history = state.history
    history.append(x, reward)
    t = history.t
    if state.variant == "preconditioned":
        X, Y = precondition_design(history.X, history.Y)
        R_eff = float(np.sqrt((X * X).sum(axis=0)).max())
        lam = lambda_schedule(t, state.schedule, R=R_eff)
    else:
        X, Y = history.X, history.Y
        lam = lambda_schedule(t, state.schedule)

    base = solver or SolverSettings()
    settings = SolverSettings(tolerance=base.tolerance, max_sweeps=base.max_sweeps,
                              warm_start=state.theta)
    fit = fit_lasso(LassoProblem(X, Y, lam), settings)
    state.theta = fit.theta

    record = StepRecord(
        round=t if round_ is None else round_,
        chosen_arm=arm,
        inst_regret=inst_regret,
        cum_regret=cum_regret + inst_regret,
        est_error=float(np.linalg.norm(fit.theta - instance.theta_star)),
        lambda_t=lam,
        converged=fit.converged,
        n_sweeps=fit.n_sweeps,
    )
    return state, record


def run_episode(instance: BanditInstance, strategy: ContextStrategy, spec: PerturbationSpec,
                schedule: ScheduleParams, T: int, variant: str = "plain",
                streams: StreamFactory | None = None, eigen_every: int | None = None,
                solver: SolverSettings | None = None, keep_design: bool = False) -> RegretTrace:
    """Run ``T`` greedy rounds.

    ``eigen_every`` records lambda_min(X X^T) every that many rounds;
    ``keep_design`` stores the chosen contexts on the returned trace.
    """
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    if spec.dim != instance.d or schedule.d != instance.d:
        raise ValueError("instance, perturbation and schedule dimensions disagree")
    streams = streams or StreamFactory(0)
    state = LearnerState.initial(schedule, variant, capacity=T)
    trace = RegretTrace()
    cum = 0.0
    for t in range(1, T + 1):
        raw = generate_raw_contexts(strategy, instance, t, streams)
        contexts = apply_perturbed_adversary(raw, spec, t, streams)
        state, rec = bandit_step(state, contexts, instance,
                                 streams.generator(Purpose.REWARD_NOISE, t, 0),
                                 round_=t, cum_regret=cum, solver=solver)
        if eigen_every and t % eigen_every == 0:
            X = state.history.X
            rec = replace(rec, lambda_min=float(np.linalg.eigvalsh(X @ X.T)[0]))
        cum = rec.cum_regret
        trace.records.append(rec)
    if keep_design:
        trace.design = state.history.X.copy()
    return trace

