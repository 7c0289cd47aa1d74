"""Seeded repeated episodes, trace aggregation and output files."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import diagnostics as dg
from ..bandit import VARIANTS, RegretTrace, ScheduleParams, run_episode
from ..environment import BanditInstance, ContextStrategy
from ..perturbation import PerturbationSpec
from ..streams import Purpose, StreamFactory, derive_key
from .config import ExperimentConfig, config_from_dict

TRACE_HEADER = ("round", "repeat", "variant", "sigma1", "chosen_arm", "inst_regret",
                "cum_regret", "est_error", "lambda_t", "converged")
AGGREGATE_HEADER = ("variant", "sigma1", "round", "mean", "min", "max")


@dataclass(frozen=True, order=True)
class EpisodeKey:
    variant_index: int
    sigma_index: int
    repeat: int


@dataclass
class EpisodeResult:
    key: EpisodeKey
    trace: RegretTrace | None = None
    error: str | None = None
    support: np.ndarray | None = None


@dataclass
class AggregateCurve:
    variant: str
    sigma1: float
    rounds: np.ndarray
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        n = len(self.rounds)
        if not (len(self.mean) == len(self.lo) == len(self.hi) == n):
            raise ValueError("curve arrays must share one length")
        # means of floats can drift a few ulps outside [min, max]; pin them
        self.mean = np.clip(self.mean, self.lo, self.hi)

    @property
    def label(self) -> str:
        return f"{self.variant}, sigma1={self.sigma1:g}"


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    episodes: list
    curves: list
    summary: dict
    diagnostics: dict
    paths: dict = field(default_factory=dict)

    @property
    def failures(self) -> list:
        return [e for e in self.episodes if e.error is not None]


# ---------------------------------------------------------------- building blocks


def episode_seed(master_seed: int, variant_index: int, sigma_index: int, repeat: int,
                 paired: bool) -> int:
    """Per-episode key; paired mode drops the variant and sigma1 index."""
    if paired:
        return derive_key(master_seed, repeat)
    return derive_key(master_seed, variant_index + 1, sigma_index + 1, repeat)


def build_spec(cfg: ExperimentConfig, sigma1: float) -> PerturbationSpec:
    pt, d = cfg.perturbation, cfg.instance.d
    q = 1.0 + 4.0 * sigma1 if pt.q is None else pt.q
    if pt.covariance_diag is None:
        return PerturbationSpec.isotropic(sigma1, d, q=q, energy_cap=pt.energy_cap)
    # the diagonal is relative; sigma1^2 sets the overall scale
    cov = sigma1**2 * np.diag(np.asarray(pt.covariance_diag, dtype=float))
    return PerturbationSpec(np.full(d, q), covariance=cov, energy_cap=pt.energy_cap)


def build_schedule(cfg: ExperimentConfig, spec: PerturbationSpec) -> ScheduleParams:
    sc = cfg.schedule
    sigma = cfg.instance.reward_noise_sigma if sc.sigma is None else sc.sigma
    R = spec.energy_cap if sc.R is None else sc.R
    return ScheduleParams(sigma=sigma, R=R, d=cfg.instance.d, delta=sc.delta,
                          multiplier=sc.multiplier)


def build_instance(cfg: ExperimentConfig, repeat: int) -> BanditInstance:
    inst = cfg.instance
    seed_repeat = repeat if inst.theta_policy == "per_repeat" else 0
    rng = StreamFactory(cfg.master_seed, seed_repeat).generator(Purpose.THETA)
    return BanditInstance.random(inst.d, inst.k, inst.m, inst.reward_noise_sigma, rng,
                                 normalize=inst.normalize_theta, signs=inst.theta_signs)


def build_strategy(cfg: ExperimentConfig) -> ContextStrategy:
    st = cfg.strategy
    return ContextStrategy(kind=st.kind, pool=st.pool, pool_size=st.pool_size,
                           replay=st.replay, offset_scale=st.offset_scale)


def run_one(cfg: ExperimentConfig, key: EpisodeKey, keep_design: bool = False) -> EpisodeResult:
    variant = cfg.variants[key.variant_index]
    sigma1 = float(cfg.perturbation.sigma1[key.sigma_index])
    try:
        spec = build_spec(cfg, sigma1)
        instance = build_instance(cfg, key.repeat)
        seed = episode_seed(cfg.master_seed, VARIANTS.index(variant), key.sigma_index,
                            key.repeat, cfg.paired_contexts)
        trace = run_episode(instance, build_strategy(cfg), spec, build_schedule(cfg, spec),
                            cfg.T, variant=variant, streams=StreamFactory(seed, key.repeat),
                            keep_design=keep_design)
    except Exception as exc:  # recorded; the run carries on
        return EpisodeResult(key, error=f"{type(exc).__name__}: {exc}")
    return EpisodeResult(key, trace=trace, support=instance.support)


def _run_job(args):
    cfg_dict, key, keep = args
    return run_one(config_from_dict(cfg_dict), key, keep_design=keep)


def episode_keys(cfg: ExperimentConfig) -> list:
    return [EpisodeKey(v, s, r)
            for v in range(len(cfg.variants))
            for s in range(len(cfg.perturbation.sigma1))
            for r in range(cfg.repeats)]


# ---------------------------------------------------------------- aggregation


def aggregate(cfg: ExperimentConfig, episodes) -> list:
    curves = []
    for v, variant in enumerate(cfg.variants):
        for s, sigma1 in enumerate(cfg.perturbation.sigma1):
            runs = [e.trace.cum_regret for e in episodes
                    if e.trace is not None and e.key.variant_index == v and e.key.sigma_index == s]
            if not runs:
                continue
            stack = np.vstack(runs)
            curves.append(AggregateCurve(variant, float(sigma1), np.arange(1, stack.shape[1] + 1),
                                         stack.mean(axis=0), stack.min(axis=0), stack.max(axis=0)))
    return curves


def summarize(traces, flags: dict | None = None) -> dict:
    """Per (variant, sigma1): final regret statistics, error and solver effort.

    ``traces`` maps ``(variant, sigma1)`` to a list of RegretTrace.
    """
    out = {}
    for (variant, sigma1), runs in traces.items():
        runs = [r for r in runs if len(r)]
        if not runs:
            continue
        final = np.array([r.cum_regret[-1] for r in runs])
        err = np.array([r.est_error[-1] for r in runs])
        sweeps = np.concatenate([r.column("n_sweeps") for r in runs])
        name = f"{variant}/sigma1={float(sigma1)!r}"
        entry = {
            "variant": variant,
            "sigma1": float(sigma1),
            "repeats": len(runs),
            "final_regret_mean": float(final.mean()),
            "final_regret_min": float(final.min()),
            "final_regret_max": float(final.max()),
            "final_est_error_mean": float(err.mean()),
            "mean_solver_sweeps": float(sweeps.mean()),
            "all_converged": bool(all(r.column("converged").all() for r in runs)),
        }
        if flags and name in flags:
            entry["diagnostics"] = flags[name]
        out[name] = entry
    return out


def _traces_by_config(cfg: ExperimentConfig, episodes) -> dict:
    grouped = {}
    for e in sorted(episodes, key=lambda e: e.key):
        if e.trace is None:
            continue
        k = (cfg.variants[e.key.variant_index], float(cfg.perturbation.sigma1[e.key.sigma_index]))
        grouped.setdefault(k, []).append(e.trace)
    return grouped


# ---------------------------------------------------------------- diagnostics


def bound_inputs(cfg: ExperimentConfig, spec: PerturbationSpec) -> dg.BoundInputs:
    dc = cfg.diagnostics
    sched = build_schedule(cfg, spec)
    return dg.BoundInputs.from_spec(spec, k=cfg.instance.k, T=cfg.T, sigma=sched.sigma,
                                    delta=cfg.schedule.delta, R=sched.R, a=dc.a, c=dc.c,
                                    c_prime=dc.c_prime, c_dprime=dc.c_dprime)


def regime(cfg: ExperimentConfig) -> str:
    return "low" if cfg.instance.d <= cfg.T else "high"


def build_diagnostics(cfg: ExperimentConfig, design=None, support=None,
                      monte_carlo: bool = False) -> dg.DiagnosticsReport:
    """Analytic thresholds and bounds for the first sigma1, plus empirical checks.

    ``design`` (d x t chosen contexts) enables the eigenvalue trace and the
    restricted eigenvalue estimate on the cone around ``support``.
    """
    dc = cfg.diagnostics
    sigma1 = float(cfg.perturbation.sigma1[0])
    spec = build_spec(cfg, sigma1)
    inputs = bound_inputs(cfg, spec)
    report = dg.DiagnosticsReport()
    report.notes.append(f"sigma1={sigma1!r}; regime={regime(cfg)}; universal constants c, c', c'', a "
                        "taken from the config, bounds hold only up to them")

    if spec.is_isotropic:
        report.lambda0 = inputs.lambda0()
        report.exploration_low = dg.exploration_length_low(inputs)
    high = dg.exploration_length_high(inputs)
    report.exploration_high = {"term_d": high.term_d, "term_e": high.term_e, "T_e": high.T_e,
                               "ratio": high.ratio, "ratio_at_least_one": high.ratio_at_least_one,
                               "ratio_within_cond": high.ratio_within_cond}
    reg = regime(cfg)
    if reg == "low" and not spec.is_isotropic:
        reg = "high"
    ts = list(range(dc.cadence, cfg.T + 1, dc.cadence))
    report.recovery_bound_curve = [
        {"t": t, "bound": b, "valid": v}
        for t in ts for b, v in [dg.recovery_bound(t, inputs, reg)]
    ]
    report.regret_bound = dg.regret_bound(inputs, cfg.T, reg)[0]

    if design is not None:
        design = np.asarray(design, dtype=float)
        if reg == "low" and spec.is_isotropic:
            growth = dg.eigen_growth(design, inputs, every=dc.cadence)
            report.checkpoints = growth.checkpoints
            report.lambda_min_trace = growth.lambda_min
            report.lemma2_bound_trace = growth.bound
            report.lemma2_valid_trace = growth.valid
        if support is not None and len(support):
            cone = dg.ConeSpec(support, dc.alpha)
            h, _ = dg.re_constant_estimate(design, cone, dc.cone_samples, seed=cfg.master_seed)
            report.re_constant_estimate = h

    if monte_carlo:
        report.monte_carlo = monte_carlo_checks(cfg)
    return report


def monte_carlo_checks(cfg: ExperimentConfig) -> dict:
    dc = cfg.diagnostics
    base = StreamFactory(cfg.master_seed, 0)
    out = {"fact1": []}
    R = 1.0
    sigma = cfg.instance.reward_noise_sigma or 1.0
    for i, delta in enumerate((0.05, 0.01)):
        rng = base.generator(Purpose.DIAGNOSTIC, 1, i)
        rate = dg.fact1_check(cfg.instance.d, cfg.T, sigma, R, delta, dc.fact1_trials, rng)
        allow = dg.fact1_allowance(delta, dc.fact1_trials)
        out["fact1"].append({"delta": delta, "rate": rate, "allowance": allow, "holds": rate <= allow})
    # a small dimension keeps the eigenvalue loop cheap
    d_small = min(cfg.instance.d, 10)
    cells = dg.matrix_chernoff_check(d_small, max(cfg.T, 10 * d_small), dc.chernoff_trials,
                                     (0.25, 0.5, 0.75), base.generator(Purpose.DIAGNOSTIC, 2, 0))
    out["matrix_chernoff"] = [{"delta": c.delta, "empirical": c.empirical, "bound": c.bound,
                               "holds": c.holds} for c in cells]
    delta = 0.05
    rate = dg.subgaussian_tail_check(cfg.T, sigma, delta, 10 * dc.fact1_trials,
                                     base.generator(Purpose.DIAGNOSTIC, 3, 0))
    out["subgaussian_tail"] = {"delta": delta, "rate": rate,
                               "holds": rate <= dg.fact1_allowance(delta, 10 * dc.fact1_trials)}
    return out


def diagnostic_flags(cfg: ExperimentConfig, traces: dict) -> dict:
    """Per configuration: do the empirical curves respect the analytic bounds where they apply?"""
    flags = {}
    reg = regime(cfg)
    for (variant, sigma1), runs in traces.items():
        spec = build_spec(cfg, sigma1)
        r = reg if spec.is_isotropic else "high"
        inputs = bound_inputs(cfg, spec)
        bound, valid = dg.regret_bound(inputs, cfg.T, r)
        final = np.array([t.cum_regret[-1] for t in runs])
        checks, hits = 0, 0
        for t in range(cfg.diagnostics.cadence, cfg.T + 1, cfg.diagnostics.cadence):
            b, ok = dg.recovery_bound(t, inputs, r)
            if not ok:
                continue
            for tr in runs:
                checks += 1
                hits += tr.est_error[t - 1] <= b
        flags[f"{variant}/sigma1={float(sigma1)!r}"] = {
            "regret_bound": bound if math.isfinite(bound) else None,
            "regret_bound_valid": bool(valid),
            "regret_bound_holds": bool(np.all(final <= bound)) if valid else None,
            "recovery_checks": checks,
            "recovery_bound_holds": (hits == checks) if checks else None,
        }
    return flags


# ---------------------------------------------------------------- files


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def traces_csv(cfg: ExperimentConfig, episodes) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for e in sorted(episodes, key=lambda e: e.key):
        if e.trace is None:
            continue
        variant = cfg.variants[e.key.variant_index]
        sigma1 = float(cfg.perturbation.sigma1[e.key.sigma_index])
        for rec in e.trace.records:
            w.writerow([_fmt(v) for v in (rec.round, e.key.repeat, variant, sigma1, rec.chosen_arm,
                                          rec.inst_regret, rec.cum_regret, rec.est_error,
                                          rec.lambda_t, rec.converged)])
    return buf.getvalue()


def aggregate_csv(curves) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for c in curves:
        for i, rnd in enumerate(c.rounds):
            w.writerow([c.variant, _fmt(c.sigma1), int(rnd), _fmt(c.mean[i]), _fmt(c.lo[i]),
                        _fmt(c.hi[i])])
    return buf.getvalue()


def read_traces(path) -> dict:
    """Parse a trace CSV into ``{(variant, sigma1): [RegretTrace, ...]}`` ordered by repeat."""
    from ..bandit import StepRecord

    grouped: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header}")
        for row in reader:
            rnd, rep, variant, s1, arm, inst, cum, err, lam, conv = row
            rec = StepRecord(round=int(rnd), chosen_arm=int(arm), inst_regret=float(inst),
                             cum_regret=float(cum), est_error=float(err), lambda_t=float(lam),
                             converged=conv == "1", n_sweeps=0)
            grouped.setdefault((variant, float(s1)), {}).setdefault(int(rep), RegretTrace()).records.append(rec)
    return {k: [v[r] for r in sorted(v)] for k, v in grouped.items()}


def curves_from_traces(traces: dict) -> list:
    curves = []
    for (variant, sigma1), runs in traces.items():
        stack = np.vstack([r.cum_regret for r in runs])
        curves.append(AggregateCurve(variant, sigma1, np.arange(1, stack.shape[1] + 1),
                                     stack.mean(axis=0), stack.min(axis=0), stack.max(axis=0)))
    return curves


def _dump_json(obj) -> str:
    return json.dumps(dg._jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_outputs(result: ExperimentResult, out_dir) -> dict:
    from .plot import render_plot

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in
             ("traces.csv", "aggregate.csv", "summary.json", "diagnostics.json", "regret.svg")}
    paths["traces.csv"].write_text(traces_csv(result.config, result.episodes))
    paths["aggregate.csv"].write_text(aggregate_csv(result.curves))
    paths["summary.json"].write_text(_dump_json(result.summary))
    paths["diagnostics.json"].write_text(_dump_json(result.diagnostics))
    if result.curves:
        render_plot(result.curves, paths["regret.svg"], title=result.config.name)
    else:
        del paths["regret.svg"]
    return paths


# ---------------------------------------------------------------- driver


def run_experiment(cfg: ExperimentConfig, out_dir=None, parallel: int = 1) -> ExperimentResult:
    """Run every (variant, sigma1, repeat) episode and aggregate.

    Results are merged in key order, so the output does not depend on
    ``parallel``.  Failed episodes are recorded and skipped.
    """
    keys = episode_keys(cfg)
    if parallel > 1 and len(keys) > 1:
        cfg_dict = cfg.to_dict()
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            episodes = list(pool.map(_run_job, [(cfg_dict, k, k == keys[0]) for k in keys]))
    else:
        episodes = [run_one(cfg, k, keep_design=k == keys[0]) for k in keys]
    episodes.sort(key=lambda e: e.key)

    # empirical diagnostics use the first episode's design
    probe = episodes[0]
    design = probe.trace.design if probe.trace is not None else None
    report = build_diagnostics(cfg, design, probe.support)

    traces = _traces_by_config(cfg, episodes)
    summary = {
        "name": cfg.name,
        "configs": summarize(traces, diagnostic_flags(cfg, traces)),
        "failures": [{"variant": cfg.variants[e.key.variant_index],
                      "sigma1": float(cfg.perturbation.sigma1[e.key.sigma_index]),
                      "repeat": e.key.repeat, "error": e.error}
                     for e in episodes if e.error is not None],
    }
    result = ExperimentResult(cfg, episodes, aggregate(cfg, episodes), summary, report.to_dict())
    if out_dir is not None:
        result.paths = write_outputs(result, out_dir)
    return result
