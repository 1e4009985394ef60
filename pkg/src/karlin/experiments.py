"""Experiments comparing simulations with the limit theory, and their reports."""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import limit, model, stats, theory
from .config import Config, ConfigError, karlin_params, model_params, simulation_plan
from .samplers import RandomStream
from .special_functions import (
    ParityPattern,
    c_alpha,
    gamma_mixture_cdf,
    poisson_parity_prob,
    sibuya_pmf,
)

CSV_COLUMNS = ("experiment", "check_id", "x", "simulated", "theoretical", "stderr")


@dataclass
class Check:
    id: str
    target_ref: str
    simulated: float
    theoretical: float
    tolerance: float
    passed: bool
    stderr: float = math.nan
    x: float = math.nan


@dataclass
class Report:
    experiment: str
    params: dict
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def within(self, id: str, ref: str, simulated: float, theoretical: float, stderr: float,
               k: float, allowance: float = 0.0, x: float = math.nan) -> Check:
        """Gate ``|simulated - theoretical| <= k * stderr + allowance``."""
        tol = k * stderr + allowance
        check = Check(id, ref, float(simulated), float(theoretical), float(tol),
                      bool(abs(simulated - theoretical) <= tol), float(stderr), float(x))
        self.checks.append(check)
        return check

    def relative(self, id: str, ref: str, simulated: float, theoretical: float, rtol: float,
                 stderr: float = math.nan, x: float = math.nan) -> Check:
        tol = rtol * abs(theoretical)
        check = Check(id, ref, float(simulated), float(theoretical), float(tol),
                      bool(abs(simulated - theoretical) <= tol), float(stderr), float(x))
        self.checks.append(check)
        return check

    def pvalue(self, id: str, ref: str, p: float, level: float, x: float = math.nan) -> Check:
        """Gate ``p >= level``; ``simulated`` holds the p-value and ``theoretical`` the level."""
        check = Check(id, ref, float(p), float(level), 0.0, bool(p >= level), math.nan, float(x))
        self.checks.append(check)
        return check

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v

        body = {
            "experiment": self.experiment,
            "params": clean(self.params),
            "passed": self.passed,
            "checks": [clean({k: v for k, v in asdict(c).items() if k in
                              ("id", "target_ref", "simulated", "theoretical", "tolerance", "passed")})
                       for c in self.checks],
        }
        return json.dumps(body, indent=2) + "\n"


def _fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) else format(v, ".17g")


def emit_plot_data(report: Optional[Report]) -> str:
    """Long-format CSV: experiment, check_id, x, simulated, theoretical, stderr."""
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    if report is None:
        return out.getvalue()
    for c in report.checks:
        row = (report.experiment, c.id, _fmt(c.x), _fmt(c.simulated), _fmt(c.theoretical), _fmt(c.stderr))
        out.write(",".join(row) + "\n")
    return out.getvalue()


def parse_plot_data(text: str) -> list[dict]:
    lines = text.strip("\n").split("\n")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        vals = line.split(",")
        row = dict(zip(header, vals))
        for key in ("x", "simulated", "theoretical", "stderr"):
            row[key] = float(row[key])
        rows.append(row)
    return rows


def _plan_dict(plan: model.SimulationPlan) -> dict:
    return {"n": plan.n, "m_n": plan.m_n, "R": plan.R, "times": list(plan.times),
            "seed": plan.seed, "epsilon": plan.epsilon}


# -- experiments ----------------------------------------------------------------

def run_clt(cfg: Config, threads: int = 1) -> Report:
    params = model_params(cfg)
    plan = simulation_plan(cfg, params)
    thetas = cfg.numbers("check.thetas", [0.5, 1.0, 2.0])
    k = cfg.number("check.k", 4.0)
    allowance = cfg.number("check.allowance", 0.02)
    report = Report("clt", {"model": params.to_dict(), "plan": _plan_dict(plan),
                            "thetas": thetas, "k": k, "allowance": allowance,
                            "a_n": model.norm_const(params, plan.n, plan.m_n)})
    samples = model.aggregate_fdd(params, plan, threads=threads)
    # at alpha = 2 only scale-free correlations are gated unless asked otherwise
    ecf = bool(cfg.get("check.ecf", params.alpha != 2.0))
    for j, t in enumerate(plan.times if ecf else ()):
        for th in thetas:
            est = stats.ecf_estimate(samples[:, j], [th])
            target = theory.cf_theoretical(params.alpha, params.beta, theory.FddSpec([t], [th]))
            report.within(f"ecf_t{t:g}_theta{th:g}", "fdd characteristic function limit",
                          est.real_part, target, est.std_error, k, allowance, x=th)
            report.within(f"ecf_imag_t{t:g}_theta{th:g}", "symmetry: imaginary part vanishes",
                          est.imag_part, 0.0, est.imag_std_error, k, x=th)
    if params.alpha == 2.0:
        times = plan.times
        for a in range(len(times)):
            for b in range(a + 1, len(times)):
                est = stats.correlation_estimate(samples[:, a], samples[:, b])
                target = limit.fbm_corr(params.beta, times[a], times[b])
                report.within(f"corr_{times[a]:g}_{times[b]:g}", "fractional Brownian correlation",
                              est.value, target, est.std_error, k, x=times[a])
    return report


def run_ppp(cfg: Config, threads: int = 1) -> Report:
    params = model_params(cfg)
    plan = simulation_plan(cfg, params)
    xs = cfg.numbers("check.x", [1.0, 2.0])
    k = cfg.number("check.k", 3.0)
    level = cfg.number("check.level", 0.01)
    if min(xs) < plan.epsilon:
        raise ConfigError("check.x", "void thresholds must be at least plan.epsilon")
    eps, alpha = plan.epsilon, params.alpha
    report = Report("ppp", {"model": params.to_dict(), "plan": _plan_dict(plan), "x": xs, "k": k})
    model.check_budget(float(plan.n + plan.m_n) * plan.R)
    pre = model.extract_extremal_points(params, plan, threads=threads, budget=math.inf)
    kp = limit.KarlinParams(alpha, params.beta)
    root = RandomStream(plan.seed)
    lim = [limit.limit_point_process_sample(kp, eps, root.child("limit", r)) for r in range(plan.R)]
    for name, samples in (("model", pre), ("limit", lim)):
        maxima = np.array([s.max_abs() for s in samples])
        for x in xs:
            est = stats.proportion_estimate(maxima <= x)
            report.within(f"{name}_void_x{x:g}", "Poisson void probability exp(-x^-alpha)",
                          est.value, math.exp(-x ** -alpha), est.std_error, k, x=x)
        counts = np.array([len(s.cluster_values) for s in samples])
        est = stats.mean_estimate(counts)
        report.within(f"{name}_cluster_mean", "cluster count mean eps^-alpha",
                      est.value, eps ** -alpha, est.std_error, k, x=eps)
        locs = np.concatenate([s.locations for s in samples])
        if locs.size >= 10:
            res = stats.ks_test(locs, lambda u: np.clip(u, 0.0, 1.0))
            report.pvalue(f"{name}_location_ks", "uniform cluster locations", res.pvalue, level)
    res = stats.ks_2sample([s.max_abs() for s in pre], [s.max_abs() for s in lim])
    report.pvalue("model_vs_limit_max_ks", "model and limit maxima agree in law", res.pvalue, level)
    return report


def run_conditional(cfg: Config, threads: int = 1) -> Report:
    params = model_params(cfg)
    n = cfg.integer("plan.n")
    m_n = cfg.integer("plan.m_n")
    x = cfg.number("check.x", 1.0)
    count = cfg.integer("check.count", 1000)
    k = cfg.number("check.k", 3.0)
    level = cfg.number("check.level", 0.01)
    rtol = cfg.number("check.rtol", 0.1)
    budget = cfg.get("plan.attempts", None)
    alpha, beta = params.alpha, params.beta
    report = Report("conditional", {"model": params.to_dict(), "n": n, "m_n": m_n, "x": x,
                                    "count": count, "seed": cfg.seed})
    stream = RandomStream(cfg.seed).child("conditional")
    batch = model.conditional_exceedance_samples(params, n, m_n, x, count, stream, budget=budget)
    rate = batch.acceptance_rate
    se = math.sqrt(rate * (1 - rate) / batch.attempts)
    report.relative("scaled_acceptance", "m_n P(Omega_n(x)) -> x^-alpha", m_n * rate, x ** -alpha, rtol,
                    stderr=m_n * se, x=x)
    for ell in (1, 2, 3):
        est = stats.proportion_estimate(batch.tau == ell)
        report.within(f"tau_pmf_{ell}", "conditional count ~ Sibuya(beta)", est.value,
                      sibuya_pmf(beta, ell), est.std_error, k, x=ell)
    cdf = np.vectorize(lambda v: gamma_mixture_cdf(beta, v))
    res = stats.ks_test(batch.nq, cdf)
    report.pvalue("nq_gamma_mixture_ks", "conditional n q ~ Gamma mixture", res.pvalue, level)
    res = stats.ks_test(np.abs(batch.magnitude) / x, lambda y: 1.0 - np.power(np.maximum(y, 1.0), -alpha))
    report.pvalue("magnitude_pareto_ks", "conditional magnitude / x ~ Pareto(alpha)", res.pvalue, level)
    return report


def run_supmeasure(cfg: Config, threads: int = 1) -> Report:
    params = model_params(cfg)
    plan = simulation_plan(cfg, params)
    xs = cfg.numbers("check.x", [1.0, 2.0])
    intervals = [tuple(iv) for iv in cfg.get("check.intervals", [[0.0, 0.25], [0.5, 0.75]])]
    thresholds = cfg.numbers("check.thresholds", [1.0] * len(intervals))
    k = cfg.number("check.k", 3.0)
    if min(xs + thresholds) < plan.epsilon:
        raise ConfigError("check.thresholds", "thresholds must be at least plan.epsilon")
    alpha, beta = params.alpha, params.beta
    report = Report("supmeasure", {"model": params.to_dict(), "plan": _plan_dict(plan), "x": xs,
                                   "intervals": [list(iv) for iv in intervals], "thresholds": thresholds})
    model.check_budget(float(plan.n + plan.m_n) * plan.R)
    pre = model.extract_extremal_points(params, plan, threads=threads, tag="sup", budget=math.inf)
    kp = limit.KarlinParams(alpha, beta)
    root = RandomStream(plan.seed)
    lim = [limit.limit_supmeasure_sample(kp, [(0.0, 1.0)] + intervals, root.child("limit-sup", r))
           for r in range(plan.R)]
    whole = theory.IntervalQuery([(0.0, 1.0)], [1.0])
    pre_vals = np.array([[model.discrete_sup_measure(s, iv) for iv in [(0.0, 1.0)] + intervals] for s in pre])
    for name, vals in (("model", pre_vals), ("limit", np.asarray(lim))):
        for x in xs:
            target = theory.supmeasure_fdd_prob(alpha, beta, theory.IntervalQuery(whole.intervals, [x]))
            est = stats.proportion_estimate(vals[:, 0] <= x)
            report.within(f"{name}_whole_x{x:g}", "P(M((0,1)) <= x) = exp(-x^-alpha)",
                          est.value, target, est.std_error, k, x=x)
        target = theory.supmeasure_fdd_prob(alpha, beta, theory.IntervalQuery(intervals, thresholds))
        est = stats.proportion_estimate(np.all(vals[:, 1:] <= np.asarray(thresholds), axis=1))
        report.within(f"{name}_joint", "joint Frechet probability via union measure",
                      est.value, target, est.std_error, k)
    return report


def run_series_vs_theory(cfg: Config, threads: int = 1) -> Report:
    kp = karlin_params(cfg)
    if kp.alpha >= 2:
        raise ConfigError("model.alpha", "series experiment needs alpha < 2")
    tol = cfg.number("check.tol", 1e-3)
    R = cfg.integer("plan.R", 20000)
    times = cfg.numbers("plan.times", [0.25, 0.5, 1.0])
    thetas = cfg.numbers("check.thetas", [0.5, 1.0, 2.0])
    k = cfg.number("check.k", 4.0)
    compensate = bool(cfg.get("check.compensate", True))
    level = (limit.compensated_level(kp.alpha, tol, max(map(abs, thetas))) if compensate
             else limit.truncation_level(kp.alpha, tol))
    report = Report("series_vs_theory", {"alpha": kp.alpha, "beta": kp.beta, "tol": tol, "R": R,
                                         "times": times, "thetas": thetas, "compensate": compensate,
                                         "level": level, "seed": cfg.seed})
    samples = limit.zeta_series_samples(kp, times, tol, R, cfg.seed, compensate=compensate, level=level)
    for j, t in enumerate(times):
        for th in thetas:
            est = stats.ecf_estimate(samples[:, j], [th])
            target = theory.cf_theoretical(kp.alpha, kp.beta, theory.FddSpec([t], [th]))
            report.within(f"ecf_t{t:g}_theta{th:g}", "series CF equals the quadrature CF",
                          est.real_part, target, est.std_error, k, 2 * tol, x=th)
    return report


def run_gaussian_corr(cfg: Config, threads: int = 1) -> Report:
    beta = cfg.number("model.beta")
    R = cfg.integer("plan.R", 100000)
    times = cfg.numbers("plan.times", [0.5, 1.0])
    k = cfg.number("check.k", 4.0)
    k_corr = cfg.number("check.k_corr", 3.0)
    report = Report("gaussian_corr", {"beta": beta, "R": R, "times": times, "seed": cfg.seed})
    z = limit.gaussian_karlin_fdd(beta, times, RandomStream(cfg.seed).child("gauss"), size=R)
    for a in range(len(times)):
        for b in range(a, len(times)):
            est = stats.covariance_estimate(z[:, a], z[:, b])
            report.within(f"cov_{times[a]:g}_{times[b]:g}", "fractional Brownian covariance",
                          est.value, limit.fbm_cov(beta, times[a], times[b]), est.std_error, k, x=times[a])
            if b > a:
                est = stats.correlation_estimate(z[:, a], z[:, b])
                report.within(f"corr_{times[a]:g}_{times[b]:g}", "fractional Brownian correlation",
                              est.value, limit.fbm_corr(beta, times[a], times[b]), est.std_error, k_corr,
                              x=times[a])
    return report


def random_lemma_cases(stream: RandomStream, count: int, max_dim: int = 3):
    """Random ``(times, thetas)`` pairs with ``d <= max_dim``; about half end at ``t = 1``."""
    gen = stream.generator
    cases = []
    for _ in range(count):
        d = int(gen.integers(1, max_dim + 1))
        times = np.sort(gen.uniform(0.05, 1.0, d))
        if gen.random() < 0.5:
            times[-1] = 1.0
        if np.any(np.diff(times) < 1e-3):
            times = np.linspace(0.2, 1.0, d)
        cases.append((times.tolist(), gen.normal(size=d).tolist()))
    return cases


def run_lemma1(cfg: Config, threads: int = 1) -> Report:
    alpha = cfg.number("model.alpha", 1.5)
    beta = cfg.number("model.beta", 0.5)
    times = cfg.numbers("check.times", [0.5, 1.0])
    thetas = cfg.numbers("check.thetas", [1.0, -1.0])
    rtol = cfg.number("check.rtol", 1e-5)
    count = cfg.integer("check.random_cases", 10)
    report = Report("lemma1", {"alpha": alpha, "beta": beta, "times": times, "thetas": thetas,
                               "random_cases": count, "seed": cfg.seed})
    cases = [(times, thetas)] + random_lemma_cases(RandomStream(cfg.seed).child("lemma1"), count)
    for i, (t, th) in enumerate(cases):
        spec = theory.FddSpec(t, th)
        lhs = theory.lemma1_lhs(alpha, beta, spec)
        rhs = theory.lemma1_rhs(alpha, beta, spec)
        report.relative(f"case{i}", "Poisson parity quadrature equals Sibuya enumeration", rhs, lhs, rtol, x=i)
    return report


def run_theory_eval(cfg: Config, threads: int = 1) -> Report:
    alpha = cfg.number("model.alpha", 1.5)
    beta = cfg.number("model.beta", 0.5)
    report = Report("theory_eval", {"alpha": alpha, "beta": beta})
    for ell, value in zip((1, 2, 3), (0.5, 0.125, 0.0625)):
        report.relative(f"sibuya_pmf_{ell}", "Sibuya pmf closed form", sibuya_pmf(0.5, ell), value, 1e-12, x=ell)
    report.relative("c_alpha_1", "C_1 = 2/pi", c_alpha(1.0), 2 / math.pi, 1e-15, x=1)
    report.relative("c_alpha_2", "C_2 = 2", c_alpha(2.0), 2.0, 0.0, x=2)
    pattern = ParityPattern([1.0], [1])
    report.relative("m_coeff_d1", "m(1, 1) = 2^(beta-1) / C_alpha", theory.m_coeff(alpha, beta, pattern),
                    2 ** (beta - 1) / c_alpha(alpha), 1e-7)
    patterns = [ParityPattern([0.3, 0.7, 1.0], [1, 0, 1]), ParityPattern([0.5, 1.0], [0, 1]),
                ParityPattern([0.25], [1]), ParityPattern([0.1, 0.2, 0.9], [1, 1, 0])]
    for i, p in enumerate(patterns):
        for q in (0.01, 1.0, 10.0, 50.0):
            report.within(f"parity_{i}_q{q:g}", "parity probability equals Poisson summation",
                          poisson_parity_prob(p, q), theory.poisson_parity_bruteforce(p, q), 0.0, 0.0, 1e-10, x=q)
    if cfg.get("spec", None) is not None:
        spec = theory.FddSpec(cfg.numbers("spec.times"), cfg.numbers("spec.thetas"))
        value = theory.cf_theoretical(alpha, beta, spec)
        report.params["cf_theoretical"] = value
    return report


EXPERIMENT_RUNNERS: dict[str, Callable[[Config, int], Report]] = {
    "clt": run_clt,
    "ppp": run_ppp,
    "conditional": run_conditional,
    "supmeasure": run_supmeasure,
    "series_vs_theory": run_series_vs_theory,
    "gaussian_corr": run_gaussian_corr,
    "lemma1": run_lemma1,
    "theory_eval": run_theory_eval,
}


def run_experiment(cfg: Config, threads: int = 1) -> Report:
    return EXPERIMENT_RUNNERS[cfg.experiment](cfg, threads)
