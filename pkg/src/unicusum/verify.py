"""Acceptance suites: each criterion is computed, compared at its pinned
tolerance and reported as a :class:`Check`.

Tolerances live here, next to the code they gate, and are printed with every
result.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .alphabet_dist import Categorical, draw, kl_divergence, make_rng
from .detectors import Detector, DetectorConfig, brute_force_statistic
from .empirical import (EmpiricalEstimate, beta_bound, check_deviation, fn_statistic,
                        log2_beta)
from .simulator import (Procedure, StreamSpec, delay_slope, estimate_arl0, estimate_error_prob,
                        estimate_worst_delay, fixed_estimate, optimality_experiment, post_drift,
                        run_trials, trials_csv)
from .universal_code import KTCoder, kraft_sum, redundancy

BINARY_PRE = (0.5, 0.5)
BINARY_POST = (0.9, 0.1)


@dataclass
class Check:
    name: str
    passed: bool
    measured: object
    target: str
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: measured={_fmt(self.measured)} target={self.target} ({self.seconds:.1f}s)"


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    return str(x)


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def check_kraft(tol: float = 1e-9, limit_s: float = 10.0) -> list[Check]:
    worst = 0.0
    sums = {}
    with _Timer() as t:
        for k in (2, 3):
            coder = KTCoder(k)
            n = 0
            while k ** n <= 2 ** 16:
                s = kraft_sum(coder, n)
                sums[(k, n)] = s
                worst = max(worst, abs(s - 1.0))
                n += 1
    return [Check("kraft-exactness", worst <= tol and t.seconds < limit_s, worst,
                  f"max |sum - 1| <= {tol:g}, K in (2,3), K^n <= 2^16, < {limit_s:g}s",
                  t.seconds, {"cases": len(sums)})]


def check_redundancy(seeds=(0, 1, 2, 3, 4), ns=(64, 256, 1024, 4096),
                     samples: int = 256, limit_s: float = 60.0) -> list[Check]:
    coder = KTCoder(2)
    uniform = Categorical(BINARY_PRE)
    with _Timer() as t:
        sup = redundancy(coder, None, 12)
        fixed = redundancy(coder, uniform, 12)
        per_seed = {}
        for seed in seeds:
            per_seed[seed] = [redundancy(coder, uniform, n, "sampled", samples, seed) / n for n in ns]
    bound = 0.5 * math.log2(12) + 2
    decreasing = all(all(a > b for a, b in zip(v, v[1:])) for v in per_seed.values())
    return [
        Check("redundancy-exhaustive", max(sup, fixed) <= bound, [sup, fixed],
              f"<= 0.5*log2(12)+2 = {bound:.4f} bits (sup over sources, uniform)", t.seconds),
        Check("redundancy-sublinear", decreasing and t.seconds < limit_s,
              [round(v[-1], 6) for v in per_seed.values()],
              f"redundancy/n strictly decreasing over n={list(ns)} for {len(seeds)} seeds, "
              f"< {limit_s:g}s", t.seconds, {"per_seed": per_seed}),
    ]


def _random_dist(rng, k) -> Categorical:
    return Categorical(rng.dirichlet(np.ones(k)) * 0.9 + 0.1 / k)


def check_oracle(streams: int = 100, length: int = 200, tol: float = 1e-9,
                 seed: int = 2024, limit_s: float = 60.0) -> list[Check]:
    worst = {"page": 0.0, "jbpage": 0.0, "empirical": 0.0}
    with _Timer() as t:
        for i in range(streams):
            rng = make_rng(seed, i)
            k = int(rng.integers(2, 5))
            mu0, mu1 = _random_dist(rng, k), _random_dist(rng, k)
            s = draw(mu1, length, rng)
            prefix = draw(mu0, 500, rng)
            mu_hat = Categorical((np.bincount(prefix, minlength=k) + 0.5) / (500 + 0.5 * k))
            lam = float(rng.uniform(0, 0.5))
            cfgs = {
                "page": DetectorConfig("page", mu0, 1e9, post=mu1),
                "jbpage": DetectorConfig("jbpage", mu0, 1e9, lam=lam),
                "empirical": DetectorConfig("empirical", mu_hat, 1e9, lam=lam),
            }
            for mode, cfg in cfgs.items():
                det = Detector(cfg)
                for n in range(1, length + 1):
                    online = det.update(s[n - 1])
                    oracle = brute_force_statistic(s[:n], cfg)
                    worst[mode] = max(worst[mode], abs(online - oracle))
    ok = max(worst.values()) <= tol and t.seconds < limit_s
    return [Check("oracle-equivalence", ok, [worst[m] for m in worst],
                  f"|online - brute force| <= {tol:g} for page/jbpage/empirical, "
                  f"{streams} streams x {length}, < {limit_s:g}s", t.seconds, worst)]


def check_error_bound(trials: int = 2000, horizon: int = 100_000, alpha: float = 0.01,
                      lam: float = 0.5, n0: int = 10_000, delta: float = 0.02,
                      seed: int = 11, limit_s: float = 300.0) -> list[Check]:
    mu0 = Categorical(BINARY_PRE)
    thr = -math.log2(alpha)
    out = []
    for label, mode, n in (("error-bound-test2", "jbpage", 0), ("error-bound-test3", "empirical", n0)):
        spec = StreamSpec(mu0, mu0, n0=n, horizon=horizon, seed=seed)
        with _Timer() as t:
            s = estimate_error_prob(spec, Procedure(mode, thr, lam, auxiliary=True), trials,
                                    delta=delta if mode == "empirical" else None)
        c = s.checks
        out.append(Check(label, s.passed and t.seconds < limit_s, s.false_alarm_fraction,
                         f"<= bound {c['bound']:.5f} + 3 sigma = {c['limit']:.5f}, < {limit_s:g}s",
                         t.seconds, c))
    return out


def check_arl(trials: int = 1000, horizon: int = 10_000, gamma: float = 8.0, lam: float = 0.5,
              n0: int = 10_000, delta: float = 0.02, seed: int = 12,
              limit_s: float = 300.0) -> list[Check]:
    mu0 = Categorical(BINARY_PRE)
    out = []
    for label, mode, n in (("arl-test2", "jbpage", 0), ("arl-test3", "empirical", n0)):
        spec = StreamSpec(mu0, mu0, n0=n, horizon=horizon, seed=seed)
        with _Timer() as t:
            s = estimate_arl0(spec, Procedure(mode, math.log2(gamma), lam), trials,
                              delta=delta if mode == "empirical" else None)
        out.append(Check(label, s.passed and t.seconds < limit_s, s.mean_stop,
                         f"censored mean >= {s.checks['bound']:.4f} "
                         f"(censored {s.censored_fraction:.3f}), < {limit_s:g}s",
                         t.seconds, s.checks))
    return out


def check_slope(trials: int = 500, lam: float = 0.2, n0: int = 100_000,
                log2_gammas=(4, 6, 8, 10), seed: int = 13, tol_test3: float = 0.25,
                tol_page: float = 0.15, limit_s: float = 600.0) -> list[Check]:
    mu0, mu1 = Categorical(BINARY_PRE), Categorical(BINARY_POST)
    gammas = [2.0 ** g for g in log2_gammas]
    spec = StreamSpec(mu0, mu1, n0=n0, change_point=1, horizon=1, seed=seed)
    with _Timer() as t:
        r3 = delay_slope(spec, Procedure("empirical", 1.0, lam), gammas, trials)
        rp = delay_slope(replace(spec, n0=0), Procedure("page", 1.0), gammas, trials)
    return [
        Check("slope-test3", r3.relative_error <= tol_test3 and t.seconds < limit_s, r3.slope,
              f"within {tol_test3:.0%} of 1/(D(mu1||mu_hat)-{lam}) = {r3.predicted_slope:.4f}",
              t.seconds, {"mean_delays": r3.mean_delays, "residuals": r3.residuals}),
        Check("slope-page", rp.relative_error <= tol_page and t.seconds < limit_s, rp.slope,
              f"within {tol_page:.0%} of 1/D(mu1||mu0) = {rp.predicted_slope:.4f}",
              t.seconds, {"mean_delays": rp.mean_delays, "residuals": rp.residuals}),
    ]


def check_termination(trials: int = 1000, alpha: float = 0.01, lam: float = 0.2,
                      n0: int = 10_000, factor: int = 100, seed: int = 14) -> list[Check]:
    mu0, mu1 = Categorical(BINARY_PRE), Categorical(BINARY_POST)
    spec = StreamSpec(mu0, mu1, n0=n0, change_point=1, horizon=1, seed=seed)
    est = fixed_estimate(spec)
    proc = Procedure("empirical", -math.log2(alpha), lam, auxiliary=True)
    predicted = proc.threshold / post_drift(spec, proc, est.mu_hat)
    horizon = int(math.ceil(factor * predicted))
    with _Timer() as t:
        res = run_trials(replace(spec, horizon=horizon), proc, trials, estimate=est)
    stopped = sum(not r.censored for r in res)
    return [Check("termination-under-change", stopped == trials, f"{stopped}/{trials}",
                  f"all stop within {factor}x predicted delay = {horizon}", t.seconds)]


def check_estimate_penalty(pairs: int = 10_000, seed: int = 15, limit_s: float = 60.0) -> list[Check]:
    rng = make_rng(seed)
    done = violations = gap_violations = 0
    worst_margin = math.inf
    with _Timer() as t:
        while done < pairs:
            k = int(rng.integers(2, 5))
            mu0 = Categorical(rng.dirichlet(np.ones(k)))
            p_min = float(mu0.probs.min())
            if p_min < 1e-3:
                continue
            delta = float(rng.uniform(0.05, 0.95)) * p_min
            n0 = int(rng.integers(50, 5000))
            est = EmpiricalEstimate(rng.multinomial(n0, mu0.probs))
            if not check_deviation(est, mu0, delta).holds:
                continue
            lb = math.log2(beta_bound(mu0, delta))
            seq = draw(Categorical(rng.dirichlet(np.ones(k))), int(rng.integers(1, 60)), rng)
            f = fn_statistic(mu0, est, seq)
            violations += f > lb
            worst_margin = min(worst_margin, lb - f)
            mu1 = Categorical(rng.dirichlet(np.ones(k)))
            gap = kl_divergence(mu1, est.mu_hat) - kl_divergence(mu1, mu0)
            gap_violations += not gap < lb
            done += 1
    ok = violations == 0 and gap_violations == 0 and t.seconds < limit_s
    return [Check("estimate-penalty-bound", ok, [violations, gap_violations],
                  f"0 violations of f_n <= log2(beta) and of the divergence gap over {pairs} "
                  f"pairs, < {limit_s:g}s", t.seconds, {"min_margin": worst_margin})]


def check_optimality(trials: int = 500, kappa: float = 0.5, n0: int = 100_000,
                     band=(1.2, 1.9), seed: int = 16) -> list[Check]:
    mu0, mu1 = Categorical(BINARY_PRE), Categorical(BINARY_POST)
    with _Timer() as t:
        r12 = optimality_experiment(mu0, mu1, kappa, 2.0 ** 12, [n0], trials, seed)[0]
        r14 = optimality_experiment(mu0, mu1, kappa, 2.0 ** 14, [n0], trials, seed)[0]
    target = 1 + kappa
    in_band = r12.feasible and band[0] <= r12.ratio <= band[1]
    toward = r14.feasible and abs(r14.ratio - target) < abs(r12.ratio - target)
    return [
        Check("optimality-band", in_band, r12.ratio,
              f"ratio in [{band[0]}, {band[1]}] at gamma=2^12 (lam={r12.lam:.4f}, "
              f"log2 eta={r12.log2_eta:.3f})", t.seconds, r12.__dict__),
        Check("optimality-trend", toward, r14.ratio,
              f"closer to {target} at gamma=2^14 than {r12.ratio:.4f}", t.seconds, r14.__dict__),
    ]


def check_reproducibility(trials: int = 200, seed: int = 17) -> list[Check]:
    mu0, mu1 = Categorical(BINARY_PRE), Categorical(BINARY_POST)
    spec = StreamSpec(mu0, mu1, n0=1000, change_point=20, horizon=2000, seed=seed)
    proc = Procedure("empirical", 6.0, 0.2)
    with _Timer() as t:
        a = trials_csv(run_trials(spec, proc, trials), spec.to_dict())
        b = trials_csv(run_trials(spec, proc, trials), spec.to_dict())
    return [Check("reproducibility", a == b, f"{len(a)} bytes", "byte-identical CSV", t.seconds)]


SUITES: dict[str, Callable[[], list[Check]]] = {
    "kraft": check_kraft,
    "redundancy": check_redundancy,
    "oracle": check_oracle,
    "error-bound": check_error_bound,
    "arl": check_arl,
    "slope": check_slope,
    "termination": check_termination,
    "estimate-penalty": check_estimate_penalty,
    "optimality": check_optimality,
    "reproducibility": check_reproducibility,
}


def run_suite(name: str) -> list[Check]:
    if name == "all":
        return [c for fn in SUITES.values() for c in fn()]
    return SUITES[name]()
