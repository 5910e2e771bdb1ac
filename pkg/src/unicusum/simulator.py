"""Monte Carlo experiments for the change detectors.

Every trial draws from its own substream ``make_rng(seed, trial)`` so results
are reproducible bit for bit and independent of execution order.  Delay
experiments condition on one warm-up realisation drawn from ``make_rng(seed)``
(shared by all trials); error-probability and ARL experiments redraw the
warm-up in every trial, since the false-alarm bounds are unconditional.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import __version__
from ._kernels import aux_run, page_run, universal_run
from .alphabet_dist import Categorical, SymbolStream, draw, kl_divergence, make_rng
from .empirical import (EmpiricalEstimate, check_deviation, estimate_empirical,
                        hoeffding_eps0, log2_beta)
from .errors import InfeasibleKappa, SupportMismatch, ValidationError
from .universal_code import KTCoder

CSV_COLUMNS = ("trial", "seed", "m", "stop_time", "delay", "false_alarm", "censored")
REGRET_MARGIN = 1.0


@dataclass(frozen=True)
class StreamSpec:
    """Stream model: ``n0`` warm-up symbols from ``mu0``, then post-warm-up
    symbols ``1..m-1`` from ``mu0`` and ``m..horizon`` from ``mu1``.

    ``change_point=None`` means no change.
    """

    mu0: Categorical
    mu1: Categorical
    n0: int = 0
    change_point: Optional[int] = None
    horizon: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.mu0.size != self.mu1.size:
            raise ValidationError("mu1", "alphabet size differs from mu0")
        if self.horizon < 1:
            raise ValidationError("horizon", "must be >= 1")
        if self.change_point is not None and not 1 <= self.change_point <= self.horizon:
            raise ValidationError("change_point", "must lie in [1, horizon]")
        if self.n0 < 0:
            raise ValidationError("n0", "must be >= 0")

    def to_dict(self) -> dict:
        return {"mu0": self.mu0.probs.tolist(), "mu1": self.mu1.probs.tolist(),
                "n0": self.n0, "change_point": self.change_point,
                "horizon": self.horizon, "seed": self.seed}


@dataclass(frozen=True)
class Procedure:
    """Which detector to run in each trial.

    ``auxiliary=True`` runs the single-start stopping time instead of the
    max-over-starts CUSUM.  ``exact_pruning`` drops candidate starts that
    provably cannot become the maximum before the horizon; it never changes
    a stop time.
    """

    mode: str
    threshold: float
    lam: float = 0.0
    penalty: str = "window"
    smoothing: str = "none"
    auxiliary: bool = False
    max_starts: Optional[int] = None
    slack: Optional[float] = None
    exact_pruning: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialResult:
    trial: int
    seed: int
    m: Optional[int]
    stop_time: int
    delay: Optional[int]
    false_alarm: bool
    censored: bool
    zero_ref: bool = False
    deviation_holds: Optional[bool] = None

    def csv_row(self) -> list:
        return [self.trial, self.seed, "inf" if self.m is None else self.m, self.stop_time,
                "" if self.delay is None else self.delay, int(self.false_alarm),
                int(self.censored)]


@dataclass
class ExperimentSummary:
    name: str
    trials: int
    mean_stop: float
    mean_delay: Optional[float]
    var_delay: Optional[float]
    delay_halfwidth: Optional[float]
    false_alarm_fraction: float
    false_alarm_halfwidth: float
    stopped_fraction: float
    censored_fraction: float
    zero_ref_trials: int
    config: dict
    checks: dict = field(default_factory=dict)
    passed: Optional[bool] = None
    results: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("results")
        d["version"] = __version__
        return d


def gen_stream(spec: StreamSpec, trial: Optional[int] = None) -> SymbolStream:
    """Warm-up followed by the post-warm-up stream, drawn from one substream."""
    rng = make_rng(spec.seed, trial)
    warm = draw(spec.mu0, spec.n0, rng)
    post = _post_symbols(spec, rng)
    return SymbolStream(np.concatenate([warm, post]), spec.mu0.size,
                        change_point=spec.change_point, n0=spec.n0)


def _post_symbols(spec: StreamSpec, rng) -> np.ndarray:
    m = spec.change_point
    if m is None:
        return draw(spec.mu0, spec.horizon, rng)
    return np.concatenate([draw(spec.mu0, m - 1, rng), draw(spec.mu1, spec.horizon - m + 1, rng)])


def fixed_estimate(spec: StreamSpec, smoothing: str = "none") -> EmpiricalEstimate:
    """The shared warm-up estimate used by conditional (delay) experiments."""
    warm = draw(spec.mu0, spec.n0, make_rng(spec.seed))
    return estimate_empirical(warm, spec.mu0.size, smoothing)


def _reference(spec: StreamSpec, proc: Procedure, rng, estimate):
    if proc.mode == "jbpage" or proc.mode == "page":
        return spec.mu0, None
    if estimate is None:
        estimate = estimate_empirical(draw(spec.mu0, spec.n0, rng), spec.mu0.size,
                                      proc.smoothing)
    return estimate.mu_hat, estimate


def _run_kernel(post: np.ndarray, spec: StreamSpec, proc: Procedure, ref: Categorical):
    k = spec.mu0.size
    with np.errstate(divide="ignore"):
        logref = np.log2(ref.probs)
        if proc.mode == "page":
            llr = np.log2(spec.mu1.probs) - logref
            return page_run(post, llr, proc.lam, proc.threshold)
    if proc.auxiliary:
        return aux_run(post, logref, k, proc.lam, proc.threshold)
    dominance = 0.0
    if proc.exact_pruning and proc.max_starts is None:
        dominance = KTCoder(k).regret_bound(post.size) + REGRET_MARGIN
    max_starts = proc.max_starts or 0
    slack = 2.0 * proc.threshold if proc.slack is None else proc.slack
    return universal_run(post, logref, k, proc.lam, proc.threshold,
                         proc.penalty == "absolute_n", dominance, max_starts, slack)


def run_trial(spec: StreamSpec, proc: Procedure, trial: int,
              estimate: Optional[EmpiricalEstimate] = None,
              delta: Optional[float] = None) -> TrialResult:
    rng = make_rng(spec.seed, trial)
    ref, est = _reference(spec, proc, rng, estimate)
    post = _post_symbols(spec, rng)
    stop, zero = _run_kernel(post, spec, proc, ref)
    censored = stop == 0
    stop_time = spec.horizon if censored else int(stop)
    m = spec.change_point
    if m is None:
        delay = None
        false_alarm = not censored
    else:
        delay = max(stop_time - m + 1, 0)
        false_alarm = not censored and stop_time < m
    dev = None
    if delta is not None and est is not None:
        dev = check_deviation(est, spec.mu0, delta).holds
    return TrialResult(trial, spec.seed, m, stop_time, delay, false_alarm, censored,
                       bool(zero), dev)


def run_trials(spec, proc, trials, estimate=None, delta=None) -> list[TrialResult]:
    return [run_trial(spec, proc, i, estimate, delta) for i in range(trials)]


def _halfwidth(values: np.ndarray) -> float:
    if values.size < 2:
        return math.nan
    return float(1.96 * values.std(ddof=1) / math.sqrt(values.size))


def summarize(name: str, results: Sequence[TrialResult], spec: StreamSpec,
              proc: Procedure, extra_config: Optional[dict] = None) -> ExperimentSummary:
    n = len(results)
    stops = np.array([r.stop_time for r in results], dtype=np.float64)
    fa = np.array([r.false_alarm for r in results], dtype=np.float64)
    cens = np.array([r.censored for r in results], dtype=np.float64)
    if spec.change_point is not None:
        delays = np.array([r.delay for r in results], dtype=np.float64)
        mean_d, var_d, hw = float(delays.mean()), float(delays.var(ddof=1)) if n > 1 else 0.0, _halfwidth(delays)
    else:
        mean_d = var_d = hw = None
    p = float(fa.mean())
    config = {"stream": spec.to_dict(), "procedure": proc.to_dict()}
    if extra_config:
        config.update(extra_config)
    return ExperimentSummary(
        name=name, trials=n, mean_stop=float(stops.mean()), mean_delay=mean_d, var_delay=var_d,
        delay_halfwidth=hw, false_alarm_fraction=p,
        false_alarm_halfwidth=float(1.96 * math.sqrt(p * (1 - p) / n)),
        stopped_fraction=float(1 - cens.mean()), censored_fraction=float(cens.mean()),
        zero_ref_trials=int(sum(r.zero_ref for r in results)), config=config,
        results=list(results))


def _eps0(spec: StreamSpec, delta: float, results) -> dict:
    """Hoeffding bound and Monte Carlo upper estimate of the deviation-failure probability."""
    hoeff = hoeffding_eps0(spec.mu0.size, spec.n0, delta)
    flags = [r.deviation_holds for r in results if r.deviation_holds is not None]
    n = len(flags)
    fails = sum(not f for f in flags)
    if n:
        p = fails / n
        mc_upper = p + 3.0 * math.sqrt(p * (1 - p) / n) if fails else 3.0 / n
    else:
        p, mc_upper = math.nan, math.inf
    used = min(hoeff, mc_upper)
    return {"eps0_hoeffding": hoeff, "eps0_measured": p, "eps0_mc_upper": mc_upper,
            "eps0_used": used, "eps0_source": "hoeffding" if used == hoeff else "monte_carlo"}


def error_prob_bound(alpha: float, lam: float, log_beta: float = 0.0, eps0: float = 0.0) -> float:
    """``alpha / (2^(lam - log2 beta) - 1) + eps0``; infinite when ``lam <= log2 beta``."""
    if lam <= log_beta:
        return math.inf
    return alpha / (2.0 ** (lam - log_beta) - 1.0) + eps0


def arl_bound(gamma: float, lam: float, log_beta: float = 0.0, eps0: float = 0.0) -> float:
    """``gamma / (1/(2^(lam - log2 beta) - 1) + eps0 * gamma)``."""
    if lam <= log_beta:
        return 0.0
    return gamma / (1.0 / (2.0 ** (lam - log_beta) - 1.0) + eps0 * gamma)


def estimate_error_prob(spec: StreamSpec, proc: Procedure, trials: int,
                        delta: Optional[float] = None) -> ExperimentSummary:
    """Fraction of no-change trials in which the auxiliary stopping time fires,
    checked against its false-alarm bound plus three binomial sigmas."""
    if spec.change_point is not None:
        raise ValidationError("change_point", "error probability needs a no-change stream")
    proc = replace(proc, auxiliary=True)
    results = run_trials(spec, proc, trials, delta=delta if proc.mode == "empirical" else None)
    s = summarize("error-prob", results, spec, proc, {"delta": delta})
    alpha = 2.0 ** -proc.threshold
    checks = {"alpha": alpha}
    if proc.mode == "empirical":
        if delta is None:
            raise ValidationError("delta", "empirical mode needs delta for the bound")
        lb = log2_beta(spec.mu0, delta)
        checks.update(_eps0(spec, delta, results))
        checks["log2_beta"] = lb
        bound = error_prob_bound(alpha, proc.lam, lb, checks["eps0_used"])
    else:
        bound = error_prob_bound(alpha, proc.lam)
    b = min(bound, 1.0)
    sigma = math.sqrt(b * (1 - b) / trials)
    checks.update(bound=bound, sigma=sigma, limit=bound + 3 * sigma)
    s.checks = checks
    s.passed = s.false_alarm_fraction <= bound + 3 * sigma
    return s


def estimate_arl0(spec: StreamSpec, proc: Procedure, trials: int,
                  delta: Optional[float] = None) -> ExperimentSummary:
    """Censored mean stop time under no change, a lower estimate of the ARL,
    compared with its theoretical lower bound."""
    if spec.change_point is not None:
        raise ValidationError("change_point", "ARL needs a no-change stream")
    results = run_trials(spec, proc, trials, delta=delta if proc.mode == "empirical" else None)
    s = summarize("arl", results, spec, proc, {"delta": delta})
    gamma = 2.0 ** proc.threshold
    checks = {"gamma": gamma}
    if proc.mode == "empirical":
        if delta is None:
            raise ValidationError("delta", "empirical mode needs delta for the bound")
        lb = log2_beta(spec.mu0, delta)
        checks.update(_eps0(spec, delta, results))
        checks["log2_beta"] = lb
        bound = arl_bound(gamma, proc.lam, lb, checks["eps0_used"])
    elif proc.mode == "jbpage":
        bound = arl_bound(gamma, proc.lam)
    else:
        bound = gamma
    checks["bound"] = bound
    s.checks = checks
    s.passed = s.censored_fraction < 1.0 and s.mean_stop >= bound
    return s


def post_drift(spec: StreamSpec, proc: Procedure, ref: Categorical) -> float:
    """Per-symbol upward drift of the statistic after the change."""
    if proc.mode == "page":
        return kl_divergence(spec.mu1, spec.mu0) - proc.lam
    return kl_divergence(spec.mu1, ref) - proc.lam


def default_horizon(predicted_delay: float, change_point: int = 1) -> int:
    return int(math.ceil(50 * predicted_delay)) + change_point


def estimate_worst_delay(spec: StreamSpec, proc: Procedure, trials: int,
                         estimate: Optional[EmpiricalEstimate] = None,
                         conditional: bool = True) -> ExperimentSummary:
    """Mean of ``(N - m + 1)^+`` at the spec's change point (``m = 1`` approximates
    the worst case), conditioned on one warm-up realisation by default."""
    if spec.change_point is None:
        raise ValidationError("change_point", "delay needs a finite change point")
    if proc.mode == "empirical" and conditional and estimate is None:
        estimate = fixed_estimate(spec, proc.smoothing)
    ref = estimate.mu_hat if estimate is not None else spec.mu0
    results = run_trials(spec, proc, trials, estimate=estimate)
    extra = {"conditional": conditional}
    if estimate is not None:
        extra["estimate"] = estimate.to_dict()
    s = summarize("delay", results, spec, proc, extra)
    drift = post_drift(spec, proc, ref)
    s.checks = {"drift": drift,
                "predicted_delay": proc.threshold / drift if drift > 0 else math.inf}
    return s


@dataclass
class SlopeReport:
    gammas_log2: list
    mean_delays: list
    halfwidths: list
    slope: float
    intercept: float
    residuals: list
    predicted_slope: float
    relative_error: float
    summaries: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["summaries"] = [s.to_dict() for s in self.summaries]
        d["version"] = __version__
        return d


def delay_slope(spec: StreamSpec, proc: Procedure, gammas: Sequence[float], trials: int,
                estimate: Optional[EmpiricalEstimate] = None) -> SlopeReport:
    """Least-squares slope of mean delay against ``log2 gamma``."""
    if len(gammas) < 4:
        raise ValidationError("gammas", "need at least four gamma values")
    if proc.mode == "empirical" and estimate is None:
        estimate = fixed_estimate(spec, proc.smoothing)
    ref = estimate.mu_hat if estimate is not None else spec.mu0
    x = np.log2(np.asarray(gammas, dtype=np.float64))
    drift = post_drift(spec, proc, ref)
    summaries = []
    for g in x:
        p = replace(proc, threshold=float(g))
        sp = spec
        if spec.horizon < default_horizon(g / drift, spec.change_point or 1):
            sp = replace(spec, horizon=default_horizon(g / drift, spec.change_point or 1))
        summaries.append(estimate_worst_delay(sp, p, trials, estimate=estimate))
    y = np.array([s.mean_delay for s in summaries])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    pred = 1.0 / drift
    return SlopeReport(x.tolist(), y.tolist(), [s.delay_halfwidth for s in summaries],
                       float(slope), float(intercept), resid.tolist(), pred,
                       float(abs(slope - pred) / pred), summaries)


MIN_DRIFT = 1e-3


def kappa_lambda(d1_hat: float, d10: float, kappa: float) -> float:
    """Drift penalty that makes the post-change drift ``D(mu1||mu0) / (1 + kappa)``."""
    return d1_hat - d10 / (1.0 + kappa)


def hoeffding_delta(k: int, n0: int, eps0: float) -> float:
    """Smallest ``delta`` whose Hoeffding union bound equals ``eps0``."""
    return math.sqrt(math.log(2 * k / eps0) / (2 * n0))


@dataclass
class OptimalityRow:
    n0: int
    gamma: float
    kappa: float
    delta: float
    log2_beta: float
    lam: float
    window: tuple
    feasible: bool
    log2_eta: Optional[float] = None
    mean_delay: Optional[float] = None
    delay_halfwidth: Optional[float] = None
    lorden_optimum: Optional[float] = None
    ratio: Optional[float] = None
    censored_fraction: Optional[float] = None
    unstable: Optional[bool] = None


def optimality_experiment(mu0: Categorical, mu1: Categorical, kappa: float, gamma: float,
                          n0_schedule: Sequence[int], trials: int, seed: int = 0,
                          delta: Optional[float] = None,
                          horizon: Optional[int] = None) -> list[OptimalityRow]:
    """Tune the empirical test for a target ``(1 + kappa)`` delay inflation and measure it.

    For each warm-up length: ``lam = D(mu1||mu_hat) - D(mu1||mu0)/(1 + kappa)``,
    threshold ``log2 eta`` with ``eta = gamma (1/(2^(lam - log2 beta) - 1) + 1)``
    (the ``eps0 = 1/gamma`` choice), and the ratio of the measured delay to
    ``log2 gamma / D(mu1||mu0)``.  ``delta`` defaults to the Hoeffding value
    giving ``eps0 = 1/gamma``.
    """
    d10 = kl_divergence(mu1, mu0)
    rows = []
    for n0 in n0_schedule:
        d = delta if delta is not None else hoeffding_delta(mu0.size, n0, 1.0 / gamma)
        lb = log2_beta(mu0, d)
        spec = StreamSpec(mu0, mu1, n0=n0, change_point=1, horizon=1, seed=seed)
        est = fixed_estimate(spec)
        try:
            d1h = kl_divergence(mu1, est.mu_hat)
            lo = max(lb, kl_divergence(mu0, est.mu_hat))
        except SupportMismatch:
            rows.append(OptimalityRow(n0, gamma, kappa, d, lb, math.nan, (math.nan, math.nan), False))
            continue
        lam = kappa_lambda(d1h, d10, kappa)
        row = OptimalityRow(n0, gamma, kappa, d, lb, lam, (lo, d1h), lo < lam < d1h)
        rows.append(row)
        if not row.feasible:
            continue
        eta = gamma * (1.0 / (2.0 ** (lam - lb) - 1.0) + 1.0)
        row.log2_eta = math.log2(eta)
        row.lorden_optimum = math.log2(gamma) / d10
        drift = d1h - lam
        if drift < MIN_DRIFT:
            # delays of order log2(eta)/drift are beyond any practical horizon
            row.unstable = True
            continue
        pred = math.log2(eta) / drift
        h = horizon or default_horizon(pred)
        s = estimate_worst_delay(replace(spec, horizon=h),
                                 Procedure("empirical", math.log2(eta), lam), trials, estimate=est)
        row.mean_delay = s.mean_delay
        row.delay_halfwidth = s.delay_halfwidth
        row.ratio = s.mean_delay / row.lorden_optimum
        row.censored_fraction = s.censored_fraction
        row.unstable = s.censored_fraction > 0
    if not any(r.feasible for r in rows):
        raise InfeasibleKappa(f"kappa={kappa} infeasible for every n0 in {list(n0_schedule)}")
    return rows


def trials_csv(results: Sequence[TrialResult], header: Optional[dict] = None) -> str:
    """Per-trial CSV, preceded by ``#`` comment lines carrying version and config."""
    import json
    buf = io.StringIO()
    buf.write(f"# unicusum {__version__}\n")
    if header is not None:
        buf.write("# config: " + json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow(r.csv_row())
    return buf.getvalue()
