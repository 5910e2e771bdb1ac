"""Run configuration: JSON text, defaults, cross-field validation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .alphabet_dist import Categorical
from .detectors import MODES, PENALTIES, drift_window, threshold_from_alpha, threshold_from_gamma
from .errors import ChangeDetectionError, LambdaOutsideWindow, ParseError, ValidationError

EXPERIMENTS = ("error-prob", "arl", "delay", "slope", "optimality")


@dataclass
class RunConfig:
    mu0: list
    mu1: Optional[list] = None
    k: Optional[int] = None
    mode: str = "empirical"
    lam: Optional[float] = None
    kappa: Optional[float] = None
    gamma: Optional[float] = None
    alpha: Optional[float] = None
    n0: int = 10_000
    delta: Optional[float] = None
    code: str = "kt"
    penalty: str = "window"
    smoothing: str = "none"
    max_starts: Optional[int] = None
    horizon: int = 10_000
    trials: int = 1000
    seed: int = 0
    change_point: Optional[int] = None
    experiment: str = "delay"
    gammas: list = field(default_factory=lambda: [2.0 ** 4, 2.0 ** 6, 2.0 ** 8, 2.0 ** 10])
    n0_schedule: list = field(default_factory=lambda: [10_000, 100_000])
    out: Optional[str] = None

    @property
    def dist0(self) -> Categorical:
        return Categorical(self.mu0)

    @property
    def dist1(self) -> Optional[Categorical]:
        return None if self.mu1 is None else Categorical(self.mu1)

    @property
    def threshold(self) -> float:
        if self.gamma is not None:
            return threshold_from_gamma(self.gamma)
        return threshold_from_alpha(self.alpha)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


_KEYS = {f.name for f in fields(RunConfig)}


def _load(source) -> dict:
    if isinstance(source, dict):
        return dict(source)
    text = str(source)
    if not text.lstrip().startswith("{"):
        try:
            text = Path(text).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read config {source}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object")
    return data


def parse_config(source, overrides: Optional[dict] = None) -> RunConfig:
    """Build and validate a RunConfig from a path, JSON text or dict.

    ``overrides`` (typically command-line flags) replace file values; ``None``
    entries are ignored.  In empirical mode the drift-penalty window is
    checked in the ``n0 -> infinity`` limit (estimate equal to ``mu0``); the
    realised estimate is checked again when a detector is built.
    """
    data = _load(source)
    if "lambda" in data:
        data["lam"] = data.pop("lambda")
    for key, val in (overrides or {}).items():
        if val is not None:
            data["lam" if key == "lambda" else key] = val
    unknown = set(data) - _KEYS
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown config field")
    if "mu0" not in data:
        raise ValidationError("mu0", "required")
    cfg = RunConfig(**data)
    validate_run_config(cfg)
    return cfg


def validate_run_config(cfg: RunConfig) -> RunConfig:
    mu0 = _dist(cfg.mu0, "mu0")
    mu1 = None if cfg.mu1 is None else _dist(cfg.mu1, "mu1")
    if cfg.k is None:
        cfg.k = mu0.size
    if mu0.size != cfg.k or (mu1 is not None and mu1.size != cfg.k):
        raise ValidationError("k", f"alphabet size {cfg.k} does not match the distributions")
    if cfg.mode not in MODES:
        raise ValidationError("mode", f"expected one of {MODES}")
    if cfg.penalty not in PENALTIES:
        raise ValidationError("penalty", f"expected one of {PENALTIES}")
    if cfg.smoothing not in ("none", "add_half"):
        raise ValidationError("smoothing", "expected 'none' or 'add_half'")
    if cfg.code != "kt":
        raise ValidationError("code", "only the 'kt' code is available")
    if cfg.experiment not in EXPERIMENTS:
        raise ValidationError("experiment", f"expected one of {EXPERIMENTS}")
    if cfg.gamma is not None and cfg.alpha is not None:
        raise ValidationError("gamma", "give gamma or alpha, not both")
    if cfg.gamma is not None:
        threshold_from_gamma(cfg.gamma)
    if cfg.alpha is not None:
        threshold_from_alpha(cfg.alpha)
    for name in ("trials", "horizon"):
        if int(getattr(cfg, name)) < 1:
            raise ValidationError(name, "must be >= 1")
    if cfg.mode == "empirical" and cfg.n0 < 1:
        raise ValidationError("n0", "empirical mode needs a warm-up prefix")
    if cfg.mode == "page":
        if mu1 is None:
            raise ValidationError("mu1", "page mode needs mu1")
        if cfg.lam is None:
            cfg.lam = 0.0
    elif cfg.experiment != "optimality":
        if cfg.lam is None:
            raise ValidationError("lambda", "required for universal modes")
        if mu1 is not None:
            try:
                lo, hi = drift_window(cfg.mode, mu0, mu1, mu0, cfg.delta)
            except ChangeDetectionError as exc:
                raise ValidationError("lambda", str(exc)) from None
            if not lo < cfg.lam < hi:
                raise LambdaOutsideWindow(cfg.lam, lo, hi)
    if cfg.experiment == "optimality" and cfg.kappa is None:
        raise ValidationError("kappa", "required for the optimality experiment")
    return cfg


def _dist(probs, name) -> Categorical:
    try:
        return Categorical(probs)
    except ValidationError as exc:
        raise ValidationError(name, str(exc).split(": ", 1)[-1]) from None
    except (TypeError, ValueError) as exc:
        raise ValidationError(name, str(exc)) from None
