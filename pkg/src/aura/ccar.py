"""Confidence-calibrated autonomous resolution.

A weighted-indicator sigmoid confidence function, temperature-scaled
calibration, expected calibration error, false-positive-bounded threshold
selection, and the five decision tiers that gate autonomous execution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy.optimize import minimize_scalar

N_INDICATORS = 5
DEFAULT_BINS = 15

TAU_AUTO = 0.90
TAU_NOTIFY = 0.85
TAU_ASSIST = 0.70
TAU_ESCALATE = 0.50


class CcarError(Exception):
    pass


class DegenerateData(CcarError):
    pass


class EmptyInput(CcarError):
    pass


class NoFeasibleThreshold(CcarError):
    """Calibration data is too noisy to admit any autonomous threshold."""


class DecisionTier(IntEnum):
    """Higher value = more autonomy. Ordering matters for the safety cap."""

    EXPERT_REQUIRED = 0
    ESCALATE = 1
    RECOMMEND = 2
    AUTO_NOTIFY = 3
    AUTO_SILENT = 4


AUTONOMOUS_TIERS = {DecisionTier.AUTO_SILENT, DecisionTier.AUTO_NOTIFY}


@dataclass(frozen=True)
class IndicatorVector:
    """Five positive (phi) and five negative (psi) confidence indicators,
    each in [0, 1].

    phi: retrieval score, historical success rate, linguistic certainty,
    telemetry correlation, model agreement.
    psi: novel signature, safety criticality, uncertainty language,
    conflicting evidence, recent failures.
    """

    phi: tuple[float, ...]
    psi: tuple[float, ...]

    def __post_init__(self):
        if len(self.phi) != N_INDICATORS or len(self.psi) != N_INDICATORS:
            raise CcarError("indicator vectors must have 5 components each")
        for v in (*self.phi, *self.psi):
            if not 0.0 <= v <= 1.0:
                raise CcarError(f"indicator {v} outside [0, 1]")


@dataclass(frozen=True)
class CalibrationRecord:
    indicators: IndicatorVector
    outcome: bool


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def logit(p: float) -> float:
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class ConfidenceModel:
    w0: float = 0.0
    w: tuple[float, ...] = (0.0,) * N_INDICATORS
    v: tuple[float, ...] = (0.0,) * N_INDICATORS
    temperature: float = 1.0
    theta_star: float = TAU_AUTO
    fitted_at: str = ""

    def __post_init__(self):
        if self.temperature <= 0:
            raise CcarError("temperature must be positive")

    def raw_logit(self, ind: IndicatorVector) -> float:
        return (
            self.w0
            + sum(wi * p for wi, p in zip(self.w, ind.phi))
            - sum(vj * q for vj, q in zip(self.v, ind.psi))
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "w0": self.w0,
                "w": list(self.w),
                "v": list(self.v),
                "T": self.temperature,
                "theta_star": self.theta_star,
                "fitted_at": self.fitted_at,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ConfidenceModel":
        d = json.loads(text)
        return cls(
            w0=d["w0"],
            w=tuple(d["w"]),
            v=tuple(d["v"]),
            temperature=d["T"],
            theta_star=d["theta_star"],
            fitted_at=d.get("fitted_at", ""),
        )


def confidence(model: ConfidenceModel, ind: IndicatorVector) -> float:
    """Uncalibrated action confidence sigma(w0 + w.phi - v.psi)."""
    return sigmoid(model.raw_logit(ind))


def calibrated_confidence(model: ConfidenceModel, ind: IndicatorVector) -> float:
    """Temperature-scaled confidence: sigma(logit(C) / T)."""
    return sigmoid(model.raw_logit(ind) / model.temperature)


def fit_weights(
    records: list[CalibrationRecord],
    lr: float = 0.5,
    tol: float = 1e-8,
    max_iter: int = 20000,
) -> ConfidenceModel:
    """Logistic regression of outcomes on indicators via batch gradient
    descent. Tiny data, so a plain full-batch loop is deterministic and fast."""
    if not records:
        raise DegenerateData("no records")
    X = np.array([[1.0, *r.indicators.phi, *[-q for q in r.indicators.psi]] for r in records])
    y = np.array([1.0 if r.outcome else 0.0 for r in records])
    beta = np.zeros(X.shape[1])
    prev_nll = math.inf
    for _ in range(max_iter):
        z = X @ beta
        p = 1.0 / (1.0 + np.exp(-z))
        grad = X.T @ (p - y) / len(y)
        beta -= lr * grad
        nll = float(np.mean(-y * np.log(np.clip(p, 1e-12, 1)) - (1 - y) * np.log(np.clip(1 - p, 1e-12, 1))))
        if abs(prev_nll - nll) < tol:
            break
        prev_nll = nll
    return ConfidenceModel(w0=float(beta[0]), w=tuple(beta[1:6]), v=tuple(beta[6:11]))


def nll(logits: np.ndarray, outcomes: np.ndarray, temperature: float) -> float:
    z = logits / temperature
    p = 1.0 / (1.0 + np.exp(-z))
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(np.mean(-outcomes * np.log(p) - (1 - outcomes) * np.log(1 - p)))


def calibrate_temperature(
    logits,
    outcomes,
    bins: int = DEFAULT_BINS,
) -> tuple[float, float]:
    """Fit T* minimizing NLL of sigma(logit / T); returns (T*, calibrated ECE)."""
    logits = np.asarray(logits, dtype=float)
    outcomes = np.asarray(outcomes, dtype=bool)
    if len(logits) < 2 or outcomes.all() or not outcomes.any():
        raise DegenerateData("need both outcome classes present")
    res = minimize_scalar(
        lambda t: nll(logits, outcomes.astype(float), t),
        bounds=(0.05, 50.0),
        method="bounded",
        options={"xatol": 1e-6},
    )
    t_star = float(res.x)
    probs = 1.0 / (1.0 + np.exp(-logits / t_star))
    return t_star, expected_calibration_error(probs, outcomes, bins)


def expected_calibration_error(probs, outcomes, bins: int = DEFAULT_BINS) -> float:
    """Bin-weighted mean |accuracy - confidence| gap; empty bins skipped."""
    probs = np.asarray(probs, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if len(probs) == 0:
        raise EmptyInput("no probabilities")
    ece = 0.0
    n = len(probs)
    for b in range(1, bins + 1):
        lo, hi = (b - 1) / bins, b / bins
        mask = (probs >= lo) & (probs < hi) if b < bins else (probs >= lo) & (probs <= hi)
        if mask.sum() == 0:
            continue
        acc = outcomes[mask].mean()
        conf = probs[mask].mean()
        ece += (mask.sum() / n) * abs(acc - conf)
    return float(ece)


def select_threshold(
    confidences,
    outcomes,
    epsilon: float,
    wilson: bool = False,
) -> float:
    """Minimum grid threshold whose selected records have empirical failure
    fraction <= epsilon. Requires at least one record at or above the
    threshold; raises NoFeasibleThreshold otherwise.

    With ``wilson=True`` the upper Wilson bound (95%) on the failure rate is
    used instead of the empirical fraction.
    """
    confidences = np.asarray(confidences, dtype=float)
    outcomes = np.asarray(outcomes, dtype=bool)
    if len(confidences) == 0:
        raise NoFeasibleThreshold("no records")
    for step in range(101):
        theta = step / 100.0
        mask = confidences >= theta
        n = int(mask.sum())
        if n == 0:
            continue
        failures = int((~outcomes[mask]).sum())
        rate = failures / n
        if wilson:
            rate = _wilson_upper(failures, n)
        if rate <= epsilon:
            return theta
    raise NoFeasibleThreshold(f"no threshold meets failure bound {epsilon}")


def _wilson_upper(failures: int, n: int, z: float = 1.96) -> float:
    if n == 0:
        return 0.0
    p = failures / n
    denom = 1 + z * z / n
    center = p + z * z / (2 * n)
    margin = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return (center + margin) / denom


def decide(calibrated: float, safety_critical: bool = False) -> DecisionTier:
    """Map calibrated confidence to a decision tier. Safety-critical actions
    are capped at RECOMMEND regardless of confidence."""
    if not 0.0 <= calibrated <= 1.0:
        raise CcarError(f"confidence {calibrated} outside [0, 1]")
    if calibrated >= TAU_AUTO:
        tier = DecisionTier.AUTO_SILENT
    elif calibrated >= TAU_NOTIFY:
        tier = DecisionTier.AUTO_NOTIFY
    elif calibrated >= TAU_ASSIST:
        tier = DecisionTier.RECOMMEND
    elif calibrated >= TAU_ESCALATE:
        tier = DecisionTier.ESCALATE
    else:
        tier = DecisionTier.EXPERT_REQUIRED
    if safety_critical and tier in AUTONOMOUS_TIERS:
        tier = DecisionTier.RECOMMEND
    return tier


def reliability_bins(probs, outcomes, bins: int = DEFAULT_BINS) -> list[dict]:
    """Per-bin reliability data for the calibration CSV report."""
    probs = np.asarray(probs, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    rows = []
    for b in range(1, bins + 1):
        lo, hi = (b - 1) / bins, b / bins
        mask = (probs >= lo) & (probs < hi) if b < bins else (probs >= lo) & (probs <= hi)
        rows.append(
            {
                "bin": b,
                "lower": lo,
                "upper": hi,
                "count": int(mask.sum()),
                "confidence": float(probs[mask].mean()) if mask.any() else 0.0,
                "accuracy": float(outcomes[mask].mean()) if mask.any() else 0.0,
            }
        )
    return rows


def reliability_csv(probs, outcomes, bins: int = DEFAULT_BINS) -> str:
    rows = reliability_bins(probs, outcomes, bins)
    lines = ["bin,lower,upper,count,confidence,accuracy"]
    for r in rows:
        lines.append(
            f"{r['bin']},{r['lower']:.6f},{r['upper']:.6f},{r['count']},"
            f"{r['confidence']:.6f},{r['accuracy']:.6f}"
        )
    return "\n".join(lines) + "\n"
