"""Streaming telemetry anomaly detection.

Three detectors scored on a common [0, 1] scale and combined with fixed
weights 0.4 / 0.3 / 0.3:

* an isolation forest built from scratch (64 trees, subsample 128),
* a per-channel z-score against historical mean/std, mapped through
  ``1 - exp(-|z| / 3)``,
* a PCA reconstruction-error detector fit on nominal history, normalized by
  the 99th-percentile training error.

A report is emitted only when the combined score strictly exceeds the
detection threshold (default 0.75).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

DEFAULT_WINDOW = 60
DEFAULT_THRESHOLD = 0.75
WEIGHT_ISO, WEIGHT_STAT, WEIGHT_ML = 0.4, 0.3, 0.3

#: Telemetry channels monitored, in feature order.
CHANNELS = (
    "voltage_l1",
    "voltage_l2",
    "voltage_l3",
    "current_total",
    "temperature_cabinet",
    "temperature_connector",
    "comm_error_rate",
)


class AnomalyError(Exception):
    pass


class InsufficientData(AnomalyError):
    pass


class OutOfRange(AnomalyError):
    pass


class Severity(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


# Combined-score cut points for severity classification.
SEVERITY_CUTS = ((0.95, Severity.CRITICAL), (0.88, Severity.HIGH), (0.80, Severity.MEDIUM))


def classify_severity(score: float) -> Severity:
    for cut, sev in SEVERITY_CUTS:
        if score >= cut:
            return sev
    return Severity.LOW


@dataclass(frozen=True)
class FeatureVector:
    """Per-channel rolling features: mean, std, least-squares trend slope,
    dominant DFT bin power."""

    window_mean: tuple[float, ...]
    window_std: tuple[float, ...]
    trend_slope: tuple[float, ...]
    dominant_freq_power: tuple[float, ...]

    def flat(self) -> np.ndarray:
        return np.concatenate(
            [self.window_mean, self.window_std, self.trend_slope, self.dominant_freq_power]
        )


@dataclass(frozen=True)
class AnomalyReport:
    score_combined: float
    score_iso: float
    score_stat: float
    score_ml: float
    context: np.ndarray  # trailing 2*window samples, shape (n, channels)
    similar: tuple[int, ...]  # indices of nearest historical feature patterns
    severity: Severity


def _as_matrix(stream) -> np.ndarray:
    """Accept an (n, channels) array or a sequence of TelemetrySnapshots."""
    if isinstance(stream, np.ndarray):
        return np.atleast_2d(np.asarray(stream, dtype=float))
    rows = [[getattr(s, ch) for ch in CHANNELS] for s in stream]
    return np.asarray(rows, dtype=float)


def rolling_features(stream, window: int = DEFAULT_WINDOW) -> FeatureVector:
    """Features over the trailing ``window`` samples of the stream."""
    data = _as_matrix(stream)
    if data.shape[0] < window:
        raise InsufficientData(f"stream length {data.shape[0]} < window {window}")
    tail = data[-window:]
    t = np.arange(window, dtype=float)
    t_centered = t - t.mean()
    denom = float(np.sum(t_centered**2))
    means, stds, slopes, powers = [], [], [], []
    for col in tail.T:
        means.append(float(col.mean()))
        stds.append(float(col.std()))
        slopes.append(float(np.dot(t_centered, col - col.mean()) / denom))
        spectrum = np.abs(np.fft.rfft(col - col.mean()))
        powers.append(float(spectrum[1:].max()) if len(spectrum) > 1 else 0.0)
    return FeatureVector(tuple(means), tuple(stds), tuple(slopes), tuple(powers))


def combined_score(iso: float, stat: float, ml: float) -> float:
    for name, v in (("iso", iso), ("stat", stat), ("ml", ml)):
        if not 0.0 <= v <= 1.0:
            raise OutOfRange(f"score_{name}={v} outside [0, 1]")
    return WEIGHT_ISO * iso + WEIGHT_STAT * stat + WEIGHT_ML * ml


# --- Isolation forest -------------------------------------------------------

class _IsoNode:
    __slots__ = ("feature", "split", "left", "right", "size")

    def __init__(self, feature=None, split=None, left=None, right=None, size=0):
        self.feature = feature
        self.split = split
        self.left = left
        self.right = right
        self.size = size


def _avg_path_length(n: int) -> float:
    if n <= 1:
        return 0.0
    h = math.log(n - 1) + 0.5772156649015329
    return 2.0 * h - 2.0 * (n - 1) / n


class IsolationForest:
    """Minimal deterministic isolation forest over feature vectors."""

    def __init__(self, n_trees: int = 64, subsample: int = 128, seed: int = 0):
        self.n_trees = n_trees
        self.subsample = subsample
        self.seed = seed
        self._trees: list[_IsoNode] = []
        self._c = 1.0

    def fit(self, X: np.ndarray) -> "IsolationForest":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        rng = np.random.default_rng(self.seed)
        n = min(self.subsample, X.shape[0])
        depth_cap = int(math.ceil(math.log2(max(n, 2))))
        self._c = _avg_path_length(n)
        self._trees = []
        for _ in range(self.n_trees):
            idx = rng.choice(X.shape[0], size=n, replace=False)
            self._trees.append(self._build(X[idx], 0, depth_cap, rng))
        return self

    def _build(self, X: np.ndarray, depth: int, cap: int, rng) -> _IsoNode:
        n = X.shape[0]
        if depth >= cap or n <= 1:
            return _IsoNode(size=n)
        spans = X.max(axis=0) - X.min(axis=0)
        candidates = np.nonzero(spans > 0)[0]
        if len(candidates) == 0:
            return _IsoNode(size=n)
        f = int(rng.choice(candidates))
        lo, hi = X[:, f].min(), X[:, f].max()
        split = float(rng.uniform(lo, hi))
        mask = X[:, f] < split
        return _IsoNode(
            feature=f,
            split=split,
            left=self._build(X[mask], depth + 1, cap, rng),
            right=self._build(X[~mask], depth + 1, cap, rng),
            size=n,
        )

    def _path_length(self, x: np.ndarray, node: _IsoNode, depth: int) -> float:
        while node.feature is not None:
            node = node.left if x[node.feature] < node.split else node.right
            depth += 1
        return depth + _avg_path_length(node.size)

    def score(self, x: np.ndarray) -> float:
        """Anomaly score in [0, 1]; ~0.5 for nominal points, -> 1 for isolates."""
        if not self._trees:
            raise AnomalyError("forest not fitted")
        x = np.asarray(x, dtype=float)
        mean_depth = sum(self._path_length(x, t, 0) for t in self._trees) / len(self._trees)
        if self._c == 0:
            return 0.5
        return float(2.0 ** (-mean_depth / self._c))


# --- PCA reconstruction detector -------------------------------------------

class PcaReconstructor:
    def __init__(self, n_components: int = 4):
        self.n_components = n_components
        self._mean: np.ndarray | None = None
        self._components: np.ndarray | None = None
        self._p99: float = 1.0

    def fit(self, X: np.ndarray) -> "PcaReconstructor":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self._mean = X.mean(axis=0)
        centered = X - self._mean
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        k = min(self.n_components, vt.shape[0])
        self._components = vt[:k]
        errors = [self._raw_error(x) for x in X]
        self._p99 = max(float(np.percentile(errors, 99)), 1e-12)
        return self

    def _raw_error(self, x: np.ndarray) -> float:
        centered = x - self._mean
        recon = self._components.T @ (self._components @ centered)
        return float(np.linalg.norm(centered - recon))

    def score(self, x: np.ndarray) -> float:
        if self._components is None:
            raise AnomalyError("PCA not fitted")
        return float(min(self._raw_error(np.asarray(x, dtype=float)) / self._p99, 1.0))


# --- Ensemble detector ------------------------------------------------------

class AnomalyDetector:
    """Ensemble detector. Fit once on nominal history, then detect on streams.

    Fitting and detecting never interleave on one instance; detection state is
    read-only, so per-station detectors can run in parallel.
    """

    def __init__(
        self,
        window: int = DEFAULT_WINDOW,
        threshold: float = DEFAULT_THRESHOLD,
        seed: int = 0,
    ):
        self.window = window
        self.threshold = threshold
        self.forest = IsolationForest(seed=seed)
        self.pca = PcaReconstructor()
        self._hist_features: np.ndarray | None = None
        self._mu: np.ndarray | None = None
        self._sigma: np.ndarray | None = None

    def fit(self, history) -> "AnomalyDetector":
        """``history`` is a list of nominal telemetry streams (one per window
        period); features are extracted per stream tail."""
        feats = np.vstack([rolling_features(h, self.window).flat() for h in history])
        data = np.vstack([_as_matrix(h) for h in history])
        self._mu = data.mean(axis=0)
        self._sigma = np.maximum(data.std(axis=0), 1e-9)
        self._hist_features = feats
        self.forest.fit(feats)
        self.pca.fit(feats)
        return self

    def stat_score(self, stream) -> float:
        """Max per-channel |z| of the window mean against historical mu/sigma,
        mapped through 1 - exp(-|z|/3)."""
        tail = _as_matrix(stream)[-self.window:]
        z = np.abs(tail.mean(axis=0) - self._mu) / self._sigma
        return float(1.0 - math.exp(-float(z.max()) / 3.0))

    def scores(self, stream) -> tuple[float, float, float]:
        feats = rolling_features(stream, self.window).flat()
        return (
            self.forest.score(feats),
            self.stat_score(stream),
            self.pca.score(feats),
        )

    def detect(self, stream) -> AnomalyReport | None:
        if self._hist_features is None:
            raise AnomalyError("detector not fitted")
        iso, stat, ml = self.scores(stream)
        combined = combined_score(iso, stat, ml)
        if not combined > self.threshold:
            return None
        data = _as_matrix(stream)
        feats = rolling_features(stream, self.window).flat()
        dists = np.linalg.norm(self._hist_features - feats, axis=1)
        similar = tuple(int(i) for i in np.argsort(dists)[:5])
        return AnomalyReport(
            score_combined=combined,
            score_iso=iso,
            score_stat=stat,
            score_ml=ml,
            context=data[-2 * self.window:],
            similar=similar,
            severity=classify_severity(combined),
        )

    def similarity_to_history(self, stream) -> float:
        """Similarity of the stream's features to the nearest nominal pattern,
        in [0, 1]. Used as the telemetry-correlation confidence indicator."""
        feats = rolling_features(stream, self.window).flat()
        dists = np.linalg.norm(self._hist_features - feats, axis=1)
        scale = max(float(np.median(np.linalg.norm(self._hist_features, axis=1))), 1e-9)
        return float(math.exp(-float(dists.min()) / scale))
