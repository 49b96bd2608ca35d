"""Raw-signal segmentation into events and the adjacent-difference filter."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kmer_model import PoreModel


@dataclass(frozen=True)
class RawSignal:
    read_id: str
    samples: np.ndarray
    sample_rate: float = 4000.0
    truth: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError(f"read {self.read_id!r}: samples must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError(f"read {self.read_id!r}: non-finite sample")

    def truncated(self, max_samples: int | None) -> "RawSignal":
        if max_samples is None or len(self.samples) <= max_samples:
            return self
        return RawSignal(self.read_id, self.samples[:max_samples], self.sample_rate, self.truth)


@dataclass(frozen=True)
class EventVector:
    values: np.ndarray
    boundaries: np.ndarray

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class DetectorParams:
    short_window: int = 4
    long_window: int = 8
    t_threshold_short: float = 1.5
    t_threshold_long: float = 7.0
    min_event_len: int = 3
    diff_threshold: float = 3.0

    def __post_init__(self):
        if self.short_window < 2 or self.long_window < 2:
            raise ValueError("t-test windows need at least 2 samples")
        if self.t_threshold_short <= 0 or self.t_threshold_long <= 0:
            raise ValueError("t thresholds must be positive")
        if self.min_event_len < 1:
            raise ValueError("min_event_len must be >= 1")
        if self.diff_threshold < 0:
            raise ValueError("diff_threshold must be >= 0")


def welch_t_trace(x: np.ndarray, w: int) -> np.ndarray:
    """|Welch t| between ``x[i-w:i]`` and ``x[i:i+w]`` for every split point ``i``.

    Entries without a full window on both sides are 0. Zero variance in both
    windows gives +inf for differing means and 0 for equal ones.
    """
    n = len(x)
    t = np.zeros(n + 1)
    if n < 2 * w:
        return t
    win = np.lib.stride_tricks.sliding_window_view(x, w)
    mean = win.mean(axis=1)
    var = win.var(axis=1, ddof=1)
    # relative round-off floor so piecewise-constant input yields exact ties
    tol = 1e-12 * np.abs(mean)
    var = np.where(var <= tol * tol, 0.0, var)
    m1, v1 = mean[: n - 2 * w + 1], var[: n - 2 * w + 1]
    m2, v2 = mean[w:], var[w:]
    diff = np.abs(m1 - m2)
    diff = np.where(diff <= 1e-12 * (np.abs(m1) + np.abs(m2)), 0.0, diff)
    denom = np.sqrt((v1 + v2) / w)
    with np.errstate(divide="ignore", invalid="ignore"):
        tt = np.where(denom == 0, np.where(diff > 0, np.inf, 0.0), diff / denom)
    t[w : n - w + 1] = tt
    return t


def _local_peaks(t: np.ndarray, radius: int) -> np.ndarray:
    """Split points whose t is the maximum within +-radius (leftmost wins ties)."""
    n = len(t)
    keep = t > 0
    for d in range(1, radius + 1):
        left = np.full(n, -np.inf)
        left[d:] = t[:-d]
        right = np.full(n, -np.inf)
        right[:-d] = t[d:]
        keep &= (t > left) & (t >= right)
    return np.flatnonzero(keep)


def _space_out(cands: np.ndarray, lo: int, hi: int, gap: int) -> list[int]:
    """Greedy leftmost selection with spacing >= gap inside [lo, hi].

    Greedy-leftmost yields a maximum-size subset, so the count never grows
    when candidates are removed.
    """
    out: list[int] = []
    last = None
    for c in cands:
        if c < lo or c > hi:
            continue
        if last is None or c - last >= gap:
            out.append(int(c))
            last = c
    return out


def detect_events(raw: RawSignal, params: DetectorParams = DetectorParams()) -> EventVector:
    """Segment ``raw`` at two-scale Welch t-test peaks.

    A split point is a candidate when it is the local maximum of a scale's
    t trace (over +-min_event_len) and exceeds that scale's threshold.
    Candidates from both scales are merged and thinned so that no event is
    shorter than ``min_event_len``.
    """
    x = raw.samples
    n = len(x)
    if n <= 2 * params.long_window:
        raise ValueError(
            f"read {raw.read_id!r}: {n} samples, need more than {2 * params.long_window}"
        )
    cands = []
    for w, thr in ((params.short_window, params.t_threshold_short),
                   (params.long_window, params.t_threshold_long)):
        t = welch_t_trace(x, w)
        peaks = _local_peaks(t, params.min_event_len)
        cands.append(peaks[t[peaks] > thr])
    merged = np.unique(np.concatenate(cands))
    cuts = _space_out(merged, params.min_event_len, n - params.min_event_len, params.min_event_len)
    bounds = np.array([0] + cuts, dtype=np.int64)
    sums = np.add.reduceat(x, bounds)
    lens = np.diff(np.append(bounds, n))
    return EventVector(values=sums / lens, boundaries=bounds)


def filter_events(events, diff_threshold: float = 3.0):
    """Keep ``v[i]`` (i >= 1) whose jump from ``v[i-1]`` exceeds ``diff_threshold``.

    The first event never survives. Accepts an EventVector (boundaries are
    carried along) or a plain array.
    """
    if isinstance(events, EventVector):
        v = np.asarray(events.values)
        keep = np.flatnonzero(np.abs(np.diff(v)) > diff_threshold) + 1
        return EventVector(values=v[keep], boundaries=np.asarray(events.boundaries)[keep])
    v = np.asarray(events, dtype=np.float64)
    return v[np.flatnonzero(np.abs(np.diff(v)) > diff_threshold) + 1]


def normalize_events(events: EventVector, model: PoreModel, enabled: bool = True) -> EventVector:
    """Affine rescale so event mean/stdv match the pore model's global moments."""
    if not enabled:
        return events
    if len(events) == 0:
        raise ValueError("cannot normalize an empty event vector")
    if model.global_stdv <= 0:
        raise ValueError("pore model has zero level spread")
    v = np.asarray(events.values, dtype=np.float64)
    mu, sd = v.mean(), v.std()
    if sd <= 1e-12 * max(abs(mu), 1.0):  # round-off spread of a constant vector
        sd = 0.0
    if sd == 0:
        out = v - mu + model.global_mean
    else:
        out = (v - mu) / sd * model.global_stdv + model.global_mean
    return EventVector(values=out, boundaries=events.boundaries)
