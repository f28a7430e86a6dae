"""Decay-law fitting and classification of MI decay curves.

Four classes are distinguished: a single power law, a broken power law (two
log-log segments joined at an inflection lag), a power law with periodic MI
peaks, and an exponential decay. All fits are ordinary least squares in log
space; points with MI == 0 are excluded and the exclusion count is reported
on the fit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .estimator import DecayCurve

DEFAULT_NOISE_THRESHOLD = 1e-5

# fixed classifier defaults; qualitative knobs, overridable per call
PERIOD_PROMINENCE = 0.20
EXP_R2_MARGIN = 0.05
BREAK_IMPROVEMENT_MIN = 0.15
SSE_TIE_EPS = 1e-12


class FitError(ValueError):
    pass


class DecayClass(str, Enum):
    POWER_LAW = "PowerLaw"
    BROKEN_POWER_LAW = "BrokenPowerLaw"
    POWER_LAW_PERIODIC = "PowerLawPeriodic"
    EXPONENTIAL = "Exponential"


@dataclass(frozen=True)
class PowerLawFit:
    """ln MI = log_intercept + slope * ln d over d_range."""

    slope: float
    log_intercept: float
    r2: float
    d_range: tuple[int, int]
    n_points: int
    n_excluded: int = 0

    def log_mi_at(self, d: float) -> float:
        return self.log_intercept + self.slope * math.log(d)


@dataclass(frozen=True)
class ExponentialFit:
    """ln MI = log_intercept - rate * d over d_range.

    decaying is False when the fitted rate is not positive; such fits must not
    be used as evidence of exponential decay.
    """

    rate: float
    log_intercept: float
    r2: float
    d_range: tuple[int, int]
    n_points: int
    n_excluded: int = 0
    decaying: bool = True


@dataclass(frozen=True)
class BrokenPowerLawFit:
    """Two power-law segments joined at break_d; improvement is the relative
    SSE reduction against the best single power law on the same points."""

    break_d: int
    left: PowerLawFit
    right: PowerLawFit
    improvement: float


@dataclass(frozen=True)
class PeriodicitySignature:
    period: int
    peak_lags: tuple[int, ...]
    prominence: float

    def __post_init__(self):
        if self.period < 2:
            raise ValueError("period must be >= 2")
        if any(b <= a for a, b in zip(self.peak_lags, self.peak_lags[1:])):
            raise ValueError("peak lags must be strictly increasing")


@dataclass(frozen=True)
class ClassifiedFit:
    decay_class: DecayClass
    max_lag: int
    threshold: float = DEFAULT_NOISE_THRESHOLD
    power: PowerLawFit | None = None
    broken: BrokenPowerLawFit | None = None
    expo: ExponentialFit | None = None
    periodicity: PeriodicitySignature | None = None
    noise_crossing_d: int | None = None
    crossing_low_confidence: bool = False
    curve_meta: dict | None = None

    def __post_init__(self):
        needed = {
            DecayClass.POWER_LAW: ("power",),
            DecayClass.BROKEN_POWER_LAW: ("broken",),
            DecayClass.POWER_LAW_PERIODIC: ("power", "periodicity"),
            DecayClass.EXPONENTIAL: ("expo",),
        }[self.decay_class]
        for name in ("power", "broken", "expo", "periodicity"):
            have = getattr(self, name) is not None
            if name in needed and not have:
                raise ValueError(f"{self.decay_class.value} fit requires {name}")
            if name not in needed and have:
                raise ValueError(f"{self.decay_class.value} fit must not carry {name}")


def _usable(curve: DecayCurve, d_range: tuple[int, int] | None):
    """Lags and MI of points with MI > 0 inside d_range; also #excluded."""
    lo, hi = d_range if d_range is not None else (int(curve.lags[0]), int(curve.lags[-1]))
    if lo < 1 or hi <= lo:
        raise FitError(f"invalid fit range ({lo}, {hi})")
    in_range = (curve.lags >= lo) & (curve.lags <= hi)
    keep = in_range & (curve.mi > 0)
    n_excluded = int(in_range.sum() - keep.sum())
    return curve.lags[keep].astype(np.float64), curve.mi[keep], n_excluded


def _ols(x: np.ndarray, y: np.ndarray):
    """Least squares y = intercept + slope*x; returns (slope, intercept, r2, sse)."""
    mx = x.mean()
    my = y.mean()
    sxx = float(((x - mx) ** 2).sum())
    if sxx == 0.0:
        raise FitError("degenerate fit: all x values identical")
    slope = float(((x - mx) * (y - my)).sum()) / sxx
    intercept = my - slope * mx
    resid = y - (intercept + slope * x)
    sse = float((resid**2).sum())
    syy = float(((y - my) ** 2).sum())
    r2 = 1.0 if syy <= 0.0 else max(0.0, min(1.0, 1.0 - sse / syy))
    return slope, float(intercept), r2, sse


def fit_power_law(curve: DecayCurve, d_range: tuple[int, int] | None = None) -> PowerLawFit:
    """OLS of ln MI on ln d over in-range points with MI > 0."""
    d, mi, n_excluded = _usable(curve, d_range)
    if d.size < 3:
        raise FitError(f"power-law fit needs >= 3 usable points, got {d.size}")
    slope, intercept, r2, _ = _ols(np.log(d), np.log(mi))
    return PowerLawFit(
        slope=slope,
        log_intercept=intercept,
        r2=r2,
        d_range=(int(d[0]), int(d[-1])),
        n_points=int(d.size),
        n_excluded=n_excluded,
    )


def fit_exponential(curve: DecayCurve, d_range: tuple[int, int] | None = None) -> ExponentialFit:
    """OLS of ln MI on d; rate is the negated slope, flagged when not decaying."""
    d, mi, n_excluded = _usable(curve, d_range)
    if d.size < 3:
        raise FitError(f"exponential fit needs >= 3 usable points, got {d.size}")
    slope, intercept, r2, _ = _ols(d, np.log(mi))
    rate = -slope
    return ExponentialFit(
        rate=rate,
        log_intercept=intercept,
        r2=r2,
        d_range=(int(d[0]), int(d[-1])),
        n_points=int(d.size),
        n_excluded=n_excluded,
        decaying=rate > 0.0,
    )


def fit_broken_power_law(
    curve: DecayCurve, d_range: tuple[int, int] | None = None
) -> BrokenPowerLawFit:
    """Exhaustive single-break search minimizing summed log-log SSE.

    Every usable lag with >= 3 usable points on each side (the break lag is
    shared by both segments) is a candidate; ties within SSE_TIE_EPS resolve
    to the smallest break lag.
    """
    d, mi, n_excluded = _usable(curve, d_range)
    if d.size < 7:
        raise FitError(f"broken power-law fit needs >= 7 usable points, got {d.size}")
    x = np.log(d)
    y = np.log(mi)
    _, _, _, sse_single = _ols(x, y)

    candidates = []
    for i in range(d.size):
        n_left = i + 1
        n_right = d.size - i
        if n_left < 3 or n_right < 3:
            continue
        ls, li, lr2, lsse = _ols(x[: i + 1], y[: i + 1])
        rs, ri, rr2, rsse = _ols(x[i:], y[i:])
        candidates.append((int(d[i]), lsse + rsse, (ls, li, lr2, n_left), (rs, ri, rr2, n_right)))
    if not candidates:
        raise FitError("no break candidate admits valid two-sided fits")

    best_sse = min(c[1] for c in candidates)
    break_d, sse_broken, left_p, right_p = next(
        c for c in candidates if c[1] <= best_sse + SSE_TIE_EPS
    )
    # an (almost) exact single line cannot be materially improved; avoid
    # manufacturing improvement out of float residue
    if sse_single <= 1e-20:
        improvement = 0.0
    else:
        improvement = max(0.0, 1.0 - sse_broken / sse_single)

    ls, li, lr2, nl = left_p
    rs, ri, rr2, nr = right_p
    left = PowerLawFit(ls, li, lr2, (int(d[0]), break_d), nl, n_excluded)
    right = PowerLawFit(rs, ri, rr2, (break_d, int(d[-1])), nr, 0)
    return BrokenPowerLawFit(break_d=break_d, left=left, right=right, improvement=improvement)


def _dense_prefix(curve: DecayCurve) -> int:
    """Number of leading curve points at consecutive integer lags 1, 2, 3, ..."""
    n = 0
    for i, d in enumerate(curve.lags):
        if int(d) != i + 1:
            break
        n = i + 1
    return n


def detect_periodicity(
    curve: DecayCurve, prominence: float = PERIOD_PROMINENCE
) -> PeriodicitySignature | None:
    """Find regularly spaced MI peaks on the dense integer-lag prefix.

    Peaks are sought on detrended MI (residual ratio after a power-law fit
    over the prefix): a peak must exceed both neighbors by at least
    `prominence` relative height. Returns None unless >= 2 peaks exist with
    spacing constant within +/-1.
    """
    n = _dense_prefix(curve)
    if n < 8:
        return None
    try:
        base = fit_power_law(curve, (1, n))
    except FitError:
        return None
    lags = curve.lags[:n]
    mi = curve.mi[:n]
    baseline = np.exp([base.log_mi_at(float(d)) for d in lags])
    ratio = np.where(baseline > 0, mi / baseline, 0.0)

    peaks = [
        int(lags[i])
        for i in range(1, n - 1)
        if ratio[i] >= (1.0 + prominence) * max(ratio[i - 1], ratio[i + 1])
        and ratio[i] > 0
    ]
    if len(peaks) < 2:
        return None
    diffs = np.diff(peaks)
    period = int(np.bincount(diffs).argmax())
    if period < 2:
        return None
    if np.any(np.abs(diffs - period) > 1):
        return None
    return PeriodicitySignature(period=period, peak_lags=tuple(peaks), prominence=prominence)


def noise_crossing(curve: DecayCurve, threshold: float = DEFAULT_NOISE_THRESHOLD) -> int | None:
    """Smallest sampled lag from which MI stays below threshold to the end."""
    i = curve.lags.size
    while i > 0 and curve.mi[i - 1] < threshold:
        i -= 1
    if i == curve.lags.size:
        return None
    return int(curve.lags[i])


def crossing_low_confidence(
    curve: DecayCurve, threshold: float = DEFAULT_NOISE_THRESHOLD
) -> bool:
    """True when the plug-in bias floor swamps the threshold where it matters.

    The floor (Kx-1)(Ky-1)/(2N) is taken from curve meta when the curve was
    produced by this package's estimator; curves loaded bare report False.
    """
    floors = curve.meta.get("bias_floor_nats") if curve.meta else None
    if not floors or len(floors) != curve.lags.size:
        return False
    d = noise_crossing(curve, threshold)
    if d is None:
        return bool(floors[-1] > threshold)
    tail = curve.lags >= d
    return bool(np.any(np.asarray(floors)[tail] > threshold))


def _moving_median(v: np.ndarray, window: int = 5) -> np.ndarray:
    half = window // 2
    return np.array(
        [np.median(v[max(0, i - half) : i + half + 1]) for i in range(v.size)]
    )


def detect_decay_onset(curve: DecayCurve, rel_drop: float = 0.2) -> int:
    """Last lag at which the 5-point moving median of MI is still within
    rel_drop of its peak; beyond it the smoothed curve only decays.

    Restores fit applicability for curves that are flat before decaying; for
    curves decaying from the start this is the first lag (give or take noise).
    """
    m = _moving_median(curve.mi)
    peak = float(m.max())
    if peak <= 0.0:
        return int(curve.lags[0])
    keep = np.nonzero(m >= (1.0 - rel_drop) * peak)[0]
    return int(curve.lags[keep[-1]])


def classify(
    curve: DecayCurve,
    threshold: float = DEFAULT_NOISE_THRESHOLD,
    prominence: float = PERIOD_PROMINENCE,
    exp_r2_margin: float = EXP_R2_MARGIN,
    break_improvement_min: float = BREAK_IMPROVEMENT_MIN,
) -> ClassifiedFit:
    """Assign a decay class to a curve.

    Decision order: periodic peaks first; then exponential when its r2 beats
    the single power law by exp_r2_margin over the decaying range; then a
    broken power law when the break reduces SSE by break_improvement_min with
    both segments decaying and the curve flattening past the break; otherwise
    a single power law. A significant break that steepens instead of
    flattening is log-log convexity, i.e. evidence of exponential-type decay,
    and routes to Exponential when the exponential fit is at least as good as
    the power law.
    """
    usable = int(np.count_nonzero(curve.mi > 0))
    if usable < 7:
        raise FitError(f"classification needs >= 7 usable points, got {usable}")
    common = {
        "max_lag": curve.max_lag,
        "threshold": threshold,
        "noise_crossing_d": noise_crossing(curve, threshold),
        "crossing_low_confidence": crossing_low_confidence(curve, threshold),
        "curve_meta": dict(curve.meta) if curve.meta else None,
    }

    sig = detect_periodicity(curve, prominence)
    if sig is not None:
        power = fit_power_law(curve)
        return ClassifiedFit(
            DecayClass.POWER_LAW_PERIODIC, power=power, periodicity=sig, **common
        )

    usable_lags = curve.lags[curve.mi > 0]
    d_hi = int(usable_lags[-1])
    onset = detect_decay_onset(curve)
    if int(np.count_nonzero((usable_lags >= onset) & (usable_lags <= d_hi))) < 7:
        onset = int(usable_lags[0])
    d_range = (onset, d_hi)

    power = fit_power_law(curve, d_range)
    try:
        expo = fit_exponential(curve, d_range)
    except FitError:
        expo = None
    if expo is not None and expo.decaying and expo.r2 - power.r2 >= exp_r2_margin:
        return ClassifiedFit(DecayClass.EXPONENTIAL, expo=expo, **common)

    try:
        broken = fit_broken_power_law(curve, d_range)
    except FitError:
        broken = None
    if (
        broken is not None
        and broken.improvement >= break_improvement_min
        and broken.left.slope < 0
        and broken.right.slope < 0
    ):
        if abs(broken.left.slope) > abs(broken.right.slope):
            return ClassifiedFit(DecayClass.BROKEN_POWER_LAW, broken=broken, **common)
        if expo is not None and expo.decaying and expo.r2 >= power.r2:
            return ClassifiedFit(DecayClass.EXPONENTIAL, expo=expo, **common)

    return ClassifiedFit(DecayClass.POWER_LAW, power=power, **common)


def _power_to_dict(fit: PowerLawFit | None):
    if fit is None:
        return None
    return {
        "slope": fit.slope,
        "log_intercept": fit.log_intercept,
        "r2": fit.r2,
        "d_range": list(fit.d_range),
        "n_points": fit.n_points,
        "n_excluded": fit.n_excluded,
    }


def _power_from_dict(d) -> PowerLawFit | None:
    if d is None:
        return None
    return PowerLawFit(
        slope=d["slope"],
        log_intercept=d["log_intercept"],
        r2=d["r2"],
        d_range=tuple(d["d_range"]),
        n_points=d["n_points"],
        n_excluded=d.get("n_excluded", 0),
    )


def fit_to_dict(fit: ClassifiedFit) -> dict:
    return {
        "decay_class": fit.decay_class.value,
        "max_lag": fit.max_lag,
        "threshold": fit.threshold,
        "power": _power_to_dict(fit.power),
        "broken": None
        if fit.broken is None
        else {
            "break_d": fit.broken.break_d,
            "left": _power_to_dict(fit.broken.left),
            "right": _power_to_dict(fit.broken.right),
            "improvement": fit.broken.improvement,
        },
        "expo": None
        if fit.expo is None
        else {
            "rate": fit.expo.rate,
            "log_intercept": fit.expo.log_intercept,
            "r2": fit.expo.r2,
            "d_range": list(fit.expo.d_range),
            "n_points": fit.expo.n_points,
            "n_excluded": fit.expo.n_excluded,
            "decaying": fit.expo.decaying,
        },
        "periodicity": None
        if fit.periodicity is None
        else {
            "period": fit.periodicity.period,
            "peak_lags": list(fit.periodicity.peak_lags),
            "prominence": fit.periodicity.prominence,
        },
        "noise_crossing_d": fit.noise_crossing_d,
        "crossing_low_confidence": fit.crossing_low_confidence,
        "curve_meta": fit.curve_meta,
    }


def fit_from_dict(d: dict) -> ClassifiedFit:
    broken = None
    if d.get("broken") is not None:
        b = d["broken"]
        broken = BrokenPowerLawFit(
            break_d=b["break_d"],
            left=_power_from_dict(b["left"]),
            right=_power_from_dict(b["right"]),
            improvement=b["improvement"],
        )
    expo = None
    if d.get("expo") is not None:
        e = d["expo"]
        expo = ExponentialFit(
            rate=e["rate"],
            log_intercept=e["log_intercept"],
            r2=e["r2"],
            d_range=tuple(e["d_range"]),
            n_points=e["n_points"],
            n_excluded=e.get("n_excluded", 0),
            decaying=e.get("decaying", True),
        )
    periodicity = None
    if d.get("periodicity") is not None:
        p = d["periodicity"]
        periodicity = PeriodicitySignature(
            period=p["period"],
            peak_lags=tuple(p["peak_lags"]),
            prominence=p["prominence"],
        )
    return ClassifiedFit(
        decay_class=DecayClass(d["decay_class"]),
        max_lag=d["max_lag"],
        threshold=d.get("threshold", DEFAULT_NOISE_THRESHOLD),
        power=_power_from_dict(d.get("power")),
        broken=broken,
        expo=expo,
        periodicity=periodicity,
        noise_crossing_d=d.get("noise_crossing_d"),
        crossing_low_confidence=d.get("crossing_low_confidence", False),
        curve_meta=d.get("curve_meta"),
    )


def write_fit_json(fit: ClassifiedFit, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(fit_to_dict(fit), f, indent=2, sort_keys=True)
        f.write("\n")


def read_fit_json(path) -> ClassifiedFit:
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise FitError(f"{path}: invalid fit JSON: {exc}") from exc
    try:
        return fit_from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise FitError(f"{path}: invalid fit document: {exc}") from exc
