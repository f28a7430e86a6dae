"""Dilation schedules and grid-search specs derived from a classified decay fit.

The curve-fitted construction places layer levels equidistant in log MI
between the fitted MI at lag 1 and at the target max dilation, then reads the
lag at which the fitted (piecewise) power law attains each level. A steeper
segment therefore receives denser dilations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .fit import (
    BrokenPowerLawFit,
    ClassifiedFit,
    DecayClass,
    PowerLawFit,
    fit_from_dict,
    fit_to_dict,
)

GRID_FORMAT_VERSION = 1

ORIGIN_STANDARD = "standard"
ORIGIN_CURVE_FITTED = "curve_fitted"


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class DilationSchedule:
    dilations: tuple[int, ...]
    origin: str
    rationale: str = ""

    def __post_init__(self):
        dil = tuple(int(v) for v in self.dilations)
        if not dil:
            raise ValueError("schedule must contain at least one dilation")
        if dil[0] != 1:
            raise ValueError("first dilation must be 1")
        if any(b <= a for a, b in zip(dil, dil[1:])):
            raise ValueError("dilations must be strictly increasing")
        if self.origin not in (ORIGIN_STANDARD, ORIGIN_CURVE_FITTED):
            raise ValueError(f"unknown origin {self.origin!r}")
        object.__setattr__(self, "dilations", dil)

    @property
    def n_layers(self) -> int:
        return len(self.dilations)

    @property
    def max_dilation(self) -> int:
        return self.dilations[-1]


@dataclass(frozen=True)
class ScheduleConfig:
    n_layers: int = 1
    mi_threshold: float = 1e-5
    layer_sweep: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if self.mi_threshold <= 0:
            raise ValueError("mi_threshold must be > 0")
        object.__setattr__(self, "layer_sweep", tuple(int(n) for n in self.layer_sweep))
        if any(n < 1 for n in self.layer_sweep):
            raise ValueError("layer_sweep entries must be >= 1")


@dataclass(frozen=True)
class MaxDilation:
    value: int
    is_lower_bound: bool = False


@dataclass
class GridSearchSpec:
    schedules: list[DilationSchedule]
    evidence: ClassifiedFit
    dataset_meta: str = ""
    max_dilation: MaxDilation = field(default_factory=lambda: MaxDilation(1))

    def __post_init__(self):
        if not self.schedules:
            raise ValueError("grid must contain at least one schedule")
        seen = set()
        for s in self.schedules:
            if s.dilations in seen:
                raise ValueError(f"duplicate schedule {s.dilations}")
            seen.add(s.dilations)


def max_dilation(fit: ClassifiedFit, config: ScheduleConfig | None = None) -> MaxDilation:
    """Target for the largest dilation: the peak period for periodic decay,
    else the lag where MI drops below the noise threshold for good; when the
    curve never crossed, the largest sampled lag is returned as a lower bound.
    """
    if fit.decay_class is DecayClass.POWER_LAW_PERIODIC:
        return MaxDilation(fit.periodicity.period, is_lower_bound=False)
    if fit.noise_crossing_d is not None:
        return MaxDilation(int(fit.noise_crossing_d), is_lower_bound=False)
    return MaxDilation(int(fit.max_lag), is_lower_bound=True)


def standard_dilations(n_layers: int) -> DilationSchedule:
    """The usual doubling progression 1, 2, 4, ..., 2^(n_layers-1)."""
    if n_layers < 1:
        raise ScheduleError("n_layers must be >= 1")
    return DilationSchedule(
        dilations=tuple(2**i for i in range(n_layers)),
        origin=ORIGIN_STANDARD,
        rationale=f"standard doubling progression, {n_layers} layers",
    )


def capped_standard_dilations(n_layers: int, d_max: int) -> DilationSchedule:
    """Doubling progression whose last dilation is clamped to d_max.

    Powers of two >= d_max are dropped and d_max terminates the schedule, so
    the layer count may come out below n_layers.
    """
    if n_layers < 1:
        raise ScheduleError("n_layers must be >= 1")
    if d_max < 1:
        raise ScheduleError("d_max must be >= 1")
    powers = [2**i for i in range(n_layers)]
    if powers[-1] <= d_max:
        return standard_dilations(n_layers)
    kept = [p for p in powers if p < d_max]
    return DilationSchedule(
        dilations=tuple(kept + [d_max]),
        origin=ORIGIN_STANDARD,
        rationale=f"standard progression capped at max dilation {d_max}",
    )


class _PiecewisePowerModel:
    """Monotone decreasing piecewise power law used to solve MI levels for lags."""

    def __init__(self, segments: list[tuple[float, float, float, float]]):
        # segments: (d_lo, d_hi, slope, log_intercept), contiguous, slopes < 0
        self.segments = segments

    @classmethod
    def from_fit(cls, fit: ClassifiedFit, d_max: int) -> "_PiecewisePowerModel":
        if fit.broken is not None:
            b = float(fit.broken.break_d)
            left, right = fit.broken.left, fit.broken.right
            if left.slope >= 0 or right.slope >= 0:
                raise ScheduleError("broken fit has a non-decaying segment")
            if d_max <= b:  # break beyond the target: only the left segment matters
                return cls([(1.0, float(d_max), left.slope, left.log_intercept)])
            return cls(
                [
                    (1.0, b, left.slope, left.log_intercept),
                    (b, float(d_max), right.slope, right.log_intercept),
                ]
            )
        if fit.power is not None:
            if fit.power.slope >= 0:
                raise ScheduleError("power-law fit is non-decaying (slope >= 0)")
            return cls([(1.0, float(d_max), fit.power.slope, fit.power.log_intercept)])
        raise ScheduleError(
            f"{fit.decay_class.value} fit carries no power-law model to invert"
        )

    def log_mi(self, d: float) -> float:
        for _, d_hi, slope, intercept in self.segments:
            if d <= d_hi:
                return intercept + slope * math.log(d)
        _, _, slope, intercept = self.segments[-1]
        return intercept + slope * math.log(d)

    def solve(self, level: float) -> float:
        """Lag at which the model attains the given log-MI level.

        Levels falling inside a discontinuity at a segment joint map to the
        joint lag itself.
        """
        for i, (d_lo, d_hi, slope, intercept) in enumerate(self.segments):
            top = intercept + slope * math.log(d_lo)
            bottom = intercept + slope * math.log(d_hi)
            if level > top and i == 0:
                return d_lo
            if level >= bottom:
                d = math.exp((level - intercept) / slope)
                return min(max(d, d_lo), d_hi)
            if i + 1 < len(self.segments):
                nxt = self.segments[i + 1]
                nxt_top = nxt[3] + nxt[2] * math.log(nxt[0])
                if level > nxt_top:
                    return d_hi  # joint lag absorbs the discontinuity gap
        return self.segments[-1][1]


def _integerize(targets: list[float], d_max: int) -> list[int]:
    """Round nondecreasing targets to strictly increasing ints in [1, d_max].

    Duplicates after rounding are bumped to the next unused larger integer; a
    backward pass keeps everything at or below d_max (feasible because the
    layer count never exceeds d_max).
    """
    out = []
    prev = 0
    for t in targets:
        v = max(int(round(t)), prev + 1, 1)
        out.append(v)
        prev = v
    out[-1] = d_max
    for i in range(len(out) - 2, -1, -1):
        out[i] = min(out[i], out[i + 1] - 1)
    return out


def intercept_dilations(fit: ClassifiedFit, n_layers: int, d_max: int) -> DilationSchedule:
    """Curve-fitted schedule: n_layers log-MI levels from the fitted MI at
    lag 1 down to the fitted MI at d_max, each solved for its lag on the
    fitted (piecewise) power law.

    On a single power law the construction reduces to a geometric progression
    from 1 to d_max regardless of the slope value.
    """
    if n_layers < 2:
        raise ScheduleError("intercept schedules need n_layers >= 2")
    if d_max < 1:
        raise ScheduleError("d_max must be >= 1")
    if n_layers > d_max:
        raise ScheduleError(
            f"cannot fit {n_layers} strictly increasing dilations into [1, {d_max}]"
        )
    model = _PiecewisePowerModel.from_fit(fit, d_max)
    top = model.log_mi(1.0)
    bottom = model.log_mi(float(d_max))
    if bottom >= top:
        raise ScheduleError("fitted model does not decay between 1 and d_max")
    step = (bottom - top) / (n_layers - 1)
    targets = [model.solve(top + k * step) for k in range(n_layers)]
    dilations = _integerize(targets, d_max)
    return DilationSchedule(
        dilations=tuple(dilations),
        origin=ORIGIN_CURVE_FITTED,
        rationale=(
            f"{n_layers} log-MI levels solved on the fitted "
            f"{'broken ' if fit.broken else ''}power law, max dilation {d_max}"
        ),
    )


def _hybrid_dense_then_standard(break_d: int, d_max: int) -> DilationSchedule:
    dil = list(range(1, min(break_d, d_max) + 1))
    v = dil[-1] * 2
    while v < d_max:
        dil.append(v)
        v *= 2
    if dil[-1] < d_max:
        dil.append(d_max)
    return DilationSchedule(
        dilations=tuple(dil),
        origin=ORIGIN_CURVE_FITTED,
        rationale=f"unit steps up to the break at {break_d}, then doubling to {d_max}",
    )


def _hybrid_standard_then_sparse(break_d: int, d_max: int) -> DilationSchedule:
    head = [1]
    while head[-1] * 2 <= break_d:
        head.append(head[-1] * 2)
    h = head[-1]
    if d_max <= h:
        dil = [p for p in head if p < d_max] + [d_max] if d_max > 1 else [1]
        return DilationSchedule(
            dilations=tuple(dil),
            origin=ORIGIN_CURVE_FITTED,
            rationale=f"standard head capped at {d_max}",
        )
    steps = max(1, math.ceil(math.log2(d_max / h) / 2))
    ratio = (d_max / h) ** (1.0 / steps)
    targets = [float(v) for v in head] + [h * ratio**j for j in range(1, steps + 1)]
    dil = _integerize(targets, d_max)
    return DilationSchedule(
        dilations=tuple(dil),
        origin=ORIGIN_CURVE_FITTED,
        rationale=(
            f"standard steps to the break at {break_d}, then sparse "
            f"geometric steps to {d_max}"
        ),
    )


def build_grid(fit: ClassifiedFit, config: ScheduleConfig) -> GridSearchSpec:
    """Candidate schedule family for a grid search.

    Standard schedules cover every layer count in the sweep (capped at the max
    dilation for exponential decay, which gets no curve-fitted schedules);
    decaying power-law fits additionally contribute curve-fitted schedules,
    and broken fits the two hybrid patterns. Duplicates are dropped, keeping
    first occurrence.
    """
    if not config.layer_sweep:
        raise ScheduleError("layer_sweep must be nonempty")
    md = max_dilation(fit, config)
    schedules: list[DilationSchedule] = []

    if fit.decay_class is DecayClass.EXPONENTIAL:
        for n in config.layer_sweep:
            schedules.append(capped_standard_dilations(n, md.value))
    else:
        for n in config.layer_sweep:
            schedules.append(standard_dilations(n))
        for n in config.layer_sweep:
            if n < 2 or n > md.value:
                continue
            try:
                schedules.append(intercept_dilations(fit, n, md.value))
            except ScheduleError:
                continue  # non-decaying model: standards remain the grid
        if fit.broken is not None:
            schedules.append(_hybrid_dense_then_standard(fit.broken.break_d, md.value))
            schedules.append(_hybrid_standard_then_sparse(fit.broken.break_d, md.value))

    unique: list[DilationSchedule] = []
    seen = set()
    for s in schedules:
        if s.dilations not in seen:
            seen.add(s.dilations)
            unique.append(s)
    dataset_meta = ""
    if fit.curve_meta:
        dataset_meta = str(fit.curve_meta.get("source_meta", ""))
    return GridSearchSpec(
        schedules=unique, evidence=fit, dataset_meta=dataset_meta, max_dilation=md
    )


def grid_to_dict(spec: GridSearchSpec) -> dict:
    return {
        "format_version": GRID_FORMAT_VERSION,
        "dataset_meta": spec.dataset_meta,
        "decay_class": spec.evidence.decay_class.value,
        "max_dilation": spec.max_dilation.value,
        "max_dilation_is_lower_bound": spec.max_dilation.is_lower_bound,
        "evidence": fit_to_dict(spec.evidence),
        "schedules": [
            {
                "dilations": list(s.dilations),
                "origin": s.origin,
                "rationale": s.rationale,
            }
            for s in spec.schedules
        ],
    }


def grid_from_dict(d: dict) -> GridSearchSpec:
    if d.get("format_version") != GRID_FORMAT_VERSION:
        raise ScheduleError(f"unsupported grid format_version {d.get('format_version')!r}")
    return GridSearchSpec(
        schedules=[
            DilationSchedule(
                dilations=tuple(s["dilations"]),
                origin=s["origin"],
                rationale=s.get("rationale", ""),
            )
            for s in d["schedules"]
        ],
        evidence=fit_from_dict(d["evidence"]),
        dataset_meta=d.get("dataset_meta", ""),
        max_dilation=MaxDilation(
            value=d["max_dilation"],
            is_lower_bound=d.get("max_dilation_is_lower_bound", False),
        ),
    )


def write_grid_json(spec: GridSearchSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(grid_to_dict(spec), f, indent=2, sort_keys=True)
        f.write("\n")


def read_grid_json(path) -> GridSearchSpec:
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ScheduleError(f"{path}: invalid grid JSON: {exc}") from exc
    try:
        return grid_from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScheduleError(f"{path}: invalid grid document: {exc}") from exc
