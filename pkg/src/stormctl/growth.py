"""Broadcast storm build-up model.

A storm's packet transmission rate (PTR) over time is modeled as

    P(t) = a*t + b*t*exp(m*t)

with coefficients derived from the normal and peak traffic rates:

    a = 2*pi*(Pe - Ps) / m
    b = 2*pi*Ps

where Ps is the start-of-interval rate (packets per interval), Pe the
safe threshold rate, and m the growth constant (1/ms).  Time is in
milliseconds throughout.  P(0) == 0 exactly by construction.

`fit_model` recovers (Ps, Pe, m) from an observed trace by searching a
fixed grid over m (the only nonlinear parameter), solving the remaining
linear coefficients exactly at each step, then refining m by
golden-section.  The procedure is fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

TAU = math.tau  # 2*pi

# fit search grid (1/ms); declared constants so runs are reproducible
FIT_M_MIN = 0.05
FIT_M_MAX = 10.0
FIT_M_STEP = 0.05
FIT_REFINE_ITERS = 80

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class FitError(ValueError):
    """Raised when a trace cannot be fitted."""


class TracePoint(NamedTuple):
    t: float      # ms
    count: float  # packets observed in the interval ending at t


@dataclass(frozen=True)
class PtrModelParams:
    """Growth-curve parameters; a and b are derived, not free."""

    p_start: float  # Ps, packets per interval at t=0
    p_end: float    # Pe, safe threshold rate
    m: float        # growth constant, 1/ms
    a: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self) -> None:
        if self.m == 0:
            raise ValueError("growth constant m must be nonzero")
        if self.p_start < 0 or self.p_end < 0:
            raise ValueError("rates must be nonnegative")
        object.__setattr__(self, "a", TAU * (self.p_end - self.p_start) / self.m)
        object.__setattr__(self, "b", TAU * self.p_start)


@dataclass(frozen=True)
class PtrArray:
    """Sampled PTR curve: values[k] is the rate at t_start + k*step."""

    t_start: float       # ms
    step: float          # ms
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValueError("step must be positive")
        if not self.values:
            raise ValueError("values must be non-empty")

    def __len__(self) -> int:
        return len(self.values)

    def t_at(self, k: int) -> float:
        return self.t_start + k * self.step


class FitResult(NamedTuple):
    params: PtrModelParams
    rmse: float


def make_params(p_start: float, p_end: float, m: float) -> PtrModelParams:
    """Build model parameters, deriving a and b from (Ps, Pe, m)."""
    return PtrModelParams(p_start=p_start, p_end=p_end, m=m)


def eval_ptr(params: PtrModelParams, t: float) -> float:
    """Instantaneous PTR at time t (ms).  t must be nonnegative."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return params.a * t + params.b * t * math.exp(params.m * t)


def build_ptr_array(
    params: PtrModelParams,
    t_start: float,
    t_end: float,
    step: float = 1.0,
) -> PtrArray:
    """Sample the curve on [t_start, t_end] at the given step.

    Values are clamped to [0, p_end]: the array is a packet-rate plan, so
    it never dips below zero (a fit with p_start > p_end starts negative)
    and never runs past the threshold rate.  t_end == t_start yields one
    sample.
    """
    if t_start < 0:
        raise ValueError("t_start must be nonnegative")
    if t_end < t_start:
        raise ValueError(f"empty range: t_end {t_end} < t_start {t_start}")
    if step <= 0:
        raise ValueError("step must be positive")
    n = int((t_end - t_start) / step + 1e-9) + 1
    values = tuple(
        max(0.0, min(eval_ptr(params, t_start + k * step), params.p_end))
        for k in range(n)
    )
    return PtrArray(t_start=t_start, step=step, values=values)


def rise_segment(trace: Sequence[TracePoint]) -> list[TracePoint]:
    """The build-up portion of a trace: everything up to the first peak."""
    peak = max(range(len(trace)), key=lambda i: (trace[i].count, -i))
    return list(trace[: peak + 1])


def _as_points(trace: Iterable) -> list[TracePoint]:
    return [TracePoint(float(t), float(c)) for t, c in trace]


def _solve_coeffs(m: float, ts: Sequence[float], ys: Sequence[float]):
    """Least-squares (a, b) for fixed m, honoring Ps >= 0 and Pe >= 0.

    Returns (a, b, rmse).  Uses explicit normal equations so results do
    not depend on any linear-algebra backend.
    """
    n = len(ts)
    gs = [t * math.exp(m * t) for t in ts]
    s_tt = sum(t * t for t in ts)
    s_gg = sum(g * g for g in gs)
    s_tg = sum(t * g for t, g in zip(ts, gs))
    s_ty = sum(t * y for t, y in zip(ts, ys))
    s_gy = sum(g * y for g, y in zip(gs, ys))

    def rmse_of(a: float, b: float) -> float:
        acc = 0.0
        for t, g, y in zip(ts, gs, ys):
            r = a * t + b * g - y
            acc += r * r
        return math.sqrt(acc / n)

    det = s_tt * s_gg - s_tg * s_tg
    if det > 0:
        a = (s_ty * s_gg - s_gy * s_tg) / det
        b = (s_gy * s_tt - s_ty * s_tg) / det
        # Ps = b/tau, Pe = Ps + a*m/tau
        if b >= 0 and b + a * m >= 0:
            return a, b, rmse_of(a, b)

    candidates = []
    # boundary Ps = 0: pure linear term, need Pe >= 0 i.e. a >= 0
    if s_tt > 0:
        a0 = max(s_ty / s_tt, 0.0)
        candidates.append((a0, 0.0))
    # boundary Pe = 0: a = -b/m, basis h = t*exp(m*t) - t/m
    s_hh = s_gg - 2 * s_tg / m + s_tt / (m * m)
    s_hy = s_gy - s_ty / m
    if s_hh > 0:
        b0 = max(s_hy / s_hh, 0.0)
        candidates.append((-b0 / m, b0))
    candidates.append((0.0, 0.0))
    return min(
        ((a, b, rmse_of(a, b)) for a, b in candidates), key=lambda c: c[2]
    )


def fit_model(trace: Iterable) -> FitResult:
    """Fit (Ps, Pe, m) to a trace, minimizing RMSE over its rise segment.

    The trace is (t, count) pairs with strictly increasing t.  A leading
    (0, 0) point is prepended when absent.  Deterministic: the same
    input always produces bitwise-identical parameters.
    """
    points = _as_points(trace)
    if any(b.t <= a.t for a, b in zip(points, points[1:])):
        raise FitError("trace times must be strictly increasing")
    if points and points[0].t > 0:
        points.insert(0, TracePoint(0.0, 0.0))
    rise = rise_segment(points) if points else []
    if len(rise) < 4:
        raise FitError(f"need at least 4 points in the rise, got {len(rise)}")
    peak = rise[-1].count
    if peak <= 0:
        raise FitError("trace shows no growth to fit")

    ts = [p.t for p in rise]
    ys = [p.count for p in rise]

    best_m, best = None, None
    steps = int(round((FIT_M_MAX - FIT_M_MIN) / FIT_M_STEP))
    for i in range(steps + 1):
        m = FIT_M_MIN + i * FIT_M_STEP
        sol = _solve_coeffs(m, ts, ys)
        if best is None or sol[2] < best[2]:
            best_m, best = m, sol

    # golden-section refinement of m around the best grid cell
    lo = max(best_m - FIT_M_STEP, FIT_M_MIN / 2)
    hi = best_m + FIT_M_STEP
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc = _solve_coeffs(c, ts, ys)
    fd = _solve_coeffs(d, ts, ys)
    for _ in range(FIT_REFINE_ITERS):
        if fc[2] < fd[2]:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = _solve_coeffs(c, ts, ys)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = _solve_coeffs(d, ts, ys)
    for m, sol in ((c, fc), (d, fd)):
        if sol[2] < best[2]:
            best_m, best = m, sol

    a, b, rmse = best
    p_start = b / TAU
    p_end = max(p_start + a * best_m / TAU, 0.0)
    return FitResult(make_params(p_start, p_end, best_m), rmse)
