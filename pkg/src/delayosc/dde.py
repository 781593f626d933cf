"""Method-of-steps integrator for scalar delay differential equations.

Integrates

    x'(t) = (i*omega + alpha) * x(t) + beta * x(t - tau) - gamma_non * x(t)**3

interval by interval: on ``[m*tau, (m+1)*tau]`` the delayed argument is a
known function (the stored previous segment, or the history for ``m = 0``),
so each interval is an ordinary ODE solved with fixed-step classical RK4.
Delayed values at half-steps come from 4-point cubic interpolation of the
stored segment, which preserves the scheme's 4th order.

The step is snapped to an integer divisor of ``tau`` so that segment grids
line up; within an interval the delayed argument is taken from the previous
segment including its endpoints (the left-limit convention of the method of
steps, so e.g. with zero history the first interval never sees ``x0``
through the delay term).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteValue
from .series import write_csv

OVERFLOW_LIMIT = 1e12

# 4-point Lagrange weights for interpolation at the midpoint of the central
# pair of a uniform stencil, and at the midpoint of the first/last pair.
_MID_W = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0
_EDGE_W_LEFT = np.array([5.0, 15.0, -5.0, 1.0]) / 16.0
_EDGE_W_RIGHT = _EDGE_W_LEFT[::-1].copy()


@dataclass(frozen=True)
class HistorySpec:
    """Value of x(t) for t < 0.

    ``kind`` is one of ``"zero"``, ``"constant"`` or ``"exponential"``.
    A constant history holds ``value``.  An exponential history is
    ``amplitude * exp(rate * t)`` with ``Re(rate) >= 0`` (non-growing into
    the past); ``amplitude=None`` means "use the problem's x0", which gives
    a history continuous with the initial value.  Complex rates arise from
    the detuning rescaling and encode a frame rotation on top of the decay.
    """

    kind: str = "zero"
    value: complex = 0.0
    rate: complex = 0.0
    amplitude: complex | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "exponential"):
            raise ValueError("unknown history kind %r" % (self.kind,))
        if self.kind == "exponential" and complex(self.rate).real < 0:
            raise ValueError("exponential history must not grow into the past")

    @staticmethod
    def zero() -> "HistorySpec":
        return HistorySpec("zero")

    @staticmethod
    def constant(value: complex) -> "HistorySpec":
        return HistorySpec("constant", value=value)

    @staticmethod
    def exponential(rate: complex, amplitude: complex | None = None) -> "HistorySpec":
        return HistorySpec("exponential", rate=rate, amplitude=amplitude)

    def __call__(self, t, x0: complex):
        """Evaluate the history at time(s) t <= 0."""
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros(t.shape, complex) if t.shape else 0j
        if self.kind == "constant":
            return np.full(t.shape, complex(self.value)) if t.shape \
                else complex(self.value)
        amp = complex(x0) if self.amplitude is None else complex(self.amplitude)
        return amp * np.exp(complex(self.rate) * t)


@dataclass(frozen=True)
class DdeProblem:
    """One delay-equation integration task.

    Rates are per unit time; ``tau`` is the delay, ``horizon`` the final
    time, ``dt`` the requested step (snapped internally to divide ``tau``).
    """

    alpha: complex
    beta: complex
    tau: float
    x0: complex
    horizon: float
    dt: float
    omega: float = 0.0
    gamma_non: float = 0.0
    history: HistorySpec = field(default_factory=HistorySpec.zero)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.dt > self.tau * (1 + 1e-12):
            raise ValueError("dt must be <= tau (method of steps needs at "
                             "least one step per delay interval)")
        if self.gamma_non < 0:
            raise ValueError("gamma_non must be >= 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")

    @property
    def steps_per_interval(self) -> int:
        return max(1, int(round(self.tau / self.dt)))

    @property
    def dt_effective(self) -> float:
        return self.tau / self.steps_per_interval


@dataclass
class Trajectory:
    """Uniformly sampled solution. times[0] = 0; spacing = dt_effective."""

    times: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def at_end(self) -> complex:
        return complex(self.values[-1])

    def to_csv(self, path) -> None:
        """Columns: t, re_x, im_x."""
        rows = zip(self.times, self.values.real, self.values.imag)
        write_csv(path, ("t", "re_x", "im_x"), rows)


def _segment_midpoints(seg: np.ndarray) -> np.ndarray:
    """Values at all pair midpoints of a uniformly sampled segment.

    Uses 4-point cubic stencils (one-sided at the ends); degenerates to
    quadratic/linear interpolation when the segment has fewer than 4 points.
    """
    n_mid = len(seg) - 1
    mids = np.empty(n_mid, complex)
    if len(seg) < 4:
        if len(seg) == 3:
            mids[0] = 0.375 * seg[0] + 0.75 * seg[1] - 0.125 * seg[2]
            mids[1] = -0.125 * seg[0] + 0.75 * seg[1] + 0.375 * seg[2]
        else:
            mids[:] = 0.5 * (seg[:-1] + seg[1:])
        return mids
    mids[1:-1] = (-seg[0:n_mid - 2] + 9.0 * seg[1:n_mid - 1]
                  + 9.0 * seg[2:n_mid] - seg[3:n_mid + 1]) / 16.0
    mids[0] = _EDGE_W_LEFT @ seg[0:4]
    mids[-1] = _EDGE_W_RIGHT @ seg[-4:]
    return mids


def integrate_dde(problem: DdeProblem) -> Trajectory:
    """Integrate the problem and return the sampled solution.

    The trajectory is sampled at every effective step from 0 up to the first
    grid time reaching ``horizon`` (so it ends within one step of it).  The
    result is deterministic; for ``gamma_non = 0``, ``omega = 0`` and real
    inputs the imaginary part stays at round-off level.

    Raises
    ------
    NonFiniteValue
        If ``|x|`` exceeds ``OVERFLOW_LIMIT`` or turns non-finite (divergent
        regime); the exception carries the first offending time.
    """
    n_per = problem.steps_per_interval
    h = problem.dt_effective
    n_total = max(1, int(np.ceil(problem.horizon / h - 1e-9)))
    lin = complex(problem.alpha) + 1j * problem.omega
    beta = complex(problem.beta)
    gnon = float(problem.gamma_non)
    x0 = complex(problem.x0)

    def f(x, xd):
        if gnon == 0.0:
            return lin * x + beta * xd
        return lin * x + beta * xd - gnon * x * x * x

    values = np.empty(n_total + 1, complex)
    values[0] = x0

    # Delayed samples for interval m live on the grid of segment m-1 at
    # integer and half-integer offsets; build them per interval.
    step = 0
    m = 0
    x = x0
    while step < n_total:
        seg_start = m * n_per
        if m == 0:
            t_hist = -problem.tau + h * np.arange(n_per + 1)
            grid = np.asarray(problem.history(t_hist, x0), complex)
            mids = np.asarray(problem.history(t_hist[:-1] + 0.5 * h, x0), complex)
        else:
            prev = values[(m - 1) * n_per: m * n_per + 1]
            grid = prev
            mids = _segment_midpoints(prev)

        n_here = min(n_per, n_total - step)
        for i in range(n_here):
            k1 = f(x, grid[i])
            k2 = f(x + 0.5 * h * k1, mids[i])
            k3 = f(x + 0.5 * h * k2, mids[i])
            k4 = f(x + h * k3, grid[i + 1])
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            step += 1
            values[step] = x
            if not np.isfinite(x.real) or not np.isfinite(x.imag) \
                    or abs(x) > OVERFLOW_LIMIT:
                raise NonFiniteValue(
                    "solution overflowed at t=%g (|x|=%g)" % (step * h, abs(x)),
                    time=step * h)
        m += 1

    times = h * np.arange(n_total + 1)
    return Trajectory(times=times, values=values)


def rescale_detuned(problem: DdeProblem) -> DdeProblem:
    """Remove the detuning by rotating into the co-moving frame.

    Returns an equivalent problem with ``omega = 0`` and ``beta`` replaced by
    ``beta * exp(-i*omega*tau)``; multiplying its trajectory pointwise by
    ``exp(i*omega*t)`` recovers the original solution.  The history is
    rotated along: a constant history becomes an exponential one with purely
    imaginary rate, an exponential history keeps its decay and gains the
    frame rotation.
    """
    if problem.omega == 0.0:
        return problem
    w = float(problem.omega)
    beta2 = complex(problem.beta) * np.exp(-1j * w * problem.tau)
    hist = problem.history
    if hist.kind == "zero":
        hist2 = hist
    elif hist.kind == "constant":
        hist2 = HistorySpec.exponential(rate=-1j * w, amplitude=hist.value)
    else:
        amp = problem.x0 if hist.amplitude is None else hist.amplitude
        hist2 = HistorySpec.exponential(rate=complex(hist.rate) - 1j * w,
                                        amplitude=amp)
    return DdeProblem(alpha=problem.alpha, beta=beta2, tau=problem.tau,
                      x0=problem.x0, horizon=problem.horizon, dt=problem.dt,
                      omega=0.0, gamma_non=problem.gamma_non, history=hist2)
