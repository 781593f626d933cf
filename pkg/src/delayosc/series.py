"""Sampled trajectories and deterministic CSV output.

All CSV written by the toolkit uses 12 significant digits, ``.`` as the
decimal separator and ``\\n`` line endings, so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def fmt(value) -> str:
    """Format one number with 12 significant digits."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def write_csv(path, header, rows) -> None:
    """Write rows of numbers under a header, deterministically."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


@dataclass
class TimeSeries:
    """Observables of the current cavity mode sampled on a uniform grid.

    Attributes
    ----------
    t : ndarray of float
        Sample times, strictly increasing, starting at 0.
    a : ndarray of complex
        Mean field amplitude of the current mode.
    n : ndarray of float
        Mean photon number of the current mode.
    dx, dp : ndarray of float
        Quadrature standard deviations (conventions: X = (a + a^dag)/sqrt(2),
        P = -i (a - a^dag)/sqrt(2); the vacuum gives 1/sqrt(2) for both).
    interval : ndarray of int
        Delay-interval index m with t in [m*tau, (m+1)*tau).
    """

    t: np.ndarray
    a: np.ndarray
    n: np.ndarray
    dx: np.ndarray
    dp: np.ndarray
    interval: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, path) -> None:
        """Columns: t, re_a, im_a, n, dX, dP, interval_index."""
        rows = zip(self.t, self.a.real, self.a.imag, self.n, self.dx, self.dp,
                   self.interval)
        write_csv(path, ("t", "re_a", "im_a", "n", "dX", "dP", "interval_index"),
                  rows)

    @staticmethod
    def from_arrays(t, a, n, dx, dp, interval) -> "TimeSeries":
        return TimeSeries(np.asarray(t, float), np.asarray(a, complex),
                          np.asarray(n, float), np.asarray(dx, float),
                          np.asarray(dp, float), np.asarray(interval, int))
