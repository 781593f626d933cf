"""Stability analysis of the scalar linear delay equation.

The delay equation ``x'(t) = alpha*x(t) + beta*x(t - tau)`` has exponential
solutions ``exp(z*t/tau)`` whenever ``z`` solves the characteristic equation

    z - alpha' - beta' * exp(-z) = 0,      alpha' = alpha*tau, beta' = beta*tau.

Purely imaginary roots ``z = i*theta`` mark sustained oscillation.  Sweeping
``theta`` through ``(j*pi, (j+1)*pi)`` traces the boundary curve of branch
``j`` in the ``(alpha', beta')`` plane:

    alpha'(theta) = theta / tan(theta),    beta'(theta) = -theta / sin(theta).

General roots follow from the Lambert W function, ``z = alpha' +
W_k(beta' * exp(-alpha'))``, and are polished by Newton iteration so every
returned root satisfies the characteristic equation to ``ROOT_TOL``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import lambertw

from .errors import ConvergenceFailure, NoOscillation

ROOT_TOL = 1e-12
BOUNDARY_TOL = 1e-8
CURVE_RESIDUAL_TOL = 1e-10
_NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class StabilityCurve:
    """Samples of one pure-oscillation boundary curve.

    Attributes
    ----------
    branch : int
        Branch index ``j >= 0``; samples have ``theta`` in ``(j*pi, (j+1)*pi)``.
    theta, alpha_prime, beta_prime : ndarray
        Parallel arrays; each triple satisfies ``alpha' + beta'*cos(theta) = 0``
        and ``theta + beta'*sin(theta) = 0`` to within ``CURVE_RESIDUAL_TOL``.
    """

    branch: int
    theta: np.ndarray
    alpha_prime: np.ndarray
    beta_prime: np.ndarray

    def residuals(self) -> np.ndarray:
        """Max residual of the two boundary conditions at each sample."""
        r1 = np.abs(self.alpha_prime + self.beta_prime * np.cos(self.theta))
        r2 = np.abs(self.theta + self.beta_prime * np.sin(self.theta))
        return np.maximum(r1, r2)

    def to_csv(self, path) -> None:
        """Write samples as CSV with columns theta, alpha_prime, beta_prime."""
        from .series import write_csv

        rows = zip(self.theta, self.alpha_prime, self.beta_prime)
        write_csv(path, ("theta", "alpha_prime", "beta_prime"), rows)


@dataclass(frozen=True)
class CriticalDelay:
    """Smallest delay producing a purely imaginary characteristic root.

    ``omega_tau`` is the self-oscillation angular frequency at that delay;
    for real rates it equals ``sqrt(beta**2 - alpha**2)``.
    """

    tau_cr: float
    omega_tau: float


def characteristic_residual(z: complex, alpha_prime: complex, beta_prime: complex) -> float:
    """|z - alpha' - beta'*exp(-z)|."""
    return abs(z - alpha_prime - beta_prime * np.exp(-z))


def c_curve(j: int, n_samples: int) -> StabilityCurve:
    """Trace boundary curve ``C_j`` with ``n_samples`` points.

    Points are placed uniformly strictly inside the open interval
    ``(j*pi, (j+1)*pi)``; both endpoints are singular (``sin(theta) -> 0``).
    """
    if j < 0:
        raise ValueError("branch index must be >= 0")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    theta = j * np.pi + np.pi * (np.arange(1, n_samples + 1) / (n_samples + 1))
    alpha_prime = theta / np.tan(theta)
    beta_prime = -theta / np.sin(theta)
    return StabilityCurve(branch=j, theta=theta, alpha_prime=alpha_prime,
                          beta_prime=beta_prime)


def critical_delay(alpha: float, beta: float) -> CriticalDelay:
    """Critical delay and oscillation frequency for real rates.

    Solves for the smallest ``tau > 0`` such that ``x' = alpha*x + beta*x(t-tau)``
    has a purely imaginary characteristic root ``i*omega_tau*tau_cr``:

        omega_tau = sqrt(beta**2 - alpha**2)
        cos(omega_tau * tau_cr) = -alpha/beta,  sin(omega_tau * tau_cr) = -omega_tau/beta

    For ``beta < 0`` (the damped, negatively fed-back case) this reduces to
    ``tau_cr = arccos(-alpha/beta) / omega_tau``; for ``beta > 0`` the sine
    condition selects the complementary arc.

    Raises
    ------
    NoOscillation
        If ``|beta| <= |alpha|``; no delay yields pure oscillation.
    """
    alpha = float(alpha)
    beta = float(beta)
    if abs(beta) <= abs(alpha):
        raise NoOscillation(
            "no oscillatory delay exists for |beta|=%g <= |alpha|=%g"
            % (abs(beta), abs(alpha))
        )
    omega_tau = np.sqrt(beta * beta - alpha * alpha)
    theta0 = np.arccos(-alpha / beta)
    theta = theta0 if beta < 0 else 2.0 * np.pi - theta0
    return CriticalDelay(tau_cr=theta / omega_tau, omega_tau=omega_tau)


def _newton_polish(z0: complex, alpha_prime: complex, beta_prime: complex) -> complex:
    z = complex(z0)
    for _ in range(_NEWTON_MAX_ITER):
        g = z - alpha_prime - beta_prime * np.exp(-z)
        if abs(g) < ROOT_TOL:
            return z
        dg = 1.0 + beta_prime * np.exp(-z)
        if dg == 0:
            dg = 1e-30
        z = z - g / dg
    raise ConvergenceFailure(
        "Newton polish on characteristic root stalled at residual %.3e"
        % characteristic_residual(z, alpha_prime, beta_prime)
    )


def characteristic_roots(alpha_prime: complex, beta_prime: complex,
                         k_branches: int = 3) -> list[complex]:
    """Leading characteristic roots, sorted by descending real part.

    Seeds come from Lambert W branches ``k`` in ``[-k_branches, k_branches)``
    via ``z = alpha' + W_k(beta' * exp(-alpha'))`` and each seed is Newton
    polished until ``|z - alpha' - beta'*exp(-z)| < ROOT_TOL``.  Near-duplicate
    roots are merged.
    """
    if k_branches < 1:
        raise ValueError("k_branches must be >= 1")
    alpha_prime = complex(alpha_prime)
    beta_prime = complex(beta_prime)
    if beta_prime == 0:
        return [alpha_prime]
    w_arg = beta_prime * np.exp(-alpha_prime)
    roots: list[complex] = []
    for k in range(-k_branches, k_branches):
        seed = lambertw(w_arg, k)
        if not np.isfinite(seed):
            continue
        z = _newton_polish(alpha_prime + complex(seed), alpha_prime, beta_prime)
        if all(abs(z - r) > 1e-9 * max(1.0, abs(z)) for r in roots):
            roots.append(z)
    roots.sort(key=lambda r: -r.real)
    return roots


def classify_stability(alpha_prime: complex, beta_prime: complex,
                       tol: float = BOUNDARY_TOL) -> str:
    """Classify a parameter point by the sign of the leading root's real part.

    Returns one of ``"stable"``, ``"oscillatory_boundary"``, ``"unstable"``.
    """
    roots = characteristic_roots(alpha_prime, beta_prime, k_branches=3)
    lead = max(r.real for r in roots)
    if abs(lead) <= tol:
        return "oscillatory_boundary"
    return "stable" if lead < 0 else "unstable"
