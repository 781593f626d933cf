"""Piecewise master equation of the delayed cavity on a cascaded mode chain.

Time delay is unrolled into a chain of cavity copies: during interval
``t in [m*tau, (m+1)*tau]`` the chain holds modes 0..m where mode ``j``
re-lives the cavity's history with lag ``j*tau`` (mode 0 is the cavity
itself, the "current" system).  Each copy is damped through both mirrors,
driven by amplifier noise, and unidirectionally driven by the copy of one
larger lag, so the delayed output cascades down the chain into the current
mode.  A boundary adds a fresh copy at the largest lag, initialized to the
single-mode initial state; because nothing couples into it before its
interval starts, growing at boundaries is equivalent to allocating the full
product chain up front (tested against that directly).

Tensor slots equal lag indices: slot 0 is the current mode forever, the
fresh mode joins as the last kron factor.

The evolution engine applies the Liouvillian matrix-free: every term is a
small single-mode matrix acting on one axis of the density tensor, executed
as batched matmuls.  The RK4 substep comes from a per-interval estimate of
the generator's spectral radius (the stiffness is set by the most damped
Fock corner, not by the populated dynamics), with a divergence guard that
redoes an interval at a halved step if the estimate was marginal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, DimensionMismatch, NonFiniteValue
from .fock import (
    DensityMatrix,
    ModeChain,
    SuperOperator,
    coupling_term,
    destroy,
    dissipator,
    hamiltonian_term,
    mode_moments,
    mode_op,
)
from .series import TimeSeries

DEFAULT_BUDGET_BYTES = 4 * 1024 ** 3
BUFFER_FACTOR = 12          # engine working set, in units of one dim^2 array
RK4_REAL_AXIS = 2.785       # RK4 stability interval on the negative real axis
STABILITY_MARGIN = 0.85

NOISE_CONSTANT = "constant"          # same occupation for every chain member
NOISE_COMPOUNDING = "compounding"    # occupation grows with amplification stage


@dataclass(frozen=True)
class CascadeParams:
    """Physical parameters of one delayed-feedback cavity scenario.

    ``kappa1``/``kappa2`` are the two mirror decay rates, ``gain`` the
    amplifier power gain (>= 1), ``phi`` the feedback phase, ``omega`` the
    cavity detuning, ``gamma_non`` the two-photon absorption rate and
    ``tau`` the loop delay.  ``nbar_input`` / ``nbar_amp`` are the thermal
    occupations of the seed input field and of the amplifier's internal
    noise mode.
    """

    kappa1: float
    kappa2: float
    gain: float
    tau: float
    phi: float = 0.0
    omega: float = 0.0
    gamma_non: float = 0.0
    nbar_input: float = 0.0
    nbar_amp: float = 0.0
    noise_model: str = NOISE_CONSTANT

    def __post_init__(self):
        if self.kappa1 <= 0 or self.kappa2 < 0:
            raise ValueError("mirror rates must be positive (kappa2 may be 0)")
        if self.gain < 1:
            raise ValueError("gain must be >= 1 (amplifier)")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.gamma_non < 0 or self.nbar_input < 0 or self.nbar_amp < 0:
            raise ValueError("rates and occupations must be >= 0")
        if self.noise_model not in (NOISE_CONSTANT, NOISE_COMPOUNDING):
            raise ValueError("unknown noise model %r" % (self.noise_model,))

    @property
    def kappa(self) -> float:
        """Average cavity decay (kappa1 + kappa2) / 2; derived, not stored."""
        return 0.5 * (self.kappa1 + self.kappa2)

    @property
    def feedback_strength(self) -> complex:
        """exp(i*phi) * sqrt(gain * kappa1 * kappa2)."""
        return np.exp(1j * self.phi) * math.sqrt(
            self.gain * self.kappa1 * self.kappa2)

    def dde_rates(self):
        """(alpha, beta) of the matching mean-field delay equation."""
        return 1j * self.omega - self.kappa, -self.feedback_strength


def nbar_schedule(params: CascadeParams, j: int, m: int) -> float:
    """Effective input occupation for the lag-``j`` mode during interval ``m``.

    The lag-``j`` copy is amplification stage ``m - j + 1`` of the cascade
    (the current mode's signal has passed the most amplifiers).  In the
    compounding model the occupation grows geometrically with the stage,
    ``G**s * nbar_input + (G**s - 1) * (nbar_amp + 1)``; the constant model
    assigns every member the stage-1 value, which reduces to ``G - 1`` for
    vacuum inputs.
    """
    if not 0 <= j <= m:
        raise ValueError("need 0 <= j <= m")
    g = params.gain
    if params.noise_model == NOISE_CONSTANT:
        gs = g
    else:
        gs = g ** (m - j + 1)
    return gs * params.nbar_input + (gs - 1.0) * (params.nbar_amp + 1.0)


# ---------------------------------------------------------------------------
# term descriptions (shared vocabulary with the moment engine)


@dataclass(frozen=True)
class DissipatorTerm:
    mode: int
    op: str          # "a", "adag" or "aa"
    rate: float


@dataclass(frozen=True)
class CouplingTerm:
    j_from: int      # driver (larger lag)
    j_to: int        # driven
    strength: complex


@dataclass(frozen=True)
class DetuningTerm:
    mode: int
    omega: float     # Hamiltonian -omega * n_mode


def interval_terms(params: CascadeParams, m: int) -> list:
    """Generator terms active during interval ``m`` (modes 0..m)."""
    if m < 0:
        raise ValueError("interval index must be >= 0")
    terms = []
    for j in range(m + 1):
        nb = nbar_schedule(params, j, m)
        terms.append(DissipatorTerm(j, "a", nb * params.kappa1
                                    + params.kappa1 + params.kappa2))
        if nb > 0:
            terms.append(DissipatorTerm(j, "adag", nb * params.kappa1))
        if params.gamma_non > 0:
            terms.append(DissipatorTerm(j, "aa", params.gamma_non))
        if params.omega != 0.0:
            terms.append(DetuningTerm(j, params.omega))
    s = params.feedback_strength
    for j in range(1, m + 1):
        terms.append(CouplingTerm(j_from=j, j_to=j - 1, strength=s))
    return terms


def build_interval_liouvillian(params: CascadeParams, m: int,
                               chain: ModeChain) -> SuperOperator:
    """Assembled sparse Liouvillian for interval ``m`` on ``chain``.

    The chain may hold more than ``m + 1`` modes (a statically allocated
    chain); modes beyond lag ``m`` get no terms and stay frozen.
    """
    if chain.n_modes < m + 1:
        raise DimensionMismatch("interval %d needs at least %d modes" % (m, m + 1))
    total = SuperOperator.zero(chain)
    for term in interval_terms(params, m):
        if isinstance(term, DissipatorTerm):
            c = mode_op(chain, term.mode, "annihilate")
            if term.op == "adag":
                c = c.conj().T.tocsr()
            elif term.op == "aa":
                c = (c @ c).tocsr()
            total = total + dissipator(chain, c, term.rate)
        elif isinstance(term, CouplingTerm):
            total = total + coupling_term(chain, term.j_from, term.j_to,
                                          term.strength)
        else:
            h = (-term.omega) * mode_op(chain, term.mode, "number")
            total = total + hamiltonian_term(chain, h)
    return total


# ---------------------------------------------------------------------------
# chain state and growth


def estimate_bytes(n_trunc: int, m_max: int) -> int:
    """Working-set estimate for evolving ``m_max + 1`` chain modes."""
    dim = n_trunc ** (m_max + 1)
    return 16 * dim * dim * BUFFER_FACTOR


def check_budget(n_trunc: int, m_max: int, budget_bytes: int) -> None:
    required = estimate_bytes(n_trunc, m_max)
    if required > budget_bytes:
        raise BudgetExceeded(required, budget_bytes)


@dataclass
class ChainState:
    """Joint state of the active chain during interval ``interval_index``.

    ``slots_by_age`` maps physical age (0 = current mode, ``m`` = the
    largest-lag copy, the one most recently added) to tensor slots.  With
    slots assigned in birth order this is the identity map; it is kept
    explicit so consumers never hard-code the layout.
    """

    rho: DensityMatrix
    interval_index: int
    slots_by_age: tuple = field(default=None)

    def __post_init__(self):
        if self.rho.chain.n_modes != self.interval_index + 1:
            raise DimensionMismatch(
                "interval %d expects %d modes, state has %d"
                % (self.interval_index, self.interval_index + 1,
                   self.rho.chain.n_modes))
        if self.slots_by_age is None:
            self.slots_by_age = tuple(range(self.rho.chain.n_modes))


def grow_chain(state: ChainState, fresh: DensityMatrix,
               budget_bytes: int = DEFAULT_BUDGET_BYTES) -> ChainState:
    """Append a fresh largest-lag mode at an interval boundary.

    The old modes' joint marginal is untouched (kron with an uncorrelated
    factor); the fresh mode's marginal equals ``fresh``.
    """
    if fresh.chain.n_modes != 1:
        raise DimensionMismatch("fresh state must be single-mode")
    if fresh.chain.n_trunc != state.rho.chain.n_trunc:
        raise DimensionMismatch("fresh state truncation differs from chain")
    check_budget(state.rho.chain.n_trunc, state.interval_index + 1, budget_bytes)
    grown = state.rho.product_with(fresh)
    return ChainState(rho=grown, interval_index=state.interval_index + 1)


# ---------------------------------------------------------------------------
# matrix-free evolution engine


class TensorRhs:
    """Matrix-free Liouvillian application for one interval.

    The density matrix is viewed as a ``(n,)*2M`` tensor (ket axes first).
    Anticommutator and Hamiltonian parts are diagonal and fold into one
    elementwise weight array; every jump/coupling term is a pair of small
    matrices applied to single axes.  Inputs are assumed Hermitian (true for
    density matrices and all RK4 stage combinations), which lets the
    coupling's bra-side half be accumulated as the adjoint of its ket-side
    half.
    """

    def __init__(self, params: CascadeParams, m: int, n_trunc: int):
        self.n = n_trunc
        self.n_modes = m + 1
        self.dim = n_trunc ** self.n_modes
        self.two_m = 2 * self.n_modes
        a = destroy(n_trunc)
        ad = a.conj().T
        self._a = np.ascontiguousarray(a)
        self._sandwiches = []   # (ket_axis, ket_mat, bra_axis, bra_mat)
        # one complex diagonal weight per ket index; bra adds its conjugate
        fdiag = np.zeros(self.dim, complex)
        levels = np.arange(n_trunc, dtype=float)
        for term in interval_terms(params, m):
            if isinstance(term, DissipatorTerm):
                j = term.mode
                if term.op == "a":
                    c = a
                elif term.op == "adag":
                    c = ad
                else:
                    c = a @ a
                # truncation zeroes the top of a*a^dag, so read the diagonal
                # off the actual matrix rather than the closed form
                ctc_diag = np.real(np.diag(c.conj().T @ c))
                # rate * c rho c^dag : ket-apply c, bra-apply (c^dag)^T = conj(c)
                self._sandwiches.append(
                    (j, np.ascontiguousarray(term.rate * c),
                     self.n_modes + j, np.ascontiguousarray(c.conj())))
                self._add_mode_diag(fdiag, j, -0.5 * term.rate * ctc_diag)
            elif isinstance(term, DetuningTerm):
                self._add_mode_diag(fdiag, term.mode,
                                    1j * term.omega * levels)
        self._couplings = []    # (j_from, j_to, strength)
        for term in interval_terms(params, m):
            if isinstance(term, CouplingTerm):
                self._couplings.append((term.j_from, term.j_to,
                                        complex(term.strength)))
        self.weight = fdiag[:, None] + fdiag.conj()[None, :]
        self.stiffness = float(np.abs(self.weight).max())

    def _add_mode_diag(self, fdiag, mode, values):
        pre = self.n ** mode
        post = self.n ** (self.n_modes - mode - 1)
        fdiag.reshape(pre, self.n, post)[...] += values[None, :, None]

    def _axis_apply(self, x, small, axis, out):
        pre = self.n ** axis
        post = self.n ** (self.two_m - 1 - axis)
        np.matmul(small, x.reshape(pre, self.n, post),
                  out=out.reshape(pre, self.n, post))

    def new_buffer(self) -> np.ndarray:
        return np.empty((self.dim, self.dim), complex)

    def apply(self, x, out, tmp, u, gbuf, hermitian_input: bool = True) -> None:
        """out = L(x); tmp/u/gbuf are scratch buffers.

        With ``hermitian_input`` the coupling's bra-side half is obtained as
        the adjoint of its ket-side half (valid for density matrices and all
        RK4 stage combinations); pass False for arbitrary matrices.
        """
        np.multiply(self.weight, x, out=out)
        have_g = bool(self._couplings)
        if have_g:
            gbuf.fill(0.0)
        for ket_axis, ket_mat, bra_axis, bra_mat in self._sandwiches:
            self._axis_apply(x, ket_mat, ket_axis, u)
            self._axis_apply(u, bra_mat, bra_axis, tmp)
            out += tmp
        a = self._a
        ad = np.ascontiguousarray(a.conj().T)
        for j_from, j_to, s in self._couplings:
            # u = a_{from} rho (unscaled)
            self._axis_apply(x, a, j_from, u)
            # -s a_to^dag a_from rho
            self._axis_apply(u, (-s) * ad, j_to, tmp)
            gbuf += tmp
            # +s a_from rho a_to^dag : bra-apply (a^dag)^T = conj(a) = a
            self._axis_apply(u, s * a, self.n_modes + j_to, tmp)
            gbuf += tmp
        if have_g:
            out += gbuf
            if hermitian_input:
                np.conjugate(gbuf, out=tmp)
                out += tmp.T
            else:
                for j_from, j_to, s in self._couplings:
                    # v = rho a_from^dag : bra-apply (a^dag)^T = a
                    self._axis_apply(x, a, self.n_modes + j_from, u)
                    # -conj(s) rho a_from^dag a_to : bra-apply a^T = a^dag
                    self._axis_apply(u, (-np.conj(s)) * ad,
                                     self.n_modes + j_to, tmp)
                    out += tmp
                    # +conj(s) a_to rho a_from^dag
                    self._axis_apply(u, np.conj(s) * a, j_to, tmp)
                    out += tmp

    def max_substep(self, margin: float = STABILITY_MARGIN) -> float:
        """Largest RK4 step stable for the stiff damped Fock corner."""
        if self.stiffness == 0.0:
            return np.inf
        return margin * RK4_REAL_AXIS / self.stiffness

    def norm_bound(self) -> float:
        """Gershgorin bound on the spectral radius (each jump term has at
        most one entry per row of the vectorized generator)."""
        n_top = self.n - 1.0
        bound = self.stiffness
        for _, ket_mat, _, bra_mat in self._sandwiches:
            bound += float(np.abs(ket_mat).max() * np.abs(bra_mat).max())
        for _, _, s in self._couplings:
            bound += 4.0 * abs(s) * n_top
        return bound


def spectral_radius(params: CascadeParams, engine: TensorRhs,
                    vec_cap: int = 500_000) -> float:
    """Safe estimate of the interval Liouvillian's spectral radius.

    The dominant eigenvalue is found by Arnoldi iteration, at the largest
    truncation whose vectorized dimension stays below ``vec_cap``; the ratio
    of that eigenvalue to the (exactly known) diagonal bound transfers to
    the requested truncation with a safety factor.  The ratio drifts only a
    few percent across truncations; the Gershgorin bound is the fallback if
    Arnoldi fails.
    """
    import scipy.sparse.linalg as spla

    n_modes = engine.n_modes
    m = n_modes - 1
    n_test = engine.n
    while n_test > 4 and n_test ** (2 * n_modes) > vec_cap:
        n_test -= 1
    if n_test == engine.n:
        probe, scale = engine, 1.05
    else:
        probe, scale = TensorRhs(params, m, n_test), 1.12
    dim = probe.dim
    bufs = [probe.new_buffer() for _ in range(3)]
    out_buf = probe.new_buffer()

    def matvec(v):
        x = np.ascontiguousarray(v.reshape(dim, dim))
        probe.apply(x, out_buf, *bufs, hermitian_input=False)
        return out_buf.ravel().copy()

    op = spla.LinearOperator((dim * dim, dim * dim), matvec=matvec,
                             dtype=complex)
    rng = np.random.default_rng(12345)
    v0 = rng.normal(size=dim * dim) + 1j * rng.normal(size=dim * dim)
    try:
        vals = spla.eigs(op, k=1, which="LM", v0=v0, maxiter=400, tol=1e-3,
                         return_eigenvectors=False)
        lam = float(abs(vals[0]))
        ratio = lam / probe.stiffness if probe.stiffness > 0 else 1.0
        return max(engine.stiffness * ratio * scale, engine.stiffness)
    except Exception:
        return engine.norm_bound()


def _rk4_interval(engine: TensorRhs, rho: np.ndarray, t_span, n_samples: int,
                  n_sub: int):
    """March one interval in place, yielding the state at each sample time."""
    t0, t1 = t_span
    sample_dt = (t1 - t0) / n_samples
    h = sample_dt / n_sub
    y = rho
    stage = engine.new_buffer()
    k = engine.new_buffer()
    acc = engine.new_buffer()
    tmp = engine.new_buffer()
    u = engine.new_buffer()
    gbuf = engine.new_buffer() if engine._couplings else tmp
    for i_samp in range(n_samples):
        for _ in range(n_sub):
            engine.apply(y, acc, tmp, u, gbuf)            # k1 -> acc
            np.multiply(acc, 0.5 * h, out=stage)
            stage += y
            engine.apply(stage, k, tmp, u, gbuf)          # k2
            acc += k
            acc += k
            np.multiply(k, 0.5 * h, out=stage)
            stage += y
            engine.apply(stage, k, tmp, u, gbuf)          # k3
            acc += k
            acc += k
            np.multiply(k, h, out=stage)
            stage += y
            engine.apply(stage, k, tmp, u, gbuf)          # k4
            acc += k
            np.multiply(acc, h / 6.0, out=acc)
            y += acc
        t = t0 + (i_samp + 1) * sample_dt
        # instability shows up as entry growth well before the trace moves
        # (the spurious modes are largely traceless); genuine density-matrix
        # entries never exceed 1 in magnitude
        amax = np.abs(y).max()
        tr = complex(np.trace(y))
        if not (amax < 1.2) or not (abs(tr - 1.0) < 1e-3):
            raise NonFiniteValue(
                "state diverged at t=%g (max entry %r, trace %r)"
                % (t, amax, tr), time=t)
        yield t, y


def interval_substeps(params: CascadeParams, engine: TensorRhs,
                      sample_dt: float, margin: float) -> int:
    """Stability-limited RK4 substep count per sample step."""
    lam = spectral_radius(params, engine)
    h_max = margin * RK4_REAL_AXIS / lam if lam > 0 else np.inf
    return max(1, int(np.ceil(sample_dt / h_max - 1e-12)))


def evolve_delayed(params: CascadeParams, m_max: int, n_trunc: int,
                   initial: DensityMatrix, dt: float,
                   budget_bytes: int = DEFAULT_BUDGET_BYTES,
                   margin: float = STABILITY_MARGIN,
                   substeps: int | None = None,
                   return_state: bool = False):
    """Evolve the delayed cavity over intervals 0..m_max.

    ``initial`` is the single-mode state of the cavity and of every fresh
    chain copy.  Observables of the current mode (slot 0) are sampled every
    ``dt`` (snapped so each interval holds a whole number of samples) over
    ``[0, (m_max + 1) * tau]``.  Raises :class:`BudgetExceeded` before any
    allocation if the final interval would not fit the memory budget.
    """
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    if initial.chain.n_modes != 1 or initial.chain.n_trunc != n_trunc:
        raise DimensionMismatch("initial state must be single-mode at the "
                                "requested truncation")
    if not 0 < dt <= params.tau:
        raise ValueError("need 0 < dt <= tau")
    check_budget(n_trunc, m_max, budget_bytes)
    tau = params.tau
    n_samples = max(1, int(round(tau / dt)))

    state = ChainState(rho=DensityMatrix(initial.chain,
                                         initial.entries.copy()),
                       interval_index=0)
    rows = []          # (t, a, n, dx, dp, interval)
    trace_drift = 0.0

    def make_row(t, m, rho_entries):
        dm = DensityMatrix(state.rho.chain, rho_entries)
        mean_a, mean_a2, mean_n = mode_moments(dm, 0)
        var_x = mean_a2.real + mean_n + 0.5 - 2.0 * mean_a.real ** 2
        var_p = -mean_a2.real + mean_n + 0.5 - 2.0 * mean_a.imag ** 2
        drift = abs(complex(np.trace(rho_entries)) - 1.0)
        return (t, mean_a, mean_n, math.sqrt(max(var_x, 0.0)),
                math.sqrt(max(var_p, 0.0)), m), drift

    row0, drift0 = make_row(0.0, 0, state.rho.entries)
    rows.append(row0)
    trace_drift = drift0

    for m in range(m_max + 1):
        engine = TensorRhs(params, m, n_trunc)
        n_sub = substeps if substeps is not None else \
            interval_substeps(params, engine, tau / n_samples, margin)
        snapshot = state.rho.entries.copy()
        for attempt in range(4):
            interval_rows = []
            interval_drift = 0.0
            try:
                for t, y in _rk4_interval(engine, state.rho.entries,
                                          (m * tau, (m + 1) * tau),
                                          n_samples, n_sub):
                    row, drift = make_row(t, m, y)
                    interval_rows.append(row)
                    interval_drift = max(interval_drift, drift)
                break
            except NonFiniteValue:
                # marginal spectral estimate; halve the step and redo the
                # interval from its snapshot (rows of the bad attempt drop)
                if attempt == 3 or substeps is not None:
                    raise
                state.rho.entries[...] = snapshot
                n_sub *= 2
        del snapshot
        rows.extend(interval_rows)
        trace_drift = max(trace_drift, interval_drift)
        if m < m_max:
            state = grow_chain(state, initial, budget_bytes)

    cols = list(zip(*rows))
    series = TimeSeries.from_arrays(*cols)
    series.trace_drift = trace_drift
    if return_state:
        return series, state
    return series
