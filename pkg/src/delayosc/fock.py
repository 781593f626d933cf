"""Finite-dimensional bosonic linear algebra on tensor chains of Fock modes.

A :class:`ModeChain` is ``n_modes`` copies of an ``n_trunc``-level truncated
oscillator; mode 0 is the first tensor factor.  Operators are sparse CSR
matrices on the full ``n_trunc**n_modes`` dimensional space.  Superoperators
act on density matrices vectorized by column stacking
(``vec(X) = X.ravel(order="F")``), for which ``vec(A X B) = (B.T kron A)
vec(X)``; they are stored as sparse matrices on that space.

Truncation caveat: the ladder commutator ``[a, a^dag] = 1`` fails on the top
Fock level, so invariant checks exclude it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, IndexOutOfRange, NonFiniteValue

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
EIGENVALUE_TOL = 1e-8


@dataclass(frozen=True)
class ModeChain:
    """Tensor chain of truncated bosonic modes."""

    n_modes: int
    n_trunc: int

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.n_trunc < 2:
            raise ValueError("n_trunc must be >= 2")

    @property
    def dim(self) -> int:
        return self.n_trunc ** self.n_modes

    def extended(self, extra_modes: int = 1) -> "ModeChain":
        return ModeChain(self.n_modes + extra_modes, self.n_trunc)


def destroy(n_trunc: int) -> np.ndarray:
    """Single-mode annihilation matrix, <n-1|a|n> = sqrt(n)."""
    return np.diag(np.sqrt(np.arange(1, n_trunc, dtype=float)), 1).astype(complex)


def mode_op(chain: ModeChain, mode_index: int, kind: str) -> sp.csr_matrix:
    """Ladder/number operator embedded at one tensor slot.

    ``kind`` is ``"annihilate"``, ``"create"`` or ``"number"``.
    """
    if not 0 <= mode_index < chain.n_modes:
        raise IndexOutOfRange(
            "mode %d not in chain of %d modes" % (mode_index, chain.n_modes))
    a = destroy(chain.n_trunc)
    if kind == "annihilate":
        local = a
    elif kind == "create":
        local = a.conj().T
    elif kind == "number":
        local = a.conj().T @ a
    else:
        raise ValueError("unknown operator kind %r" % (kind,))
    return embed(chain, mode_index, local)


def embed(chain: ModeChain, mode_index: int, local: np.ndarray) -> sp.csr_matrix:
    """Embed a single-mode matrix as I x ... x local x ... x I."""
    op = sp.csr_matrix(local)
    left = chain.n_trunc ** mode_index
    right = chain.n_trunc ** (chain.n_modes - mode_index - 1)
    if left > 1:
        op = sp.kron(sp.identity(left, format="csr"), op, format="csr")
    if right > 1:
        op = sp.kron(op, sp.identity(right, format="csr"), format="csr")
    return sp.csr_matrix(op)


# ---------------------------------------------------------------------------
# states


def coherent_ket(n_trunc: int, alpha: complex) -> np.ndarray:
    """Truncated coherent state, renormalized."""
    n = np.arange(n_trunc)
    log_fact = np.cumsum(np.log(np.maximum(n, 1)))
    amp = np.exp(-0.5 * abs(alpha) ** 2) * np.power(complex(alpha), n) \
        / np.exp(0.5 * log_fact)
    return amp / np.linalg.norm(amp)


@dataclass
class DensityMatrix:
    """Density operator on a chain, stored dense."""

    chain: ModeChain
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, complex)
        if self.entries.shape != (self.chain.dim, self.chain.dim):
            raise DimensionMismatch(
                "entries shape %s does not match chain dim %d"
                % (self.entries.shape, self.chain.dim))

    # -- constructors ------------------------------------------------------
    @staticmethod
    def from_ket(chain: ModeChain, ket: np.ndarray) -> "DensityMatrix":
        ket = np.asarray(ket, complex)
        return DensityMatrix(chain, np.outer(ket, ket.conj()))

    @staticmethod
    def vacuum(chain: ModeChain) -> "DensityMatrix":
        ket = np.zeros(chain.dim, complex)
        ket[0] = 1.0
        return DensityMatrix.from_ket(chain, ket)

    @staticmethod
    def coherent(n_trunc: int, alpha: complex) -> "DensityMatrix":
        chain = ModeChain(1, n_trunc)
        return DensityMatrix.from_ket(chain, coherent_ket(n_trunc, alpha))

    @staticmethod
    def thermal(n_trunc: int, nbar: float) -> "DensityMatrix":
        chain = ModeChain(1, n_trunc)
        if nbar == 0:
            return DensityMatrix.vacuum(chain)
        p = (nbar / (1.0 + nbar)) ** np.arange(n_trunc)
        return DensityMatrix(chain, np.diag(p / p.sum()).astype(complex))

    def product_with(self, other: "DensityMatrix") -> "DensityMatrix":
        if other.chain.n_trunc != self.chain.n_trunc:
            raise DimensionMismatch("factors must share n_trunc")
        chain = ModeChain(self.chain.n_modes + other.chain.n_modes,
                          self.chain.n_trunc)
        return DensityMatrix(chain, np.kron(self.entries, other.entries))

    # -- diagnostics -------------------------------------------------------
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.entries - self.entries.conj().T).max())

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.entries
                                               + self.entries.conj().T))[0])

    def validate(self) -> None:
        if self.hermiticity_defect() > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian within tolerance")
        if abs(self.trace() - 1.0) > TRACE_TOL:
            raise ValueError("density matrix trace %r is not 1" % (self.trace(),))
        if self.min_eigenvalue() < -EIGENVALUE_TOL:
            raise ValueError("density matrix has a significantly negative "
                             "eigenvalue %g" % self.min_eigenvalue())

    def reduced_mode(self, mode_index: int) -> np.ndarray:
        """Partial trace down to one mode; returns an (n_trunc, n_trunc) array."""
        m, n = self.chain.n_modes, self.chain.n_trunc
        if not 0 <= mode_index < m:
            raise IndexOutOfRange("mode %d not in chain" % mode_index)
        t = self.entries.reshape((n,) * (2 * m))
        keep = mode_index
        for axis in reversed(range(m)):
            if axis == keep:
                continue
            t = np.trace(t, axis1=axis, axis2=axis + (t.ndim // 2))
        return t


def expectation(rho: DensityMatrix, operator) -> complex:
    """tr(O rho)."""
    if operator.shape[0] != rho.chain.dim:
        raise DimensionMismatch("operator dim %d vs chain dim %d"
                                % (operator.shape[0], rho.chain.dim))
    if sp.issparse(operator):
        return complex(operator.multiply(rho.entries.T).sum())
    return complex(np.tensordot(operator, rho.entries.T, axes=2))


def mode_moments(rho: DensityMatrix, mode_index: int):
    """(<a>, <a^2>, <n>) of one mode, via its reduced density matrix."""
    red = rho.reduced_mode(mode_index)
    a = destroy(rho.chain.n_trunc)
    mean_a = np.trace(a @ red)
    mean_a2 = np.trace(a @ a @ red)
    mean_n = np.trace((a.conj().T @ a) @ red)
    return complex(mean_a), complex(mean_a2), float(mean_n.real)


def quadrature_stats(rho: DensityMatrix, mode_index: int):
    """Standard deviations (dX, dP) with X=(a+a^dag)/sqrt2, P=-i(a-a^dag)/sqrt2.

    The vacuum gives (1/sqrt2, 1/sqrt2); a thermal state with occupation nbar
    gives sqrt((2*nbar+1)/2) for both.
    """
    mean_a, mean_a2, mean_n = mode_moments(rho, mode_index)
    var_x = mean_a2.real + mean_n + 0.5 - 2.0 * mean_a.real ** 2
    var_p = -mean_a2.real + mean_n + 0.5 - 2.0 * mean_a.imag ** 2
    return float(np.sqrt(max(var_x, 0.0))), float(np.sqrt(max(var_p, 0.0)))


# ---------------------------------------------------------------------------
# superoperators


@dataclass
class SuperOperator:
    """Sparse linear map on column-stacked density matrices."""

    chain: ModeChain
    matrix: sp.csr_matrix

    def __post_init__(self):
        d2 = self.chain.dim ** 2
        if self.matrix.shape != (d2, d2):
            raise DimensionMismatch("superoperator shape %s does not match "
                                    "dim^2 = %d" % (self.matrix.shape, d2))

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        if other.chain != self.chain:
            raise DimensionMismatch("superoperators on different chains")
        return SuperOperator(self.chain, (self.matrix + other.matrix).tocsr())

    def __rmul__(self, scalar: complex) -> "SuperOperator":
        return SuperOperator(self.chain, (scalar * self.matrix).tocsr())

    def apply(self, rho_entries: np.ndarray) -> np.ndarray:
        """d(rho)/dt for a density matrix given as a dense array."""
        vec = rho_entries.ravel(order="F")
        out = self.matrix @ vec
        return out.reshape(rho_entries.shape, order="F")

    def trace_defect(self) -> float:
        """Max |column sum over trace positions|; 0 for trace-preserving maps."""
        dim = self.chain.dim
        ivec = np.eye(dim, dtype=complex).ravel(order="F")
        return float(np.abs(self.matrix.T @ ivec).max())

    @staticmethod
    def zero(chain: ModeChain) -> "SuperOperator":
        d2 = chain.dim ** 2
        return SuperOperator(chain, sp.csr_matrix((d2, d2), dtype=complex))


def _sandwich(left, right) -> sp.csr_matrix:
    """Map rho -> left @ rho @ right as a vectorized superoperator."""
    left = sp.csr_matrix(left)
    right = sp.csr_matrix(right)
    return sp.kron(right.T, left, format="csr")


def _left_mult(op) -> sp.csr_matrix:
    op = sp.csr_matrix(op)
    return sp.kron(sp.identity(op.shape[0], format="csr"), op, format="csr")


def _right_mult(op) -> sp.csr_matrix:
    op = sp.csr_matrix(op)
    return sp.kron(op.T, sp.identity(op.shape[0], format="csr"), format="csr")


def dissipator(chain: ModeChain, collapse_op, rate: float) -> SuperOperator:
    """rate * (c rho c^dag - (c^dag c rho + rho c^dag c)/2)."""
    if rate < 0:
        raise ValueError("dissipator rate must be >= 0")
    c = sp.csr_matrix(collapse_op)
    if c.shape[0] != chain.dim:
        raise DimensionMismatch("collapse operator does not match chain")
    cdc = (c.conj().T @ c).tocsr()
    mat = _sandwich(c, c.conj().T) - 0.5 * (_left_mult(cdc) + _right_mult(cdc))
    return SuperOperator(chain, (rate * mat).tocsr())


def hamiltonian_term(chain: ModeChain, h_op) -> SuperOperator:
    """-i [H, rho] with hbar = 1."""
    h = sp.csr_matrix(h_op)
    mat = -1j * (_left_mult(h) - _right_mult(h))
    return SuperOperator(chain, mat.tocsr())


def coupling_term(chain: ModeChain, j_from: int, j_to: int,
                  strength: complex) -> SuperOperator:
    """Unidirectional drive of mode ``j_to`` by the output of ``j_from``.

    Implements ``-(s [a_to^dag, a_from rho] + conj(s) [rho a_from^dag, a_to])``
    which adds ``-s <a_from>`` to ``d<a_to>/dt`` and leaves every observable
    of the driving mode untouched.
    """
    if j_from == j_to:
        raise ValueError("j_from and j_to must differ")
    a_from = mode_op(chain, j_from, "annihilate")
    a_to = mode_op(chain, j_to, "annihilate")
    s = complex(strength)
    mat = -s * (_left_mult((a_to.conj().T @ a_from).tocsr())
                - _sandwich(a_from, a_to.conj().T)) \
        - np.conj(s) * (_right_mult((a_from.conj().T @ a_to).tocsr())
                        - _sandwich(a_to, a_from.conj().T))
    return SuperOperator(chain, mat.tocsr())


def evolve_fixed_liouvillian(rho: DensityMatrix, liouvillian: SuperOperator,
                             t_span, dt: float, observables=None):
    """RK4 time stepping of d(rho)/dt = L rho over ``t_span``.

    ``observables`` maps names to operators; their expectations are sampled
    at every step.  Returns ``(final DensityMatrix, samples dict)`` where
    samples always contains ``"t"``.
    """
    if rho.chain != liouvillian.chain:
        raise DimensionMismatch("state and Liouvillian on different chains")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not dt > 0:
        raise ValueError("dt must be > 0")
    n_steps = max(1, int(np.ceil((t1 - t0) / dt - 1e-9)))
    h = (t1 - t0) / n_steps
    mat = liouvillian.matrix
    y = rho.entries.ravel(order="F").copy()
    obs = observables or {}
    samples = {name: [] for name in obs}
    samples["t"] = []

    def record(t, yvec):
        samples["t"].append(t)
        if obs:
            dm = DensityMatrix(rho.chain,
                               yvec.reshape(rho.entries.shape, order="F"))
            for name, op in obs.items():
                samples[name].append(expectation(dm, op))

    record(t0, y)
    for i in range(n_steps):
        k1 = mat @ y
        k2 = mat @ (y + 0.5 * h * k1)
        k3 = mat @ (y + 0.5 * h * k2)
        k4 = mat @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(y[0]) or abs(y[0]) > 1e12:
            raise NonFiniteValue("density matrix diverged at t=%g"
                                 % (t0 + (i + 1) * h), time=t0 + (i + 1) * h)
        record(t0 + (i + 1) * h, y)
    final = DensityMatrix(rho.chain, y.reshape(rho.entries.shape, order="F"))
    samples = {k: np.asarray(v) for k, v in samples.items()}
    return final, samples
