"""Symbolic moment dynamics of the cascaded chain with cumulant closure.

An :class:`OperatorWord` is a normal-ordered product of mode ladder
operators, ``prod_j adag_j^p_j a_j^q_j`` with modes sorted by index.  The
time derivative of ``<word>`` follows from the generator's adjoint action,
term by term over the same :func:`delayosc.cascade.interval_terms` used by
the full quantum engine.  Words above the truncation order are closed by
setting their joint cumulant (and, recursively, every higher one) to zero
and solving for the top moment; with all cumulants beyond order k zero the
closure is exact.

The closed system is compiled to index arrays and integrated with RK4,
interval by interval: at a boundary the fresh largest-lag mode enters with
the single-mode initial moments, cross moments with it factorize exactly
(product state), and every persisting moment carries over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cascade import (
    CascadeParams,
    CouplingTerm,
    DetuningTerm,
    DissipatorTerm,
    interval_terms,
)
from .errors import ClosureDiverged, NonFiniteValue
from .series import TimeSeries

DEFAULT_WORD_BUDGET = 20000


# ---------------------------------------------------------------------------
# words


@dataclass(frozen=True, order=True)
class OperatorWord:
    """Normal-ordered multimode monomial.

    ``factors`` is a tuple of ``(mode, n_dag, n_bare)`` triples, sorted by
    mode, with zero entries dropped.  The empty tuple is the identity, whose
    expectation is 1.
    """

    factors: tuple

    @staticmethod
    def of(*factors) -> "OperatorWord":
        cleaned = tuple(sorted((m, p, q) for m, p, q in factors
                               if p != 0 or q != 0))
        modes = [m for m, _, _ in cleaned]
        if len(set(modes)) != len(modes):
            raise ValueError("duplicate mode in word factors")
        return OperatorWord(cleaned)

    @staticmethod
    def identity() -> "OperatorWord":
        return OperatorWord(())

    @property
    def order(self) -> int:
        return sum(p + q for _, p, q in self.factors)

    def modes(self) -> tuple:
        return tuple(m for m, _, _ in self.factors)

    def dagger(self) -> "OperatorWord":
        return OperatorWord(tuple((m, q, p) for m, p, q in self.factors))

    def ladder_sequence(self) -> list:
        """Flatten to [(mode, is_dagger), ...] in normal order."""
        seq = []
        for m, p, q in self.factors:
            seq.extend((m, True) for _ in range(p))
            seq.extend((m, False) for _ in range(q))
        return seq

    def __str__(self) -> str:
        if not self.factors:
            return "1"
        bits = []
        for m, p, q in self.factors:
            if p:
                bits.append("ad%d%s" % (m, "^%d" % p if p > 1 else ""))
            if q:
                bits.append("a%d%s" % (m, "^%d" % q if q > 1 else ""))
        return "*".join(bits)


# ---------------------------------------------------------------------------
# polynomials over moment monomials

# A monomial is a sorted tuple of OperatorWord keys (a product of moments);
# a MomentPolynomial maps monomial -> complex coefficient.


class MomentPolynomial(dict):
    """Sparse sum of ``coeff * <w1>*<w2>*...`` terms."""

    @staticmethod
    def zero() -> "MomentPolynomial":
        return MomentPolynomial()

    @staticmethod
    def of_word(word: OperatorWord, coeff: complex = 1.0) -> "MomentPolynomial":
        if word.order == 0:
            return MomentPolynomial.constant(coeff)
        return MomentPolynomial({(word,): complex(coeff)})

    @staticmethod
    def constant(value: complex) -> "MomentPolynomial":
        return MomentPolynomial({(): complex(value)})

    def add_term(self, monomial: tuple, coeff: complex) -> None:
        new = self.get(monomial, 0j) + coeff
        if new == 0:
            self.pop(monomial, None)
        else:
            self[monomial] = new

    def plus(self, other: "MomentPolynomial",
             scale: complex = 1.0) -> "MomentPolynomial":
        out = MomentPolynomial(self)
        for mono, c in other.items():
            out.add_term(mono, scale * c)
        return out

    def times(self, other: "MomentPolynomial") -> "MomentPolynomial":
        out = MomentPolynomial()
        for m1, c1 in self.items():
            for m2, c2 in other.items():
                out.add_term(tuple(sorted(m1 + m2)), c1 * c2)
        return out

    def scaled(self, s: complex) -> "MomentPolynomial":
        return MomentPolynomial({m: s * c for m, c in self.items()})

    def words(self):
        seen = set()
        for mono in self:
            for w in mono:
                if w not in seen:
                    seen.add(w)
                    yield w

    def map_words(self, fn) -> "MomentPolynomial":
        """Substitute each word w by the polynomial fn(w)."""
        out = MomentPolynomial()
        for mono, coeff in self.items():
            term = MomentPolynomial.constant(coeff)
            for w in mono:
                term = term.times(fn(w))
            for m2, c2 in term.items():
                out.add_term(m2, c2)
        return out

    def __str__(self) -> str:
        if not self:
            return "0"
        bits = []
        for mono, c in sorted(self.items(), key=lambda kv: str(kv[0])):
            prod = "*".join("<%s>" % w for w in mono) or "1"
            bits.append("(%s)*%s" % (format(c, ".6g"), prod))
        return " + ".join(bits)


# ---------------------------------------------------------------------------
# normal ordering


@lru_cache(maxsize=None)
def _normal_order_single(seq: tuple) -> tuple:
    """Normal order one mode's ladder string.

    ``seq`` is a tuple of booleans (True = dagger).  Returns a tuple of
    ``((n_dag, n_bare), integer coeff)`` pairs.
    """
    for i in range(len(seq) - 1):
        if not seq[i] and seq[i + 1]:
            swapped = seq[:i] + (True, False) + seq[i + 2:]
            dropped = seq[:i] + seq[i + 2:]
            out = {}
            for key, c in _normal_order_single(swapped):
                out[key] = out.get(key, 0) + c
            for key, c in _normal_order_single(dropped):
                out[key] = out.get(key, 0) + c
            return tuple(sorted((k, c) for k, c in out.items() if c != 0))
    return (((sum(seq), len(seq) - sum(seq)), 1),)


def normal_order(sequence) -> MomentPolynomial:
    """Normal order a product of ladder operators.

    ``sequence`` is an iterable of ``(mode, is_dagger)``; operators on
    distinct modes commute, within a mode ``a a^dag = a^dag a + 1``.
    Returns a polynomial whose monomials are single canonical words with
    exact integer coefficients.
    """
    per_mode = {}
    for mode, is_dag in sequence:
        per_mode.setdefault(mode, []).append(bool(is_dag))
    expansions = []
    for mode in sorted(per_mode):
        expansions.append((mode, _normal_order_single(tuple(per_mode[mode]))))
    out = MomentPolynomial()

    def build(i, factors, coeff):
        if i == len(expansions):
            word = OperatorWord.of(*factors)
            out.add_term((word,) if word.order else (), coeff)
            return
        mode, terms = expansions[i]
        for (p, q), c in terms:
            build(i + 1, factors + [(mode, p, q)], coeff * c)

    build(0, [], 1.0)
    return out


def word_product(words_or_seqs) -> MomentPolynomial:
    """Normal-ordered product of words / ladder sequences, left to right."""
    seq = []
    for item in words_or_seqs:
        if isinstance(item, OperatorWord):
            seq.extend(item.ladder_sequence())
        else:
            seq.extend(item)
    return normal_order(seq)


# ---------------------------------------------------------------------------
# adjoint action of the generator


def _adjoint_dissipator(word: OperatorWord, mode: int, op: str,
                        rate: float) -> MomentPolynomial:
    """rate * <c^dag O c - (c^dag c O + O c^dag c)/2> expanded over words."""
    if op == "a":
        c = [(mode, False)]
    elif op == "adag":
        c = [(mode, True)]
    else:
        c = [(mode, False), (mode, False)]
    cd = [(m, not d) for (m, d) in reversed(c)]
    sand = word_product([cd, word, c])
    cdc = cd + c
    anti = word_product([cdc, word]).plus(word_product([word, cdc]))
    return sand.plus(anti, scale=-0.5).scaled(rate)


def _adjoint_coupling(word: OperatorWord, j_from: int, j_to: int,
                      strength: complex) -> MomentPolynomial:
    """Adjoint of the cascade drive:

    d<O> += -s <[O, adag_to] a_from> - conj(s) <adag_from [a_to, O]>.
    """
    s = complex(strength)
    adag_to = [(j_to, True)]
    a_to = [(j_to, False)]
    a_from = [(j_from, False)]
    adag_from = [(j_from, True)]
    comm1 = word_product([word, adag_to, a_from]) \
        .plus(word_product([adag_to, word, a_from]), scale=-1.0)
    comm2 = word_product([adag_from, a_to, word]) \
        .plus(word_product([adag_from, word, a_to]), scale=-1.0)
    return comm1.scaled(-s).plus(comm2.scaled(-np.conj(s)))


def _adjoint_detuning(word: OperatorWord, mode: int,
                      omega: float) -> MomentPolynomial:
    """d<O> = -i<[O, H]> with H = -omega * n_mode."""
    n_seq = [(mode, True), (mode, False)]
    comm = word_product([word, n_seq]).plus(word_product([n_seq, word]),
                                            scale=-1.0)
    return comm.scaled(1j * omega)


def adjoint_derivative(word: OperatorWord, params: CascadeParams,
                       m: int) -> MomentPolynomial:
    """Exact d<word>/dt under the interval-m generator, before closure."""
    out = MomentPolynomial()
    for term in interval_terms(params, m):
        if isinstance(term, DissipatorTerm):
            part = _adjoint_dissipator(word, term.mode, term.op, term.rate)
        elif isinstance(term, CouplingTerm):
            part = _adjoint_coupling(word, term.j_from, term.j_to,
                                     term.strength)
        else:
            part = _adjoint_detuning(word, term.mode, term.omega)
        out = out.plus(part)
    return out


# ---------------------------------------------------------------------------
# cumulant closure


@lru_cache(maxsize=None)
def _partitions(n: int) -> tuple:
    """All set partitions of range(n) as tuples of tuples."""
    if n == 0:
        return ((),)
    out = []
    for smaller in _partitions(n - 1):
        last = n - 1
        for i, block in enumerate(smaller):
            out.append(smaller[:i] + (block + (last,),) + smaller[i + 1:])
        out.append(smaller + ((last,),))
    return tuple(out)


def _subword(seq: list, idx: tuple) -> OperatorWord:
    """Canonical word from a subsequence of a normal-ordered ladder list.

    Subsequences of a normal-ordered product stay normal ordered, so this
    is just a regrouping.
    """
    counts = {}
    for i in idx:
        mode, is_dag = seq[i]
        p, q = counts.get(mode, (0, 0))
        counts[mode] = (p + 1, q) if is_dag else (p, q + 1)
    return OperatorWord.of(*((m, p, q) for m, (p, q) in counts.items()))


def cumulant_expand(word: OperatorWord, k: int) -> MomentPolynomial:
    """Express ``<word>`` through moments of order <= k.

    Sets the joint cumulant of the word's ``n`` ladder factors to zero and
    solves for the top moment,

        <X1..Xn> = sum over proper partitions p of (-1)^|p| (|p|-1)!
                   prod over blocks B of <prod_{i in B} X_i>,

    then recursively closes any block moment still above order ``k``.
    The result is exact for states whose joint cumulants beyond order ``k``
    vanish.
    """
    return _cumulant_expand_cached(word, int(k))


@lru_cache(maxsize=None)
def _cumulant_expand_cached(word: OperatorWord, k: int) -> MomentPolynomial:
    n = word.order
    if not n > k:
        raise ValueError("cumulant_expand needs word order > k")
    if k < 1:
        raise ValueError("truncation order must be >= 1")
    seq = word.ladder_sequence()
    out = MomentPolynomial()
    for part in _partitions(n):
        if len(part) == 1:
            continue
        coeff = (-1.0) ** len(part) * math.factorial(len(part) - 1)
        mono = tuple(sorted(_subword(seq, block) for block in part))
        out.add_term(mono, coeff)

    def close(w):
        if w.order > k:
            return _cumulant_expand_cached(w, k)
        return MomentPolynomial.of_word(w)

    return out.map_words(close)


def close_polynomial(poly: MomentPolynomial, k: int) -> MomentPolynomial:
    """Replace every word of order > k in ``poly`` by its closure."""

    def close(w):
        if w.order > k:
            return cumulant_expand(w, k)
        return MomentPolynomial.of_word(w)

    return poly.map_words(close)


# ---------------------------------------------------------------------------
# moment systems


@dataclass
class MomentSystem:
    """Closed ODE system d<w_i>/dt = P_i(tracked moments) for interval m.

    ``tracked`` lists the words with their own equations; right-hand sides
    may also reference daggered partners of tracked words, resolved by
    conjugation at evaluation time.
    """

    params: CascadeParams
    interval: int
    order: int
    tracked: list
    rhs: dict          # word -> MomentPolynomial over tracked/conj words

    @property
    def size(self) -> int:
        return len(self.tracked)

    def equations_text(self) -> str:
        lines = []
        for w in self.tracked:
            lines.append("d<%s>/dt = %s" % (w, self.rhs[w]))
        return "\n".join(lines)


def generate_moment_system(params: CascadeParams, m: int, k: int,
                           word_budget: int = DEFAULT_WORD_BUDGET,
                           observables: bool = True) -> MomentSystem:
    """Build the closed moment system for interval ``m`` at order ``k``.

    Seeds are ``<a_j>`` for every lag j (plus ``<n_0>`` and ``<a_0 a_0>``
    when k >= 2, for quadrature observables); the closure loop adds any
    word of order <= k referenced by a right-hand side unless its dagger is
    already tracked.
    """
    if k < 1:
        raise ValueError("truncation order must be >= 1")
    seeds = [OperatorWord.of((j, 0, 1)) for j in range(m + 1)]
    if observables and k >= 2:
        seeds.append(OperatorWord.of((0, 1, 1)))
        seeds.append(OperatorWord.of((0, 0, 2)))
    tracked = []
    tracked_set = set()
    rhs = {}
    frontier = list(seeds)
    while frontier:
        w = frontier.pop(0)
        if w in tracked_set:
            continue
        tracked.append(w)
        tracked_set.add(w)
        if len(tracked) > word_budget:
            raise ClosureDiverged("moment closure exceeded %d words"
                                  % word_budget)
        poly = close_polynomial(adjoint_derivative(w, params, m), k)
        rhs[w] = poly
        for ref in poly.words():
            if ref.order == 0 or ref in tracked_set:
                continue
            if ref.dagger() in tracked_set or ref.dagger() in frontier:
                continue
            if ref in frontier:
                continue
            frontier.append(ref)
    return MomentSystem(params=params, interval=m, order=k, tracked=tracked,
                        rhs=rhs)


def coherent_moment(alpha: complex, n_dag: int, n_bare: int) -> complex:
    """<adag^p a^q> of a coherent state."""
    return np.conj(alpha) ** n_dag * alpha ** n_bare


def single_mode_coherent(alpha: complex):
    """Initial-moment function for a coherent fresh mode."""

    def fn(n_dag, n_bare):
        return coherent_moment(alpha, n_dag, n_bare)

    return fn


class _CompiledSystem:
    """Index-compiled RHS evaluator for one MomentSystem."""

    def __init__(self, system: MomentSystem):
        self.system = system
        index = {w: i for i, w in enumerate(system.tracked)}
        self.index = index
        self.n = len(system.tracked)
        # monomial factor slots grouped by monomial length
        by_len = {}
        for i, w in enumerate(system.tracked):
            for mono, coeff in system.rhs[w].items():
                slots = []
                for ref in mono:
                    if ref in index:
                        slots.append((index[ref], False))
                    else:
                        slots.append((index[ref.dagger()], True))
                by_len.setdefault(len(mono), []).append((i, coeff, slots))
        self.groups = []
        for length, rows in sorted(by_len.items()):
            targets = np.array([r[0] for r in rows], dtype=np.intp)
            coeffs = np.array([r[1] for r in rows], dtype=complex)
            idx = np.empty((length, len(rows)), dtype=np.intp)
            conj = np.empty((length, len(rows)), dtype=bool)
            for col, (_, _, slots) in enumerate(rows):
                for d, (slot, cj) in enumerate(slots):
                    idx[d, col] = slot
                    conj[d, col] = cj
            self.groups.append((targets, coeffs, idx, conj))

    def rhs(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n, complex)
        yc = y.conj()
        for targets, coeffs, idx, conj in self.groups:
            vals = coeffs.copy()
            for d in range(idx.shape[0]):
                row = np.where(conj[d], yc[idx[d]], y[idx[d]])
                vals *= row
            np.add.at(out, targets, vals)
        return out


def evaluate_word(word: OperatorWord, values: dict, k: int,
                  single_mode=None, fresh_mode: int | None = None) -> complex:
    """Value of ``<word>`` from tracked values, with exact factorization
    over an uncorrelated fresh mode and cumulant-closure fallback."""
    if word.order == 0:
        return 1.0 + 0j
    if word in values:
        return values[word]
    dag = word.dagger()
    if dag in values:
        return np.conj(values[dag])
    if fresh_mode is not None and fresh_mode in word.modes():
        rest_factors = [f for f in word.factors if f[0] != fresh_mode]
        fresh = next(f for f in word.factors if f[0] == fresh_mode)
        fresh_val = single_mode(fresh[1], fresh[2])
        rest = OperatorWord.of(*rest_factors)
        return fresh_val * evaluate_word(rest, values, k, single_mode,
                                         fresh_mode)
    if word.order <= 1:
        raise KeyError("first moment %s missing from tracked values" % word)
    # uncorrelated-by-assumption fallback: close at the largest usable order
    close_at = min(k, word.order - 1)
    poly = cumulant_expand(word, close_at)
    total = 0j
    for mono, coeff in poly.items():
        val = coeff
        for w in mono:
            val *= evaluate_word(w, values, k, single_mode, fresh_mode)
        total += val
    return total


def integrate_moment_system(systems: list, tau: float, dt: float,
                            single_mode=None, substeps: int = 1) -> TimeSeries:
    """Integrate systems for intervals 0..m_max with RK4.

    ``systems[m]`` is the MomentSystem for interval ``m``; ``single_mode``
    maps ``(n_dag, n_bare)`` to the fresh-mode initial moments (default:
    coherent with amplitude 1).  Observables of the current mode are
    sampled every ``dt`` (snapped to divide ``tau``); each sample step is
    integrated with ``substeps`` RK4 steps.
    """
    if single_mode is None:
        single_mode = single_mode_coherent(1.0)
    if not 0 < dt <= tau:
        raise ValueError("need 0 < dt <= tau")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    k = systems[0].order
    n_samples = max(1, int(round(tau / dt)))
    sample_dt = tau / n_samples

    values: dict = {}
    rows = []

    def observe(t, m):
        a = evaluate_word(OperatorWord.of((0, 0, 1)), values, k, single_mode)
        n = evaluate_word(OperatorWord.of((0, 1, 1)), values, k, single_mode)
        a2 = evaluate_word(OperatorWord.of((0, 0, 2)), values, k, single_mode)
        var_x = a2.real + n.real + 0.5 - 2.0 * a.real ** 2
        var_p = -a2.real + n.real + 0.5 - 2.0 * a.imag ** 2
        rows.append((t, a, n.real, math.sqrt(max(var_x, 0.0)),
                     math.sqrt(max(var_p, 0.0)), m))

    for m, system in enumerate(systems):
        if system.interval != m or system.order != k:
            raise ValueError("systems must be ordered by interval at fixed k")
        if m == 0:
            # everything factorizes over the single initial mode
            values = {}
            for w in system.tracked:
                val = 1.0 + 0j
                for _, p, q in w.factors:
                    val *= single_mode(p, q)
                values[w] = val
            observe(0.0, 0)
        else:
            # fresh largest-lag mode is uncorrelated: cross moments with it
            # factorize exactly; persisting moments carry over
            old = values
            values = {}
            for w in system.tracked:
                if w in old:
                    values[w] = old[w]
                elif w.dagger() in old:
                    values[w] = np.conj(old[w.dagger()])
                else:
                    values[w] = evaluate_word(w, old, k, single_mode,
                                              fresh_mode=m)
        compiled = _CompiledSystem(system)
        y = np.array([values[w] for w in system.tracked], complex)
        h = sample_dt / substeps
        for i_samp in range(n_samples):
            for _ in range(substeps):
                k1 = compiled.rhs(y)
                k2 = compiled.rhs(y + 0.5 * h * k1)
                k3 = compiled.rhs(y + 0.5 * h * k2)
                k4 = compiled.rhs(y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                t_bad = m * tau + (i_samp + 1) * sample_dt
                raise NonFiniteValue("moment integration diverged at t=%g"
                                     % t_bad, time=t_bad)
            values = dict(zip(system.tracked, y))
            observe(m * tau + (i_samp + 1) * sample_dt, m)
    cols = list(zip(*rows))
    return TimeSeries.from_arrays(*cols)
