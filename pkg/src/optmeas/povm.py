"""Optimal minimal POVMs for N copies, one operator family per total-spin sector.

Every element has the form

    O = c^2 d_N(s) * avg_V V (|sigma><sigma|^{(x) N/2-s} (x) |n><n|^{(x) 2s}) V^dagger

where the average over the symmetric group is taken over the distinct
arrangements of singlet pairs and direction slots (the stabiliser of the
seed operator is factored out), and ``d_N(s)`` is the multiplicity of spin
``s`` in ``N`` qubits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from . import design as design_mod
from . import qlin
from .errors import PovmError
from .prior import RadialPrior, g_integrals

IDENTITY_TOL = 1e-9
RANK_TOL = 1e-8


def multiplicity(N: int, twice_s: int) -> int:
    """Number of times spin ``twice_s/2`` occurs among ``N`` qubits."""
    if twice_s < 0 or twice_s > N or (N - twice_s) % 2:
        raise ValueError(f"twice_s={twice_s} incompatible with N={N}")
    a = (N + twice_s) // 2
    num = comb(N, a) * (twice_s + 1)
    if num % (a + 1):
        raise ArithmeticError("multiplicity is not an integer")
    return num // (a + 1)


@dataclass(frozen=True)
class SpinSector:
    N: int
    twice_s: int

    @property
    def d(self) -> int:
        return multiplicity(self.N, self.twice_s)

    @property
    def n_outcomes(self) -> int:
        try:
            return design_mod.PURE_STATE_COUNTS[self.twice_s]
        except KeyError:
            raise PovmError(f"minimal outcome count unknown for twice_s={self.twice_s}") from None

    @property
    def singlet_pairs(self) -> int:
        return (self.N - self.twice_s) // 2


def sectors(N: int, max_copies=None) -> list[SpinSector]:
    """Spin sectors of N qubits, lowest spin first."""
    N = qlin.check_copies(N, max_copies)
    return [SpinSector(N, t) for t in range(N % 2, N + 1, 2)]


def minimal_count(N: int) -> int:
    return sum(sec.n_outcomes for sec in sectors(N))


def _matchings(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for k, partner in enumerate(rest):
        for tail in _matchings(rest[:k] + rest[k + 1:]):
            yield [(first, partner)] + tail


def arrangements(N: int, twice_s: int):
    """Distinct placements ``(pairs, direction_slots)`` of the seed operator's factors."""
    for slots in combinations(range(N), twice_s):
        rest = [q for q in range(N) if q not in slots]
        for pairs in _matchings(rest):
            yield pairs, slots


def _arranged_ket(pairs, slots, single, N):
    tensor = np.ones((), dtype=complex)
    order = []
    singlet = qlin.SINGLET.reshape(2, 2)
    for a, b in pairs:
        tensor = np.multiply.outer(tensor, singlet)
        order.extend((a, b))
    for q in slots:
        tensor = np.multiply.outer(tensor, single)
        order.append(q)
    return np.transpose(tensor, np.argsort(order)).reshape(2**N)


def element_operator(N: int, twice_s: int, direction=None, c_sq: float = 1.0, max_copies=None) -> np.ndarray:
    """Dense operator for one POVM element of sector ``twice_s/2``."""
    N = qlin.check_copies(N, max_copies)
    sec = SpinSector(N, twice_s)
    d = sec.d
    single = qlin.ket(direction) if twice_s else None
    kets = [_arranged_ket(p, s, single, N) for p, s in arrangements(N, twice_s)]
    Psi = np.array(kets).T
    return (c_sq * d / Psi.shape[1]) * (Psi @ Psi.conj().T)


def guess_magnitude(prior: RadialPrior, N: int, twice_s: int, nodes=None) -> float:
    """Optimal guess radius ``g2 / sqrt(g1^2 + g2^2)``; 0 when both vanish."""
    g1, g2 = g_integrals(prior, N, twice_s, nodes)
    norm = np.hypot(g1, g2)
    return 0.0 if norm == 0.0 else float(g2 / norm)


@dataclass(frozen=True)
class PovmElement:
    N: int
    twice_s: int
    index: int
    direction: np.ndarray | None
    weight: float
    operator: np.ndarray = field(repr=False)
    guess_r: float = 0.0

    @property
    def sector(self) -> SpinSector:
        return SpinSector(self.N, self.twice_s)

    @property
    def guess(self) -> np.ndarray:
        """Bloch vector of the guess attached to this outcome."""
        if self.direction is None:
            return np.zeros(3)
        return self.guess_r * np.asarray(self.direction)


@dataclass(frozen=True)
class Povm:
    N: int
    elements: tuple
    prior_name: str = ""

    def __len__(self):
        return len(self.elements)

    def operators(self) -> np.ndarray:
        return np.array([e.operator for e in self.elements])

    def guesses(self) -> np.ndarray:
        return np.array([e.guess for e in self.elements])

    def identity_residual(self) -> float:
        total = np.sum(self.operators(), axis=0)
        return qlin.max_abs(total - np.eye(2**self.N))

    def with_guesses(self, guess_r) -> "Povm":
        elems = tuple(
            PovmElement(e.N, e.twice_s, e.index, e.direction, e.weight, e.operator, float(r))
            for e, r in zip(self.elements, guess_r)
        )
        return Povm(self.N, elems, self.prior_name)

    def to_json(self, with_matrices=False) -> dict:
        items = []
        for e in self.elements:
            item = {
                "sector": {"N": e.N, "twice_s": e.twice_s},
                "index": e.index,
                "direction": None if e.direction is None else [float(x) for x in e.direction],
                "weight": float(e.weight),
                "guess_r": float(e.guess_r),
            }
            if with_matrices:
                # row-major, each entry a [real, imag] pair
                item["matrix"] = [[[float(z.real), float(z.imag)] for z in row] for row in e.operator]
            items.append(item)
        return {"N": self.N, "prior": self.prior_name, "count": len(items), "elements": items}


def _sector_directions(twice_s, direction_sets):
    if twice_s == 0:
        return [None], np.array([1.0])
    ds = None if direction_sets is None else direction_sets.get(twice_s)
    if ds is None:
        try:
            ds = design_mod.direction_set(twice_s)
        except design_mod.DesignError as exc:
            raise PovmError(f"missing direction set for twice_s={twice_s}: {exc}") from None
    return list(ds.directions), np.asarray(ds.weights)


def build_povm(N: int, prior: RadialPrior | None = None, direction_sets=None, check=True, max_copies=None) -> Povm:
    """Minimal optimal POVM for ``N`` copies with guesses tuned to ``prior``.

    The operators do not depend on the prior; only the guess radii do.
    ``direction_sets`` optionally maps ``twice_s`` to a
    :class:`~optmeas.design.DirectionSet` overriding the defaults.
    """
    N = qlin.check_copies(N, max_copies)
    elements = []
    for sec in sectors(N, max_copies):
        dirs, weights = _sector_directions(sec.twice_s, direction_sets)
        r = 0.0 if prior is None else guess_magnitude(prior, N, sec.twice_s)
        for i, (n, w) in enumerate(zip(dirs, weights)):
            op = element_operator(N, sec.twice_s, n, float(w), max_copies)
            n_arr = None if n is None else np.asarray(n, dtype=float)
            elements.append(PovmElement(N, sec.twice_s, i, n_arr, float(w), op, r))
    povm = Povm(N, tuple(elements), "" if prior is None else prior.name)
    if check:
        resid = povm.identity_residual()
        if resid > IDENTITY_TOL:
            raise PovmError(f"POVM for N={N} does not resolve the identity (residual {resid:.3e})")
    return povm


def outcome_probability(element: PovmElement, b) -> float:
    """Closed-form ``Tr(O rho(b)^{(x) N})``."""
    b = qlin.as_bloch(b)
    x = (1.0 - float(b @ b)) / 4.0
    p = element.weight * element.sector.d * max(x, 0.0) ** element.sector.singlet_pairs
    if element.twice_s:
        p *= ((1.0 + float(b @ element.direction)) / 2.0) ** element.twice_s
    return float(p)


def outcome_probability_direct(element: PovmElement, b) -> float:
    """``Tr(O rho(b)^{(x) N})`` from dense matrices."""
    R = qlin.tensor_power(qlin.density_from_bloch(b), element.N)
    return float(np.real(np.sum(element.operator.T * R)))
