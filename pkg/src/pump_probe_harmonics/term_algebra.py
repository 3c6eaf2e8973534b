"""
Term-algebra construction of the harmonic-balance system.

Density-matrix unknowns are opaque ids (i, j, k) and the harmonic factors
Y = exp(i delta t), Z = exp(-i delta t) are tracked as exponent pairs (a, b).
Only Hamiltonian-times-unknown products occur, so linear expressions are
enough and no computer-algebra package is involved. This path is slow and
exists to cross-check :mod:`harmonic_solver`.
"""

from collections import defaultdict
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import StructuralError
from .harmonic_solver import LinearSystem
from .system import SystemSpec, build_hamiltonian, harmonic_orders, vec_index

UnknownId = Tuple[int, int, int]
Monomial = Tuple[int, int]
ScalarPoly = Dict[Monomial, complex]


class LinearExpr:
    """sum(coefficient * unknown) + constant, with zero coefficients pruned."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Optional[Mapping[UnknownId, complex]] = None, constant: complex = 0j):
        self.terms: Dict[UnknownId, complex] = {
            uid: complex(c) for uid, c in (terms or {}).items() if c != 0
        }
        self.constant = complex(constant)

    @classmethod
    def unknown(cls, i: int, j: int, k: int, coefficient: complex = 1.0) -> "LinearExpr":
        return cls({(i, j, k): coefficient})

    def is_zero(self) -> bool:
        return not self.terms and self.constant == 0

    def scaled(self, factor: complex) -> "LinearExpr":
        return LinearExpr({u: c * factor for u, c in self.terms.items()}, self.constant * factor)

    def __add__(self, other: "LinearExpr") -> "LinearExpr":
        terms = dict(self.terms)
        for uid, c in other.terms.items():
            terms[uid] = terms.get(uid, 0j) + c
        return LinearExpr(terms, self.constant + other.constant)

    def __neg__(self) -> "LinearExpr":
        return self.scaled(-1.0)

    def __sub__(self, other: "LinearExpr") -> "LinearExpr":
        return self + (-other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinearExpr):
            return NotImplemented
        return self.terms == other.terms and self.constant == other.constant

    def __repr__(self) -> str:
        parts = [f"({c:.6g})*rho[{i},{j}]^{k:+d}" for (i, j, k), c in sorted(self.terms.items())]
        if self.constant != 0 or not parts:
            parts.append(f"({self.constant:.6g})")
        return " + ".join(parts)


def normalize_monomial(a: int, b: int) -> Monomial:
    """Apply Y*Z = 1: strip the common power of Y and Z."""
    common = min(a, b)
    return a - common, b - common


def monomial_of(k: int) -> Monomial:
    """Y^k for k > 0, Z^-k for k < 0, 1 for k = 0."""
    return (k, 0) if k >= 0 else (0, -k)


class HarmonicPoly:
    """Map from normalized (a, b) exponent pairs to linear expressions."""

    __slots__ = ("groups",)

    def __init__(self, groups: Optional[Mapping[Monomial, LinearExpr]] = None, order: Optional[int] = None):
        merged: Dict[Monomial, LinearExpr] = {}
        for (a, b), expr in (groups or {}).items():
            key = normalize_monomial(a, b)
            if order is not None and max(key) > order:
                continue
            merged[key] = merged[key] + expr if key in merged else expr
        self.groups = {key: expr for key, expr in merged.items() if not expr.is_zero()}

    def normalized(self) -> "HarmonicPoly":
        return HarmonicPoly(self.groups)

    def is_zero(self) -> bool:
        return not self.groups

    def group(self, k: int) -> LinearExpr:
        return self.groups.get(monomial_of(k), LinearExpr())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HarmonicPoly):
            return NotImplemented
        return self.groups == other.groups

    def __str__(self) -> str:
        if not self.groups:
            return "0"
        lines = []
        for (a, b), expr in sorted(self.groups.items()):
            factor = f"Y^{a}" if a else (f"Z^{b}" if b else "1")
            lines.append(f"{factor}: {expr!r}")
        return "\n".join(lines)


def _hamiltonian_polys(spec: SystemSpec) -> Tuple[List[List[ScalarPoly]], List[List[ScalarPoly]]]:
    """H and H^dagger entries as scalar polynomials in Y and Z."""
    ham = build_hamiltonian(spec)
    n = spec.n_levels
    h: List[List[ScalarPoly]] = []
    for i in range(n):
        row = []
        for j in range(n):
            entry = {(0, 0): ham.h0[i, j], (1, 0): ham.h_plus[i, j], (0, 1): ham.h_minus[i, j]}
            row.append({key: complex(c) for key, c in entry.items() if c != 0})
        h.append(row)
    # conj(Y) = Z, so the dagger swaps the exponents
    h_dagger = [
        [{(b, a): c.conjugate() for (a, b), c in h[j][i].items()} for j in range(n)]
        for i in range(n)
    ]
    return h, h_dagger


def _rho_poly(i: int, j: int, order: int) -> Dict[Monomial, LinearExpr]:
    return {monomial_of(k): LinearExpr.unknown(i, j, k) for k in harmonic_orders(order)}


def _accumulate(
    target: Dict[Monomial, Dict[UnknownId, complex]],
    scalar: ScalarPoly,
    rho: Dict[Monomial, LinearExpr],
    factor: complex,
    order: int,
) -> None:
    for (a1, b1), c in scalar.items():
        for (a2, b2), expr in rho.items():
            key = normalize_monomial(a1 + a2, b1 + b2)
            if max(key) > order:
                continue
            bucket = target[key]
            for uid, coefficient in expr.terms.items():
                bucket[uid] = bucket.get(uid, 0j) + factor * c * coefficient


def symbolic_rhs(spec: SystemSpec, order: int) -> List[List[HarmonicPoly]]:
    """R = -i (H rho - rho H^dagger) + rho_s, expanded and truncated at ``order``."""
    if order < 1:
        raise StructuralError(f"harmonic order must be >= 1, got {order}")
    n = spec.n_levels
    h, h_dagger = _hamiltonian_polys(spec)
    rho = [[_rho_poly(i + 1, j + 1, order) for j in range(n)] for i in range(n)]

    influx: Dict[int, List[Tuple[int, float]]] = defaultdict(list)
    for channel in spec.source_channels:
        influx[channel.to_level - 1].append((channel.from_level - 1, channel.rate))

    rhs: List[List[HarmonicPoly]] = []
    for i in range(n):
        row = []
        for j in range(n):
            acc: Dict[Monomial, Dict[UnknownId, complex]] = defaultdict(dict)
            for m in range(n):
                _accumulate(acc, h[i][m], rho[m][j], -1j, order)
                # rho H^dagger: scalar on the right, same bookkeeping
                _accumulate(acc, h_dagger[m][j], rho[i][m], 1j, order)
            if i == j:
                for source, rate in influx[i]:
                    _accumulate(acc, {(0, 0): complex(rate)}, rho[source][source], 1.0, order)
            row.append(HarmonicPoly({key: LinearExpr(terms) for key, terms in acc.items()}))
        rhs.append(row)
    return rhs


def extract_equations(rhs: Sequence[Sequence[HarmonicPoly]], spec: SystemSpec, order: int) -> List[LinearExpr]:
    """Split each entry into harmonic groups after subtracting i k delta rho^k."""
    n = spec.n_levels
    delta = spec.beat_frequency
    equations = []
    for i in range(n):
        for j in range(n):
            for k in harmonic_orders(order):
                derivative = LinearExpr.unknown(i + 1, j + 1, k, 1j * k * delta)
                equations.append(rhs[i][j].group(k) - derivative)
    return equations


def equations_to_matrix(equations: Iterable[LinearExpr], n_levels: int, order: int) -> LinearSystem:
    """Coefficient matrix and right-hand side of the ordered equations."""
    equations = list(equations)
    size = (2 * order + 1) * n_levels * n_levels
    if len(equations) != size:
        raise StructuralError(f"expected {size} equations, got {len(equations)}")

    m = np.zeros((size, size), dtype=complex)
    b = np.zeros(size, dtype=complex)
    for row, equation in enumerate(equations):
        for (i, j, k), coefficient in equation.terms.items():
            m[row, vec_index(i, j, k, n_levels, order) - 1] += coefficient
        b[row] = -equation.constant
    return LinearSystem(m=m, b=b, n_levels=n_levels, order=order)


def assemble_m_symbolic(spec: SystemSpec, order: int) -> LinearSystem:
    """Full term-algebra pipeline: expand, group, convert."""
    rhs = symbolic_rhs(spec, order)
    return equations_to_matrix(extract_equations(rhs, spec, order), spec.n_levels, order)
