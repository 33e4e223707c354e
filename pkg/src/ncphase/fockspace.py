"""Truncated multi-mode bosonic Fock spaces and sparse operators on them.

Polynomial operators are assembled from monomials in single-mode factors.
Each mode's factors are multiplied in a space padded by the number of
factors and then truncated, so every stored matrix element equals the
matrix element of the untruncated operator (the compression of the
operator onto the truncated space).  Products of already-built
``FockOperator`` objects are plain truncated matrix products and are exact
only away from the truncation edge, which is what ``interior_projector``
guards against.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

#: Largest Hilbert-space dimension a basis may have.
MAX_DIM = 2_000_000

KINDS = ("x", "p", "a", "ad", "n")

PARTICLE_ROLES = ("particle-x", "particle-y", "particle-z")
AUX_A_ROLES = ("aux-a-1", "aux-a-2", "aux-a-3")
AUX_B_ROLES = ("aux-b-1", "aux-b-2", "aux-b-3")
ROLES = PARTICLE_ROLES + AUX_A_ROLES + AUX_B_ROLES


class BasisError(ValueError):
    pass


class NonHermitianError(ValueError):
    def __init__(self, message, term=None):
        super().__init__(message)
        self.term = term


@dataclass(frozen=True)
class FockBasis:
    """Truncated product basis; mode ``k`` holds occupations ``0..mode_caps[k]-1``.

    The ladder operators of mode ``k`` are those of an oscillator with mass
    ``masses[k]`` and frequency ``ref_frequencies[k]``; only their product,
    the mode's mass scale, enters the position and momentum matrices.
    A ``swapped`` mode uses the number basis rotated by i^n, in which the
    position matrix is imaginary and the momentum matrix real.
    """

    mode_caps: tuple[int, ...]
    ref_frequencies: tuple[float, ...]
    masses: tuple[float, ...]
    roles: tuple[str, ...]
    swapped: tuple[bool, ...] = ()

    def __post_init__(self):
        if not self.swapped:
            object.__setattr__(self, "swapped", (False,) * len(self.mode_caps))

    @property
    def n_modes(self) -> int:
        return len(self.mode_caps)

    @property
    def dim(self) -> int:
        return math.prod(self.mode_caps)

    @property
    def mass_scales(self) -> tuple[float, ...]:
        return tuple(m * w for m, w in zip(self.masses, self.ref_frequencies))

    @property
    def strides(self) -> tuple[int, ...]:
        out, s = [], 1
        for c in reversed(self.mode_caps):
            out.append(s)
            s *= c
        return tuple(reversed(out))

    def index(self, occupations: Sequence[int]) -> int:
        if len(occupations) != self.n_modes:
            raise BasisError("occupation tuple has wrong length")
        idx = 0
        for n, c in zip(occupations, self.mode_caps):
            if not 0 <= n < c:
                raise BasisError(f"occupation {n} outside 0..{c - 1}")
            idx = idx * c + int(n)
        return idx

    def occupations(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dim:
            raise BasisError(f"index {index} outside 0..{self.dim - 1}")
        occ = []
        for c in reversed(self.mode_caps):
            index, n = divmod(index, c)
            occ.append(n)
        return tuple(reversed(occ))

    def occupation_table(self) -> np.ndarray:
        """``(dim, n_modes)`` array of occupations in index order."""
        grids = np.indices(self.mode_caps).reshape(self.n_modes, -1)
        return grids.T

    def mode(self, role: str) -> int:
        try:
            return self.roles.index(role)
        except ValueError:
            raise BasisError(f"basis has no mode {role!r}") from None

    def has(self, *roles: str) -> bool:
        return all(r in self.roles for r in roles)

    def modes(self, roles: Iterable[str]) -> list[int]:
        return [self.mode(r) for r in roles]

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim)
        v[0] = 1.0
        return v


def build_basis(
    mode_caps, ref_frequencies, masses=None, roles=None, swapped=None, max_dim: int = MAX_DIM
) -> FockBasis:
    caps = tuple(int(c) for c in mode_caps)
    n = len(caps)
    if n == 0:
        raise BasisError("basis needs at least one mode")
    if any(c < 1 for c in caps):
        raise BasisError(f"every mode cap must be >= 1, got {caps}")
    freqs = tuple(float(w) for w in ref_frequencies)
    masses = (1.0,) * n if masses is None else tuple(float(m) for m in masses)
    if roles is None:
        roles = ROLES[:n] if n <= len(ROLES) else tuple(f"mode-{k}" for k in range(n))
    roles = tuple(roles)
    swapped = (False,) * n if swapped is None else tuple(bool(s) for s in swapped)
    if not len(freqs) == len(masses) == len(roles) == len(swapped) == n:
        raise BasisError("caps, frequencies, masses and roles differ in length")
    if len(set(roles)) != n:
        raise BasisError(f"duplicate mode roles {roles}")
    if any(not (s > 0 and math.isfinite(s)) for s in (m * w for m, w in zip(masses, freqs))):
        raise BasisError("mass * ref_frequency must be positive for every mode")
    dim = math.prod(caps)
    if dim > max_dim:
        raise BasisError(f"dimension {dim} exceeds budget {max_dim}")
    return FockBasis(caps, freqs, masses, roles, swapped)


def particle_aux_basis(
    particle_cap: int,
    particle_mass: float,
    particle_frequency: float,
    a_cap: int | None = None,
    b_cap: int | None = None,
    max_dim: int = MAX_DIM,
    real: bool = True,
) -> FockBasis:
    """Three particle modes followed by the a- and/or b-oscillator modes.

    Auxiliary modes are dimensionless with unit mass scale so that
    <0|q^2|0> = <0|p^2|0> = 1/2.  Passing ``None`` for a cap drops that
    auxiliary oscillator.  With ``real`` set the a-modes are swapped so
    that theta = c_theta a~ is imaginary like eta = c_eta p~b, which makes
    every Hamiltonian built from them real symmetric.
    """
    caps = [particle_cap] * 3
    freqs = [particle_frequency] * 3
    masses = [particle_mass] * 3
    roles = list(PARTICLE_ROLES)
    swapped = [False] * 3
    for cap, names, swap in ((a_cap, AUX_A_ROLES, real), (b_cap, AUX_B_ROLES, False)):
        if cap is not None:
            caps += [cap] * 3
            freqs += [1.0] * 3
            masses += [1.0] * 3
            roles += names
            swapped += [swap] * 3
    return build_basis(caps, freqs, masses, roles, swapped, max_dim=max_dim)


# --------------------------------------------------------------------------
# single-mode matrices


def _lower(cap: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, cap, dtype=float)), 1, shape=(cap, cap), format="csr")


def _single(kind: str, cap: int, scale: float, swapped: bool = False) -> sp.csr_matrix:
    a = _lower(cap)
    if swapped and kind in ("x", "p"):
        if kind == "x":
            return (1j * (a.T - a) / math.sqrt(2.0 * scale)).tocsr()
        return (-math.sqrt(scale / 2.0) * (a + a.T)).tocsr()
    if kind == "a":
        return a
    if kind == "ad":
        return a.T.tocsr()
    if kind == "n":
        return sp.diags(np.arange(cap, dtype=float), 0, format="csr")
    if kind == "x":
        return ((a + a.T) / math.sqrt(2.0 * scale)).tocsr()
    if kind == "p":
        return (1j * math.sqrt(scale / 2.0) * (a.T - a)).tocsr()
    raise ValueError(f"unknown factor kind {kind!r}")


def mode_product(kinds: Sequence[str], cap: int, scale: float, swapped: bool = False) -> sp.csr_matrix:
    """Exact truncated matrix of the ordered product of single-mode factors."""
    if not kinds:
        return sp.identity(cap, format="csr")
    big = cap + len(kinds)
    mats = [_single(k, big, scale, swapped) for k in kinds]
    prod = reduce(lambda u, v: u @ v, mats)
    prod = prod[:cap, :cap].tocsr()
    prod.eliminate_zeros()
    if not np.iscomplexobj(prod.data) or not np.any(prod.data.imag):
        prod = prod.real.tocsr() if np.iscomplexobj(prod.data) else prod
    return prod


# --------------------------------------------------------------------------
# operators


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Sparse matrix on a ``FockBasis``."""

    basis: FockBasis
    matrix: sp.csr_matrix

    def __post_init__(self):
        m = self.matrix
        if m.shape != (self.basis.dim, self.basis.dim):
            raise BasisError(f"matrix shape {m.shape} does not match basis dimension {self.basis.dim}")
        if not sp.isspmatrix_csr(m):
            object.__setattr__(self, "matrix", sp.csr_matrix(m))

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.matrix.data)

    def _check(self, other: "FockOperator"):
        if other.basis != self.basis:
            raise BasisError("operators live on different bases")

    def __add__(self, other):
        self._check(other)
        return FockOperator(self.basis, self.matrix + other.matrix)

    def __sub__(self, other):
        self._check(other)
        return FockOperator(self.basis, self.matrix - other.matrix)

    def __neg__(self):
        return FockOperator(self.basis, -self.matrix)

    def __mul__(self, c):
        return FockOperator(self.basis, self.matrix * c)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            self._check(other)
            return FockOperator(self.basis, (self.matrix @ other.matrix).tocsr())
        return self.matrix @ other

    def dag(self) -> "FockOperator":
        return FockOperator(self.basis, self.matrix.conj().T.tocsr())

    def hermiticity_error(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(np.abs(d.data).max()) if d.nnz else 0.0

    def is_hermitian(self, tol: float = 1e-14) -> bool:
        return self.hermiticity_error() <= tol

    def max_abs(self) -> float:
        return float(np.abs(self.matrix.data).max()) if self.nnz else 0.0

    def expectation(self, vec) -> complex:
        vec = np.asarray(vec)
        return complex(np.vdot(vec, self.matrix @ vec))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def to_coo_text(self) -> str:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = [f"{self.basis.dim} {coo.nnz}"]
        complex_data = np.iscomplexobj(coo.data)
        for k in order:
            v = coo.data[k]
            if complex_data:
                val = f"{v.real:.17g}{v.imag:+.17g}j"
            else:
                val = f"{v:.17g}"
            lines.append(f"{coo.row[k]} {coo.col[k]} {val}")
        return "\n".join(lines) + "\n"

    def dump(self, path) -> None:
        Path(path).write_text(self.to_coo_text())


def load_coo_text(text: str, basis: FockBasis) -> FockOperator:
    lines = text.strip().splitlines()
    dim, nnz = (int(t) for t in lines[0].split())
    if dim != basis.dim:
        raise BasisError(f"dump has dimension {dim}, basis has {basis.dim}")
    rows, cols, vals = [], [], []
    for line in lines[1:]:
        i, j, v = line.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(complex(v))
    vals = np.array(vals)
    if not np.any(vals.imag):
        vals = vals.real
    m = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    if m.nnz != nnz:
        raise ValueError(f"header says {nnz} entries, found {m.nnz}")
    return FockOperator(basis, m)


def identity(basis: FockBasis) -> FockOperator:
    return FockOperator(basis, sp.identity(basis.dim, format="csr"))


def zero(basis: FockBasis) -> FockOperator:
    return FockOperator(basis, sp.csr_matrix((basis.dim, basis.dim)))


def commutator(a: FockOperator, b: FockOperator) -> FockOperator:
    return a @ b - b @ a


def _embed(basis: FockBasis, mode: int, single: sp.spmatrix) -> sp.csr_matrix:
    caps = basis.mode_caps
    left = math.prod(caps[:mode])
    right = math.prod(caps[mode + 1:])
    m = sp.kron(sp.identity(left, format="csr"), single, format="csr")
    return sp.kron(m, sp.identity(right, format="csr"), format="csr")


def _check_mode(basis: FockBasis, mode: int):
    if not (isinstance(mode, (int, np.integer)) and 0 <= mode < basis.n_modes):
        raise BasisError(f"mode index {mode!r} outside 0..{basis.n_modes - 1}")


def ladder(basis: FockBasis, mode: int, kind: str) -> FockOperator:
    """Raising (``kind='raise'``) or lowering operator on one mode."""
    _check_mode(basis, mode)
    if kind not in ("raise", "lower"):
        raise ValueError(f"kind must be 'raise' or 'lower', got {kind!r}")
    single = _lower(basis.mode_caps[mode])
    if kind == "raise":
        single = single.T.tocsr()
    return FockOperator(basis, _embed(basis, mode, single))


def position_momentum(basis: FockBasis, mode: int, mass_scale: float | None = None):
    """Position and momentum of one mode, x = (a+a^dag)/sqrt(2s), p = i sqrt(s/2)(a^dag-a)."""
    _check_mode(basis, mode)
    scale = basis.mass_scales[mode] if mass_scale is None else float(mass_scale)
    if not scale > 0:
        raise ValueError(f"mass_scale must be positive, got {scale}")
    cap, swap = basis.mode_caps[mode], basis.swapped[mode]
    x = FockOperator(basis, _embed(basis, mode, _single("x", cap, scale, swap)))
    p = FockOperator(basis, _embed(basis, mode, _single("p", cap, scale, swap)))
    return x, p


def interior_projector(basis: FockBasis, guard: int) -> FockOperator:
    """Diagonal projector onto states with every occupation <= cap - 1 - guard."""
    if guard < 0 or guard >= min(basis.mode_caps):
        raise BasisError(f"guard {guard} must lie in 0..{min(basis.mode_caps) - 1}")
    mask = interior_mask(basis, guard)
    return FockOperator(basis, sp.diags(mask.astype(float), 0, format="csr"))


def interior_mask(basis: FockBasis, guard: int) -> np.ndarray:
    occ = basis.occupation_table()
    limits = np.array(basis.mode_caps) - 1 - guard
    return np.all(occ <= limits, axis=1)


def interior_residual(op: FockOperator, guard: int) -> float:
    """max |<i|op|j>| over interior states i, j."""
    mask = interior_mask(op.basis, guard)
    idx = np.flatnonzero(mask)
    sub = op.matrix[idx][:, idx]
    return float(np.abs(sub.data).max()) if sub.nnz else 0.0


# --------------------------------------------------------------------------
# polynomial expressions


class Poly:
    """Noncommutative polynomial in single-mode factors ``(mode, kind)``.

    Factors on different modes commute, so monomials are kept with factors
    stably sorted by mode; the order of factors on one mode is preserved.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms: dict[tuple, complex] = {}
        if terms:
            for mono, c in terms.items() if isinstance(terms, dict) else terms:
                self._add(tuple(mono), c)

    def _add(self, mono, c):
        if c == 0:
            return
        mono = tuple(sorted(mono, key=lambda f: f[0]))
        v = self.terms.get(mono, 0) + c
        if v == 0:
            self.terms.pop(mono, None)
        else:
            self.terms[mono] = v

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): c})

    @classmethod
    def factor(cls, mode: int, kind: str) -> "Poly":
        if kind not in KINDS:
            raise ValueError(f"unknown factor kind {kind!r}")
        return cls({((mode, kind),): 1.0})

    @classmethod
    def x(cls, mode):
        return cls.factor(mode, "x")

    @classmethod
    def p(cls, mode):
        return cls.factor(mode, "p")

    def __add__(self, other):
        other = _as_poly(other)
        out = Poly(self.terms)
        for mono, c in other.terms.items():
            out._add(mono, c)
        return out

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if isinstance(other, Poly):
            out = Poly()
            for m1, c1 in self.terms.items():
                for m2, c2 in other.terms.items():
                    out._add(m1 + m2, c1 * c2)
            return out
        return Poly({m: c * other for m, c in self.terms.items()})

    def __rmul__(self, other):
        return Poly({m: other * c for m, c in self.terms.items()})

    def __len__(self):
        return len(self.terms)

    def items(self):
        return self.terms.items()

    def modes(self) -> set[int]:
        return {f[0] for mono in self.terms for f in mono}

    def __repr__(self):
        return f"Poly({len(self.terms)} terms)"


def _as_poly(v) -> Poly:
    return v if isinstance(v, Poly) else Poly.const(v)


def describe(mono) -> str:
    if not mono:
        return "1"
    return "*".join(f"{kind}[{mode}]" for mode, kind in mono)


def _block_matrix(basis, modes, factors_by_mode, scales) -> sp.csr_matrix:
    mats = [
        mode_product(factors_by_mode.get(k, ()), basis.mode_caps[k], scales[k], basis.swapped[k])
        for k in modes
    ]
    return reduce(lambda u, v: sp.kron(u, v, format="csr"), mats)


def _split_point(caps) -> int:
    # Leading block whose dimension is closest to sqrt(dim).
    target = math.sqrt(math.prod(caps))
    best, best_err = 1, math.inf
    for k in range(1, len(caps)):
        err = abs(math.log(math.prod(caps[:k]) / target))
        if err < best_err:
            best, best_err = k, err
    return best


def compose(basis: FockBasis, terms, hermitian: bool = True, tol: float = 1e-10) -> FockOperator:
    """Sparse matrix of a sum of coefficient-weighted operator products.

    ``terms`` is a ``Poly`` or an iterable of ``(coefficient, factors)``
    with ``factors`` a sequence of ``(mode, kind)`` evaluated left to right.
    When ``hermitian`` is set the total is checked for Hermiticity and
    symmetrized; a non-Hermitian total raises ``NonHermitianError`` naming
    the term that contributes most to the anti-Hermitian part.
    """
    if isinstance(terms, Poly):
        items = [(c, mono) for mono, c in terms.items()]
    else:
        items = [(c, tuple(f)) for c, f in terms]
    scales = basis.mass_scales
    for _, mono in items:
        for mode, kind in mono:
            _check_mode(basis, mode)
            if kind not in KINDS:
                raise ValueError(f"unknown factor kind {kind!r}")

    n = basis.n_modes
    split = _split_point(basis.mode_caps) if n > 1 else n
    left_modes, right_modes = range(split), range(split, n)
    left_dim = math.prod(basis.mode_caps[:split])

    # group monomials by their right-block content: H = sum_g kron(A_g, B_g)
    groups: dict[tuple, list] = defaultdict(list)
    for c, mono in items:
        by_mode: dict[int, list] = defaultdict(list)
        for mode, kind in mono:
            by_mode[mode].append(kind)
        right_key = tuple((k, tuple(by_mode[k])) for k in right_modes if k in by_mode)
        left = {k: tuple(v) for k, v in by_mode.items() if k < split}
        groups[right_key].append((c, left))

    total = sp.csr_matrix((basis.dim, basis.dim))
    for right_key, lefts in groups.items():
        a = sp.csr_matrix((left_dim, left_dim))
        for c, left in lefts:
            a = a + c * _block_matrix(basis, left_modes, left, scales)
        if a.nnz == 0:
            continue
        if right_modes:
            b = _block_matrix(basis, right_modes, dict(right_key), scales)
            total = total + sp.kron(a, b, format="csr")
        else:
            total = total + a
    total = total.tocsr()
    total.sum_duplicates()
    if np.iscomplexobj(total.data) and not np.any(total.data.imag):
        total = total.real.tocsr()
    total.eliminate_zeros()

    if hermitian:
        anti = (total - total.conj().T).tocsr()
        err = float(np.abs(anti.data).max()) if anti.nnz else 0.0
        scale = max(1.0, float(np.abs(total.data).max()) if total.nnz else 0.0)
        if err > tol * scale:
            worst, worst_val = None, -1.0
            for c, mono in items:
                t = c * _block_matrix(basis, range(n), _by_mode(mono), scales)
                t_anti = t - t.conj().T
                val = abs(t_anti.multiply(anti.conj()).sum())
                if val > worst_val:
                    worst, worst_val = (c, mono), val
            raise NonHermitianError(
                f"non-Hermitian total (anti-Hermitian part {err:.3g}); largest contribution "
                f"from {worst[0]} * {describe(worst[1])}",
                term=worst,
            )
        total = ((total + total.conj().T) * 0.5).tocsr()
        total.eliminate_zeros()
    return FockOperator(basis, total)


def _by_mode(mono) -> dict[int, tuple]:
    by_mode: dict[int, list] = defaultdict(list)
    for mode, kind in mono:
        by_mode[mode].append(kind)
    return {k: tuple(v) for k, v in by_mode.items()}


def partial_vacuum_block(op: FockOperator, keep_modes: Sequence[int]) -> np.ndarray:
    """Dense block of ``op`` with every mode outside ``keep_modes`` in its vacuum.

    This is <vac_rest| op |vac_rest> as an operator on the kept modes, in the
    kept modes' own product ordering.
    """
    basis = op.basis
    occ = basis.occupation_table()
    others = [k for k in range(basis.n_modes) if k not in keep_modes]
    idx = np.flatnonzero(np.all(occ[:, others] == 0, axis=1)) if others else np.arange(basis.dim)
    return op.matrix[idx][:, idx].toarray()


def sub_basis(basis: FockBasis, modes: Sequence[int]) -> FockBasis:
    modes = list(modes)
    return FockBasis(
        tuple(basis.mode_caps[k] for k in modes),
        tuple(basis.ref_frequencies[k] for k in modes),
        tuple(basis.masses[k] for k in modes),
        tuple(basis.roles[k] for k in modes),
        tuple(basis.swapped[k] for k in modes),
    )
