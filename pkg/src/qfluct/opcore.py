"""Finite-dimensional operator algebra on spin chains.

Single-site operators are plain ``(p, p)`` complex ndarrays.  Operators on a
finite piece of the chain come in two flavours:

* :class:`ChainOperator` -- a sum of local operators, stored as one dense block
  per support (tuple of increasing site labels).  Block algebra is exact and
  never touches sites outside the supports involved.
* :class:`ProductOperator` -- a scalar times a tensor product of single-site
  factors, used for Weyl-like exponentials on long chains.
"""

from __future__ import annotations

from math import factorial
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, ResourceError

__all__ = [
    "DENSE_CAP",
    "ChainOperator",
    "ProductOperator",
    "as_site_operator",
    "commutator",
    "embed",
    "embed_dense",
    "expm",
    "expi_hermitian",
    "gell_mann_basis",
    "herm_exp_derivative",
    "multicommutator",
    "operator_norm",
    "pauli",
    "spin1",
]

#: largest Hilbert-space dimension that is materialised as a dense matrix
DENSE_CAP = 4096

HERM_TOL = 1e-12


def as_site_operator(a, p: int | None = None, hermitian: bool = False, tol: float = HERM_TOL) -> np.ndarray:
    """Validate and return ``a`` as a read-only complex square matrix."""
    arr = np.array(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DomainError(f"site operator must be a non-empty square matrix, got shape {arr.shape}")
    if p is not None and arr.shape[0] != p:
        raise DomainError(f"site operator has dimension {arr.shape[0]}, expected {p}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("site operator has non-finite entries")
    if hermitian:
        dev = np.max(np.abs(arr - arr.conj().T))
        if dev > tol:
            raise DomainError(f"operator is not hermitian (max |A - A^dag| = {dev:.3e})")
    arr.setflags(write=False)
    return arr


def pauli() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pauli matrices sigma_1, sigma_2, sigma_3."""
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
    s3 = np.array([[1, 0], [0, -1]], dtype=complex)
    return s1, s2, s3


def spin1() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin-1 angular momentum matrices in the J_3 eigenbasis ordered (+1, 0, -1)."""
    r = 1 / np.sqrt(2)
    j1 = r * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    j2 = r * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    j3 = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return j1, j2, j3


def gell_mann_basis(p: int) -> list[np.ndarray]:
    """Identity followed by the generalized Gell-Mann matrices of M_p(C).

    Ordering: symmetric/antisymmetric pairs for each ``j < k`` (row-major),
    then the ``p - 1`` diagonal matrices.  All elements are hermitian and
    trace-orthogonal; the identity has ``Tr = p``, the others ``Tr = 2``.
    """
    if p < 1:
        raise DomainError("p must be positive")
    basis = [np.eye(p, dtype=complex)]
    for j in range(p):
        for k in range(j + 1, p):
            s = np.zeros((p, p), dtype=complex)
            s[j, k] = s[k, j] = 1
            a = np.zeros((p, p), dtype=complex)
            a[j, k] = -1j
            a[k, j] = 1j
            basis += [s, a]
    for l in range(1, p):
        diag = np.zeros(p)
        diag[:l] = 1
        diag[l] = -l
        basis.append(np.sqrt(2 / (l * (l + 1))) * np.diag(diag).astype(complex))
    return basis


def embed_dense(a: np.ndarray, k: int, sites: Sequence[int]) -> np.ndarray:
    """Dense matrix of ``a`` acting on site ``k`` of ``sites`` (identity elsewhere)."""
    sites = list(sites)
    if k not in sites:
        raise DomainError(f"site {k} is not in support {sites}")
    p = a.shape[0]
    i = sites.index(k)
    left = np.eye(p ** i)
    right = np.eye(p ** (len(sites) - i - 1))
    return np.kron(np.kron(left, a), right)


def _expand(block: np.ndarray, sites: tuple, target: tuple, p: int) -> np.ndarray:
    """Re-express a block on ``sites`` as a block on the superset ``target``."""
    if sites == target:
        return block
    m = len(target)
    rest = [s for s in target if s not in sites]
    full = np.kron(block, np.eye(p ** len(rest)))
    order = list(sites) + rest
    if order == list(target):
        return full
    perm = [order.index(s) for s in target]
    t = full.reshape([p] * (2 * m)).transpose(perm + [m + i for i in perm])
    return t.reshape(p**m, p**m)


def _merge(s1: tuple, s2: tuple) -> tuple:
    return tuple(sorted(set(s1) | set(s2)))


class ChainOperator:
    """Sum of local operators on a chain of p-level sites.

    Parameters
    ----------
    p : int
        Single-site dimension.
    blocks : mapping
        ``support -> matrix`` where ``support`` is a strictly increasing tuple
        of site labels and ``matrix`` has shape ``(p**n, p**n)``, ``n = len(support)``.
        The empty support ``()`` holds multiples of the identity as a 1x1 block.
    """

    __slots__ = ("p", "_blocks")

    def __init__(self, p: int, blocks: Mapping[tuple, np.ndarray] | None = None):
        self.p = int(p)
        store = {}
        for support, mat in (blocks or {}).items():
            support = tuple(int(s) for s in support)
            if any(b <= a for a, b in zip(support, support[1:])):
                raise DomainError(f"support must be strictly increasing, got {support}")
            mat = np.asarray(mat, dtype=complex)
            n = self.p ** len(support)
            if mat.shape != (n, n):
                raise DomainError(f"block on {support} has shape {mat.shape}, expected {(n, n)}")
            if support in store:
                mat = store[support] + mat
            mat = np.array(mat)
            mat.setflags(write=False)
            store[support] = mat
        self._blocks = store

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls, p: int, scale: complex = 1.0) -> "ChainOperator":
        return cls(p, {(): np.array([[scale]], dtype=complex)})

    @classmethod
    def zero(cls, p: int) -> "ChainOperator":
        return cls(p)

    @classmethod
    def site(cls, a, k: int) -> "ChainOperator":
        a = as_site_operator(a)
        return cls(a.shape[0], {(int(k),): a})

    @classmethod
    def from_dense(cls, mat, sites: Sequence[int], p: int) -> "ChainOperator":
        return cls(p, {tuple(sites): mat})

    # -- inspection -------------------------------------------------------
    @property
    def blocks(self) -> Mapping[tuple, np.ndarray]:
        return MappingProxyType(self._blocks)

    @property
    def support(self) -> tuple:
        sites = set()
        for s in self._blocks:
            sites.update(s)
        return tuple(sorted(sites))

    def dense(self, support: Sequence[int] | None = None, cap: int = DENSE_CAP) -> np.ndarray:
        """Dense matrix over ``support`` (default: the operator's own support)."""
        target = self.support if support is None else tuple(support)
        if not set(self.support) <= set(target):
            raise DomainError(f"operator support {self.support} not contained in {target}")
        dim = self.p ** len(target)
        if dim > cap:
            raise ResourceError(f"dense dimension {dim} exceeds cap {cap}")
        out = np.zeros((dim, dim), dtype=complex)
        for s, b in self._blocks.items():
            out += _expand(b, s, target, self.p)
        return out

    def prune(self, atol: float = 0.0) -> "ChainOperator":
        """Drop blocks whose entries are all below ``atol`` in modulus."""
        return ChainOperator(self.p, {s: b for s, b in self._blocks.items() if np.max(np.abs(b)) > atol})

    def compact(self) -> "ChainOperator":
        """Merge all blocks into a single dense block over the full support."""
        return ChainOperator(self.p, {self.support: self.dense()})

    def dag(self) -> "ChainOperator":
        return ChainOperator(self.p, {s: b.conj().T for s, b in self._blocks.items()})

    def shift(self, k: int) -> "ChainOperator":
        """Lattice translation by ``k`` sites."""
        return ChainOperator(self.p, {tuple(i + k for i in s): b for s, b in self._blocks.items()})

    def __repr__(self):
        return f"ChainOperator(p={self.p}, support={self.support}, n_blocks={len(self._blocks)})"

    # -- arithmetic -------------------------------------------------------
    def _check(self, other: "ChainOperator"):
        if not isinstance(other, ChainOperator):
            return NotImplemented
        if other.p != self.p:
            raise DomainError(f"site dimension mismatch: {self.p} vs {other.p}")
        return None

    def __add__(self, other):
        if np.isscalar(other):
            other = ChainOperator.identity(self.p, other)
        if self._check(other) is NotImplemented:
            return NotImplemented
        blocks = dict(self._blocks)
        for s, b in other._blocks.items():
            blocks[s] = blocks[s] + b if s in blocks else b
        return ChainOperator(self.p, blocks)

    __radd__ = __add__

    def __neg__(self):
        return ChainOperator(self.p, {s: -b for s, b in self._blocks.items()})

    def __sub__(self, other):
        if np.isscalar(other):
            other = ChainOperator.identity(self.p, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return ChainOperator(self.p, {s: c * b for s, b in self._blocks.items()})

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1 / c)

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        out: dict = {}
        p = self.p
        for s1, b1 in self._blocks.items():
            for s2, b2 in other._blocks.items():
                u = _merge(s1, s2)
                prod = _expand(b1, s1, u, p) @ _expand(b2, s2, u, p)
                out[u] = out[u] + prod if u in out else prod
        return ChainOperator(p, out)

    def allclose(self, other: "ChainOperator", atol: float = 1e-12) -> bool:
        return operator_norm(self - other) <= atol


def embed(a, k: int, support: Iterable[int]) -> ChainOperator:
    """Single-site operator ``a`` placed at site ``k`` of ``support``.

    The result is identity on the remaining sites; it is stored as a block on
    ``(k,)`` since identities are implicit.
    """
    support = tuple(support)
    if k not in support:
        raise DomainError(f"site {k} is not in support {support}")
    return ChainOperator.site(a, k)


def commutator(A, B):
    """``AB - BA`` for two chain operators or two site matrices."""
    if isinstance(A, np.ndarray) and isinstance(B, np.ndarray):
        if A.shape != B.shape:
            raise DomainError(f"dimension mismatch: {A.shape} vs {B.shape}")
        return A @ B - B @ A
    if not (isinstance(A, ChainOperator) and isinstance(B, ChainOperator)):
        raise DomainError("commutator expects two ChainOperators or two ndarrays")
    if A.p != B.p:
        raise DomainError(f"site dimension mismatch: {A.p} vs {B.p}")
    return A @ B - B @ A


def multicommutator(q: np.ndarray, z: np.ndarray, n: int) -> np.ndarray:
    """Nested commutator ``[q, [q, ... [q, z]]]`` with ``n`` brackets."""
    if n < 0:
        raise DomainError("n must be non-negative")
    q = np.asarray(q, dtype=complex)
    out = np.asarray(z, dtype=complex)
    if q.shape != out.shape:
        raise DomainError(f"dimension mismatch: {q.shape} vs {out.shape}")
    for _ in range(n):
        out = q @ out - out @ q
    return out


def herm_exp_derivative(M, Mdot, tol: float = 1e-16, max_terms: int = 500) -> np.ndarray:
    """Generator ``O`` with ``d/dt exp(iM_t) = O exp(iM_t)``.

    Sums ``O = sum_{k>=1} i^k/k! K_M^{k-1}[Mdot]`` with ``K_M = [M, .]`` until
    the bound ``(2||M||)^k ||Mdot|| / k!`` on the next term is below ``tol``.
    """
    M = as_site_operator(M, hermitian=True)
    Mdot = as_site_operator(Mdot, p=M.shape[0], hermitian=True)
    norm_m = np.linalg.norm(M, 2)
    norm_d = np.linalg.norm(Mdot, 2)
    out = np.zeros_like(M)
    if norm_d == 0:
        return out
    nested = Mdot.copy()
    for k in range(1, max_terms + 1):
        out = out + (1j**k / factorial(k)) * nested
        bound = (2 * norm_m) ** k * norm_d / factorial(k + 1)
        if bound < tol and k + 1 > 2 * norm_m:
            break
        nested = M @ nested - nested @ M
    else:
        raise ResourceError(f"series did not reach tol={tol} within {max_terms} terms")
    return out


def operator_norm(A, cap: int = DENSE_CAP) -> float:
    """Largest singular value of a chain or product operator (dense evaluation)."""
    if isinstance(A, ProductOperator):
        # ||a (x) b|| = ||a|| ||b||
        return abs(A.coef) * float(np.prod([np.linalg.norm(f, 2) for f in A.factors]))
    if isinstance(A, np.ndarray):
        return float(np.linalg.norm(A, 2))
    if not A.blocks:
        return 0.0
    return float(np.linalg.norm(A.dense(cap=cap), 2))


def expi_hermitian(q: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """``exp(i * scale * q)`` for hermitian ``q`` through its eigendecomposition."""
    w, v = np.linalg.eigh(q)
    return (v * np.exp(1j * scale * w)) @ v.conj().T


class ProductOperator:
    """``coef * (f_1 (x) f_2 (x) ... )`` over the listed sites.

    Factors are shared by reference: a uniform product over ``10**4`` sites
    holds one matrix, so per-site work can be cached on ``id(factor)``.
    """

    __slots__ = ("p", "coef", "sites", "factors")

    def __init__(self, sites: Sequence[int], factors: Sequence[np.ndarray], coef: complex = 1.0):
        sites = tuple(int(s) for s in sites)
        factors = tuple(factors)
        if len(sites) != len(factors):
            raise DomainError("one factor per site required")
        if any(b <= a for a, b in zip(sites, sites[1:])):
            raise DomainError(f"sites must be strictly increasing, got {sites[:8]}...")
        if not factors:
            raise DomainError("ProductOperator needs at least one site")
        self.p = factors[0].shape[0]
        self.sites = sites
        self.factors = factors
        self.coef = complex(coef)

    @classmethod
    def uniform(cls, factor: np.ndarray, n_sites: int, coef: complex = 1.0) -> "ProductOperator":
        factor = np.asarray(factor, dtype=complex)
        return cls(range(n_sites), [factor] * n_sites, coef)

    def __repr__(self):
        return f"ProductOperator(p={self.p}, n_sites={len(self.sites)}, coef={self.coef:.6g})"

    def map_factors(self, func) -> "ProductOperator":
        """Apply ``func`` to every factor, evaluating once per distinct factor object."""
        cache: dict = {}
        out = []
        for f in self.factors:
            key = id(f)
            if key not in cache:
                cache[key] = func(f)
            out.append(cache[key])
        return ProductOperator(self.sites, out, self.coef)

    def dag(self) -> "ProductOperator":
        flipped = self.map_factors(lambda f: f.conj().T)
        return ProductOperator(self.sites, flipped.factors, np.conj(self.coef))

    def __matmul__(self, other):
        if not isinstance(other, ProductOperator):
            return NotImplemented
        if other.p != self.p:
            raise DomainError(f"site dimension mismatch: {self.p} vs {other.p}")
        left = dict(zip(self.sites, self.factors))
        right = dict(zip(other.sites, other.factors))
        cache: dict = {}
        sites = sorted(set(left) | set(right))
        factors = []
        for s in sites:
            a, b = left.get(s), right.get(s)
            if a is None:
                factors.append(b)
            elif b is None:
                factors.append(a)
            else:
                key = (id(a), id(b))
                if key not in cache:
                    cache[key] = a @ b
                factors.append(cache[key])
        return ProductOperator(sites, factors, self.coef * other.coef)

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return ProductOperator(self.sites, self.factors, self.coef * c)

    __rmul__ = __mul__

    def to_chain(self, cap: int = DENSE_CAP) -> ChainOperator:
        dim = self.p ** len(self.sites)
        if dim > cap:
            raise ResourceError(f"dense dimension {dim} exceeds cap {cap}")
        mat = np.array([[self.coef]], dtype=complex)
        for f in self.factors:
            mat = np.kron(mat, f)
        return ChainOperator(self.p, {self.sites: mat})
