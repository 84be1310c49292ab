"""Translation-invariant product states on the chain."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import expm

from .errors import DomainError
from .opcore import ChainOperator, ProductOperator, as_site_operator

__all__ = [
    "ProductState",
    "expect",
    "expect_product",
    "gibbs_single_site",
    "two_point_sum",
]


@dataclass(frozen=True)
class ProductState:
    """The state ``omega = (x)_k rho`` with the same density matrix on every site."""

    rho: np.ndarray

    def __post_init__(self):
        rho = as_site_operator(self.rho, hermitian=True)
        if abs(np.trace(rho) - 1) > 1e-12:
            raise DomainError(f"Tr rho = {np.trace(rho).real:.15g}, expected 1")
        lo = np.linalg.eigvalsh(rho).min()
        if lo < -1e-12:
            raise DomainError(f"rho is not positive (min eigenvalue {lo:.3e})")
        object.__setattr__(self, "rho", rho)

    @property
    def p(self) -> int:
        return self.rho.shape[0]

    def site_mean(self, a) -> complex:
        """``Tr(rho a)`` for a single-site matrix."""
        return complex(np.trace(self.rho @ a))

    def density(self, n: int) -> np.ndarray:
        """``rho`` tensored ``n`` times."""
        return reduce(np.kron, [self.rho] * n, np.ones((1, 1), dtype=complex))


def gibbs_single_site(h_site, beta: float) -> ProductState:
    """Product of single-site Gibbs states ``exp(-beta h) / Tr exp(-beta h)``."""
    h = as_site_operator(h_site, hermitian=True)
    if beta < 0:
        raise DomainError("beta must be non-negative")
    # shift by the ground energy so large beta stays finite
    w = np.linalg.eigvalsh(h)
    g = expm(-beta * (h - w.min() * np.eye(h.shape[0])))
    g = 0.5 * (g + g.conj().T)
    return ProductState(g / np.trace(g).real)


def expect(state: ProductState, A) -> complex:
    """``omega(A)`` evaluated block by block (or factor by factor) with per-site traces."""
    if isinstance(A, ProductOperator):
        if A.p != state.p:
            raise DomainError("site dimension mismatch")
        cache: dict = {}
        val = A.coef
        for f in A.factors:
            key = id(f)
            if key not in cache:
                cache[key] = complex(np.trace(state.rho @ f))
            val *= cache[key]
        return val
    if not isinstance(A, ChainOperator):
        raise DomainError(f"cannot take expectation of {type(A).__name__}")
    if A.p != state.p:
        raise DomainError("site dimension mismatch")
    total = 0j
    for support, block in A.blocks.items():
        total += _block_mean(state, block, len(support))
    return total


def _block_mean(state, block, n) -> complex:
    if n == 0:
        return complex(block[0, 0])
    if n == 1:
        return complex(np.sum(state.rho.T * block))
    return complex(np.sum(state.density(n).T * block))


def expect_product(state: ProductState, A: ChainOperator, B: ChainOperator) -> complex:
    """``omega(A @ B)`` without forming every block product.

    For a product state, blocks with disjoint supports factorize, so only
    overlapping pairs need an explicit product.
    """
    if A.p != B.p or A.p != state.p:
        raise DomainError("site dimension mismatch")
    a_items = list(A.blocks.items())
    b_items = list(B.blocks.items())
    a_means = [_block_mean(state, b, len(s)) for s, b in a_items]
    b_means = [_block_mean(state, b, len(s)) for s, b in b_items]
    total = sum(a_means) * sum(b_means)

    by_site = defaultdict(set)
    for j, (s, _) in enumerate(b_items):
        for k in s:
            by_site[k].add(j)
    for i, (s1, b1) in enumerate(a_items):
        partners = set()
        for k in s1:
            partners |= by_site.get(k, set())
        for j in partners:
            s2, b2 = b_items[j]
            prod = ChainOperator(A.p, {s1: b1}) @ ChainOperator(A.p, {s2: b2})
            (u, blk), = prod.blocks.items()
            total += _block_mean(state, blk, len(u)) - a_means[i] * b_means[j]
    return total


def two_point_sum(state: ProductState, x_i, x_j, cutoff: int = 0, tail_tol: float = 1e-14):
    """Summed connected correlation ``sum_{|k|<=cutoff} omega(x_i tau^k(x_j)) - omega(x_i)omega(x_j)``.

    Returns
    -------
    value : complex
    summable : bool
        True when every ``k != 0`` term is below ``tail_tol`` in modulus
        (exactly the case for product states).
    """
    x_i = as_site_operator(x_i, p=state.p, hermitian=True)
    x_j = as_site_operator(x_j, p=state.p, hermitian=True)
    disconnected = state.site_mean(x_i) * state.site_mean(x_j)
    value = 0j
    tail = 0.0
    a = ChainOperator.site(x_i, 0)
    for k in range(-cutoff, cutoff + 1):
        term = expect(state, a @ ChainOperator.site(x_j, k)) - disconnected
        value += term
        if k != 0:
            tail = max(tail, abs(term))
    return value, tail < tail_tol
