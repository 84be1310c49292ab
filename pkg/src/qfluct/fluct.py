"""Fluctuation operators, Weyl elements and Gaussian characteristic functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chainstate import ProductState, expect
from .errors import DomainError, NumericalError
from .opcore import ChainOperator, ProductOperator, as_site_operator, expi_hermitian

__all__ = [
    "FluctuationKinematics",
    "GaussianState",
    "ObservableSet",
    "WeylElement",
    "admissibility_min_eig",
    "covariance",
    "gaussian_char",
    "gaussian_expect",
    "gaussian_two_point",
    "kinematics",
    "local_fluctuation",
    "local_weyl",
    "symplectic_form",
    "weyl_compose",
    "weyl_product_expect",
]

REAL_TOL = 1e-12


@dataclass(frozen=True)
class ObservableSet:
    """Hermitian single-site observables ``x_1..x_d`` and their means under a state."""

    chi: tuple
    means: np.ndarray

    def __post_init__(self):
        chi = tuple(as_site_operator(x, hermitian=True) for x in self.chi)
        if not chi:
            raise DomainError("chi must contain at least one observable")
        p = chi[0].shape[0]
        if any(x.shape != (p, p) for x in chi):
            raise DomainError("all observables must share the site dimension")
        means = np.asarray(self.means, dtype=float)
        if means.shape != (len(chi),):
            raise DomainError("one mean per observable required")
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "means", means)

    @classmethod
    def bind(cls, chi, state: ProductState) -> "ObservableSet":
        """Attach the means ``omega(x_i)`` computed from ``state``."""
        chi = [as_site_operator(x, p=state.p, hermitian=True) for x in chi]
        means = []
        for x in chi:
            m = state.site_mean(x)
            if abs(m.imag) > REAL_TOL:
                raise NumericalError(f"mean of hermitian observable has imaginary part {m.imag:.3e}")
            means.append(m.real)
        return cls(tuple(chi), np.array(means))

    @property
    def d(self) -> int:
        return len(self.chi)

    @property
    def p(self) -> int:
        return self.chi[0].shape[0]

    def check_means(self, state: ProductState, tol: float = 1e-12) -> bool:
        return bool(np.allclose([state.site_mean(x).real for x in self.chi], self.means, atol=tol, rtol=0))

    def q(self, r) -> np.ndarray:
        """Centered single-site combination ``q_r = sum_i r_i (x_i - omega(x_i))``."""
        r = self._vec(r)
        out = np.zeros((self.p, self.p), dtype=complex)
        for ri, x, m in zip(r, self.chi, self.means):
            out += ri * (x - m * np.eye(self.p))
        return out

    def combine(self, c) -> np.ndarray:
        """Uncentered combination ``sum_i c_i x_i``."""
        c = self._vec(c)
        return sum(ci * x for ci, x in zip(c, self.chi))

    def _vec(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float).reshape(-1)
        if r.shape != (self.d,):
            raise DomainError(f"vector of length {self.d} expected, got {r.shape}")
        if not np.all(np.isfinite(r)):
            raise DomainError("vector has non-finite entries")
        return r


def local_fluctuation(chi: ObservableSet, r, n_sites: int) -> ChainOperator:
    """``(r, F_N) = sum_k q_r^{(k)} / sqrt(N_T)`` on sites ``0..n_sites-1``."""
    if n_sites < 1:
        raise DomainError("n_sites must be positive")
    q = chi.q(r) / np.sqrt(n_sites)
    return ChainOperator(chi.p, {(k,): q for k in range(n_sites)})


def local_weyl(chi: ObservableSet, r, n_sites: int) -> ProductOperator:
    """``W_N(r) = exp(i (r, F_N))`` kept as the product of per-site exponentials."""
    if n_sites < 1:
        raise DomainError("n_sites must be positive")
    u = expi_hermitian(chi.q(r), 1 / np.sqrt(n_sites))
    return ProductOperator.uniform(u, n_sites)


def _real(mat: np.ndarray, what: str, tol: float = REAL_TOL) -> np.ndarray:
    res = np.max(np.abs(mat.imag)) if mat.size else 0.0
    if res > tol:
        raise NumericalError(f"{what} has imaginary residue {res:.3e}")
    return mat.real.copy()


def symplectic_form(state: ProductState, chi: ObservableSet) -> np.ndarray:
    """``sigma^{kl} = -i omega([x_k, x_l])``; single-site for product states."""
    d = chi.d
    out = np.zeros((d, d), dtype=complex)
    for k in range(d):
        for l in range(d):
            xk, xl = chi.chi[k], chi.chi[l]
            out[k, l] = -1j * state.site_mean(xk @ xl - xl @ xk)
    return _real(out, "symplectic form")


def covariance(state: ProductState, chi: ObservableSet, cutoff: int = 0) -> np.ndarray:
    """``Sigma^{ij} = sum_{|k|<=cutoff} omega({x_i - w_i, tau^k(x_j - w_j)}) / 2``."""
    d, p = chi.d, chi.p
    centered = [x - m * np.eye(p) for x, m in zip(chi.chi, chi.means)]
    out = np.zeros((d, d), dtype=complex)
    for i in range(d):
        a = ChainOperator.site(centered[i], 0)
        for j in range(d):
            for k in range(-cutoff, cutoff + 1):
                b = ChainOperator.site(centered[j], k)
                out[i, j] += 0.5 * expect(state, a @ b + b @ a)
    return _real(out, "covariance")


def admissibility_min_eig(Sigma, sigma) -> float:
    """Smallest eigenvalue of the hermitian matrix ``Sigma + (i/2) sigma``."""
    m = np.asarray(Sigma, dtype=complex) + 0.5j * np.asarray(sigma)
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())


@dataclass(frozen=True)
class FluctuationKinematics:
    """Symplectic form and covariance of the fluctuation algebra."""

    sigma: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        Sigma = np.asarray(self.Sigma, dtype=float)
        if sigma.shape != Sigma.shape or sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise DomainError("sigma and Sigma must be square with equal shape")
        if np.max(np.abs(sigma + sigma.T)) > 1e-12:
            raise DomainError("sigma is not antisymmetric")
        if np.max(np.abs(Sigma - Sigma.T)) > 1e-12:
            raise DomainError("Sigma is not symmetric")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "Sigma", Sigma)

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    def min_eig(self) -> float:
        return admissibility_min_eig(self.Sigma, self.sigma)

    def admissible(self, tol: float = 1e-10) -> bool:
        return self.min_eig() >= -tol


def kinematics(state: ProductState, chi: ObservableSet) -> FluctuationKinematics:
    return FluctuationKinematics(symplectic_form(state, chi), covariance(state, chi))


@dataclass(frozen=True)
class GaussianState:
    """Centered quasi-free state with characteristic function ``exp(-(r, Sigma r)/2)``."""

    Sigma: np.ndarray
    sigma: np.ndarray
    mean: np.ndarray = field(default=None)

    def __post_init__(self):
        Sigma = np.asarray(self.Sigma, dtype=float)
        mean = np.zeros(Sigma.shape[0]) if self.mean is None else np.asarray(self.mean, dtype=float)
        if np.any(mean != 0):
            raise DomainError("only centered Gaussian states are supported")
        if admissibility_min_eig(Sigma, self.sigma) < -1e-10:
            raise DomainError("Sigma + (i/2) sigma is not positive semi-definite")
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "mean", mean)

    def __call__(self, w: "WeylElement") -> complex:
        return gaussian_expect(self.Sigma, w)


@dataclass(frozen=True)
class WeylElement:
    """The algebra element ``exp(i * phase) W(r)``.

    The phase is kept unreduced; compare phases modulo 2 pi.
    """

    r: np.ndarray
    phase: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(r)) and np.isfinite(self.phase)):
            raise DomainError("WeylElement entries must be finite")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "phase", float(self.phase))

    def inverse(self) -> "WeylElement":
        return WeylElement(-self.r, -self.phase)


def weyl_compose(w1: WeylElement, w2: WeylElement, sigma) -> WeylElement:
    """CCR product ``W(r1) W(r2) = exp(-i sigma(r1, r2)/2) W(r1 + r2)``."""
    if w1.r.shape != w2.r.shape:
        raise DomainError("Weyl elements of different dimension")
    s12 = float(w1.r @ np.asarray(sigma) @ w2.r)
    return WeylElement(w1.r + w2.r, w1.phase + w2.phase - 0.5 * s12)


def gaussian_char(Sigma, r) -> float:
    r = np.asarray(r, dtype=float)
    return float(np.exp(-0.5 * r @ np.asarray(Sigma) @ r))


def gaussian_expect(Sigma, w: WeylElement) -> complex:
    """``Omega(exp(i phase) W(r))``."""
    return np.exp(1j * w.phase) * gaussian_char(Sigma, w.r)


def gaussian_two_point(Sigma, sigma, r1, r2) -> complex:
    """``Omega(W(r1) W(r2)) = exp(-(r1+r2, Sigma (r1+r2))/2 - i sigma(r1, r2)/2)``."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    s = r1 + r2
    return complex(np.exp(-0.5 * s @ np.asarray(Sigma) @ s - 0.5j * (r1 @ np.asarray(sigma) @ r2)))


def weyl_product_expect(state: ProductState, chi: ObservableSet, vectors, n_sites: int) -> complex:
    """``omega(W_N(v_1) W_N(v_2) ...)`` through per-site traces."""
    ops = [local_weyl(chi, v, n_sites) for v in vectors]
    prod = ops[0]
    for op in ops[1:]:
        prod = prod @ op
    return expect(state, prod)
