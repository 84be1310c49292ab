"""Quasi-free mesoscopic semigroup acting on Weyl elements and Gaussian states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DomainError
from .fluct import FluctuationKinematics, WeylElement, admissibility_min_eig
from .lindblad import ReducedGenerator

__all__ = [
    "CPReport",
    "MesoSemigroup",
    "cp_certificate",
    "evolve_gaussian",
    "log_negativity",
    "meso_apply",
    "propagator",
    "semigroup_residual",
]


@dataclass(frozen=True)
class MesoSemigroup:
    """``Phi_t[W(r)] = exp(-(r, Y_t r)) W(X_t^T r)`` with ``X_t = exp(t(H + D))``.

    ``Y_t = (Sigma - X_t Sigma X_t^T) / 2`` is positive semi-definite whenever
    the microscopic state is invariant, so the damping exponent is never
    positive.
    """

    reduced: ReducedGenerator
    kinematics: FluctuationKinematics

    def __post_init__(self):
        if self.reduced.L_mat.shape != self.kinematics.Sigma.shape:
            raise DomainError("reduced generator and kinematics have different dimensions")

    @property
    def L(self) -> np.ndarray:
        return self.reduced.L_mat

    @property
    def Sigma(self) -> np.ndarray:
        return self.kinematics.Sigma

    @property
    def sigma(self) -> np.ndarray:
        return self.kinematics.sigma

    @property
    def d(self) -> int:
        return self.L.shape[0]

    def X(self, t: float) -> np.ndarray:
        if t < 0:
            raise DomainError("the semigroup is only defined forward in time")
        if t == 0:
            return np.eye(self.d)
        return expm(t * self.L)

    def Y(self, t: float) -> np.ndarray:
        X = self.X(t)
        Y = 0.5 * (self.Sigma - X @ self.Sigma @ X.T)
        return 0.5 * (Y + Y.T)


def propagator(semigroup: MesoSemigroup, t: float):
    """``(X_t, Y_t)``."""
    return semigroup.X(t), semigroup.Y(t)


def meso_apply(semigroup: MesoSemigroup, t: float, w: WeylElement):
    """Image of ``exp(i phase) W(r)``: returns the damping ``f_r(t)`` and ``W(r_t)`` with the same phase."""
    X, Y = propagator(semigroup, t)
    f = 0.0 - float(w.r @ Y @ w.r)
    return f, WeylElement(X.T @ w.r, w.phase)


def semigroup_residual(semigroup: MesoSemigroup, s: float, t: float, r) -> float:
    """Largest deviation between ``Phi_s(Phi_t W(r))`` and ``Phi_{s+t} W(r)``."""
    w = WeylElement(r)
    f1, w1 = meso_apply(semigroup, t, w)
    f2, w2 = meso_apply(semigroup, s, w1)
    f, wst = meso_apply(semigroup, s + t, w)
    return float(max(abs(f1 + f2 - f), np.max(np.abs(w2.r - wst.r), initial=0.0)))


def evolve_gaussian(semigroup: MesoSemigroup, Sigma_init, t: float) -> np.ndarray:
    """Covariance of ``Omega o Phi_t`` for the centered Gaussian ``Omega`` with covariance ``Sigma_init``."""
    Sigma_init = np.asarray(Sigma_init, dtype=float)
    if Sigma_init.shape != (semigroup.d, semigroup.d) or np.max(np.abs(Sigma_init - Sigma_init.T)) > 1e-12:
        raise DomainError("Sigma_init must be a symmetric d x d matrix")
    if admissibility_min_eig(Sigma_init, semigroup.sigma) < -1e-10:
        raise DomainError("Sigma_init + (i/2) sigma is not positive semi-definite")
    X, Y = propagator(semigroup, t)
    out = X @ Sigma_init @ X.T + 2 * Y
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class CPReport:
    passed: bool
    min_eig: float

    def __bool__(self):
        return self.passed


def cp_certificate(semigroup: MesoSemigroup, t: float, tol: float = 1e-10) -> CPReport:
    """Gaussian-channel positivity: ``2 Y_t + (i/2)(sigma - X_t sigma X_t^T) >= 0``."""
    X, Y = propagator(semigroup, t)
    m = 2 * Y + 0.5j * (semigroup.sigma - X @ semigroup.sigma @ X.T)
    lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
    return CPReport(lo >= -tol, lo)


def log_negativity(Sigma, sigma) -> float:
    """Logarithmic negativity of a two-mode Gaussian state across modes (1,2)|(3,4).

    Symplectic eigenvalues are normalised so that the state condition reads
    ``nu >= 1``; partial transposition flips the last quadrature.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if Sigma.shape != (4, 4) or sigma.shape != (4, 4):
        raise DomainError("log_negativity needs 4 x 4 matrices")
    if np.max(np.abs(sigma[:2, 2:])) > 1e-12 or np.max(np.abs(sigma[2:, :2])) > 1e-12:
        raise DomainError("sigma must be block diagonal across the 2|2 partition")
    if abs(np.linalg.det(sigma)) < 1e-14:
        raise DomainError("sigma must be non-degenerate")
    if admissibility_min_eig(Sigma, sigma) < -1e-10:
        raise DomainError("Sigma is not an admissible covariance")
    P = np.diag([1.0, 1.0, 1.0, -1.0])
    pt = P @ Sigma @ P
    nu = 2 * np.abs(np.linalg.eigvals(np.linalg.solve(sigma, pt)))
    return float(max(0.0, -np.log(nu.min())))
