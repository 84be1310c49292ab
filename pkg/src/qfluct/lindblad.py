"""Local Lindblad generators on finite chains and their reduction to span(chi).

Sites are labelled ``0 .. n_sites - 1``; ``n_sites`` plays the role of the
total number of sites ``N_T``.  Translation invariance makes the labelling
immaterial, and allowing any ``n_sites`` (not only odd ones) lets convergence
studies use round numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .chainstate import ProductState, expect, expect_product
from .errors import DomainError, LocalityViolation, NumericalError, ResourceError
from .fluct import ObservableSet, local_fluctuation, local_weyl
from .opcore import (
    DENSE_CAP,
    ChainOperator,
    ProductOperator,
    _expand,
    _merge,
    as_site_operator,
    embed_dense,
    gell_mann_basis,
)

__all__ = [
    "CouplingProfile",
    "KossakowskiReport",
    "LindbladSpec",
    "MicroDynamics",
    "ReducedGenerator",
    "RnRow",
    "SPARSE_CAP",
    "apply_generator",
    "check_locality",
    "generator_action_residual",
    "generator_superoperator",
    "invariance_probe",
    "kossakowski_check",
    "micro_evolve",
    "micro_evolve_factorized",
    "rn_commutator_norm",
    "rn_operator",
    "rn_statistics",
    "s_operator",
    "s_operator_moments",
]

#: largest superoperator dimension handled through the sparse action path
SPARSE_CAP = 65536

FORMS = ("standard", "double_commutator")


@dataclass(frozen=True)
class CouplingProfile:
    """Translation-invariant site coupling ``J(p)``, ``p = k - l``, stored with finite range."""

    kind: str
    values: Mapping[int, complex]
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        vals = {int(p): complex(v) for p, v in self.values.items() if v != 0}
        for p, v in vals.items():
            if not np.isfinite(v):
                raise DomainError(f"J({p}) is not finite")
            if abs(vals.get(-p, 0) - np.conj(v)) > 1e-15 * max(1.0, abs(v)):
                raise DomainError(f"J(-{p}) must equal conj(J({p}))")
        object.__setattr__(self, "values", dict(sorted(vals.items())))
        object.__setattr__(self, "params", dict(self.params))

    @classmethod
    def onsite(cls, lam: float) -> "CouplingProfile":
        return cls("onsite", {0: lam}, {"lambda": lam})

    @classmethod
    def geometric(cls, lam: float, q: float, cutoff: int = 32, floor: float = 1e-15) -> "CouplingProfile":
        """``J(p) = lam * q**|p|`` for ``|p| <= cutoff``, dropping terms below ``floor``."""
        if not abs(q) < 1:
            raise DomainError("geometric coupling needs |q| < 1 for summability")
        vals = {}
        for p in range(cutoff + 1):
            v = lam * q**p
            if p > 0 and abs(v) < floor:
                break
            vals[p] = vals[-p] = v
        return cls("geometric", vals, {"lambda": lam, "q": q})

    @classmethod
    def custom(cls, values: Mapping[int, complex]) -> "CouplingProfile":
        return cls("custom", values)

    def __call__(self, p: int) -> complex:
        return self.values.get(int(p), 0j)

    @property
    def offsets(self) -> list[int]:
        return list(self.values)

    @property
    def is_onsite(self) -> bool:
        return set(self.values) <= {0}

    @property
    def l1_norm(self) -> float:
        return float(sum(abs(v) for v in self.values.values()))

    def toeplitz(self, n_sites: int) -> np.ndarray:
        """The ``n x n`` matrix ``J_{kl} = J(k - l)``."""
        idx = np.arange(n_sites)
        diff = idx[:, None] - idx[None, :]
        out = np.zeros((n_sites, n_sites), dtype=complex)
        for p, v in self.values.items():
            out[diff == p] = v
        return out

    def pairs(self, n_sites: int):
        """All ``(k, l, J(k - l))`` with nonzero coupling on the chain."""
        for k in range(n_sites):
            for p, v in self.values.items():
                l = k - p
                if 0 <= l < n_sites:
                    yield k, l, v


@dataclass(frozen=True)
class LindbladSpec:
    """Single-site data of the generator ``L_N = i[H_N, .] + D_N``.

    ``form="standard"`` is the GKLS dissipator
    ``sum J_kl D_mn (v_m^k X v_n^dag^l - {v_m^k v_n^dag^l, X}/2)``;
    ``form="double_commutator"`` is ``sum J_kl D_mn/2 [[v_m^k, X], v_n^dag^l]``.
    """

    h: np.ndarray
    kraus: tuple
    D: np.ndarray
    J: CouplingProfile
    form: str = "standard"

    def __post_init__(self):
        h = as_site_operator(self.h, hermitian=True)
        p = h.shape[0]
        kraus = tuple(as_site_operator(v, p=p) for v in self.kraus)
        D = np.atleast_2d(np.asarray(self.D, dtype=complex))
        m = len(kraus)
        if D.shape != (m, m):
            raise DomainError(f"D must be {m}x{m}, got {D.shape}")
        if np.max(np.abs(D - D.conj().T), initial=0.0) > 1e-12:
            raise DomainError("D must be hermitian")
        if m and np.linalg.eigvalsh(D).min() < -1e-12:
            raise DomainError("D must be positive semi-definite")
        if self.form not in FORMS:
            raise DomainError(f"form must be one of {FORMS}")
        j0 = self.J(0)
        if not (abs(j0.imag) == 0 and j0.real > 0):
            raise DomainError("J(0) must be real and positive")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "kraus", kraus)
        object.__setattr__(self, "D", D)

    @property
    def p(self) -> int:
        return self.h.shape[0]

    def replace(self, **changes) -> "LindbladSpec":
        data = dict(h=self.h, kraus=self.kraus, D=self.D, J=self.J, form=self.form)
        data.update(changes)
        return LindbladSpec(**data)


def _check_support(X: ChainOperator, n_sites: int, p: int):
    if X.p != p:
        raise DomainError(f"operator has site dimension {X.p}, generator {p}")
    sup = X.support
    if sup and (sup[0] < 0 or sup[-1] >= n_sites):
        raise DomainError(f"support {sup} outside chain 0..{n_sites - 1}")


def _dissipator_pairs(spec: LindbladSpec, support: tuple, n_sites: int):
    """Site pairs whose dissipator term can act non-trivially on ``support``."""
    sset = set(support)
    out = set()
    for k in support:
        for off in spec.J.offsets:
            for a, b in ((k, k - off), (k + off, k)):
                if not (0 <= a < n_sites and 0 <= b < n_sites):
                    continue
                if spec.form == "double_commutator" and not (a in sset and b in sset):
                    continue
                out.add((a, b))
    return sorted(out)


def apply_generator(spec: LindbladSpec, n_sites: int, X: ChainOperator, part: str = "full") -> ChainOperator:
    """Heisenberg-picture generator ``L_N[X]`` on the chain ``0..n_sites-1``.

    ``part`` selects ``"hamiltonian"``, ``"dissipator"`` or the ``"full"`` sum.
    """
    _check_support(X, n_sites, spec.p)
    p = spec.p
    vdag = [v.conj().T for v in spec.kraus]
    out: dict = {}

    def add(s, mat):
        out[s] = out[s] + mat if s in out else mat

    for S, B in X.blocks.items():
        if not S:
            continue  # multiples of the identity are annihilated
        if part in ("full", "hamiltonian"):
            acc = np.zeros_like(B)
            for k in S:
                hk = embed_dense(spec.h, k, S)
                acc += hk @ B - B @ hk
            add(S, 1j * acc)
        if part in ("full", "dissipator"):
            for k, l in _dissipator_pairs(spec, S, n_sites):
                jkl = spec.J(k - l)
                U = _merge(S, (k, l))
                Bu = _expand(B, S, U, p)
                acc = np.zeros_like(Bu)
                for mu, nu in product(range(len(spec.kraus)), repeat=2):
                    dmn = spec.D[mu, nu]
                    if dmn == 0:
                        continue
                    V = embed_dense(spec.kraus[mu], k, U)
                    W = embed_dense(vdag[nu], l, U)
                    VW = V @ W
                    if spec.form == "standard":
                        acc += dmn * (V @ Bu @ W - 0.5 * (VW @ Bu + Bu @ VW))
                    else:
                        acc += 0.5 * dmn * (V @ Bu @ W - Bu @ VW - W @ V @ Bu + W @ Bu @ V)
                add(U, jkl * acc)
    return ChainOperator(p, out)


def generator_superoperator(spec: LindbladSpec, n_sites: int, cap: int = SPARSE_CAP) -> sp.csr_matrix:
    """Sparse matrix of ``L_N`` acting on row-major vectorised operators.

    Uses ``vec(A X B) = (A (x) B^T) vec(X)``.
    """
    p = spec.p
    dim = p**n_sites
    if dim * dim > cap:
        raise ResourceError(
            f"superoperator dimension {dim * dim} exceeds cap {cap}; use the factorized path for on-site couplings"
        )
    eye = sp.identity(dim, dtype=complex, format="csr")

    def site(a, k):
        return sp.kron(sp.kron(sp.identity(p**k), sp.csr_matrix(a)), sp.identity(p ** (n_sites - k - 1)), format="csr")

    H = sum(site(spec.h, k) for k in range(n_sites))
    L = 1j * (sp.kron(H, eye) - sp.kron(eye, H.T))
    kraus = [[site(v, k) for k in range(n_sites)] for v in spec.kraus]
    kraus_dag = [[site(v.conj().T, k) for k in range(n_sites)] for v in spec.kraus]
    for k, l, jkl in spec.J.pairs(n_sites):
        for mu, nu in product(range(len(spec.kraus)), repeat=2):
            c = jkl * spec.D[mu, nu]
            if c == 0:
                continue
            V, W = kraus[mu][k], kraus_dag[nu][l]
            VW = V @ W
            if spec.form == "standard":
                L = L + c * (sp.kron(V, W.T) - 0.5 * sp.kron(VW, eye) - 0.5 * sp.kron(eye, VW.T))
            else:
                L = L + 0.5 * c * (sp.kron(V, W.T) - sp.kron(eye, VW.T) - sp.kron(W @ V, eye) + sp.kron(W, V.T))
    return L.tocsr()


class MicroDynamics:
    """Exact ``exp(t L_N)`` on the full chain, with cached superoperator and propagators.

    Dense ``expm`` is used up to ``dense_cap`` superoperator dimension; beyond
    that the action on a single vector is computed with ``expm_multiply``.
    """

    def __init__(self, spec: LindbladSpec, n_sites: int, dense_cap: int = DENSE_CAP, sparse_cap: int = SPARSE_CAP):
        self.spec = spec
        self.n_sites = int(n_sites)
        self.dim = spec.p**self.n_sites
        self.dense_cap = dense_cap
        self.superop = generator_superoperator(spec, self.n_sites, cap=sparse_cap)
        self._props: dict = {}

    @property
    def sites(self) -> tuple:
        return tuple(range(self.n_sites))

    def _propagate(self, vec: np.ndarray, t: float) -> np.ndarray:
        if t == 0:
            return vec
        if self.dim**2 <= self.dense_cap:
            if t not in self._props:
                self._props[t] = expm(t * self.superop.toarray())
            return self._props[t] @ vec
        return expm_multiply(t * self.superop, vec)

    def evolve(self, X: ChainOperator, t: float) -> ChainOperator:
        if t < 0:
            raise DomainError("the semigroup is only defined forward in time")
        _check_support(X, self.n_sites, self.spec.p)
        mat = X.dense(self.sites, cap=max(DENSE_CAP, self.dim))
        out = self._propagate(mat.reshape(-1), float(t)).reshape(self.dim, self.dim)
        return ChainOperator(self.spec.p, {self.sites: out})


def micro_evolve(spec: LindbladSpec, n_sites: int, X: ChainOperator, t: float) -> ChainOperator:
    """``Phi_t^N[X] = exp(t L_N)[X]`` (Heisenberg picture) as a dense block on the full chain."""
    return MicroDynamics(spec, n_sites).evolve(X, t)


def single_site_propagator(spec: LindbladSpec, t: float) -> np.ndarray:
    if not spec.J.is_onsite:
        raise DomainError("factorized evolution requires an on-site coupling profile")
    if t < 0:
        raise DomainError("the semigroup is only defined forward in time")
    return expm(t * generator_superoperator(spec, 1).toarray())


def micro_evolve_factorized(spec: LindbladSpec, X: ProductOperator, t: float, propagator=None) -> ProductOperator:
    """Evolve a product operator under an on-site generator, one site at a time.

    With on-site couplings ``L_N`` is a sum of commuting single-site
    generators, so ``exp(t L_N)`` is the tensor power of the ``p^2 x p^2``
    single-site propagator.
    """
    P = single_site_propagator(spec, t) if propagator is None else propagator
    if not spec.J.is_onsite:
        raise DomainError("factorized evolution requires an on-site coupling profile")
    p = spec.p
    if X.p != p:
        raise DomainError("site dimension mismatch")
    return X.map_factors(lambda f: (P @ f.reshape(-1)).reshape(p, p))


@dataclass(frozen=True)
class ReducedGenerator:
    """Real ``d x d`` matrices with ``L[x_i] = sum_j (H + D)_{ij} x_j``."""

    H_mat: np.ndarray
    D_mat: np.ndarray
    residual: float = 0.0

    @property
    def L_mat(self) -> np.ndarray:
        return self.H_mat + self.D_mat


def _project(chi: ObservableSet, k: int, Y: ChainOperator):
    """Coefficients of ``Y`` along ``x_j^{(k)}`` and the norm of the remainder."""
    U = _merge(Y.support, (k,))
    basis = [embed_dense(x, k, U) for x in chi.chi]
    gram = np.array([[np.trace(a.conj().T @ b) for b in basis] for a in basis])
    Ymat = Y.dense(U)
    rhs = np.array([np.trace(a.conj().T @ Ymat) for a in basis])
    try:
        coef = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise DomainError("observables in chi are linearly dependent") from exc
    rest = Ymat - sum(c * a for c, a in zip(coef, basis))
    return coef, float(np.linalg.norm(rest, 2))


def check_locality(spec: LindbladSpec, chi: ObservableSet, n_sites: int = 3, tol: float = 1e-10) -> ReducedGenerator:
    """Extract the reduced matrices, verifying that ``L_N`` maps span(chi) into itself.

    Every site of the chain is tested and the Hamiltonian and dissipative
    parts are projected separately.

    Raises
    ------
    LocalityViolation
        If some ``L_N[x_i^{(k)}]`` has a component outside span(chi) at site k,
        or the extracted matrices differ between sites.
    """
    if chi.p != spec.p:
        raise DomainError("site dimension mismatch between chi and generator")
    d = chi.d
    found = []
    worst = 0.0
    for k in range(n_sites):
        mats = {}
        for part in ("hamiltonian", "dissipator"):
            M = np.zeros((d, d), dtype=complex)
            for i, x in enumerate(chi.chi):
                Y = apply_generator(spec, n_sites, ChainOperator.site(x, k), part=part)
                coef, res = _project(chi, k, Y)
                worst = max(worst, res)
                if res > tol:
                    raise LocalityViolation(res, i, site=k)
                M[i] = coef
            imag = np.max(np.abs(M.imag))
            if imag > tol:
                raise NumericalError(f"reduced {part} matrix has imaginary residue {imag:.3e}")
            mats[part] = M.real
        found.append((mats["hamiltonian"], mats["dissipator"]))
    H0, D0 = found[n_sites // 2]
    for i, (H, D) in enumerate(found):
        dev = max(np.max(np.abs(H - H0)), np.max(np.abs(D - D0)))
        if dev > tol:
            raise LocalityViolation(dev, 0, site=i)
    return ReducedGenerator(H0, D0, worst)


@dataclass(frozen=True)
class KossakowskiReport:
    passed: bool
    min_eig: float
    J_min_eig: float
    D_min_eig: float

    def __bool__(self):
        return self.passed


def kossakowski_check(spec: LindbladSpec, n_sites: int, tol: float = 1e-12) -> KossakowskiReport:
    """Positivity of ``J (x) D`` with ``J`` the ``n_sites x n_sites`` Toeplitz coupling matrix."""
    jw = np.linalg.eigvalsh(spec.J.toeplitz(n_sites))
    dw = np.linalg.eigvalsh(spec.D) if spec.D.size else np.zeros(1)
    products = np.outer(jw, dw)
    return KossakowskiReport(
        passed=bool(jw.min() >= -tol and dw.min() >= -tol),
        min_eig=float(products.min()),
        J_min_eig=float(jw.min()),
        D_min_eig=float(dw.min()),
    )


def invariance_probe(spec: LindbladSpec, state: ProductState, n_sites: int = 3) -> float:
    """``max |omega(L_N[X])|`` over products of single-site basis matrices on the chain."""
    p = spec.p
    if p ** (2 * n_sites) > DENSE_CAP:
        raise ResourceError("invariance probe basis too large; lower n_sites")
    basis = gell_mann_basis(p)
    sites = tuple(range(n_sites))
    worst = 0.0
    for combo in product(range(len(basis)), repeat=n_sites):
        mat = np.ones((1, 1), dtype=complex)
        for a in combo:
            mat = np.kron(mat, basis[a])
        Y = apply_generator(spec, n_sites, ChainOperator(p, {sites: mat}))
        worst = max(worst, abs(expect(state, Y)))
    return worst


def s_operator(spec: LindbladSpec, chi: ObservableSet, r, n_sites: int) -> ChainOperator:
    """``S(r;N) = (L[F] F + F L[F] - L[F^2]) / 2`` with ``F = (r, F_N)``."""
    F = local_fluctuation(chi, r, n_sites)
    LF = apply_generator(spec, n_sites, F)
    LF2 = apply_generator(spec, n_sites, F @ F)
    S = 0.5 * (LF @ F + F @ LF - LF2)
    return S.prune(1e-15)


def s_operator_moments(spec: LindbladSpec, chi: ObservableSet, state: ProductState, r, n_sites: int):
    """``(omega(S), omega(S^2))`` from exact per-site traces."""
    S = s_operator(spec, chi, r, n_sites)
    mean = expect(state, S)
    second = expect_product(state, S, S)
    for name, v in (("omega(S)", mean), ("omega(S^2)", second)):
        if abs(v.imag) > 1e-10:
            raise NumericalError(f"{name} has imaginary part {v.imag:.3e}")
    return mean.real, second.real


@dataclass(frozen=True)
class RnRow:
    n_sites: int
    mean: complex
    limit: complex
    variance: float


def rn_operator(a, b, J: CouplingProfile, n_sites: int) -> ChainOperator:
    """``R_N = (1/N_T) sum_{kl} J_kl a^{(k)} b^{(l)}`` as a chain operator."""
    a = as_site_operator(a)
    b = as_site_operator(b, p=a.shape[0])
    out = ChainOperator.zero(a.shape[0])
    for k, l, jkl in J.pairs(n_sites):
        out = out + jkl * (ChainOperator.site(a, k) @ ChainOperator.site(b, l))
    return out / n_sites


def rn_statistics(state: ProductState, a, b, J: CouplingProfile, n_list: Sequence[int]) -> list[RnRow]:
    """Mean of ``R_N`` and ``omega((R_N - R)^dag (R_N - R))`` for each chain length.

    Exact for product states.  With ``x~ = x - omega(x)``, ``R_N - omega(R_N)``
    splits into single-site pieces and centered two-site pieces
    ``J_kl a~^k b~^l``; only coinciding site patterns survive in the second
    moment, which leaves O(N_T * range(J)) scalar work.
    """
    p = state.p
    a = as_site_operator(a, p=p)
    b = as_site_operator(b, p=p)
    I = np.eye(p)
    al, be = state.site_mean(a), state.site_mean(b)
    ab = state.site_mean(a @ b)
    at, bt = a - al * I, b - be * I
    c = a @ b - ab * I
    ops = (c, at, bt)
    gram = np.array([[state.site_mean(x.conj().T @ y) for y in ops] for x in ops])
    j0 = J(0)
    off = {q: v for q, v in J.values.items() if q != 0}
    limit = j0 * ab + al * be * sum(off.values())
    rows = []
    for n in n_list:
        if n < 1:
            raise DomainError("chain lengths must be positive")
        pair_sum = sum(v * (n - abs(q)) for q, v in off.items() if abs(q) < n)
        mean = (n * j0 * ab + al * be * pair_sum) / n
        single = 0.0
        for j in range(n):
            row = sum(v for q, v in off.items() if 0 <= j - q < n)  # sum_l J(j - l), l = j - q
            col = sum(v for q, v in off.items() if 0 <= j + q < n)  # sum_k J(k - j), k = j + q
            vec = np.array([j0, be * row, al * col])
            single += (vec.conj() @ gram @ vec).real
        cross = 0.0
        for q, v in off.items():
            if abs(q) < n:
                cross += (n - abs(q)) * (
                    abs(v) ** 2 * (gram[1, 1] * gram[2, 2]).real
                    + (np.conj(v) * J(-q) * gram[1, 2] * gram[2, 1]).real
                )
        var = (single + cross) / n**2 + abs(mean - limit) ** 2
        rows.append(RnRow(int(n), complex(mean), complex(limit), float(var)))
    return rows


def rn_commutator_norm(chi: ObservableSet, r, a, b, J: CouplingProfile, n_sites: int) -> float:
    """``||[W_N(r), R_N]||`` evaluated densely."""
    sites = tuple(range(n_sites))
    W = local_weyl(chi, r, n_sites).to_chain().dense(sites)
    R = rn_operator(a, b, J, n_sites).dense(sites)
    return float(np.linalg.norm(W @ R - R @ W, 2))


def generator_action_residual(
    spec: LindbladSpec, chi: ObservableSet, r, n_sites: int, reduced: ReducedGenerator | None = None
) -> float:
    """Norm of ``L_N[W_N] - (i L_N[F] - [F, (r, L F_N)]/2 + S) W_N`` with ``F = (r, F_N)``."""
    if spec.p**n_sites > DENSE_CAP:
        raise ResourceError("chain too long for dense evaluation")
    if reduced is None:
        reduced = check_locality(spec, chi)
    r = np.asarray(r, dtype=float)
    sites = tuple(range(n_sites))
    W = local_weyl(chi, r, n_sites).to_chain()
    LW = apply_generator(spec, n_sites, W)
    F = local_fluctuation(chi, r, n_sites)
    LF = apply_generator(spec, n_sites, F)
    FL = local_fluctuation(chi, reduced.L_mat.T @ r, n_sites)
    S = s_operator(spec, chi, r, n_sites)
    approx = (1j * LF - 0.5 * (F @ FL - FL @ F) + S) @ W
    diff = LW.dense(sites) - approx.dense(sites)
    return float(np.linalg.norm(diff, 2))
