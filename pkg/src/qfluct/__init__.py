"""Fluctuation operators of quantum spin chains and their mesoscopic Gaussian dynamics.

Microscopic side: product states, local Lindblad generators and exact
finite-chain evolution.  Mesoscopic side: the quasi-free semigroup on the
Weyl algebra of fluctuations, with certificates tying the two together.
"""

from .chainstate import ProductState, expect, expect_product, gibbs_single_site, two_point_sum
from .errors import (
    ConfigError,
    DomainError,
    LocalityViolation,
    NumericalError,
    QFluctError,
    ResourceError,
)
from .fluct import (
    FluctuationKinematics,
    GaussianState,
    ObservableSet,
    WeylElement,
    covariance,
    gaussian_char,
    gaussian_expect,
    gaussian_two_point,
    kinematics,
    local_fluctuation,
    local_weyl,
    symplectic_form,
    weyl_compose,
    weyl_product_expect,
)
from .lindblad import (
    CouplingProfile,
    LindbladSpec,
    MicroDynamics,
    ReducedGenerator,
    apply_generator,
    check_locality,
    generator_action_residual,
    generator_superoperator,
    invariance_probe,
    kossakowski_check,
    micro_evolve,
    micro_evolve_factorized,
    rn_statistics,
    s_operator,
    s_operator_moments,
)
from .meso import MesoSemigroup, cp_certificate, evolve_gaussian, log_negativity, meso_apply, propagator, semigroup_residual
from .opcore import ChainOperator, ProductOperator, commutator, embed, herm_exp_derivative, pauli, spin1

__version__ = "0.1.0"

__all__ = [
    "ChainOperator",
    "ConfigError",
    "CouplingProfile",
    "DomainError",
    "FluctuationKinematics",
    "GaussianState",
    "LindbladSpec",
    "LocalityViolation",
    "MesoSemigroup",
    "MicroDynamics",
    "NumericalError",
    "ObservableSet",
    "ProductOperator",
    "ProductState",
    "QFluctError",
    "ReducedGenerator",
    "ResourceError",
    "WeylElement",
    "apply_generator",
    "check_locality",
    "commutator",
    "covariance",
    "cp_certificate",
    "embed",
    "evolve_gaussian",
    "expect",
    "expect_product",
    "gaussian_char",
    "gaussian_expect",
    "gaussian_two_point",
    "generator_action_residual",
    "generator_superoperator",
    "gibbs_single_site",
    "herm_exp_derivative",
    "invariance_probe",
    "kinematics",
    "kossakowski_check",
    "local_fluctuation",
    "local_weyl",
    "log_negativity",
    "meso_apply",
    "micro_evolve",
    "micro_evolve_factorized",
    "pauli",
    "propagator",
    "rn_statistics",
    "s_operator",
    "s_operator_moments",
    "semigroup_residual",
    "spin1",
    "symplectic_form",
    "two_point_sum",
    "weyl_compose",
    "weyl_product_expect",
]
