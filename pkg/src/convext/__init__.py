"""Convex extensions of regularized risk objectives with binary labels, and solvers built on them."""
from .envelope import (
    Cut,
    Method,
    SubgradientPair,
    TermExtension,
    envelope_cut,
    envelope_subgradient,
    envelope_value,
    logistic_partial_extension_value,
    trivial_extension_value,
    xi_map,
)
from .errors import (
    ConfigurationError,
    ConvextError,
    DomainError,
    InfeasibleError,
    NumericError,
    UnsupportedMethodError,
)
from .instance import Decomposition, ExtensionModel, Instance, LabelConstraintSet, build_extensions, solve_supervised
from .l1 import L1EnvelopeProblem, aux, l1_envelope_value
from .l2 import L2EnvelopeProblem, solve_l2_envelope
from .losses import LossKind, LossSpec, RegKind, RegularizerSpec, loss_value, regularizer_value
from .oracle import GridSpec, MipSolution, golden_section, oracle_convexity, oracle_mip, oracle_psi
from .solvers import BnBResult, RelaxationResult, branch_and_bound, project_labels, solve_relaxation
from .tightest import LabelSet, SupportSet, enumerate_support_sets, tightest_extension_value

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
