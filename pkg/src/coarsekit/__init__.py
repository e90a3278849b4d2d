"""Finite-scale partial translation structures, atlases and Property A certificates."""

from .mspace import (
    ControlData,
    FiniteMetricSpace,
    MetricError,
    ball,
    color_classes,
    control_functions,
    cycle_space,
    diag_neighborhood,
    fin_blocks,
    fin_space,
    greedy_separation,
    load_space,
    path_space,
    random_space,
    save_space,
)
from .group import (
    FiniteGroup,
    GroupError,
    canonical_atlas,
    cyclic_group,
    dihedral_group,
    direct_product,
    group_from_table,
    symmetric_group,
    word_metric,
)
from .ptrans import (
    Atlas,
    AtlasError,
    Chart,
    PartialBijection,
    PartialBijectionError,
    build_atlas_coloring,
    check_cotranslation,
    check_translation,
    pb_compose,
    pb_inverse,
    pullback_atlas,
    verify_atlas,
    verify_chart,
)
from .kappa import KappaCapExceeded, KappaCaps, KappaResult, kappa_search
from .roe import (
    Kernel,
    KernelError,
    algebra_dimension,
    claim_matrix,
    diag_restrict,
    positive_type_check,
    propagation,
    schur_multiply,
    translation_isometry,
    variation_check,
)

__version__ = "0.1.0"
