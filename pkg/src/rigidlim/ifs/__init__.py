from .conditions import (
    ball_fraction_inside,
    conformality_defect,
    validate_boundary_density,
    validate_f1,
    validate_f3,
    validate_osc,
)
from .conjugate import build_conjugated, deformation_norms
from .distortion import DistortionConstants, check_ball_inclusions, deep_points, distortion_constants
from .maps import (
    Conjugated,
    Deformation,
    FunctionMap,
    Isometry,
    Similarity,
    SmoothMap,
    conorm,
    operator_norm,
)
from .system import (
    ENUMERATION_CAP,
    Box,
    IFSystem,
    compose,
    compose_batch,
    level_inf_norms,
    level_sup_norms,
    level_table,
    representatives,
    word_sup_norm,
    words_sup_norms,
)

__all__ = [name for name in dir() if not name.startswith("_")]
