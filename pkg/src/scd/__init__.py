"""Schmitt-Conway-Danzer tiles: construction, stacking and diffraction."""

from .geometry import (
    Generic,
    ParameterError,
    RationalCos,
    RationalPi,
    Rotation3,
    TileMesh,
    TileParams,
    build_tile,
    rotation_power,
    tile_volume,
)
from .lattice import (
    Lattice2,
    aperiodicity_certificate,
    coincidence_solve,
    csl_index,
    dual_lattice,
    rotated_dual_identity_check,
)
from .tiling import (
    PointCloud,
    ShiftSequence,
    TilingConfig,
    bcc_config,
    build_layer,
    cubic_config,
    detect_full_periodicity,
    detect_screw_symmetry,
    extract_points,
    repetitivity_condition,
    validate_packing,
)

__version__ = "0.1.0"
