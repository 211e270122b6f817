"""Sharp constants computed with P1 finite elements."""

from .core import (
    MODES,
    LevelRow,

    OracleResult,
    convergence_table,
    rayleigh_sample,
    run,
    sharp_c_gamma,
    sharp_cp,
    sharp_trace_constant,
    sharp_vector_constant,
)
from .mesh import SimplicialMesh, max_level, refine, triangulate
from .assemble import AssembledSystem, assemble

__all__ = [
    "MODES",
    "AssembledSystem",
    "LevelRow",
    "OracleResult",
    "SimplicialMesh",
    "assemble",
    "convergence_table",
    "max_level",
    "rayleigh_sample",
    "refine",
    "run",
    "sharp_c_gamma",
    "sharp_cp",
    "sharp_trace_constant",
    "sharp_vector_constant",
    "triangulate",
]
