"""Document formats, the field registry front end and the command line."""

from .formats import (
    CellDocument,
    MeshDocument,
    cells_identical,
    meshes_identical,
    parse_cell,
    parse_mesh,
    serialize_cell,
    serialize_mesh,
)

__all__ = [
    "CellDocument",
    "MeshDocument",
    "cells_identical",
    "meshes_identical",
    "parse_cell",
    "parse_mesh",
    "serialize_cell",
    "serialize_mesh",
]
