"""Tensor-valued finite elements for H(sym Curl) and the relaxed micromorphic model."""
from .elements import ELEMENT_KINDS, get_element
from .mesh import box_hex_mesh, box_tet_mesh

__all__ = ["ELEMENT_KINDS", "get_element", "box_tet_mesh", "box_hex_mesh"]
__version__ = "0.1.0"
