"""Numerical verification of compatible Poisson and (pseudo-)Riemannian structures."""

__version__ = "0.1.0"

from .classify import CheckRecord, DefectReport, classify  # noqa: E402
from .structure import PointData, Structure, load_structure  # noqa: E402

__all__ = ["CheckRecord", "DefectReport", "PointData", "Structure", "classify", "load_structure", "__version__"]
