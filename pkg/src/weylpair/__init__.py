"""Spectral pairs (nu, psi) of non-self-adjoint half-line Schrodinger operators."""
from __future__ import annotations

from ._kernels import BACKEND
from .linalg import INFINITY, BoundaryParam
from .model import (Constant, ExpDecay, GeneralHermitian, Potential, Problem, Step, StepPolicy,
                    Table, Truncation, Zero, make_problem, step_potential)
from .weyl import MFunctionValue, NoConvergence, disk_radius, m_finite, m_limit, m_radiation

__version__ = "0.1.0"

__all__ = ["BACKEND", "INFINITY", "BoundaryParam", "Constant", "ExpDecay", "GeneralHermitian",
           "Potential", "Problem", "Step", "StepPolicy", "Table", "Truncation", "Zero",
           "make_problem", "step_potential", "MFunctionValue", "NoConvergence", "disk_radius",
           "m_finite", "m_limit", "m_radiation"]
