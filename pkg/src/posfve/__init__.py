"""Positivity-preserving finite volume element schemes for anisotropic diffusion on quadrilaterals."""
from .errors import (ConfigurationError, DomainError, FVEError, InvalidArgument, InvalidCoefficient,
                     InvalidElement, InvalidMesh, NonConvergence, PositivityViolation, SingularMatrix)
from .mesh import (DistortionConfig, DualPartition, QuadMesh, build_dual, check_regularity, distort_random,
                   generate_uniform, read_mesh, write_mesh)
from .problems import ProblemSpec, get_problem
from .scheme import MonotoneScheme, RobinBC, StandardScheme, assemble_monotone, assemble_standard_fve
from .solver import PicardConfig, TimeConfig, backward_euler_run, picard_steady

__version__ = "0.1.0"
