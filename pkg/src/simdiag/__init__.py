"""Newton refinement of eigendecompositions and simultaneous diagonalizations.

The iterations avoid matrix inversion: every step costs a few matrix
products plus an entrywise closed-form solve, and a computable certificate
tells in advance whether the iteration converges quadratically.
"""
from .diag import certificate, diag_solve, solve_linearized
from .errors import (DeterminantCollapse, DimensionMismatch, NonFiniteError,
                     PositiveRadicand, RankDeficient, SimdiagError,
                     SpectrumCollision, ZeroColumn)
from .family import Pencil, combine_pencil, family_solve, rayleigh_extract
from .inverse import inverse_solve
from .mp import Matrix, Spectrum, identity, norm_inf
from .poly import (Polynomial, companion_matrix, fiedler_arrowhead,
                   refine_roots, wilkinson_poly)
from .qr import householder_qr, hybrid_eigensolve, qr_basic, qr_with_newton_test
from .records import CertificateReport, IterationTrace, SolveStatus
from .simdiag2 import certificate2, simdiag2_solve, solve_linearized2

__version__ = "0.1.0"
