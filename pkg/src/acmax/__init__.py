"""acmax: almost-complex frame calculus and Monge-Ampere solvers.

A numpy/scipy library for the discrete calculus of almost Hermitian model
geometries on periodic grids -- frame derivatives, Lie brackets with
(0,1)-projection, the almost-complex Hessian and its route equivalences,
conformal Gauduchon factors -- together with two independent solvers for
the Monge-Ampere equation

    (w + i ddbar phi)^n = e^{F + b} w^n,   w + i ddbar phi > 0,  sup phi = 0,

solved for the unique normalized pair ``(phi, b)`` by a damped-Newton
continuity method and by relaxation of the parabolic flow.
"""

from .errors import (AcmaxError, BadDensity, ConfigError,
                     DegenerateTopEigenvalue, DegreeMismatch, FlowNoConvergence,
                     FrameDegenerate, GridMismatch, GridTooCoarse, Incompatible,
                     KernelSignChange, LinearNoConvergence, NoConvergence,
                     NonPSDInput, NotPositive, PathStalled, UnsupportedDegree)
from .grid import ComplexField, Grid, ScalarField, diff, integrate, make_grid
from .forms import RealForm, basis_indices, exterior_d, wedge
from .calculus import (BracketData, Geometry, HermitianField, bracket_01,
                       d_J_d, ddbar, frame_apply, geometry_from_frame,
                       hermitian_to_form, form_to_hermitian, j_form_action,
                       nijenhuis_defect, pq11)
from .geometries import (GeometrySpec, build, flat_torus, twisted_torus,
                         warped_torus)
from .operators import (TiltedMetric, canonical_laplacian, lb_laplacian,
                        linearized_apply, ma_log_density, tilted_metric,
                        torsion_residual)
from .gauduchon import (GauduchonFactor, adjoint_apply, gauduchon_defect,
                        gauduchon_factor, solve_canonical_poisson)
from .solve import (SolveOptions, SolveReport, residual, solve_continuity,
                    solve_flow)
from .verify import (EstimateMonitors, det_superadditivity_check,
                     eig_top_derivatives, estimate_monitors,
                     hessian_decomposition, identity_suite, taming_check,
                     wedge_j_identity_check)
from .manufactured import manufactured_forcing, trig_expression
from .config import RunConfig, parse_config, emit_config

__version__ = "0.1.0"
