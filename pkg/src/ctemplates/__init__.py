"""Control templates, Kalman-like observers and hybrid output-feedback loops
for polynomial state-affine systems."""
from ._kernels import USING_NUMBA
from .errors import (CTemplatesError, DimensionError, DivergenceError, DomainError,
                     GainSingularityError, NotObservableAtTarget, SizeLimitError,
                     ThetaTooSmallError, ValidationError)
from .genpos import (GeneralPositionSet, build_general_position, coeffs_from_roots,
                     normalize_to_template_origin, verify_general_position)
from .hybridloop import (FeedbackLaw, HybridTrajectory, LoopState, initial_state, jump,
                         rotation_to, saturate, simulate)
from .observer import (ObserverState, observer_rhs, simulate_observer, smin_lower_bound,
                       steady_state_gain, variation_of_constants_S)
from .polyalg import (MINUS_INFINITY, MultiPoly, PolyMatrix, poly_add, poly_degree, poly_eval,
                      poly_mul, polymat_det)
from .sysmodel import (InputSignal, StateAffineSystem, find_full_rank_minor, gramian,
                       kalman_matrix, observable_at, transition_matrix)
from .templates import (TemplateCertificate, TemplateFamily, certify_template, explicit_family,
                        genpos_family, mimo_template, scaled_rotated, siso_family, siso_template,
                        square_family)

__version__ = "0.1.0"
