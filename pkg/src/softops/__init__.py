"""softops: soft, differentiable surrogates for hard numerical operations.

Elementwise surrogates derive from four soft Heaviside families (smooth /
c0 / c1 / c2); axiswise sorting, ranking, top-k and quantiles come in six
methods (optimal transport, SoftSort, NeuralSort, FastSoftSort, SmoothSort,
bitonic network); straight-through wrappers keep hard forward passes with
soft gradients.  Everything is generic over the forward-mode Dual container.
"""

from .core import (ConfigError, ConvergenceError, Dual, Method, Mode,
                   SoftBool, SoftConfig, SoftIndex, SoftPerm, dual_lift,
                   fd_jacobian, jacobian, seed_direction,
                   validate_method_mode)
from .sigmoid import SigmoidalFamily, heaviside, heaviside_grad
from .elementwise import (ReluStyle, sign, round, relu, clip, compare,
                          greater, gtr_equal, less, less_equal, equal,
                          not_equal, isclose)
from .elementwise import abs  # noqa: A004 - deliberate drop-in name
from .logic import (all, any, logical_and, logical_not, logical_or,  # noqa: A004
                    logical_xor, where)
from .simplex import ProjectionResult, project, project_pair_closed_form
from .solvers import (SolverParams, conjugate_gradient, dual_ot_lbfgs, lbfgs,
                      pav_isotonic, sinkhorn)
from .otrank import (OtSpec, SquashState, ot_argsort, ot_max, ot_median,
                     ot_min, ot_quantile, ot_rank, ot_sort, ot_topk,
                     standardize_squash, unsquash_destandardize)
from .simplexsort import (neuralsort_argsort, neuralsort_rank,
                          neuralsort_sort, softsort_argrank, softsort_argsort,
                          softsort_rank, softsort_sort)
from .permusort import (SmoothBounds, fastsoftsort_rank, fastsoftsort_sort,
                        permutahedron_project, smooth_bounds,
                        smoothsort_jacobian, smoothsort_rank, smoothsort_sort)
from .bitonic import network_sort
from .st_select import (StFunction, choose, dynamic_index_in_dim,
                        dynamic_slice, dynamic_slice_in_dim,
                        gated_grad_switch, safe_math, st, take,
                        take_along_axis)
from .ops import (argmax, argmedian, argmin, argquantile, argsort, argtopk,
                  median, quantile, rank, sort, topk)
from .ops import max, min  # noqa: A004 - deliberate drop-in names

__version__ = "0.1.0"
