"""Tropical polynomial division and tropical compression of ReLU classifiers."""
from .compress import (CompressionReport, MaxAffineRegressor, TropicalCompressor, VertexStats,
                       compress, harvest_vertices, iterative_compress, maxlinear_fit,
                       mean_quotient, phase1, phase2)
from .data import Dataset, load_csv, load_idx, synth_gaussians
from .division import (DivisionResult, divide, divide_multi, opening_oracle,
                       verify_inequality)
from .ggp import (DirectApproxProblem, GGPDivisionProblem, eval_goal0, positivity_shift,
                  r_sweep, solve_direct_approx, solve_division_ggp)
from .network import (ActivatedVertex, TropicalPart, TwoLayerNet, activated_vertex,
                      check_divisibility, decompose, preactivation)
from .polytope import (LPProblem, LPSolution, NewtonPolytope, contains, lp_solve,
                       upper_hull_height, valid_shifts, zonotope_generators)
from .train import TrainConfig, TwoLayerReLUClassifier, accuracy, train
from .tropical import (LatticePolynomial, Term, TropicalPolynomial, canonicalize, evaluate,
                       maxplus_convolution, tropical_product, tropical_sum)

__version__ = "0.1.0"
