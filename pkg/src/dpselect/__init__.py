"""Pure differentially private sparse support selection.

Two mechanisms (top-R and mistakes) release the support of a sparse
regression or classification model, backed by a from-scratch
outer-approximation search over supports and a bundled branch-and-bound
master solver. See the CLI (``dpselect``) and the bench module for the
experiment harness.
"""

from dpselect.backend import BACKEND_NAME, HAVE_COMPILED
from dpselect.data import (DataBounds, Dataset, SynthConfig, TrueModel,
                           clip_dataset, generate_synthetic,
                           generate_synthetic_classification, read_dataset,
                           write_dataset)
from dpselect.dp import (MechanismSpec, PrivacyParams, SelectionDistribution,
                         SensitivityBound, build_p0,
                         exact_exponential_mechanism, epsilon_prime,
                         mistakes_distribution, privacy_audit,
                         sample_mistakes, sample_top_r, sensitivity_hinge,
                         sensitivity_ls)
from dpselect.enumeration import (EnumeratedSupports, ScoredSupport,
                                  brute_force_enumerate, mistakes_enumerate,
                                  practical_top_r, top_r_enumerate)
from dpselect.oa import (OAConfig, OAResult, add_noise, oa_solve,
                         penalized_value_and_gradient, warmstart_cuts)
from dpselect.cuts import Cut
from dpselect.milp import (MasterProblem, MilpSolution, solve_master,
                           solve_master_exhaustive)
from dpselect.solvers import (SolverOptions, WeightedProblem, iht_warmstart,
                              lipschitz_constant, pgd_ridge, subgrad_hinge)
from dpselect.supports import Support

__version__ = "0.1.0"
