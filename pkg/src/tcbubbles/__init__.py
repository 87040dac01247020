"""Asset-price bubbles on event trees under proportional transaction costs.

The package prices claims and decomposes bubbles two independent ways (an
exact-rational simplex and a polyhedral backward recursion), certifies every
optimum it reports, and simulates the continuous-time example models with
reproducible per-path random streams.
"""

from ._rational import Rat
from .errors import (BadConfig, BandViolation, CertificationFailure, EmbeddingFailure,
                     EmptySample, InvalidTree, NoCps, NoEmm, NotMartingale,
                     NumericalFailure, ShapeMismatch, TcBubblesError)
from .lattice import (Claim, EventTree, Strategy, TransactionCost, bid_ask, build_tree,
                      check_self_financing, liquidation_value, polar_contains, resolve_mode)
from .cps import (BubbleReport, ConsistentPriceSystem, SweepEntry, bubble_report,
                  cps_from_measure_shadow, cps_with_value, dual_claim_value, embed_emm,
                  find_cps, find_emm, frictionless_fundamental, fundamental_value,
                  fundamental_value_certified, lambda_sweep, measure_and_shadow, verify_cps)
from .superrep import (BackwardResult, SuperRepResult, backward_superhedge, duality_gap,
                       superrep_price)
from .processes import (PathEnsemble, TimeGrid, simulate_bubble_birth, simulate_fbm_model,
                        simulate_fbm_time_changed, simulate_gbm, simulate_inverse_bessel)
from .analytics import (BoundCheck, EstimateCI, bessel_delta, bessel_mean, bound_suite,
                        bubble_birth_bubble, bubble_birth_fundamental, fbm_bubble_bound,
                        format_bound_suite, mc_estimate, normal_cdf)

__version__ = "0.1.0"
