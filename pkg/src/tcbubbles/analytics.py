"""Closed-form values for the example models and the estimators that test them.

The closed forms are exact functions of the inputs (rational in, rational out
where the formula allows it); the Monte Carlo side reduces samples with
pairwise summation and reports confidence intervals at a fixed multiplier, so
acceptance checks have a stated false-alarm budget instead of ad hoc
tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import erfc

from ._rational import Rat, is_exact
from .errors import BadConfig, EmptySample
from .lattice import TransactionCost

_SQRT2 = math.sqrt(2.0)
_FLOAT_TOL = 1e-9

# friction shrinks the bubble by at most this factor's worth, see bound_suite
CI_MULTIPLIER = 3


def _lam_of(tc, allow_zero: bool = False):
    """Accept a TransactionCost or a bare rate; bare rates may be exact."""
    if isinstance(tc, TransactionCost):
        return tc.lam
    lam = tc
    lo_ok = lam >= 0 if allow_zero else lam > 0
    if not (lo_ok and lam < 1):
        rng = "[0, 1)" if allow_zero else "(0, 1)"
        raise BadConfig(f"transaction cost rate must be in {rng}, got {lam!r}")
    return lam


def normal_cdf(x) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * erfc(-float(x) / _SQRT2)


def bessel_mean(T) -> float:
    """E[1/|B_T|] for 3-D Brownian motion from (1,0,0): 2*Phi(1/sqrt(T)) - 1."""
    T = float(T)
    if not T > 0:
        raise BadConfig(f"horizon must be positive, got {T}")
    return 2.0 * normal_cdf(1.0 / math.sqrt(T)) - 1.0


def bessel_delta(tc, T) -> float:
    """Friction-adjusted bubble gap of the inverse Bessel: 2(1+lam)(1-Phi(1/sqrt(T)))."""
    lam = float(_lam_of(tc))
    T = float(T)
    if not T > 0:
        raise BadConfig(f"horizon must be positive, got {T}")
    return 2.0 * (1.0 + lam) * (1.0 - normal_cdf(1.0 / math.sqrt(T)))


def bubble_birth_fundamental(s_t, tc, gamma, t):
    """Fundamental value along a bubble-birth path: (1+lam)*s before gamma, 0 after."""
    lam = _lam_of(tc, allow_zero=True)
    if not s_t > 0:
        raise BadConfig(f"price must be positive, got {s_t}")
    if not 0 <= t < 1:
        raise BadConfig(f"time must be in [0, 1), got {t}")
    if gamma > t:
        return (1 + lam) * s_t
    return 0 * s_t


def bubble_birth_bubble(s_t, tc, gamma, t):
    """Companion bubble value: ask price minus the fundamental, (1+lam)*s*1{gamma<=t}."""
    lam = _lam_of(tc, allow_zero=True)
    if not s_t > 0:
        raise BadConfig(f"price must be positive, got {s_t}")
    if not 0 <= t < 1:
        raise BadConfig(f"time must be in [0, 1), got {t}")
    if gamma > t:
        return 0 * s_t
    return (1 + lam) * s_t


def fbm_bubble_bound(tc) -> dict:
    """Initial-bubble lower bound for the clock-changed exponential-fBm market.

    The argument is measure-free: the price starts at 1 and ends at 1/2, so
    any shadow terminal value is at most (1+lam)/2 and the fundamental value
    cannot exceed that, leaving a bubble of at least (1+lam) - (1+lam)/2.
    The chain needs 1 - lam > (1+lam)/2, i.e. lam < 1/3; above that no bound
    is claimed.  No consistent price system exists in the non-local sense on
    horizons spanning the full clock change, at any rate.
    """
    lam = _lam_of(tc)
    one = Rat(1) if is_exact(lam) else 1.0
    third = Rat(1, 3) if is_exact(lam) else (1.0 / 3.0)
    bound = (one + lam) / 2 if lam < third else one * 0
    return {"bound": bound, "has_nonlocal_cps": False}


@dataclass(frozen=True)
class EstimateCI:
    mean: float
    std_error: float
    n: int
    multiplier: float = CI_MULTIPLIER

    @property
    def ci_halfwidth(self) -> float:
        return self.multiplier * self.std_error

    def covers(self, target: float) -> bool:
        return abs(self.mean - float(target)) <= self.ci_halfwidth


def mc_estimate(samples, multiplier: float = CI_MULTIPLIER) -> EstimateCI:
    """Mean with standard error; numpy's pairwise summation keeps it reproducible."""
    arr = np.asarray(samples, dtype=float).ravel()
    n = arr.size
    if n == 0:
        raise EmptySample("cannot estimate from zero samples")
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateCI(mean, se, int(n), float(multiplier))


@dataclass(frozen=True)
class BoundCheck:
    """One named inequality (or identity) evaluated node by node.

    For inequalities, margin is the minimal slack across nodes: nonnegative
    exactly when the bound holds everywhere.  For identities, margin is the
    maximal absolute residual: zero exactly when the identity holds.  node
    points at the worst offender.
    """

    name: str
    passed: bool
    margin: object
    node: int
    kind: str = "inequality"


def _worst_min(values):
    worst, at = None, -1
    for i, v in enumerate(values):
        if worst is None or v < worst:
            worst, at = v, i
    return worst, at


def _worst_max_abs(values):
    worst, at = None, -1
    for i, v in enumerate(values):
        a = -v if v < 0 else v
        if worst is None or a > worst:
            worst, at = a, i
    return worst, at


def bound_suite(report, tc) -> list:
    """Evaluate the friction/frictionless bubble inequalities on a report.

    Always checked: beta >= 0 and F <= (1+lam)S (recomputed from the tree; a
    failure of either means an engine bug, not a property of the model).
    When the report carries frictionless columns: beta <= (1+lam)*beta_notc
    both as the factor bound and as the two-sided gap inequality, the exact
    decomposition beta = (1+lam)*beta_notc - delta, and delta's range
    [0, (1+lam)*beta_notc].
    """
    lam = _lam_of(tc, allow_zero=True)
    tree = report.tree
    exact = report.mode == "exact"
    tol = 0 if exact else _FLOAT_TOL
    one_plus = (Rat(1) + lam) if exact else (1.0 + float(lam))
    checks = []

    def ineq(name, slacks):
        m, at = _worst_min(slacks)
        checks.append(BoundCheck(name, m >= -tol, m, at))

    def ident(name, residuals):
        m, at = _worst_max_abs(residuals)
        checks.append(BoundCheck(name, m <= tol, m, at, kind="identity"))

    ineq("beta_nonnegative", report.beta)
    ineq("fundamental_below_ask",
         [one_plus * tree.price[m] - report.fundamental[m] for m in range(tree.n_nodes)])
    if report.s_star is not None:
        nodes = range(tree.n_nodes)
        ineq("bubble_factor_bound",
             [one_plus * report.beta_notc[m] - report.beta[m] for m in nodes])
        ineq("gap_lower",
             [(report.beta_notc[m] - report.beta[m]) + lam * report.beta_notc[m] for m in nodes])
        ineq("gap_upper",
             [report.beta_notc[m] - (report.beta_notc[m] - report.beta[m]) for m in nodes])
        ident("delta_identity",
              [report.beta[m] - (one_plus * report.beta_notc[m] - report.delta[m]) for m in nodes])
        ineq("delta_lower", report.delta)
        ineq("delta_upper",
             [one_plus * report.beta_notc[m] - report.delta[m] for m in nodes])
    return checks


def format_bound_suite(checks: Sequence[BoundCheck]) -> str:
    """Tabular pass/fail rendering with per-check margins."""
    lines = ["check                     status  margin              at_node"]
    for c in checks:
        status = "pass" if c.passed else "FAIL"
        lines.append(f"{c.name:<25} {status:<7} {str(c.margin):<19} {c.node}")
    return "\n".join(lines)
