"""Dense two-phase simplex over exact rationals or floats.

The solver always pivots with Bland's rule, which guarantees termination in
exact mode and keeps the float path on the identical code shape (the only
difference is a pivot tolerance instead of literal sign tests).  Problems are
converted to the standard form  min c.x, A x = b, x >= 0  internally; the
initial identity columns are tracked through both phases so duals come out of
the final tableau as c_B * B^inv without refactorization.

Dual sign conventions, stated for a problem written exactly as the user gave
it (before any internal flips):

* minimize:  y_i >= 0 for '>=' rows, y_i <= 0 for '<=' rows, free for '='.
* maximize:  y_i >= 0 for '<=' rows, y_i <= 0 for '>=' rows, free for '='.

In both senses the multiplier mu_j = c_j - sum_i y_i A_ij (objective as
given) vanishes for variables strictly inside their bounds, and the dual
objective  y.b + sum_j bound_j * mu_j  equals the primal optimum, literally
in exact mode.

Infeasibility is certified by a Farkas ray: multipliers on the declared rows
(plus internal upper-bound rows, tagged ('ub', j)) whose aggregated
constraint is incompatible with the variable bounds.  ``farkas_gap``
recomputes that incompatibility margin from scratch; a positive gap proves
infeasibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from ._rational import Rat, is_exact, rat_str, to_rat
from .errors import NumericalFailure

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

RELATIONS = ("<=", "=", ">=")

_MAX_PIVOTS = 200_000
_STALL_LIMIT = 50


def _coerce(x, exact: bool):
    if exact:
        return to_rat(x)
    if isinstance(x, str):
        return float(to_rat(x))
    return float(x)


@dataclass(frozen=True)
class Constraint:
    """coeffs: dense sequence or sparse {var_index: coeff}; rel in {'<=', '=', '>='}."""

    coeffs: Union[Sequence, Mapping[int, object]]
    rel: str
    rhs: object

    def row(self, num_vars: int) -> list:
        if isinstance(self.coeffs, Mapping):
            out = [0] * num_vars
            for j, v in self.coeffs.items():
                if not 0 <= j < num_vars:
                    raise ValueError(f"constraint references variable {j} outside 0..{num_vars - 1}")
                out[j] = v
            return out
        out = list(self.coeffs)
        if len(out) != num_vars:
            raise ValueError(f"constraint row has {len(out)} coefficients, expected {num_vars}")
        return out


@dataclass(frozen=True)
class LpProblem:
    """Linear program in user form.

    var_bounds entries are (lower, upper) with None for unbounded sides; the
    default bound is (0, None) for every variable.
    """

    num_vars: int
    objective: Sequence
    sense: str
    constraints: Sequence[Constraint]
    var_bounds: Optional[Sequence[tuple]] = None

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if len(self.objective) != self.num_vars:
            raise ValueError("objective length must equal num_vars")
        for con in self.constraints:
            if con.rel not in RELATIONS:
                raise ValueError(f"unknown relation {con.rel!r}")
        if self.var_bounds is not None and len(self.var_bounds) != self.num_vars:
            raise ValueError("var_bounds length must equal num_vars")

    def bounds(self) -> list:
        if self.var_bounds is None:
            return [(0, None)] * self.num_vars
        return [tuple(b) for b in self.var_bounds]


@dataclass
class LpSolution:
    status: str
    primal: Optional[list]
    dual: Optional[list]
    objective_value: Optional[object]
    certificate: Optional[dict] = None
    mode: str = "exact"
    iterations: int = 0


@dataclass
class CertifyReport:
    ok: bool
    max_violation: object
    details: dict = field(default_factory=dict)


class _Std:
    """Standard-form image of an LpProblem plus the data to map answers back."""

    __slots__ = (
        "A", "b", "c", "row_tags", "row_sign", "var_map", "shift",
        "n_std", "exact", "flip_obj", "obj_const", "row_scale",
    )


def _standardize(prob: LpProblem, exact: bool) -> _Std:
    zero = Rat(0) if exact else 0.0
    one = Rat(1) if exact else 1.0
    bounds = prob.bounds()

    # variable mapping: finite lower bound -> one shifted column; free -> a
    # positive/negative pair; finite uppers become explicit '<=' rows.
    var_map = []
    shift = []
    n_std = 0
    for lo, hi in bounds:
        if lo is not None:
            var_map.append(("shift", n_std))
            shift.append(_coerce(lo, exact))
            n_std += 1
        else:
            var_map.append(("free", n_std, n_std + 1))
            shift.append(zero)
            n_std += 2

    obj = [_coerce(v, exact) for v in prob.objective]
    flip_obj = prob.sense == "max"
    if flip_obj:
        obj = [-v for v in obj]

    c = [zero] * n_std
    obj_const = zero  # substituting x = x' + lo drops sum_j c_j lo_j from the tableau
    for j, m in enumerate(var_map):
        if m[0] == "shift":
            c[m[1]] = obj[j]
            if shift[j] != 0:
                obj_const += obj[j] * shift[j]
        else:
            c[m[1]] = obj[j]
            c[m[2]] = -obj[j]

    def expand(dense_row):
        out = [zero] * n_std
        for j, v in enumerate(dense_row):
            if v == 0:
                continue
            v = _coerce(v, exact)
            m = var_map[j]
            if m[0] == "shift":
                out[m[1]] = v
            else:
                out[m[1]] = v
                out[m[2]] = -v
        return out

    rows, rhs, tags, rels = [], [], [], []
    for i, con in enumerate(prob.constraints):
        dense = con.row(prob.num_vars)
        r = _coerce(con.rhs, exact)
        for j, v in enumerate(dense):
            if v != 0 and shift[j] != 0:
                r = r - _coerce(v, exact) * shift[j]
        rows.append(expand(dense))
        rhs.append(r)
        tags.append(("con", i))
        rels.append(con.rel)

    for j, (lo, hi) in enumerate(bounds):
        if hi is None:
            continue
        dense = [zero] * prob.num_vars
        dense[j] = one
        rows.append(expand(dense))
        rhs.append(_coerce(hi, exact) - shift[j])
        tags.append(("ub", j))
        rels.append("<=")

    n_rows = len(rows)
    slack_cols = {}
    for i, rel in enumerate(rels):
        if rel != "=":
            slack_cols[i] = n_std + len(slack_cols)
    total = n_std + len(slack_cols)
    A = []
    for i, row in enumerate(rows):
        full = row + [zero] * len(slack_cols)
        if i in slack_cols:
            full[slack_cols[i]] = one if rels[i] == "<=" else -one
        A.append(full)
    c = c + [zero] * len(slack_cols)

    sign = [one] * n_rows
    for i in range(n_rows):
        if rhs[i] < 0:
            rhs[i] = -rhs[i]
            A[i] = [-v for v in A[i]]
            sign[i] = -one

    # float mode equilibrates rows to unit scale with power-of-two factors
    # (exactly representable, so the constraint set is unchanged); duals and
    # Farkas multipliers are mapped back through row_scale by the caller.
    scale = [one] * n_rows
    if not exact:
        for i in range(n_rows):
            hi = max((abs(v) for v in A[i] if v != 0), default=0.0)
            if hi > 0.0:
                s = 2.0 ** -math.frexp(hi)[1]
                if s != 1.0:
                    A[i] = [v * s for v in A[i]]
                    rhs[i] *= s
                    scale[i] = s

    std = _Std()
    std.A, std.b, std.c = A, rhs, c
    std.row_tags, std.row_sign = tags, sign
    std.var_map, std.shift = var_map, shift
    std.n_std, std.exact, std.flip_obj = total, exact, flip_obj
    std.obj_const = obj_const
    std.row_scale = scale
    return std


def _pivot(T, cost, pr, pc):
    """In-place tableau pivot on (pr, pc); ``cost`` rows are reduced alongside."""
    prow = T[pr]
    piv = prow[pc]
    if piv != 1:
        T[pr] = prow = [v / piv for v in prow]
    for i, row in enumerate(T):
        if i == pr:
            continue
        f = row[pc]
        if f == 0:
            continue
        T[i] = [a - f * b for a, b in zip(row, prow)]
    for k, row in enumerate(cost):
        f = row[pc]
        if f == 0:
            continue
        cost[k] = [a - f * b for a, b in zip(row, prow)]


def _run_simplex(T, cost, basis, blocked, ptol, exact):
    """Bland-rule loop on the cost[0] row.  Returns ('optimal'|'unbounded', iters)."""
    it = 0
    stall = 0
    basis_set = set(basis)
    ncols = len(cost[0]) - 1
    while True:
        row0 = cost[0]
        # float mode prefers large pivots, which forfeits Bland's termination
        # proof; a long run of non-improving pivots flips the tie-break back
        # to smallest basis index until the objective moves again.
        stalled = (not exact) and stall >= _STALL_LIMIT
        enter = -1
        for j in range(ncols):
            if j in basis_set or j in blocked:
                continue
            r = row0[j]
            if (r < 0) if exact else (r < -ptol):
                enter = j
                break
        if enter < 0:
            return "optimal", it
        leave = -1
        best = None
        if exact:
            for i, row in enumerate(T):
                a = row[enter]
                if a > 0:
                    ratio = row[-1] / a
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                        best = ratio
                        leave = i
        else:
            for i, row in enumerate(T):
                a = row[enter]
                if a > ptol:
                    ratio = row[-1] / a
                    if best is None or ratio < best:
                        best = ratio
            if best is not None:
                slack = 1e-9 * max(1.0, abs(best))
                if stalled:
                    for i, row in enumerate(T):
                        a = row[enter]
                        if a > ptol and row[-1] / a <= best + slack:
                            if leave < 0 or basis[i] < basis[leave]:
                                leave = i
                else:
                    # near-ties resolve to the largest pivot element: pivoting
                    # on tiny entries is what amplifies roundoff over iterations
                    big = 0.0
                    for i, row in enumerate(T):
                        a = row[enter]
                        if a > ptol and row[-1] / a <= best + slack:
                            if a > big or (a == big and basis[i] < basis[leave]):
                                big = a
                                leave = i
        if leave < 0:
            return "unbounded", it
        prev = row0[-1]
        _pivot(T, cost, leave, enter)
        basis_set.discard(basis[leave])
        basis[leave] = enter
        basis_set.add(enter)
        if not exact:
            if cost[0][-1] > prev + 1e-12 * (1.0 + abs(prev)):
                stall = 0
            else:
                stall += 1
        it += 1
        if it > _MAX_PIVOTS:
            raise NumericalFailure(f"simplex exceeded {_MAX_PIVOTS} pivots")


def _solve_bounds_only(problem: LpProblem, exact: bool, mode: str) -> LpSolution:
    zero = Rat(0) if exact else 0.0
    one = Rat(1) if exact else 1.0
    primal = []
    obj = zero
    for j, (lo, hi) in enumerate(problem.bounds()):
        lo_v = None if lo is None else _coerce(lo, exact)
        hi_v = None if hi is None else _coerce(hi, exact)
        if lo_v is not None and hi_v is not None and lo_v > hi_v:
            return LpSolution(INFEASIBLE, None, None, None, certificate={("ub", j): -one}, mode=mode)
        cj = _coerce(problem.objective[j], exact)
        if problem.sense == "max":
            cj = -cj
        if cj > 0:
            if lo_v is None:
                return LpSolution(UNBOUNDED, None, None, None, mode=mode)
            x = lo_v
        elif cj < 0:
            if hi_v is None:
                return LpSolution(UNBOUNDED, None, None, None, mode=mode)
            x = hi_v
        else:
            x = lo_v if lo_v is not None else (hi_v if hi_v is not None else zero)
        primal.append(x)
        obj += cj * x
    if problem.sense == "max":
        obj = -obj
    return LpSolution(OPTIMAL, primal, [], obj, mode=mode)


def solve(problem: LpProblem, mode: str = "exact", tolerance: float = 1e-9) -> LpSolution:
    """Solve an LpProblem.

    mode='exact' pivots on rationals with literal sign tests; mode='float'
    uses the same pivoting with ``tolerance`` as the pivot threshold and, on
    success, insists the certified duality gap stays below
    tolerance * (1 + |objective|), raising NumericalFailure otherwise.
    """
    if mode not in ("exact", "float"):
        raise ValueError(f"mode must be 'exact' or 'float', got {mode!r}")
    exact = mode == "exact"
    ptol = 0 if exact else float(tolerance)
    std = _standardize(problem, exact)
    zero = Rat(0) if exact else 0.0
    one = Rat(1) if exact else 1.0

    m = len(std.A)
    n = std.n_std
    if m == 0:
        return _solve_bounds_only(problem, exact, mode)

    # tableau rows [A | artificials | rhs]; artificial i is row i's initial
    # identity column, giving B^inv at the end of both phases.
    T = []
    for i in range(m):
        row = list(std.A[i]) + [zero] * m + [std.b[i]]
        row[n + i] = one
        T.append(row)
    basis = [n + i for i in range(m)]
    ncols = n + m

    # phase 1: minimize the artificial mass.  With basis = artificials the
    # reduced-cost row is c - 1^T A with the artificial slots at 1 - 1 = 0 and
    # the rhs slot holding -(current objective) = -sum b_i.
    p1 = [zero] * (ncols + 1)
    for i in range(m):
        ti = T[i]
        for j in range(ncols + 1):
            if ti[j] != 0:
                p1[j] -= ti[j]
    for i in range(m):
        p1[n + i] = zero
    cost = [p1]
    state, it1 = _run_simplex(T, cost, basis, set(), ptol, exact)
    if state != "optimal":
        # phase 1 is bounded below by zero, so this verdict is pure roundoff
        assert not exact, "phase 1 is bounded below by zero"
        raise NumericalFailure(
            "float phase 1 lost boundedness to roundoff; re-solve in exact mode"
        )
    phase1_obj = -cost[0][-1]
    feas_tol = 0 if exact else float(tolerance) * max(1.0, max(abs(float(x)) for x in std.b))
    if (phase1_obj > 0) if exact else (phase1_obj > feas_tol):
        # Farkas ray from phase-1 duals: the final reduced cost of artificial i
        # is 1 - y_i, hence y_i = 1 - r_art_i; flipped rows flip y back.
        cert = {}
        for i in range(m):
            y_i = one - cost[0][n + i]
            if y_i == 0:
                continue
            tag = std.row_tags[i]
            cert[tag] = cert.get(tag, zero) + y_i * std.row_sign[i] * std.row_scale[i]
        return LpSolution(INFEASIBLE, None, None, None, certificate=cert, mode=mode, iterations=it1)

    # pivot lingering artificials out of the basis; rows that cannot release
    # one are redundant and keep a zero-level artificial that never re-enters.
    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                a = T[i][j]
                if (a != 0) if exact else (abs(a) > ptol):
                    _pivot(T, cost, i, j)
                    basis[i] = j
                    break

    # phase 2 objective row: r_j = c_j - c_B B^inv A_j, rhs slot = -objective
    blocked = set(range(n, ncols))
    cb_rows = [(i, std.c[basis[i]]) for i in range(m) if basis[i] < n and std.c[basis[i]] != 0]
    r2 = [zero] * (ncols + 1)
    for j in range(ncols + 1):
        z = zero
        for i, cb in cb_rows:
            tij = T[i][j]
            if tij != 0:
                z += cb * tij
        r2[j] = (std.c[j] - z) if j < n else ((zero - z) if j < ncols else -z)
    cost = [r2]
    state, it2 = _run_simplex(T, cost, basis, blocked, ptol, exact)
    if state == "unbounded":
        return LpSolution(UNBOUNDED, None, None, None, mode=mode, iterations=it1 + it2)

    x_std = [zero] * ncols
    for i, bi in enumerate(basis):
        x_std[bi] = T[i][-1]
    primal = []
    for j, vmap in enumerate(std.var_map):
        if vmap[0] == "shift":
            primal.append(x_std[vmap[1]] + std.shift[j])
        else:
            primal.append(x_std[vmap[1]] - x_std[vmap[2]])
    obj_min = -cost[0][-1] + std.obj_const
    obj = -obj_min if std.flip_obj else obj_min

    cb_rows = [(k, std.c[basis[k]]) for k in range(m) if basis[k] < n and std.c[basis[k]] != 0]
    dual = [zero] * len(problem.constraints)
    for i in range(m):
        tag = std.row_tags[i]
        if tag[0] != "con":
            continue
        col = n + i
        y_i = zero
        for k, cb in cb_rows:
            tkc = T[k][col]
            if tkc != 0:
                y_i += cb * tkc
        y_user = y_i * std.row_sign[i] * std.row_scale[i]
        if std.flip_obj:
            y_user = -y_user
        dual[tag[1]] = y_user

    sol = LpSolution(OPTIMAL, primal, dual, obj, mode=mode, iterations=it1 + it2)
    if not exact:
        rep = certify(problem, sol, tolerance=max(float(tolerance), 1e-12))
        gap = abs(float(rep.details.get("duality_gap", 0.0)))
        budget = float(tolerance) * (1.0 + abs(float(obj)))
        if not rep.ok or gap > budget:
            raise NumericalFailure(
                f"float solve failed certification (gap={gap:.3e}, budget={budget:.3e}, ok={rep.ok})"
            )
    return sol


def _approx_same(a, b, exact, tolerance):
    if exact:
        return a == b
    return abs(float(a) - float(b)) <= float(tolerance) * max(1.0, abs(float(a)), abs(float(b)))


def _mu_vector(problem: LpProblem, dual, exact):
    """mu_j = c_j - sum_i y_i A_ij in the user's orientation."""
    mu = [_coerce(v, exact) for v in problem.objective]
    for i, con in enumerate(problem.constraints):
        y = dual[i]
        if y == 0:
            continue
        y = _coerce(y, exact)
        row = con.row(problem.num_vars)
        for j, a in enumerate(row):
            if a != 0:
                mu[j] -= y * _coerce(a, exact)
    return mu


def certify(problem: LpProblem, solution: LpSolution, tolerance: float = 1e-9) -> CertifyReport:
    """Independent optimality audit of an LpSolution.

    Checks primal feasibility, dual sign feasibility, stationarity at the
    bounds, complementary slackness, and the literal primal = dual objective
    identity.  All comparisons are exact in exact mode and within ``tolerance``
    (scaled by magnitude) in float mode.  Infeasible solutions are audited via
    their Farkas certificate.
    """
    if solution.status == INFEASIBLE:
        if solution.certificate is None:
            return CertifyReport(False, None, {"reason": "infeasible without certificate"})
        gap = farkas_gap(problem, solution.certificate)
        if solution.mode == "exact":
            ok = gap > 0
        else:
            scale = max(1.0, *(abs(float(v)) for v in solution.certificate.values())) if solution.certificate else 1.0
            ok = float(gap) > -float(tolerance) * scale
        return CertifyReport(ok, gap, {"farkas_gap": gap})
    if solution.status == UNBOUNDED:
        return CertifyReport(True, 0, {"reason": "unboundedness is reported, not certified"})
    if solution.status != OPTIMAL or solution.primal is None or solution.dual is None:
        return CertifyReport(False, None, {"reason": f"nothing to certify for status {solution.status}"})

    exact = solution.mode == "exact"
    zero = Rat(0) if exact else 0.0
    worst = zero
    x = [_coerce(v, exact) for v in solution.primal]
    y = [_coerce(v, exact) for v in solution.dual]
    sense_min = problem.sense == "min"

    for j, (lo, hi) in enumerate(problem.bounds()):
        if lo is not None:
            worst = max(worst, _coerce(lo, exact) - x[j])
        if hi is not None:
            worst = max(worst, x[j] - _coerce(hi, exact))
    acts = []
    for con in problem.constraints:
        row = con.row(problem.num_vars)
        act = zero
        for j, a in enumerate(row):
            if a != 0:
                act += _coerce(a, exact) * x[j]
        acts.append(act)
        r = _coerce(con.rhs, exact)
        if con.rel == "<=":
            worst = max(worst, act - r)
        elif con.rel == ">=":
            worst = max(worst, r - act)
        else:
            worst = max(worst, abs(act - r))

    for i, con in enumerate(problem.constraints):
        yi = y[i]
        if con.rel != "=":
            want_nonneg = (con.rel == ">=") if sense_min else (con.rel == "<=")
            worst = max(worst, -yi if want_nonneg else yi)
        worst = max(worst, abs(yi * (_coerce(con.rhs, exact) - acts[i])))

    mu = _mu_vector(problem, y, exact)
    dual_obj = zero
    for i, con in enumerate(problem.constraints):
        if y[i] != 0:
            dual_obj += y[i] * _coerce(con.rhs, exact)
    for j, (lo, hi) in enumerate(problem.bounds()):
        at_lo = lo is not None and _approx_same(x[j], _coerce(lo, exact), exact, tolerance)
        at_hi = hi is not None and _approx_same(x[j], _coerce(hi, exact), exact, tolerance)
        m_j = mu[j] if sense_min else -mu[j]
        if at_lo and at_hi:
            pass  # fixed variable, any multiplier is fine
        elif at_lo:
            worst = max(worst, -m_j)
        elif at_hi:
            worst = max(worst, m_j)
        else:
            worst = max(worst, abs(m_j))
        if mu[j] != 0:
            if at_lo:
                dual_obj += mu[j] * _coerce(lo, exact)
            elif at_hi:
                dual_obj += mu[j] * _coerce(hi, exact)

    prim_obj = zero
    for j in range(problem.num_vars):
        cj = _coerce(problem.objective[j], exact)
        if cj != 0:
            prim_obj += cj * x[j]
    details = {
        "primal_objective": prim_obj,
        "dual_objective": dual_obj,
        "duality_gap": prim_obj - dual_obj,
    }
    if solution.objective_value is not None:
        worst = max(worst, abs(prim_obj - _coerce(solution.objective_value, exact)))
    worst = max(worst, abs(prim_obj - dual_obj))

    if exact:
        ok = worst <= 0
    else:
        ok = float(worst) <= float(tolerance) * max(1.0, abs(float(prim_obj)))
    return CertifyReport(ok, worst, details)


def farkas_gap(problem: LpProblem, certificate: Mapping) -> object:
    """Margin by which a Farkas certificate refutes feasibility.

    The certificate maps row tags (('con', i) for declared constraints,
    ('ub', j) for internal upper-bound rows) to multipliers; multipliers on
    '<=' rows must be <= 0 and on '>=' rows >= 0.  The gap is
    sum_i y_i rhs_i - sup { (y^T A) x : x within its bounds }; a positive gap
    proves infeasibility.  Invalid certificates return a nonpositive value.
    """
    exact = all(is_exact(v) for v in certificate.values())
    zero = Rat(0) if exact else 0.0
    one = Rat(1) if exact else 1.0
    bounds = problem.bounds()
    d = [zero] * problem.num_vars
    val = zero
    for tag, yv in certificate.items():
        y = _coerce(yv, exact)
        if y == 0:
            continue
        if tag[0] == "con":
            con = problem.constraints[tag[1]]
            if con.rel == "<=" and y > 0:
                return -abs(y)
            if con.rel == ">=" and y < 0:
                return -abs(y)
            row = con.row(problem.num_vars)
            for j, a in enumerate(row):
                if a != 0:
                    d[j] += y * _coerce(a, exact)
            val += y * _coerce(con.rhs, exact)
        elif tag[0] == "ub":
            j = tag[1]
            hi = bounds[j][1]
            if hi is None or y > 0:
                return -(abs(y) if y != 0 else one)
            d[j] += y
            val += y * _coerce(hi, exact)
        else:
            raise ValueError(f"unknown certificate tag {tag!r}")
    for j, (lo, hi) in enumerate(bounds):
        dj = d[j]
        if dj == 0:
            continue
        if dj > 0:
            if hi is None:
                return -dj
            val -= dj * _coerce(hi, exact)
        else:
            if lo is None:
                return dj
            val -= dj * _coerce(lo, exact)
    return val


def dump_lp(problem: LpProblem, fp) -> None:
    """Write the problem in LP-format text with exact 'p/q' coefficients.

    Rational values are serialized as p/q (a strict extension of the format's
    numeric fields) so external tools can parse and rescale them losslessly.
    """

    def fmt(v):
        return rat_str(v) if is_exact(v) else repr(float(v))

    def terms_of(row):
        parts = []
        for j, v in enumerate(row):
            if v == 0:
                continue
            s = fmt(v)
            if parts and not s.startswith("-"):
                s = "+ " + s
            elif parts:
                s = "- " + s[1:]
            parts.append(f"{s} x{j}")
        return " ".join(parts) if parts else "0 x0"

    lines = [f"\\ tcbubbles LP dump: {problem.num_vars} vars, {len(problem.constraints)} rows"]
    lines.append("Maximize" if problem.sense == "max" else "Minimize")
    lines.append(" obj: " + terms_of(list(problem.objective)))
    lines.append("Subject To")
    for i, con in enumerate(problem.constraints):
        lines.append(f" c{i}: {terms_of(con.row(problem.num_vars))} {con.rel} {fmt(con.rhs)}")
    lines.append("Bounds")
    for j, (lo, hi) in enumerate(problem.bounds()):
        if lo is None and hi is None:
            lines.append(f" x{j} free")
        elif lo is None:
            lines.append(f" -inf <= x{j} <= {fmt(hi)}")
        elif hi is None:
            lines.append(f" {fmt(lo)} <= x{j}")
        else:
            lines.append(f" {fmt(lo)} <= x{j} <= {fmt(hi)}")
    lines.append("End")
    fp.write("\n".join(lines) + "\n")
