"""Consistent price systems, fundamental values, and bubble decompositions.

A consistent price system on (a subtree of) an event tree is encoded by a
pair of positive processes (Z1, Z2): both are martingales under the tree's
own probabilities, Z1 is normalized to 1 at the scope root, and at every node
the ratio Z2/Z1 lies inside the bid-ask band.  Z1 is the density process of
the pricing measure, Z2/Z1 is the shadow price the measure actually
martingales.  All existence and value questions below are linear programs in
(Z1, Z2), solved exactly on rational trees.

Strict positivity of Z1 (the pricing measure must be equivalent, not merely
absolutely continuous) is decided by maximizing the minimum of Z1 over the
scope: a positive optimum certifies an equivalent system, a zero optimum
means only boundary systems exist and counts as nonexistence.  Value
programs, by contrast, run over the closed cone Z1 >= 0; their optimum is
attained in that closure and is unaffected by the strictness epsilon (tests
pin this by re-solving with epsilon floors across two decades).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import lp
from ._rational import Rat, is_exact
from .errors import BandViolation, CertificationFailure, NoCps, NoEmm, NotMartingale, ShapeMismatch
from .lattice import Claim, EventTree, TransactionCost, approx_eq, approx_le, bid_ask, polar_contains, resolve_mode

FLOAT_STRICT_EPS = 1e-9


@dataclass
class ConsistentPriceSystem:
    """Z-pair on the subtree rooted at scope_root; nodes outside carry None.

    z1[scope_root] is normalized to 1.  ``shadow(n)`` = z2[n]/z1[n] is the
    price the induced measure martingales; ``leaf_measure()`` returns the
    induced probability of each leaf of the scope (these sum to one).
    """

    tree: EventTree
    z1: list
    z2: list
    scope_root: int = 0

    def shadow(self, node: int):
        return self.z2[node] / self.z1[node]

    def density(self, node: int):
        """dQ/dP restricted to the node (Z1 itself, by the normalization)."""
        return self.z1[node]

    def leaf_measure(self) -> dict:
        root = self.scope_root
        pr = self.tree.path_prob(root)
        return {
            l: (self.tree.path_prob(l) / pr) * self.z1[l]
            for l in self.tree.leaves_under(root)
        }


@dataclass
class BubbleReport:
    """Per-node bubble decomposition; indices follow tree node ids.

    When the tree admits no equivalent martingale measure the frictionless
    comparison columns (s_star, beta_notc, delta) are None: the quantities
    are undefined there, not zero.
    """

    tree: EventTree
    lam: object
    fundamental: list
    beta: list
    has_emm: bool
    s_star: Optional[list] = None
    beta_notc: Optional[list] = None
    delta: Optional[list] = None
    mode: str = "exact"
    certified: Optional[list] = None


@dataclass
class SweepEntry:
    lam: object
    cps_exists: bool
    fundamental_root: Optional[object] = None
    beta_root: Optional[object] = None

    @property
    def no_bubble(self) -> bool:
        return self.cps_exists and self.beta_root == 0


def _z_index(pos: dict, node: int, comp: int) -> int:
    return 2 * pos[node] + comp


def _scope_rows(tree: EventTree, tc: TransactionCost, nodes: Sequence[int], mode: str):
    """Martingale and band rows for the Z-system on ``nodes``.

    Float mode coerces every tree-derived coefficient so mixed exact/float
    trees never leak rationals into a float simplex.
    """
    pos = {m: k for k, m in enumerate(nodes)}
    rows = []
    exact = mode == "exact"
    cv = (lambda x: x) if exact else float
    for m in nodes:
        kids = tree.children[m]
        if kids:
            for comp in (0, 1):
                coeffs = {_z_index(pos, m, comp): 1}
                for c in kids:
                    coeffs[_z_index(pos, c, comp)] = -cv(tree.prob[c])
                rows.append(lp.Constraint(coeffs, "=", 0))
        bid, ask = bid_ask(tree.price[m], tc)
        rows.append(lp.Constraint({_z_index(pos, m, 0): cv(bid), _z_index(pos, m, 1): -1}, "<=", 0))
        rows.append(lp.Constraint({_z_index(pos, m, 1): 1, _z_index(pos, m, 0): -cv(ask)}, "<=", 0))
    return pos, rows


def _strict_system(tree: EventTree, tc: TransactionCost, scope_root: int, extra_rows=None,
                   mode: Optional[str] = None):
    """Maximize the minimum of Z1 over the subtree at scope_root.

    Returns (solution, pos, nodes) on strict success; raises NoCps otherwise,
    with the Farkas certificate attached when the whole closed system is
    already infeasible.
    """
    if mode is None:
        mode = resolve_mode(tree, tc)
    nodes = tree.subtree(scope_root)
    pos, rows = _scope_rows(tree, tc, nodes, mode)
    nv = 2 * len(nodes) + 1
    delta = nv - 1
    rows = list(rows)
    rows.append(lp.Constraint({_z_index(pos, scope_root, 0): 1}, "=", 1))
    for m in nodes:
        rows.append(lp.Constraint({_z_index(pos, m, 0): 1, delta: -1}, ">=", 0))
    if extra_rows:
        rows.extend(extra_rows(pos))
    objective = [0] * nv
    objective[delta] = 1
    prob = lp.LpProblem(nv, objective, "max", rows)
    sol = lp.solve(prob, mode=mode)
    if sol.status == lp.INFEASIBLE:
        raise NoCps(
            f"no consistent price system on the subtree at node {scope_root} (lam={tc.lam})",
            certificate=sol.certificate,
        )
    assert sol.status == lp.OPTIMAL, "the strictness program is bounded by z1(root)=1"
    floor = sol.primal[delta]
    threshold = 0 if mode == "exact" else FLOAT_STRICT_EPS
    if not floor > threshold:
        raise NoCps(
            f"only boundary price systems exist at node {scope_root} (min z1 = {floor}); "
            "no equivalent one",
        )
    return sol, pos, nodes


def find_cps(tree: EventTree, tc: TransactionCost, scope_root: int = 0) -> ConsistentPriceSystem:
    """Find an equivalent consistent price system, or raise NoCps.

    The returned system maximizes the minimum of Z1 over the scope, which
    keeps the certifying measure comfortably away from the boundary.
    """
    tree.check_node(scope_root)
    sol, pos, nodes = _strict_system(tree, tc, scope_root)
    z1 = [None] * tree.n_nodes
    z2 = [None] * tree.n_nodes
    for m in nodes:
        z1[m] = sol.primal[_z_index(pos, m, 0)]
        z2[m] = sol.primal[_z_index(pos, m, 1)]
    return ConsistentPriceSystem(tree, z1, z2, scope_root)


def verify_cps(tree: EventTree, tc: TransactionCost, cps: ConsistentPriceSystem, tol: float = 1e-9) -> bool:
    """Re-check every defining property of a candidate system from scratch."""
    if len(cps.z1) != tree.n_nodes or len(cps.z2) != tree.n_nodes:
        raise ShapeMismatch("z arrays must cover every tree node (None outside the scope)")
    root = tree.check_node(cps.scope_root)
    nodes = tree.subtree(root)
    vals = [cps.z1[m] for m in nodes] + [cps.z2[m] for m in nodes]
    if any(v is None for v in vals):
        return False
    exact = resolve_mode(tree, tc) == "exact" and all(is_exact(v) for v in vals)
    one = Rat(1) if exact else 1.0
    if not approx_eq(cps.z1[root], one, exact, tol):
        return False
    for m in nodes:
        if not cps.z1[m] > 0:
            return False
        if not polar_contains(cps.z1[m], cps.z2[m], tree.price[m], tc, tol):
            return False
        kids = tree.children[m]
        if kids:
            for comp, z in ((0, cps.z1), (1, cps.z2)):
                total = sum(tree.prob[c] * z[c] for c in kids)
                if not approx_eq(z[m], total, exact, tol):
                    return False
    q = cps.leaf_measure()
    total = sum(q.values())
    if not approx_eq(total, one, exact, tol):
        return False
    return all(v > 0 for v in q.values())


def cps_with_value(tree: EventTree, tc: TransactionCost, node: int, value) -> ConsistentPriceSystem:
    """An equivalent system on the subtree at ``node`` whose shadow starts at ``value``.

    ``value`` must lie in the closed bid-ask band at the node (BandViolation
    otherwise).  Existence can still fail on trees whose deeper structure
    pins the shadow away from ``value``; that raises NoCps.
    """
    tree.check_node(node)
    mode = resolve_mode(tree, tc)
    if mode == "exact" and not is_exact(value):
        mode = "float"
    exact = mode == "exact"
    bid, ask = bid_ask(tree.price[node], tc)
    v = value if exact else float(value)
    if not exact:
        bid, ask = float(bid), float(ask)
    if not (approx_le(bid, v, exact) and approx_le(v, ask, exact)):
        raise BandViolation(f"target {value} outside the band [{bid}, {ask}] at node {node}")

    def pin_rows(pos):
        # z1(node) = 1 holds by the anchor row, so the pin is linear
        return [lp.Constraint({_z_index(pos, node, 1): 1}, "=", v)]

    sol, pos, nodes = _strict_system(tree, tc, node, extra_rows=pin_rows, mode=mode)
    z1 = [None] * tree.n_nodes
    z2 = [None] * tree.n_nodes
    for m in nodes:
        z1[m] = sol.primal[_z_index(pos, m, 0)]
        z2[m] = sol.primal[_z_index(pos, m, 1)]
    return ConsistentPriceSystem(tree, z1, z2, node)


def _value_lp(tree: EventTree, tc: TransactionCost, nodes, anchor: int, objective_fn, mode: str):
    """Closure value program: optimize over Z >= 0 with z1(anchor) = 1."""
    pos, rows = _scope_rows(tree, tc, nodes, mode)
    nv = 2 * len(nodes)
    rows.append(lp.Constraint({_z_index(pos, anchor, 0): 1}, "=", 1))
    objective = [0] * nv
    objective_fn(pos, objective)
    prob = lp.LpProblem(nv, objective, "max", rows)
    sol = lp.solve(prob, mode=mode)
    if sol.status == lp.INFEASIBLE:
        raise NoCps(
            f"no consistent price system touches node {anchor} (lam={tc.lam})",
            certificate=sol.certificate,
        )
    assert sol.status == lp.OPTIMAL, "value programs are bounded by the band at the anchor"
    return sol, pos, prob


def fundamental_value(tree: EventTree, tc: TransactionCost, node: int = 0, scope: str = "subtree",
                      _skip_existence: bool = False):
    """Largest shadow expectation of the terminal price, seen from ``node``.

    scope='subtree' constrains the system on the subtree below ``node`` only;
    scope='full_tree' constrains it on the whole tree (normalized at ``node``,
    which is harmless because the constraint cone is scale-invariant).  The
    full-tree value never exceeds the subtree value (restriction only loses
    constraints).  They agree on trees rich enough in systems, an equivalent
    martingale measure being sufficient; on thin trees the ancestor bands can
    pin the whole-tree value strictly lower, and the unit tests keep one such
    witness.  The acceptance suite pins equality on measure-feasible fixtures.

    Raises NoCps when no equivalent system exists on the requested scope.
    """
    tree.check_node(node)
    if scope not in ("subtree", "full_tree"):
        raise ValueError(f"scope must be 'subtree' or 'full_tree', got {scope!r}")
    mode = resolve_mode(tree, tc)
    if not _skip_existence:
        _strict_system(tree, tc, node if scope == "subtree" else tree.root)
    nodes = tree.subtree(node) if scope == "subtree" else tree.subtree(tree.root)

    def obj(pos, objective):
        objective[_z_index(pos, node, 1)] = 1

    sol, _, _ = _value_lp(tree, tc, nodes, node, obj, mode)
    return sol.objective_value


def fundamental_value_certified(tree: EventTree, tc: TransactionCost, node: int = 0,
                                _skip_existence: bool = False):
    """Subtree fundamental value plus an independent optimality certificate.

    The certificate re-checks the solved program from scratch: primal
    feasibility, dual feasibility, complementary slackness, and a zero
    duality gap (within tolerance in float mode).  Returns (value, ok).
    """
    tree.check_node(node)
    mode = resolve_mode(tree, tc)
    if not _skip_existence:
        _strict_system(tree, tc, node)
    nodes = tree.subtree(node)

    def obj(pos, objective):
        objective[_z_index(pos, node, 1)] = 1

    sol, _, prob = _value_lp(tree, tc, nodes, node, obj, mode)
    report = lp.certify(prob, sol)
    return sol.objective_value, report.ok


def dual_claim_value(tree: EventTree, claim: Claim, tc: TransactionCost, node: int = 0,
                     _skip_existence: bool = False):
    """Largest shadow expectation of the claim's liquidation-free value at ``node``.

    For a claim paying (cash, shares) per leaf this maximizes
    E_Q[cash + shares * shadow_T | node] over systems on the subtree; it is
    the dual comparator of the superreplication program.
    """
    tree.check_node(node)
    claim.validate_for(tree, node)
    mode = resolve_mode(tree, tc)
    if mode == "exact" and not claim.is_exact_claim():
        mode = "float"
    cv = (lambda x: x) if mode == "exact" else float
    if not _skip_existence:
        _strict_system(tree, tc, node)
    nodes = tree.subtree(node)
    pn = tree.path_prob(node)

    def obj(pos, objective):
        for l in tree.leaves_under(node):
            w = tree.path_prob(l) / pn
            b = claim.bond_leg[l]
            a = claim.asset_leg[l]
            if b != 0:
                objective[_z_index(pos, l, 0)] = cv(w) * cv(b)
            if a != 0:
                objective[_z_index(pos, l, 1)] = cv(w) * cv(a)

    sol, _, _ = _value_lp(tree, tc, nodes, node, obj, mode)
    return sol.objective_value


def _emm_system(tree: EventTree, node: int):
    """Maximize the minimum of the density Y over the subtree, subject to
    Y being a P-martingale with Y(node)=1 and Y*S a P-martingale."""
    mode = "exact" if tree.is_exact else "float"
    cv = (lambda x: x) if mode == "exact" else float
    nodes = tree.subtree(node)
    pos = {m: k for k, m in enumerate(nodes)}
    nv = len(nodes) + 1
    delta = nv - 1
    rows = []
    for m in nodes:
        kids = tree.children[m]
        if kids:
            coeffs = {pos[m]: 1}
            for c in kids:
                coeffs[pos[c]] = -cv(tree.prob[c])
            rows.append(lp.Constraint(coeffs, "=", 0))
            coeffs = {pos[m]: cv(tree.price[m])}
            for c in kids:
                coeffs[pos[c]] = -cv(tree.prob[c] * tree.price[c])
            rows.append(lp.Constraint(coeffs, "=", 0))
        rows.append(lp.Constraint({pos[m]: 1, delta: -1}, ">=", 0))
    rows.append(lp.Constraint({pos[node]: 1}, "=", 1))
    objective = [0] * nv
    objective[delta] = 1
    sol = lp.solve(lp.LpProblem(nv, objective, "max", rows), mode=mode)
    if sol.status == lp.INFEASIBLE:
        raise NoEmm(f"no martingale measure on the subtree at node {node}", certificate=sol.certificate)
    assert sol.status == lp.OPTIMAL
    floor = sol.primal[delta]
    threshold = 0 if mode == "exact" else FLOAT_STRICT_EPS
    if not floor > threshold:
        raise NoEmm(f"only non-equivalent martingale measures at node {node} (min density = {floor})")
    return sol, pos, nodes, mode


def find_emm(tree: EventTree, node: int = 0) -> list:
    """An equivalent martingale measure for S on the subtree at ``node``.

    Returned as per-node conditional transition probabilities aligned with
    tree.prob (entries outside the subtree are None, the subtree root carries
    1).  Raises NoEmm when none exists.
    """
    tree.check_node(node)
    sol, pos, nodes, mode = _emm_system(tree, node)
    one = Rat(1) if mode == "exact" else 1.0
    q = [None] * tree.n_nodes
    q[node] = one
    for m in nodes:
        for c in tree.children[m]:
            q[c] = tree.prob[c] * sol.primal[pos[c]] / sol.primal[pos[m]]
    return q


def frictionless_fundamental(tree: EventTree, node: int = 0, _skip_existence: bool = False):
    """Largest E_Q[S_T | node] over equivalent martingale measures.

    With zero friction the band collapses onto the price itself, so whenever
    an equivalent martingale measure exists this equals S(node); the value is
    still produced by the optimizer rather than assumed.  Raises NoEmm when
    no equivalent martingale measure exists on the subtree.
    """
    tree.check_node(node)
    mode = "exact" if tree.is_exact else "float"
    cv = (lambda x: x) if mode == "exact" else float
    if not _skip_existence:
        _emm_system(tree, node)
    nodes = tree.subtree(node)
    pos = {m: k for k, m in enumerate(nodes)}
    nv = len(nodes)
    rows = []
    for m in nodes:
        kids = tree.children[m]
        if not kids:
            continue
        coeffs = {pos[m]: 1}
        for c in kids:
            coeffs[pos[c]] = -cv(tree.prob[c])
        rows.append(lp.Constraint(coeffs, "=", 0))
        coeffs = {pos[m]: cv(tree.price[m])}
        for c in kids:
            coeffs[pos[c]] = -cv(tree.prob[c] * tree.price[c])
        rows.append(lp.Constraint(coeffs, "=", 0))
    rows.append(lp.Constraint({pos[node]: 1}, "=", 1))
    pn = tree.path_prob(node)
    objective = [0] * nv
    for l in tree.leaves_under(node):
        w = (tree.path_prob(l) / pn) * tree.price[l]
        objective[pos[l]] = w if mode == "exact" else float(w)
    sol = lp.solve(lp.LpProblem(nv, objective, "max", rows), mode=mode)
    if sol.status == lp.INFEASIBLE:
        raise NoEmm(f"no martingale measure on the subtree at node {node}", certificate=sol.certificate)
    assert sol.status == lp.OPTIMAL
    return sol.objective_value


def embed_emm(tree: EventTree, emm: Sequence, mu, tc: TransactionCost) -> ConsistentPriceSystem:
    """Turn an equivalent martingale measure into a consistent price system.

    ``emm`` gives conditional transition probabilities per node (aligned with
    tree.prob); ``mu`` scales the shadow price to mu * S, which stays in the
    band exactly when 1 - lam <= mu <= 1 + lam (BandViolation otherwise).
    Raises NotMartingale if S fails the martingale identities under ``emm``.
    """
    if len(emm) != tree.n_nodes:
        raise ShapeMismatch(f"measure has {len(emm)} entries, tree has {tree.n_nodes} nodes")
    mode = resolve_mode(tree, tc)
    exact = mode == "exact" and all(is_exact(q) for q in emm if q is not None) and is_exact(mu)
    one = Rat(1) if exact else 1.0
    lo, hi = one - tc.lam, one + tc.lam
    if not (approx_le(lo, mu, exact) and approx_le(mu, hi, exact)):
        raise BandViolation(f"shadow scale {mu} outside [1-lam, 1+lam] = [{lo}, {hi}]")
    for m in range(tree.n_nodes):
        kids = tree.children[m]
        if not kids:
            continue
        total = sum(emm[c] for c in kids)
        if any(not emm[c] > 0 for c in kids) or not approx_eq(total, one, exact):
            raise NotMartingale(f"transition weights at node {m} are not a probability")
        exp_s = sum(emm[c] * tree.price[c] for c in kids)
        if not approx_eq(exp_s, tree.price[m], exact):
            raise NotMartingale(f"S is not a martingale at node {m}: E_Q[S_next] = {exp_s} != {tree.price[m]}")
    z1 = [None] * tree.n_nodes
    z2 = [None] * tree.n_nodes
    z1[tree.root] = one
    for m in range(tree.n_nodes):
        for c in tree.children[m]:
            z1[c] = z1[m] * emm[c] / tree.prob[c]
    for m in range(tree.n_nodes):
        z2[m] = mu * tree.price[m] * z1[m]
    return ConsistentPriceSystem(tree, z1, z2, tree.root)


def measure_and_shadow(tree: EventTree, cps: ConsistentPriceSystem):
    """Project a system to its observable pair (leaf measure, shadow price path)."""
    shadow = [None] * tree.n_nodes
    for m in tree.subtree(cps.scope_root):
        shadow[m] = cps.shadow(m)
    return cps.leaf_measure(), shadow


def cps_from_measure_shadow(tree: EventTree, q_leaf: dict, shadow, scope_root: int = 0) -> ConsistentPriceSystem:
    """Rebuild the Z-pair from a leaf measure and the terminal shadow prices.

    Z1 is the density martingale of the measure, Z2 the martingale closed by
    shadow * density at the leaves.  Round-tripping a valid system through
    measure_and_shadow and back reproduces it exactly.
    """
    nodes = tree.subtree(scope_root)
    leaves = tree.leaves_under(scope_root)
    if set(q_leaf) != set(leaves):
        raise ShapeMismatch("leaf measure must cover exactly the scope's leaves")
    pr = tree.path_prob(scope_root)
    z1 = [None] * tree.n_nodes
    z2 = [None] * tree.n_nodes
    for l in leaves:
        dens = q_leaf[l] / (tree.path_prob(l) / pr)
        z1[l] = dens
        z2[l] = dens * shadow[l]
    for m in reversed(nodes):
        if tree.children[m]:
            z1[m] = sum(tree.prob[c] * z1[c] for c in tree.children[m])
            z2[m] = sum(tree.prob[c] * z2[c] for c in tree.children[m])
    return ConsistentPriceSystem(tree, z1, z2, scope_root)


def bubble_report(tree: EventTree, tc: TransactionCost, certify: bool = False) -> BubbleReport:
    """Per-node fundamental values and bubbles, with frictionless comparisons.

    Requires an equivalent system on the full tree (NoCps otherwise); its
    restriction stays strict on every subtree, so the per-node value programs
    skip their own existence checks.  The frictionless columns appear only
    when an equivalent martingale measure exists.  certify=True additionally
    re-checks each node's value program (primal/dual feasibility and gap) and
    fills report.certified.
    """
    mode = resolve_mode(tree, tc)
    _strict_system(tree, tc, tree.root)
    n = tree.n_nodes
    fundamental = [None] * n
    beta = [None] * n
    certified = [None] * n if certify else None
    for m in range(n):
        if certify:
            f, ok = fundamental_value_certified(tree, tc, m, _skip_existence=True)
            certified[m] = ok
        else:
            f = fundamental_value(tree, tc, m, scope="subtree", _skip_existence=True)
        _, ask = bid_ask(tree.price[m], tc)
        fundamental[m] = f
        beta[m] = ask - f
    has_emm = True
    try:
        _emm_system(tree, tree.root)
    except NoEmm:
        has_emm = False
    if not has_emm:
        return BubbleReport(tree, tc.lam, fundamental, beta, False, mode=mode,
                            certified=certified)
    s_star = [None] * n
    beta_notc = [None] * n
    delta = [None] * n
    one_plus = (Rat(1) + tc.lam) if mode == "exact" else (1.0 + float(tc.lam))
    for m in range(n):
        s = frictionless_fundamental(tree, m, _skip_existence=True)
        s_star[m] = s
        beta_notc[m] = tree.price[m] - s
        delta[m] = fundamental[m] - one_plus * s
    return BubbleReport(tree, tc.lam, fundamental, beta, True, s_star, beta_notc, delta,
                        mode=mode, certified=certified)


def lambda_sweep(tree: EventTree, lambdas: Sequence) -> list:
    """Root bubble across ascending cost rates.

    Entries where no system exists report cps_exists=False.  Once the root
    bubble vanishes it must stay vanished at every higher rate; a violation
    is an engine bug and raises CertificationFailure.
    """
    entries = []
    costs = sorted((TransactionCost(lam) for lam in lambdas), key=lambda t: float(t.lam))
    for tc in costs:
        try:
            find_cps(tree, tc)
        except NoCps:
            entries.append(SweepEntry(tc.lam, False))
            continue
        f = fundamental_value(tree, tc, tree.root, "subtree", _skip_existence=True)
        _, ask = bid_ask(tree.price[tree.root], tc)
        entries.append(SweepEntry(tc.lam, True, f, ask - f))
    seen_zero = False
    for e in entries:
        if not e.cps_exists:
            continue
        exact = is_exact(e.beta_root)
        zero = e.beta_root == 0 if exact else abs(float(e.beta_root)) <= 1e-9
        if seen_zero and not zero:
            raise CertificationFailure(
                f"bubble reappeared at lam={e.lam} after vanishing at a lower rate"
            )
        seen_zero = seen_zero or zero
    return entries
