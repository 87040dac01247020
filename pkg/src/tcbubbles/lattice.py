"""Finite event trees for a single risky asset quoted with proportional costs.

A market is a rooted tree of price nodes.  Stage k collects the nodes
reachable after k steps; every leaf sits at the final stage.  Each node n
carries the mid price S(n) > 0 and the conditional probability of reaching n
from its parent.  A proportional cost lam in (0, 1) widens the quote to the
bid-ask interval [(1-lam)S, (1+lam)S]: buys execute at the ask, sells at the
bid.

Two numeric modes run through the same code paths.  Trees built purely from
rationals (ints, Fractions, 'p/q' strings) store exact rationals and every
downstream computation stays exact; anything built from floats runs in float
mode with explicit tolerances.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ._rational import Rat, is_exact, to_rat
from .errors import InvalidTree, ShapeMismatch

FLOAT_TOL = 1e-9


def _as_mode_value(x, exact: bool):
    if exact:
        return to_rat(x)
    if isinstance(x, str):
        return float(to_rat(x))
    return float(x)


def _all_exact(values: Iterable) -> bool:
    return all(is_exact(v) or isinstance(v, str) for v in values)


def approx_le(a, b, exact: bool, tol: float = FLOAT_TOL) -> bool:
    """a <= b, with an absolute-plus-relative slack in float mode."""
    if exact:
        return a <= b
    scale = max(1.0, abs(float(a)), abs(float(b)))
    return float(a) <= float(b) + tol * scale


def approx_eq(a, b, exact: bool, tol: float = FLOAT_TOL) -> bool:
    if exact:
        return a == b
    scale = max(1.0, abs(float(a)), abs(float(b)))
    return abs(float(a) - float(b)) <= tol * scale


@dataclass(frozen=True)
class TransactionCost:
    """Proportional cost rate lam, constrained to the open interval (0, 1).

    lam = 0 (frictionless quotes) is deliberately excluded here; the
    frictionless comparison quantities are computed by dedicated operations.
    """

    lam: object

    def __post_init__(self):
        lam = self.lam
        if isinstance(lam, str) or (is_exact(lam) and not isinstance(lam, bool)):
            object.__setattr__(self, "lam", to_rat(lam))
        elif isinstance(lam, float):
            object.__setattr__(self, "lam", float(lam))
        else:
            raise InvalidTree(f"unsupported cost rate {lam!r}")
        if not (0 < self.lam < 1):
            raise InvalidTree(f"cost rate must lie in (0, 1), got {self.lam}")

    @property
    def is_exact(self) -> bool:
        return not isinstance(self.lam, float)

    def bid_factor(self):
        one = Rat(1) if self.is_exact else 1.0
        return one - self.lam

    def ask_factor(self):
        one = Rat(1) if self.is_exact else 1.0
        return one + self.lam


class EventTree:
    """Immutable rooted tree with per-node prices and transition probabilities.

    Nodes are integers 0..n-1 ordered by stage (the root is 0, stage order is
    contiguous).  ``prob[n]`` is the conditional probability of moving from
    parent(n) to n; the root carries 1.  Use :func:`build_tree` to construct
    instances; the constructor assumes already-validated data.
    """

    __slots__ = (
        "price",
        "parent",
        "children",
        "stage",
        "prob",
        "n_nodes",
        "n_stages",
        "leaves",
        "stages",
        "is_exact",
        "_path_prob",
    )

    def __init__(self, price, parent, children, stage, prob, is_exact):
        self.price = tuple(price)
        self.parent = tuple(parent)
        self.children = tuple(tuple(c) for c in children)
        self.stage = tuple(stage)
        self.prob = tuple(prob)
        self.n_nodes = len(price)
        self.n_stages = self.stage[-1] + 1
        self.is_exact = is_exact
        buckets = [[] for _ in range(self.n_stages)]
        for n in range(self.n_nodes):
            buckets[self.stage[n]].append(n)
        self.stages = tuple(tuple(b) for b in buckets)
        self.leaves = self.stages[-1]
        self._path_prob = None

    @property
    def root(self) -> int:
        return 0

    @property
    def depth(self) -> int:
        """Number of steps from root to any leaf."""
        return self.n_stages - 1

    def is_leaf(self, node: int) -> bool:
        return not self.children[node]

    def path_prob(self, node: int):
        """Unconditional probability P(node) of the path from the root."""
        if self._path_prob is None:
            acc = [None] * self.n_nodes
            acc[0] = self.prob[0]
            for n in range(1, self.n_nodes):
                acc[n] = acc[self.parent[n]] * self.prob[n]
            self._path_prob = tuple(acc)
        return self._path_prob[node]

    def subtree(self, node: int) -> list:
        """Nodes of the subtree rooted at ``node``, in stage (preorder) order."""
        out = [node]
        i = 0
        while i < len(out):
            out.extend(self.children[out[i]])
            i += 1
        out.sort()
        return out

    def leaves_under(self, node: int) -> list:
        return [m for m in self.subtree(node) if self.is_leaf(m)]

    def check_node(self, node) -> int:
        if not isinstance(node, (int,)) or isinstance(node, bool):
            raise ShapeMismatch(f"node id must be an int, got {node!r}")
        if not 0 <= node < self.n_nodes:
            raise ShapeMismatch(f"node {node} outside 0..{self.n_nodes - 1}")
        return node

    def __repr__(self):
        mode = "exact" if self.is_exact else "float"
        return f"EventTree(n_nodes={self.n_nodes}, depth={self.depth}, mode={mode})"


def build_tree(levels: Sequence[Sequence], edges: Iterable[tuple]) -> EventTree:
    """Validate and assemble an event tree.

    levels: per-stage lists of node prices; node ids are assigned contiguously
        stage by stage, so levels=[[1], [2, 3]] yields root 0 and children 1, 2.
    edges: triples (parent_id, child_id, probability).

    Numbers may be ints, Fractions, 'p/q' strings, or floats.  If every price
    and probability is rational the tree is exact; a single float anywhere
    demotes the whole tree to float mode.

    Raises InvalidTree on structural violations: empty stages, multiple roots,
    nonpositive prices or probabilities, children probabilities not summing
    to one, edges that skip stages, unreachable nodes, or leaves before the
    final stage.
    """
    levels = [list(level) for level in levels]
    if not levels or any(len(level) == 0 for level in levels):
        raise InvalidTree("every stage must contain at least one node")
    if len(levels[0]) != 1:
        raise InvalidTree(f"stage 0 must hold exactly the root, got {len(levels[0])} nodes")

    flat_prices = [p for level in levels for p in level]
    edges = list(edges)
    for e in edges:
        if len(e) != 3:
            raise InvalidTree(f"edge must be (parent, child, prob), got {e!r}")
    probs = [e[2] for e in edges]
    exact = _all_exact(flat_prices) and _all_exact(probs)

    n_nodes = len(flat_prices)
    stage = []
    for s, level in enumerate(levels):
        stage.extend([s] * len(level))

    price = []
    for p in flat_prices:
        v = _as_mode_value(p, exact)
        if not v > 0:
            raise InvalidTree(f"prices must be strictly positive, got {p!r}")
        price.append(v)

    one = Rat(1) if exact else 1.0
    parent = [-1] * n_nodes
    prob = [None] * n_nodes
    children = [[] for _ in range(n_nodes)]
    prob[0] = one
    for pa, ch, pr in edges:
        if not (isinstance(pa, int) and isinstance(ch, int)):
            raise InvalidTree(f"edge endpoints must be ints, got {(pa, ch)!r}")
        if not (0 <= pa < n_nodes and 0 <= ch < n_nodes):
            raise InvalidTree(f"edge ({pa}, {ch}) references unknown nodes")
        if stage[ch] != stage[pa] + 1:
            raise InvalidTree(f"edge ({pa}, {ch}) must go from stage s to stage s+1")
        if parent[ch] != -1:
            raise InvalidTree(f"node {ch} has more than one parent")
        p = _as_mode_value(pr, exact)
        if not p > 0:
            raise InvalidTree(f"transition probabilities must be strictly positive, got {pr!r}")
        parent[ch] = pa
        prob[ch] = p
        children[pa].append(ch)

    for n in range(1, n_nodes):
        if parent[n] == -1:
            raise InvalidTree(f"node {n} is unreachable (no incoming edge)")
    last = len(levels) - 1
    for n in range(n_nodes):
        if stage[n] < last and not children[n]:
            raise InvalidTree(f"node {n} at stage {stage[n]} has no children; leaves must sit at stage {last}")
        if children[n]:
            total = sum(prob[c] for c in children[n])
            if exact:
                if total != 1:
                    raise InvalidTree(f"children probabilities of node {n} sum to {total}, not 1")
            elif abs(total - 1.0) > FLOAT_TOL:
                raise InvalidTree(f"children probabilities of node {n} sum to {total}, not 1")
        children[n].sort()

    return EventTree(price, parent, children, stage, prob, exact)


def resolve_mode(tree: EventTree, tc: TransactionCost) -> str:
    """'exact' when both the tree and the cost rate are rational, else 'float'."""
    return "exact" if (tree.is_exact and tc.is_exact) else "float"


def bid_ask(price, tc: TransactionCost):
    """Quote interval ((1-lam)S, (1+lam)S) for a mid price S."""
    if not price > 0:
        raise InvalidTree(f"price must be positive, got {price!r}")
    if tc.is_exact and is_exact(price):
        p = to_rat(price)
        return (tc.bid_factor() * p, tc.ask_factor() * p)
    p = float(price)
    return ((1.0 - float(tc.lam)) * p, (1.0 + float(tc.lam)) * p)


def polar_contains(w1, w2, price, tc: TransactionCost, tol: float = FLOAT_TOL) -> bool:
    """Membership of (w1, w2) in the dual quote cone at mid price S.

    The cone consists of the strictly positive rays whose ratio w2/w1 lies in
    the bid-ask band.  w1 <= 0 is rejected outright: the ray (0, 0) is excluded
    by definition and w1 = 0 forces w2 = 0.
    """
    exact = tc.is_exact and is_exact(price) and is_exact(w1) and is_exact(w2)
    if exact:
        if not w1 > 0:
            return False
        bid, ask = bid_ask(price, tc)
        return bid * w1 <= w2 <= ask * w1
    w1f, w2f = float(w1), float(w2)
    if not w1f > 0:
        return False
    bid = (1.0 - float(tc.lam)) * float(price)
    ask = (1.0 + float(tc.lam)) * float(price)
    scale = max(1.0, abs(w2f), bid * w1f, ask * w1f)
    return bid * w1f - tol * scale <= w2f <= ask * w1f + tol * scale


def liquidation_value(position, price, tc: TransactionCost):
    """Cash obtained by closing the position (cash, shares) at the quotes.

    Long shares are sold at the bid, short shares are covered at the ask:
    cash + shares*(1-lam)S for shares >= 0, cash + shares*(1+lam)S otherwise.
    """
    cash, shares = position
    bid, ask = bid_ask(price, tc)
    exact = tc.is_exact and is_exact(price) and is_exact(cash) and is_exact(shares)
    if not exact:
        cash, shares, bid, ask = float(cash), float(shares), float(bid), float(ask)
    if shares >= 0:
        return cash + shares * bid
    return cash + shares * ask


@dataclass(frozen=True)
class Claim:
    """Terminal payoff transferred at the leaves: a cash leg and a share leg.

    Both legs are mappings leaf-node-id -> amount.  The share leg is delivered
    physically; converting it to cash is the hedger's problem.
    """

    bond_leg: Mapping[int, object]
    asset_leg: Mapping[int, object]

    def __post_init__(self):
        object.__setattr__(self, "bond_leg", dict(self.bond_leg))
        object.__setattr__(self, "asset_leg", dict(self.asset_leg))
        if set(self.bond_leg) != set(self.asset_leg):
            raise ShapeMismatch("bond and asset legs must cover the same leaves")

    def validate_for(self, tree: EventTree, start_node: int = 0) -> None:
        need = set(tree.leaves_under(start_node))
        have = set(self.bond_leg)
        if not need <= have:
            raise ShapeMismatch(f"claim is missing leaves {sorted(need - have)}")

    def is_exact_claim(self) -> bool:
        return _all_exact(self.bond_leg.values()) and _all_exact(self.asset_leg.values())

    @staticmethod
    def unit_asset(tree: EventTree) -> "Claim":
        """The physical asset itself: zero cash, one share at every leaf."""
        one = Rat(1) if tree.is_exact else 1.0
        zero = Rat(0) if tree.is_exact else 0.0
        return Claim({l: zero for l in tree.leaves}, {l: one for l in tree.leaves})

    @staticmethod
    def cash(tree: EventTree, amount) -> "Claim":
        zero = Rat(0) if tree.is_exact else 0.0
        return Claim({l: amount for l in tree.leaves}, {l: zero for l in tree.leaves})


@dataclass
class Strategy:
    """Self-financing trading record on a tree.

    ``initial_cash`` is the endowment held (in cash only) before the trade at
    the start node; ``bond[n]`` and ``shares[n]`` are the holdings formed at
    node n after trading there, and ``buys[n]`` / ``sells[n]`` are the
    nonnegative share transfers executed at node n's quotes.  Nodes outside
    the traded subtree may carry zeros.
    """

    initial_cash: object
    bond: Sequence
    shares: Sequence
    buys: Sequence
    sells: Sequence
    start_node: int = 0

    def positions(self):
        return list(zip(self.bond, self.shares))


def check_self_financing(tree: EventTree, tc: TransactionCost, strategy: Strategy) -> bool:
    """Verify the per-node ledgers of a strategy.

    Share ledger (exact bookkeeping): shares(n) = shares(parent) + buys(n) - sells(n).
    Cash ledger (slack allowed, money may be thrown away):
        bond(n) <= bond(parent) - ask(n)*buys(n) + bid(n)*sells(n),
    with (initial_cash, 0) standing in for the parent of the start node.
    Returns True iff every ledger on the traded subtree holds; raises
    ShapeMismatch when the per-node arrays do not match the tree.
    """
    n = tree.n_nodes
    for name in ("bond", "shares", "buys", "sells"):
        seq = getattr(strategy, name)
        if len(seq) != n:
            raise ShapeMismatch(f"{name} has length {len(seq)}, tree has {n} nodes")
    start = tree.check_node(strategy.start_node)
    exact = resolve_mode(tree, tc) == "exact" and all(
        _all_exact(getattr(strategy, name)) for name in ("bond", "shares", "buys", "sells")
    ) and is_exact(strategy.initial_cash)

    zero = Rat(0) if exact else 0.0
    for m in tree.subtree(start):
        b, s = strategy.buys[m], strategy.sells[m]
        if not (approx_le(zero, b, exact) and approx_le(zero, s, exact)):
            return False
        if m == start:
            prev_bond, prev_shares = strategy.initial_cash, zero
        else:
            pa = tree.parent[m]
            prev_bond, prev_shares = strategy.bond[pa], strategy.shares[pa]
        bid, ask = bid_ask(tree.price[m], tc)
        if not exact:
            b, s, bid, ask = float(b), float(s), float(bid), float(ask)
            prev_bond, prev_shares = float(prev_bond), float(prev_shares)
        if not approx_eq(strategy.shares[m], prev_shares + b - s, exact):
            return False
        if not approx_le(strategy.bond[m], prev_bond - ask * b + bid * s, exact):
            return False
    return True
