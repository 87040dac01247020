"""Cheapest superreplication of terminal claims under proportional costs.

Two independent routes compute the same number and cross-check each other:

* ``superrep_price`` solves the linear program over trading strategies:
  initial cash X, a cash ledger per node, and nonnegative buy/sell volumes,
  with trades executing at the node's own bid/ask and terminal positions
  dominating the claim in the leaf's solvency cone.

* ``backward_superhedge`` never builds an LP.  It propagates, leaf to root,
  the region of pre-trade (cash, shares) positions from which the claim can
  be dominated.  Each region is the epigraph of a convex piecewise-linear
  function; moving through a node adds the node's solvency cone, which acts
  on the boundary function as an inf-convolution, computed here through
  conjugates as a slope clip.  The price at a node is the boundary value at
  zero shares.

Both routes report the impossibility of superhedging (an arbitrage somewhere
in the scope makes the program unbounded below) as NoCps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import lp
from ._rational import Rat, is_exact
from .errors import NoCps, NumericalFailure
from .lattice import Claim, EventTree, Strategy, TransactionCost, bid_ask, liquidation_value, resolve_mode
from .cps import dual_claim_value


@dataclass
class SuperRepResult:
    """Price and certificate strategy of the cheapest dominating portfolio.

    ``bound`` reports the admissibility constant of the extracted strategy
    under the convention named by ``mode``: the largest shortfall of the
    running liquidation value, either in cash units (numeraire_based: V >=
    -bound) or relative to 1 + S (numeraire_free: V >= -bound * (1 + S)).
    """

    price: object
    strategy: Strategy
    mode: str
    start_node: int
    bound: object
    terminal: str = "dominance"
    numeric_mode: str = "exact"
    iterations: int = 0


class _Total:
    """Region covering the whole plane: any position superhedges (arbitrage below)."""

    __slots__ = ()


_TOTAL = _Total()


class _PL:
    """Convex piecewise-linear function kept as the upper envelope of lines.

    pieces are (slope, intercept) with strictly increasing slopes after
    reduction; the function is x -> max(s*x + b).  Regions of hedgeable
    positions are epigraphs {(a, c): a >= f(c)} of such functions.
    """

    __slots__ = ("pieces",)

    def __init__(self, pieces):
        self.pieces = _envelope(pieces)

    def eval(self, x):
        return max(s * x + b for s, b in self.pieces)

    def slope_range(self):
        return self.pieces[0][0], self.pieces[-1][0]

    def vertices(self):
        out = []
        for (s1, b1), (s2, b2) in zip(self.pieces, self.pieces[1:]):
            x = (b1 - b2) / (s2 - s1)
            out.append((x, s1 * x + b1))
        return out

    def intersect(self, other: "_PL") -> "_PL":
        # intersection of epigraphs is the max of the boundary functions
        return _PL(self.pieces + other.pieces)

    def conjugate_at(self, y):
        """sup_x (y*x - f(x)); finite exactly for y inside the slope range."""
        cands = [-b for s, b in self.pieces if s == y]
        cands.extend(y * x - v for x, v in self.vertices())
        return max(cands)

    def cone_convolve(self, d_lo, d_hi):
        """Inf-convolution with the cone boundary max(d_lo*x, d_hi*x), d_lo <= d_hi.

        Equivalent to restricting the conjugate to [d_lo, d_hi]: the result's
        slopes are the original ones clipped into the band.  Returns _TOTAL
        when the slope sets are disjoint (the convolution is -inf everywhere:
        the cone lets the position escape to arbitrarily low cash).
        """
        s_min, s_max = self.slope_range()
        if s_max < d_lo or s_min > d_hi:
            return _TOTAL
        ys = sorted({min(max(s, d_lo), d_hi) for s, _ in self.pieces})
        return _PL([(y, -self.conjugate_at(y)) for y in ys])


def _envelope(pieces):
    """Reduce lines to those attaining the pointwise max somewhere."""
    if not pieces:
        raise ValueError("empty piece list")
    by_slope = {}
    for s, b in pieces:
        if s not in by_slope or b > by_slope[s]:
            by_slope[s] = b
    lines = sorted(by_slope.items())
    if len(lines) == 1:
        return lines
    stack = [lines[0]]
    for s, b in lines[1:]:
        while stack:
            if len(stack) == 1:
                # equal value at the crossing means the lower-slope line
                # still wins to the left; keep both unless dominated everywhere
                break
            (s1, b1), (s2, b2) = stack[-2], stack[-1]
            # middle line redundant iff at the crossing of its neighbors it
            # does not rise strictly above them
            x = (b1 - b) / (s - s1)
            if s2 * x + b2 <= s1 * x + b1:
                stack.pop()
            else:
                break
        stack.append((s, b))
    return stack


def _leaf_region(price, tc: TransactionCost, x1, x2, exact: bool) -> _PL:
    bid, ask = bid_ask(price, tc)
    if not exact:
        bid, ask, x1, x2 = float(bid), float(ask), float(x1), float(x2)
    return _PL([(-ask, x1 + ask * x2), (-bid, x1 + bid * x2)])


@dataclass
class BackwardResult:
    """Hedgeable-region boundaries per node; regions are None outside the scope.

    ``prices`` holds the zero-share boundary value per node, with None where
    the region is the whole plane (price unbounded below).
    """

    tree: EventTree
    prices: list
    regions: list
    start_node: int

    def price_at(self, node: int):
        self.tree.check_node(node)
        p = self.prices[node]
        if p is None:
            if self.regions[node] is None:
                raise NoCps(f"node {node} is outside the computed scope")
            raise NoCps(
                f"superhedging from node {node} is unbounded below: "
                "the subtree admits an arbitrage"
            )
        return p


def backward_superhedge(tree: EventTree, claim: Claim, tc: TransactionCost,
                        start_node: int = 0) -> BackwardResult:
    """Exact-region backward recursion for the superreplication price.

    Independent of the LP route: no simplex, only envelope and conjugate
    manipulations of piecewise-linear boundaries.  Regions are computed for
    every node of the subtree at ``start_node``.
    """
    tree.check_node(start_node)
    claim.validate_for(tree, start_node)
    mode = resolve_mode(tree, tc)
    exact = mode == "exact" and claim.is_exact_claim()
    nodes = tree.subtree(start_node)
    regions: list = [None] * tree.n_nodes
    for m in reversed(nodes):
        if tree.is_leaf(m):
            pre = _leaf_region(tree.price[m], tc, claim.bond_leg[m], claim.asset_leg[m], exact)
        else:
            kid_regions = [regions[c] for c in tree.children[m]]
            finite = [g for g in kid_regions if not isinstance(g, _Total)]
            if not finite:
                regions[m] = _TOTAL
                continue
            pre = finite[0]
            for g in finite[1:]:
                pre = pre.intersect(g)
        bid, ask = bid_ask(tree.price[m], tc)
        if not exact:
            bid, ask = float(bid), float(ask)
        regions[m] = pre.cone_convolve(-ask, -bid)
    prices = [None] * tree.n_nodes
    for m in nodes:
        if not isinstance(regions[m], _Total):
            prices[m] = regions[m].eval(0)
    return BackwardResult(tree, prices, regions, start_node)


def superrep_price(tree: EventTree, claim: Claim, tc: TransactionCost, start_node: int = 0,
                   terminal: str = "dominance", mode: str = "numeraire_based") -> SuperRepResult:
    """Cheapest initial cash at ``start_node`` whose trading dominates the claim.

    Variables: initial cash, a cash ledger per node, buy/sell volumes per
    node; trades execute at the node's own bid/ask, including the start
    node.  terminal='dominance' requires the final position minus the claim
    to lie in the leaf's solvency cone; terminal='equality' forces the final
    position to match the claim exactly (never cheaper, usually pricier).

    Raises NoCps when the program is unbounded below, which happens exactly
    when no consistent price system (possibly degenerate on branches) exists
    on the scope.
    """
    tree.check_node(start_node)
    claim.validate_for(tree, start_node)
    if terminal not in ("dominance", "equality"):
        raise ValueError(f"terminal must be 'dominance' or 'equality', got {terminal!r}")
    if mode not in ("numeraire_based", "numeraire_free"):
        raise ValueError(f"mode must be 'numeraire_based' or 'numeraire_free', got {mode!r}")
    numeric_mode = resolve_mode(tree, tc)
    if numeric_mode == "exact" and not claim.is_exact_claim():
        numeric_mode = "float"
    exact = numeric_mode == "exact"

    nodes = tree.subtree(start_node)
    pos = {m: k for k, m in enumerate(nodes)}
    # var 0: initial cash X; per node k: cash ledger 1+3k, buys 2+3k, sells 3+3k
    nv = 1 + 3 * len(nodes)
    cash = lambda m: 1 + 3 * pos[m]
    buy = lambda m: 2 + 3 * pos[m]
    sell = lambda m: 3 + 3 * pos[m]
    bounds = [(None, None)] * nv
    for m in nodes:
        bounds[buy(m)] = (0, None)
        bounds[sell(m)] = (0, None)

    def conv(x):
        return x if exact else float(x)

    rows = []
    for m in nodes:
        bid_m, ask_m = bid_ask(tree.price[m], tc)
        parent_cash = 0 if m == start_node else cash(tree.parent[m])
        coeffs = {cash(m): 1, buy(m): conv(ask_m), sell(m): conv(-bid_m)}
        coeffs[parent_cash] = coeffs.get(parent_cash, 0) - 1
        rows.append(lp.Constraint(coeffs, "<=", 0))
    for l in tree.leaves_under(start_node):
        path = []
        m = l
        while True:
            path.append(m)
            if m == start_node:
                break
            m = tree.parent[m]
        x1 = conv(claim.bond_leg[l])
        x2 = conv(claim.asset_leg[l])
        if terminal == "equality":
            rows.append(lp.Constraint({cash(l): 1}, "=", x1))
            rows.append(lp.Constraint({buy(m): 1 for m in path} | {sell(m): -1 for m in path}, "=", x2))
        else:
            bid_l, ask_l = bid_ask(tree.price[l], tc)
            for rate in (bid_l, ask_l):
                r = conv(rate)
                coeffs = {cash(l): 1}
                for m in path:
                    coeffs[buy(m)] = r
                    coeffs[sell(m)] = -r
                rows.append(lp.Constraint(coeffs, ">=", x1 + r * x2))
    objective = [0] * nv
    objective[0] = 1
    sol = lp.solve(lp.LpProblem(nv, objective, "min", rows, bounds), mode=numeric_mode)
    if sol.status == lp.UNBOUNDED:
        raise NoCps(
            f"superreplication from node {start_node} is unbounded below (lam={tc.lam}): "
            "no consistent price system on the scope"
        )
    if sol.status != lp.OPTIMAL:
        raise NumericalFailure(f"superreplication program ended {sol.status}")

    zero = Rat(0) if exact else 0.0
    bond = [zero] * tree.n_nodes
    shares = [zero] * tree.n_nodes
    buys = [zero] * tree.n_nodes
    sells = [zero] * tree.n_nodes
    for m in nodes:
        bond[m] = sol.primal[cash(m)]
        buys[m] = sol.primal[buy(m)]
        sells[m] = sol.primal[sell(m)]
        prev = zero if m == start_node else shares[tree.parent[m]]
        shares[m] = prev + buys[m] - sells[m]
    strat = Strategy(sol.primal[0], bond, shares, buys, sells, start_node)

    worst = zero
    for m in nodes:
        v = liquidation_value((bond[m], shares[m]), tree.price[m], tc)
        scale = 1 if mode == "numeraire_based" else 1 + tree.price[m]
        short = -v / scale
        if short > worst:
            worst = short
    return SuperRepResult(sol.primal[0], strat, mode, start_node, worst,
                          terminal, numeric_mode, sol.iterations)


def duality_gap(tree: EventTree, claim: Claim, tc: TransactionCost, node: int = 0):
    """Primal superreplication price minus the dual shadow-expectation value.

    Zero in exact mode whenever an equivalent system exists on the subtree
    (the dual value is defined through such systems); tiny in float mode.
    """
    primal = superrep_price(tree, claim, tc, node).price
    dual = dual_claim_value(tree, claim, tc, node)
    return primal - dual
