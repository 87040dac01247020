"""Market primitives: trees, quotes, cones, liquidation, self-financing."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcbubbles import (
    Claim,
    EventTree,
    InvalidTree,
    Rat,
    ShapeMismatch,
    Strategy,
    TransactionCost,
    bid_ask,
    build_tree,
    check_self_financing,
    liquidation_value,
    polar_contains,
    resolve_mode,
)
from treegen import binomial_tree, chain_tree, float_twin, single_node_tree


def test_single_node_tree_has_zero_steps():
    tree = single_node_tree()
    assert tree.n_nodes == 1
    assert tree.depth == 0
    assert tree.leaves == (0,)
    assert tree.path_prob(0) == 1


def test_chain_tree_shape():
    tree = chain_tree()
    assert tree.n_nodes == 2
    assert tree.parent[1] == 0
    assert tree.price == (Rat(1), Rat(1, 2))
    assert tree.is_exact


def test_binomial_tree_shape():
    tree = binomial_tree()
    assert tree.n_nodes == 3
    assert tree.children[0] == (1, 2)
    assert tree.path_prob(2) == Rat(1, 2)
    assert tree.leaves_under(0) == [1, 2]


def test_build_tree_accepts_string_and_int_literals():
    tree = build_tree([["1"], ["1/2", 2]], [(0, 1, "1/3"), (0, 2, "2/3")])
    assert tree.is_exact
    assert tree.price[1] == Rat(1, 2)
    assert tree.prob[2] == Rat(2, 3)


def test_build_tree_single_float_demotes_to_float_mode():
    tree = build_tree([[1], [0.5, 2]], [(0, 1, "1/2"), (0, 2, "1/2")])
    assert not tree.is_exact
    assert isinstance(tree.price[0], float)
    assert isinstance(tree.prob[1], float)


@pytest.mark.parametrize(
    "levels, edges",
    [
        ([], []),
        ([[1], []], []),
        ([[1, 2]], []),
        ([[1], [2]], [(0, 1, "1"), (0, 1, "1")]),
        ([[0], [1]], [(0, 1, "1")]),
        ([[1], [2]], [(0, 1, "1/2")]),
        ([[1], [2], [3]], [(0, 2, "1")]),
        ([[1], [2, 3]], [(0, 1, "1")]),
        ([[1], [2]], [(0, 1, 0)]),
        ([[1], [2]], [(0, 1)]),
    ],
)
def test_build_tree_rejects_malformed_input(levels, edges):
    with pytest.raises(InvalidTree):
        build_tree(levels, edges)


def test_float_probability_sum_gets_tolerance():
    tree = build_tree([[1.0], [1.0, 2.0, 3.0]],
                      [(0, 1, 0.3), (0, 2, 0.3), (0, 3, 0.4)])
    assert tree.n_nodes == 4


def test_subtree_and_check_node():
    tree = build_tree(
        [["1"], ["1", "1"], ["1", "1", "1"]],
        [(0, 1, "1/2"), (0, 2, "1/2"), (1, 3, "1/2"), (1, 4, "1/2"), (2, 5, "1")],
    )
    assert tree.subtree(1) == [1, 3, 4]
    assert tree.leaves_under(2) == [5]
    with pytest.raises(ShapeMismatch):
        tree.check_node(99)
    with pytest.raises(ShapeMismatch):
        tree.check_node(True)


def test_transaction_cost_validation():
    assert TransactionCost("1/10").lam == Rat(1, 10)
    assert TransactionCost(Rat(1, 2)).is_exact
    assert not TransactionCost(0.1).is_exact
    for bad in (0, 1, Rat(3, 2), -0.2, "0"):
        with pytest.raises(InvalidTree):
            TransactionCost(bad)


def test_bid_ask_values():
    bid, ask = bid_ask(100, TransactionCost("1/100"))
    assert (bid, ask) == (99, 101)
    bid, ask = bid_ask(Rat(1, 2), TransactionCost(Rat(1, 2)))
    assert (bid, ask) == (Rat(1, 4), Rat(3, 4))


def test_bid_ask_frictionless_limit():
    s = Rat(7)
    tc = TransactionCost(Rat(1, 10**12))
    bid, ask = bid_ask(s, tc)
    assert abs(bid - s) <= s * tc.lam
    assert abs(ask - s) <= s * tc.lam


def test_polar_contains_basic():
    tc = TransactionCost("1/10")
    s = Rat(2)
    assert polar_contains(Rat(1), s, s, tc)
    assert not polar_contains(Rat(1), (1 + tc.lam) * s + 1, s, tc)
    assert not polar_contains(Rat(0), Rat(0), s, tc)
    # axis cases: infinite and zero price ratios sit outside the band
    assert not polar_contains(Rat(0), Rat(1), s, tc)
    assert not polar_contains(Rat(1), Rat(0), s, tc)


@given(c=st.fractions(min_value=Fraction(1, 100), max_value=Fraction(100)),
       w2=st.fractions(min_value=Fraction(9, 5), max_value=Fraction(11, 5)))
@settings(max_examples=40, deadline=None)
def test_polar_contains_positively_homogeneous(c, w2):
    tc = TransactionCost("1/10")
    s = Rat(2)
    w1, w2 = Rat(1), Rat(w2.numerator, w2.denominator)
    inside = polar_contains(w1, w2, s, tc)
    c = Rat(c.numerator, c.denominator)
    assert polar_contains(c * w1, c * w2, s, tc) == inside


def test_liquidation_value_examples():
    tc = TransactionCost("1/100")
    assert liquidation_value((10, 2), 100, tc) == 208
    assert liquidation_value((10, -2), 100, tc) == -192
    assert liquidation_value((Rat(5), Rat(0)), Rat(3), tc) == 5


@given(b=st.integers(-5, 5), h=st.integers(0, 5), k=st.integers(0, 4))
@settings(max_examples=40, deadline=None)
def test_liquidation_is_worst_case_over_band_prices(b, h, k):
    """For a long position, selling at any in-band price beats the bid only
    weakly; liquidation equals the value at the bid exactly."""
    tc = TransactionCost(Rat(1, 5))
    s = Rat(3)
    bid, ask = bid_ask(s, tc)
    v = bid + (ask - bid) * Rat(k, 4)
    liq = liquidation_value((Rat(b), Rat(h)), s, tc)
    assert liq <= Rat(b) + Rat(h) * v
    assert liq == Rat(b) + Rat(h) * bid


def test_claim_leg_key_mismatch_rejected():
    with pytest.raises(ShapeMismatch):
        Claim({1: Rat(0)}, {2: Rat(1)})


def test_claim_validate_for_missing_leaves():
    tree = binomial_tree()
    claim = Claim({1: Rat(0)}, {1: Rat(1)})
    with pytest.raises(ShapeMismatch):
        claim.validate_for(tree)


def test_claim_constructors_match_tree_mode():
    tree = binomial_tree()
    unit = Claim.unit_asset(tree)
    assert unit.asset_leg == {1: Rat(1), 2: Rat(1)}
    assert unit.is_exact_claim()
    cash = Claim.cash(float_twin(tree), 3.0)
    assert cash.bond_leg == {1: 3.0, 2: 3.0}
    assert not cash.is_exact_claim()


def test_resolve_mode():
    tree = binomial_tree()
    assert resolve_mode(tree, TransactionCost("1/100")) == "exact"
    assert resolve_mode(tree, TransactionCost(0.01)) == "float"
    assert resolve_mode(float_twin(tree), TransactionCost("1/100")) == "float"


def _hold_nothing(tree):
    z = [Rat(0)] * tree.n_nodes
    return Strategy(Rat(0), list(z), list(z), list(z), list(z))


def test_all_zero_strategy_is_self_financing():
    tree = binomial_tree()
    assert check_self_financing(tree, TransactionCost("1/100"), _hold_nothing(tree))


def test_buy_and_hold_from_ask_is_self_financing():
    tree = binomial_tree()
    tc = TransactionCost("1/100")
    ask = tree.price[0] * tc.ask_factor()
    strat = Strategy(
        initial_cash=ask,
        bond=[Rat(0)] * 3,
        shares=[Rat(1)] * 3,
        buys=[Rat(1), Rat(0), Rat(0)],
        sells=[Rat(0)] * 3,
    )
    assert check_self_financing(tree, tc, strat)


def test_sale_credited_at_ask_is_rejected():
    """A sale must credit the bid; crediting the ask manufactures cash."""
    tree = binomial_tree()
    tc = TransactionCost("1/100")
    ask = tree.price[0] * tc.ask_factor()
    strat = Strategy(
        initial_cash=Rat(0),
        bond=[ask, ask, ask],
        shares=[Rat(-1)] * 3,
        buys=[Rat(0)] * 3,
        sells=[Rat(1), Rat(0), Rat(0)],
    )
    assert not check_self_financing(tree, tc, strat)


def test_self_financing_allows_throwing_money_away():
    tree = binomial_tree()
    tc = TransactionCost("1/100")
    ask = tree.price[0] * tc.ask_factor()
    strat = Strategy(
        initial_cash=ask + 5,
        bond=[Rat(5), Rat(0), Rat(5)],
        shares=[Rat(1)] * 3,
        buys=[Rat(1), Rat(0), Rat(0)],
        sells=[Rat(0)] * 3,
    )
    assert check_self_financing(tree, tc, strat)


def test_self_financing_shape_mismatch():
    tree = binomial_tree()
    tc = TransactionCost("1/100")
    short = Strategy(Rat(0), [Rat(0)], [Rat(0)], [Rat(0)], [Rat(0)])
    with pytest.raises(ShapeMismatch):
        check_self_financing(tree, tc, short)
