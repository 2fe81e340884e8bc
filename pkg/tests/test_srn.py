import math

import numpy as np
import pytest

import oracles
from chainperf import srn
from chainperf.errors import (ImmediateCycle, Reducible, StateSpaceOverflow)


def _two_state(lam=2.0, mu=5.0):
    model = srn.SrnModel("flaky")
    model.add_place("up", 1)
    model.add_place("dn", 0)
    model.add_timed("fail", lam, inputs=["up"], outputs=["dn"])
    model.add_timed("fix", mu, inputs=["dn"], outputs=["up"])
    return model


def test_two_state_availability():
    lam, mu = 2.0, 5.0
    state = srn.solve(_two_state(lam, mu))
    pmf = state.token_pmf("up")
    assert pmf[1] == pytest.approx(mu / (lam + mu), abs=1e-14)
    assert pmf[0] == pytest.approx(lam / (lam + mu), abs=1e-14)
    assert math.fsum(state.probabilities) == pytest.approx(1.0, abs=1e-14)


def test_expected_reward_matches_pmf():
    model = _two_state(1.0, 3.0)
    state = srn.solve(model)
    idx = state.place_names.index("up")
    reward = srn.expected_reward(state, lambda m: float(m[idx]))
    assert reward == pytest.approx(state.token_pmf("up")[1], abs=1e-15)


def test_marking_dependent_pair_is_binomial():
    # n independent units folded into one pair of scaled transitions.
    n, lam, mu = 4, 0.3, 1.7
    model = srn.SrnModel("pool")
    model.add_place("up", n)
    model.add_place("dn", 0)
    model.add_timed("fail", lam, inputs=["up"], outputs=["dn"], marking_dependent=True)
    model.add_timed("fix", mu, inputs=["dn"], outputs=["up"], marking_dependent=True)
    state = srn.solve(model)
    expected = oracles.binomial_pmf(n, mu / (lam + mu))
    assert state.token_pmf("up") == pytest.approx(expected, abs=1e-12)


def test_vanishing_chain_collapses_to_one_edge():
    model = srn.SrnModel("chain")
    for name, tokens in (("a", 1), ("b", 0), ("c", 0), ("d", 0)):
        model.add_place(name, tokens)
    model.add_timed("go", 4.0, inputs=["a"], outputs=["b"])
    model.add_immediate("hop1", inputs=["b"], outputs=["c"])
    model.add_immediate("hop2", inputs=["c"], outputs=["d"])
    ctmc = srn.reachability(model)
    assert set(ctmc.markings) == {(1, 0, 0, 0), (0, 0, 0, 1)}
    src = ctmc.markings.index((1, 0, 0, 0))
    dst = ctmc.markings.index((0, 0, 0, 1))
    assert ctmc.rates == {(src, dst): pytest.approx(4.0)}


def test_immediate_weights_split_the_rate():
    model = srn.SrnModel("split")
    for name, tokens in (("a", 1), ("b", 0), ("c", 0), ("d", 0)):
        model.add_place(name, tokens)
    model.add_timed("go", 8.0, inputs=["a"], outputs=["b"])
    model.add_immediate("low", inputs=["b"], outputs=["c"], weight=1.0)
    model.add_immediate("high", inputs=["b"], outputs=["d"], weight=3.0)
    ctmc = srn.reachability(model)
    by_marking = {ctmc.markings[j]: rate for (_, j), rate in ctmc.rates.items()}
    assert by_marking[(0, 0, 1, 0)] == pytest.approx(2.0)
    assert by_marking[(0, 0, 0, 1)] == pytest.approx(6.0)


def test_priority_silences_lower_weighted_transition():
    model = srn.SrnModel("prio")
    for name, tokens in (("a", 1), ("b", 0), ("c", 0), ("d", 0)):
        model.add_place(name, tokens)
    model.add_timed("go", 8.0, inputs=["a"], outputs=["b"])
    model.add_immediate("wins", inputs=["b"], outputs=["c"], priority=2, weight=1.0)
    model.add_immediate("loses", inputs=["b"], outputs=["d"], priority=1, weight=100.0)
    ctmc = srn.reachability(model)
    # The low-priority branch never fires, so its target never appears.
    assert set(ctmc.markings) == {(1, 0, 0, 0), (0, 0, 1, 0)}


def test_initial_vanishing_marking_splits_the_start():
    model = srn.SrnModel("burst")
    model.add_place("b", 1)
    model.add_place("c", 0)
    model.add_place("d", 0)
    model.add_immediate("low", inputs=["b"], outputs=["c"], weight=1.0)
    model.add_immediate("high", inputs=["b"], outputs=["d"], weight=3.0)
    ctmc = srn.reachability(model)
    start = {ctmc.markings[i]: p for i, p in enumerate(ctmc.initial)}
    assert start[(0, 1, 0)] == pytest.approx(0.25)
    assert start[(0, 0, 1)] == pytest.approx(0.75)


def test_immediate_cycle_is_reported():
    model = srn.SrnModel("loop")
    model.add_place("b", 1)
    model.add_place("c", 0)
    model.add_immediate("fwd", inputs=["b"], outputs=["c"])
    model.add_immediate("back", inputs=["c"], outputs=["b"])
    with pytest.raises(ImmediateCycle):
        srn.reachability(model)


def test_two_absorbing_states_are_rejected():
    model = srn.SrnModel("fork")
    model.add_place("a", 1)
    model.add_place("b", 0)
    model.add_place("c", 0)
    model.add_timed("left", 1.0, inputs=["a"], outputs=["b"])
    model.add_timed("right", 2.0, inputs=["a"], outputs=["c"])
    with pytest.raises(Reducible):
        srn.solve(model)


def test_transient_state_gets_probability_zero():
    model = srn.SrnModel("drain")
    model.add_place("a", 1)
    model.add_place("b", 0)
    model.add_place("c", 0)
    model.add_timed("enter", 1.0, inputs=["a"], outputs=["b"])
    model.add_timed("fwd", 2.0, inputs=["b"], outputs=["c"])
    model.add_timed("back", 3.0, inputs=["c"], outputs=["b"])
    state = srn.solve(model)
    by_marking = dict(zip(state.markings, state.probabilities))
    assert by_marking[(1, 0, 0)] == 0.0
    assert by_marking[(0, 1, 0)] == pytest.approx(0.6, abs=1e-14)
    assert by_marking[(0, 0, 1)] == pytest.approx(0.4, abs=1e-14)


def test_tangible_self_loop_is_dropped():
    model = srn.SrnModel("spin")
    model.add_place("a", 1)
    model.add_place("b", 0)
    model.add_timed("out", 1.0, inputs=["a"], outputs=["b"])
    model.add_immediate("bounce", inputs=["b"], outputs=["a"])
    ctmc = srn.reachability(model)
    assert ctmc.markings == ((1, 0),)
    assert ctmc.rates == {}
    state = srn.steady_state(ctmc)
    assert state.probabilities[0] == 1.0


def test_arc_multiplicity_moves_token_pairs():
    model = srn.SrnModel("pairs")
    model.add_place("a", 4)
    model.add_place("b", 0)
    model.add_timed("pair", 1.0, inputs=[("a", 2)], outputs=[("b", 2)])
    ctmc = srn.reachability(model)
    assert set(ctmc.markings) == {(4, 0), (2, 2), (0, 4)}


def test_inhibitor_threshold_two():
    model = srn.SrnModel("gate")
    model.add_place("p", 2)
    model.add_place("a", 1)
    model.add_place("b", 0)
    model.add_timed("leak", 1.0, inputs=["p"], outputs=[])
    model.add_timed("move", 5.0, inputs=["a"], outputs=["b"], inhibitors=[("p", 2)])
    ctmc = srn.reachability(model)
    reached = set(ctmc.markings)
    # `move` stays disabled while p holds two tokens.
    assert (2, 0, 1) not in reached
    assert (1, 0, 1) in reached and (0, 0, 1) in reached


def test_overflow_cap_is_enforced():
    model = srn.SrnModel("wide")
    model.add_place("up", 50)
    model.add_place("dn", 0)
    model.add_timed("fail", 1.0, inputs=["up"], outputs=["dn"], marking_dependent=True)
    model.add_timed("fix", 2.0, inputs=["dn"], outputs=["up"], marking_dependent=True)
    with pytest.raises(StateSpaceOverflow):
        srn.solve(model, max_markings=10)


def test_builder_validation():
    model = srn.SrnModel()
    model.add_place("a", 1)
    with pytest.raises(ValueError):
        model.add_place("a", 0)
    with pytest.raises(ValueError):
        model.add_place("neg", -1)
    with pytest.raises(ValueError):
        model.add_timed("t", 0.0, inputs=["a"])
    with pytest.raises(ValueError):
        model.add_timed("t", 1.0, inputs=["ghost"])
    with pytest.raises(ValueError):
        model.add_timed("t", 1.0, inputs=[("a", 0)])
    model.add_place("b", 0)
    with pytest.raises(ValueError):
        model.add_timed("t", 1.0, inputs=["a", "b"], marking_dependent=True)
    with pytest.raises(ValueError):
        model.add_timed("t", 1.0, inputs=[("a", 2)], marking_dependent=True)
    with pytest.raises(ValueError):
        model.add_immediate("i", inputs=["a"], priority=0)
    with pytest.raises(ValueError):
        model.add_immediate("i", inputs=["a"], weight=0.0)


def _machine_shop():
    model = srn.SrnModel("shop")
    model.add_place("idle", 2)
    model.add_place("busy", 0)
    model.add_place("broken", 0)
    model.add_place("in_repair", 0)
    model.add_place("repair_token", 1)
    model.add_timed("start", 3.0, inputs=["idle"], outputs=["busy"],
                    marking_dependent=True, inhibitors=[("broken", 2)])
    model.add_timed("finish", 2.0, inputs=["busy"], outputs=["idle"],
                    marking_dependent=True)
    model.add_timed("breakdown", 0.7, inputs=["busy"], outputs=["broken"],
                    marking_dependent=True)
    model.add_immediate("grab", inputs=["broken", "repair_token"],
                        outputs=["in_repair"])
    model.add_timed("mend", 1.5, inputs=["in_repair"],
                    outputs=["idle", "repair_token"])
    return model


def test_rich_net_matches_brute_force_exploration():
    model = _machine_shop()
    ctmc = srn.reachability(model)
    markings, rates = oracles.brute_reachability(model)
    assert set(ctmc.markings) == markings
    lib_rates = {
        (ctmc.markings[i], ctmc.markings[j]): rate
        for (i, j), rate in ctmc.rates.items()
    }
    assert set(lib_rates) == set(rates)
    for key, rate in rates.items():
        assert lib_rates[key] == pytest.approx(rate, rel=1e-14)


def test_rich_net_matches_dense_steady_state():
    model = _machine_shop()
    state = srn.solve(model)
    markings, rates = oracles.brute_reachability(model)
    reference = oracles.steady_state_dense(markings, rates)
    for marking, p in zip(state.markings, state.probabilities):
        assert float(p) == pytest.approx(reference[marking], abs=1e-12)


def test_independent_components_have_product_form_joint():
    model = srn.SrnModel("pair")
    for tag, lam, mu in (("x", 1.0, 4.0), ("y", 0.5, 2.0)):
        model.add_place(f"{tag}.up", 1)
        model.add_place(f"{tag}.dn", 0)
        model.add_timed(f"{tag}.fail", lam, inputs=[f"{tag}.up"], outputs=[f"{tag}.dn"])
        model.add_timed(f"{tag}.fix", mu, inputs=[f"{tag}.dn"], outputs=[f"{tag}.up"])
    state = srn.solve(model)
    joint = state.joint_token_pmf("x.up", "y.up")
    outer = np.outer(state.token_pmf("x.up"), state.token_pmf("y.up"))
    assert joint == pytest.approx(outer, abs=1e-12)


def test_exploration_is_deterministic():
    first = srn.reachability(_machine_shop())
    second = srn.reachability(_machine_shop())
    assert first.markings == second.markings
    assert first.edge_list_text() == second.edge_list_text()
    assert first.marking_table_text() == second.marking_table_text()


def test_text_dumps_are_parseable():
    ctmc = srn.reachability(_machine_shop())
    edges = ctmc.edge_list_text().strip().splitlines()
    assert len(edges) == len(ctmc.rates)
    for line in edges:
        i, j, rate = line.split()
        assert ctmc.rates[(int(i), int(j))] == pytest.approx(float(rate), rel=1e-11)
    table = ctmc.marking_table_text().strip().splitlines()
    assert len(table) == ctmc.n
    assert table[0].startswith("0: ")
    empty = srn.SrnModel("void")
    empty.add_place("z", 0)
    assert srn.reachability(empty).marking_table_text() == "0: -\n"
