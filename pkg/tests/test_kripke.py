import itertools

import pytest
from hypothesis import given, settings, strategies as st

from bqlcd.kripke import (
    Evaluator, IntersectionConfigError, KripkeModel, ModelError, SearchBounds,
    add_chain, check_intersection_config, check_persistence, countermodel_search,
    entails_in_model, eval_term, make_model, model_from_json, model_to_json,
    satisfies, validate_model,
)
from bqlcd.syntax import (
    And, Atom, Const, Fn, Imp, Or, Param, TOP, BOTTOM, Var, box, free_vars,
    parse_inferring, sig,
)


def parse(text):
    return parse_inferring(text)[0]


# --- independent oracle: a naive evaluator written straight off the clauses --

def oracle_term(m, t, asg):
    if isinstance(t, Var):
        return asg[t.name]
    if isinstance(t, Const):
        return m.consts[t.name]
    if isinstance(t, Param):
        return m.consts[f"#{t.index}"]
    idx = 0
    for a in t.args:
        idx = idx * m.domain_size + oracle_term(m, a, asg)
    return m.funs[t.name][idx]


def oracle_sat(m, w, phi, asg=None):
    asg = asg or {}
    kind = type(phi).__name__
    if kind == "Top":
        return True
    if kind == "Bottom":
        return False
    if kind == "Atom":
        vals = tuple(oracle_term(m, t, asg) for t in phi.args)
        return vals in m.rels.get(phi.rel, {}).get(w, frozenset())
    if kind == "And":
        return oracle_sat(m, w, phi.left, asg) and oracle_sat(m, w, phi.right, asg)
    if kind == "Or":
        return oracle_sat(m, w, phi.left, asg) or oracle_sat(m, w, phi.right, asg)
    if kind == "Imp":
        for u in m.worlds:
            if (w, u) in m.edges:
                if oracle_sat(m, u, phi.left, asg) and not oracle_sat(m, u, phi.right, asg):
                    return False
        return True
    hits = []
    for b in range(m.domain_size):
        sub = dict(asg)
        sub[phi.var] = b
        hits.append(oracle_sat(m, w, phi.body, sub))
    return any(hits) if kind == "Exists" else all(hits)


# --- fixtures ----------------------------------------------------------------

def m1():
    # reflexive w sees irreflexive u; p turns true only at u, q nowhere
    return make_model(
        ["w", "u"], [("w", "w"), ("w", "u")], 1,
        rels={"p": {"u": {()}}, "q": {}},
        rel_arity={"p": 0, "q": 0},
    )


def test_m1_refutes_pseudo_modus_ponens():
    phi = parse("(p & (p -> q)) -> q")
    m = m1()
    assert oracle_sat(m, "w", phi) is False
    assert satisfies(m, "w", phi) is False
    assert satisfies(m, "u", parse("p & (p -> q)")) is True


def test_top_bottom_and_dead_ends():
    m = m1()
    for w in m.worlds:
        assert satisfies(m, w, TOP) is True
        assert satisfies(m, w, BOTTOM) is False
    # u is a dead end, every conditional holds there vacuously
    assert satisfies(m, "u", parse("p -> q")) is True
    assert satisfies(m, "u", parse("q -> false")) is True


def test_eval_term():
    m = make_model(["w"], [("w", "w")], 2,
                   consts={"c": 0, "#1": 1},
                   funs={"f": (0, 1)}, fun_arity={"f": 1},
                   rels={"P": {}}, rel_arity={"P": 1})
    assert eval_term(m, Const("c")) == 0
    assert eval_term(m, Fn("f", (Const("c"),))) == 0
    assert eval_term(m, Param(1)) == 1
    assert eval_term(m, Var("x"), {"x": 1}) == 1
    with pytest.raises(ModelError):
        eval_term(m, Const("missing"))


def test_entails_in_model():
    m = m1()
    assert entails_in_model(m, [parse("p"), parse("p -> q")], parse("q")) is True
    assert entails_in_model(m, [], TOP) is True
    assert entails_in_model(m, [], parse("(p & (p -> q)) -> q")) is False


def test_check_persistence_well_formed():
    m = m1()
    for text in ["p", "p -> q", "p | q", "p & (p -> q)"]:
        assert check_persistence(m, parse(text)) is True


def test_check_persistence_detects_broken_model():
    # validation bypassed: p true at w but false above it
    broken = KripkeModel(("w", "u"), frozenset([("w", "u")]), 1,
                         rels={"p": {"w": frozenset([()]), "u": frozenset()}},
                         rel_arity={"p": 0})
    assert check_persistence(broken, parse("p")) is False
    with pytest.raises(ModelError):
        validate_model(broken)


def test_validation_rejects_non_transitive():
    with pytest.raises(ModelError):
        make_model(["a", "b", "c"], [("a", "b"), ("b", "c")], 1)


def test_model_json_roundtrip_and_closure():
    m = m1()
    again = model_from_json(model_to_json(m))
    assert again == m
    # loader closes edges transitively
    data = {"worlds": ["a", "b", "c"], "edges": [["a", "b"], ["b", "c"]],
            "domain": 1, "rels": {}}
    closed = model_from_json(data)
    assert ("a", "c") in closed.edges
    # and rejects interpretations that break persistence after closure
    bad = {"worlds": ["a", "b", "c"], "edges": [["a", "b"], ["b", "c"]],
           "domain": 1, "rels": {"p": {"a": [[]], "b": [[]], "c": []}},
           "rel_arity": {"p": 0}}
    with pytest.raises(ModelError):
        model_from_json(bad)


# --- chains ------------------------------------------------------------------

def test_add_chain_box_refutation():
    # w does not satisfy p; two worlds below refute the double guard
    m = make_model(["w"], [], 1, rels={"p": {}}, rel_arity={"p": 0})
    chained = add_chain(m, "w", 2)
    validate_model(chained)
    p = parse("p")
    assert satisfies(chained, "u2", box(2, p)) is False
    assert oracle_sat(chained, "u2", box(2, p)) is False


def test_add_chain_shape_and_preservation():
    m = m1()
    chained = add_chain(m, "w", 1)
    assert len(chained.worlds) == 3
    new = chained.worlds[-1]
    assert (new, "w") in chained.edges and (new, "u") in chained.edges
    assert (new, new) not in chained.edges
    # satisfaction at original worlds is untouched
    for text in ["p", "p -> q", "(p & (p -> q)) -> q", "p | q"]:
        for w in m.worlds:
            assert satisfies(chained, w, parse(text)) == satisfies(m, w, parse(text))
    with pytest.raises(ValueError):
        add_chain(m, "w", 0)


def test_add_chain_bottom_guard_tower():
    # dead-end w0: guards of false hold there vacuously, and each chain world
    # strips one level
    m = make_model(["w0"], [], 1)
    d = 3
    chained = add_chain(m, "w0", d)
    worlds = ["w0"] + [f"u{i}" for i in range(1, d + 1)]
    for n, w in enumerate(worlds):
        assert satisfies(chained, w, box(n + 1, BOTTOM)) is True
        if n + 1 < len(worlds):
            assert satisfies(chained, worlds[n + 1], box(n + 1, BOTTOM)) is False


# --- intersection configurations ---------------------------------------------

def intersection_model():
    return make_model(
        ["w", "u"], [("w", "u"), ("u", "u")], 1,
        rels={"p": {"w": {()}, "u": {()}}, "q": {}},
        rel_arity={"p": 0, "q": 0},
    )


def test_intersection_minimal_config():
    m = intersection_model()
    for text in ["p", "q", "p -> q", "p & q", "true", "false", "(p -> q) -> q"]:
        assert check_intersection_config(m, "w", ["u"], parse(text)) is True


def test_intersection_rejects_banned_connectives():
    m = intersection_model()
    with pytest.raises(IntersectionConfigError):
        check_intersection_config(m, "w", ["u"], parse("p | q"))


def test_intersection_rejects_bad_config():
    # u irreflexive: condition (ii) fails and must raise, not return False
    m = make_model(["w", "u"], [("w", "u")], 1,
                   rels={"p": {"w": {()}, "u": {()}}}, rel_arity={"p": 0})
    with pytest.raises(IntersectionConfigError):
        check_intersection_config(m, "w", ["u"], parse("p"))


def test_intersection_two_members():
    # w sees two reflexive worlds; p's extension at w is the intersection
    m = make_model(
        ["w", "u1", "u2"],
        [("w", "u1"), ("w", "u2"), ("u1", "u1"), ("u2", "u2")], 1,
        rels={"p": {"u1": {()}, "u2": set()},
              "q": {"u1": {()}, "u2": {()}, "w": {()}}},
        rel_arity={"p": 0, "q": 0},
    )
    for text in ["p", "q", "p -> q", "q -> p", "p & q"]:
        assert check_intersection_config(m, "w", ["u1", "u2"], parse(text)) is True


# --- countermodel search -------------------------------------------------------

def test_search_refutes_pseudo_modus_ponens():
    res = countermodel_search([], parse("(p & (p -> q)) -> q"),
                              SearchBounds(2, 1), mode="bqlcd_r")
    assert res.found
    assert satisfies(res.model, res.witness, parse("(p & (p -> q)) -> q")) is False
    assert (res.witness, res.witness) in res.model.edges


def test_search_finds_nothing_for_weakening():
    res = countermodel_search([], parse("p -> (q -> p)"), SearchBounds(3, 2))
    assert not res.found and res.exhausted


def test_search_finds_nothing_for_modus_ponens_sequent():
    res = countermodel_search([parse("p & (p -> q)")], parse("q"), SearchBounds(3, 2))
    assert not res.found


def test_search_transitivity_axiom_valid():
    phi = parse("(p -> q) & (q -> r) -> (p -> r)")
    res = countermodel_search([], phi, SearchBounds(3, 2))
    assert not res.found


def test_search_bqlcd_mode_refutes_identity_conditional():
    # without the reflexive-root restriction even p -> p gets refuted at an
    # irreflexive world?  no: p -> p holds everywhere.  but modus ponens as a
    # sequent fails at irreflexive worlds
    res = countermodel_search([parse("p"), parse("p -> q")], parse("q"),
                              SearchBounds(2, 1), mode="bqlcd")
    assert res.found
    w = res.witness
    assert (w, w) not in res.model.edges


def test_search_identity_modes():
    phi = parse("c = d | (c = d -> false)")
    strict = countermodel_search([], phi, SearchBounds(3, 2), mode="strict")
    assert not strict.found
    cong = countermodel_search([], phi, SearchBounds(2, 2), mode="congruence")
    assert cong.found
    assert satisfies(cong.model, cong.witness, phi) is False
    validate_model(cong.model)


def test_search_skips_huge_function_tables_with_note():
    # the valid conclusion forces exhaustion; the ternary function has too
    # many tables over a three-element domain, which is skipped and noted
    phi = parse("P(g(c, c, c)) -> P(g(c, c, c))")
    res = countermodel_search([], phi, SearchBounds(1, 3))
    assert not res.found
    assert any("g" in note for note in res.notes)


def test_search_deterministic():
    phi = parse("(p & (p -> q)) -> q")
    a = countermodel_search([], phi, SearchBounds(2, 2))
    b = countermodel_search([], phi, SearchBounds(2, 2))
    assert a.model == b.model and a.witness == b.witness


# --- random persistence property ----------------------------------------------

@st.composite
def random_models(draw, max_worlds=4, max_domain=3):
    k = draw(st.integers(1, max_worlds))
    worlds = [f"w{i}" for i in range(k)]
    pairs = [(a, b) for a in worlds for b in worlds]
    edges = set()
    for p in pairs:
        if draw(st.booleans()):
            edges.add(p)
    # transitive closure
    changed = True
    while changed:
        changed = False
        for (a, b) in list(edges):
            for (c, d) in list(edges):
                if b == c and (a, d) not in edges:
                    edges.add((a, d))
                    changed = True
    m = draw(st.integers(1, max_domain))
    rels = {}
    for name, ar in (("p", 0), ("P", 1)):
        per = {}
        for w in worlds:
            tuples = set()
            for t in itertools.product(range(m), repeat=ar):
                if draw(st.booleans()):
                    tuples.add(t)
            per[w] = tuples
        # persist upward
        changed = True
        while changed:
            changed = False
            for (a, b) in edges:
                if not per[a] <= per[b]:
                    per[b] = per[b] | per[a]
                    changed = True
        rels[name] = per
    consts = {"c": draw(st.integers(0, m - 1))}
    return make_model(worlds, edges, m, consts=consts, rels=rels,
                      rel_arity={"p": 0, "P": 1})


def sentences(max_depth=5):
    atoms = st.sampled_from([Atom("p"), Atom("P", (Const("c"),)), TOP, BOTTOM])
    open_atoms = st.sampled_from([Atom("P", (Var("x"),)), Atom("p")])

    def extend(children):
        from bqlcd.syntax import Forall, Exists
        return st.one_of(
            st.builds(And, children, children),
            st.builds(Or, children, children),
            st.builds(Imp, children, children),
            st.builds(lambda b: Forall("x", b), st.one_of(children, open_atoms)),
            st.builds(lambda b: Exists("x", b), st.one_of(children, open_atoms)),
        )

    return st.recursive(atoms, extend, max_leaves=2 ** max_depth)


@settings(max_examples=120, deadline=None)
@given(random_models(), sentences())
def test_persistence_theorem(model, phi):
    if free_vars(phi):
        return
    ev = Evaluator(model)
    for (w, u) in model.edges:
        assert not ev.sat(w, phi) or ev.sat(u, phi)


@settings(max_examples=60, deadline=None)
@given(random_models(), sentences(), sentences())
def test_modus_ponens_at_reflexive_worlds(model, phi, psi):
    if free_vars(phi) or free_vars(psi):
        return
    ev = Evaluator(model)
    for w in model.reflexive_worlds():
        if ev.sat(w, phi) and ev.sat(w, Imp(phi, psi)):
            assert ev.sat(w, psi)


@settings(max_examples=60, deadline=None)
@given(random_models(), sentences())
def test_evaluator_matches_oracle(model, phi):
    if free_vars(phi):
        return
    ev = Evaluator(model)
    for w in model.worlds:
        assert ev.sat(w, phi) == oracle_sat(model, w, phi)
