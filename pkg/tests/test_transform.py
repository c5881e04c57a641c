import pytest

from bqlcd.proofkernel import (
    assume, check_proof, node, open_assumptions, proof_size, stratum,
    rename_eigenvariables,
)
from bqlcd.syntax import (
    And, Exists, Forall, Imp, Or, Param, TOP, big_conj, box, parameters_of,
    pretty,
)
from bqlcd.transform import (
    ReductionResult, TransformError, axiomatic_to_nd, boxn, derive_and_release,
    derive_conj_imp, derive_distribution, derive_forall_embedding,
    derive_infinite_distribution, nd_axiom_proof, nd_to_axiomatic, pad_box,
    reduce_proof, regularity_transform, relative_deduction, unbox,
    unrestricted_exists_elim, unrestricted_or_elim,
)
from proofcases import f, fo, mp_from_leaves, nested_stratum_example


def check_nb(t):
    report = check_proof(t, "nbqlcd")
    assert report.valid, [v.__dict__ for v in report.violations]
    return report


def check_r(t):
    report = check_proof(t, "nbqlcd_r")
    assert report.valid, [v.__dict__ for v in report.violations]
    return report


def no_imp_elim(t):
    assert stratum(t) == -1


# --- lemma templates -----------------------------------------------------------

def test_distribution():
    p, q, r = f("p"), f("q"), f("r")
    t = derive_distribution(p, q, r)
    check_nb(t)
    assert t.conclusion == f("(p & q) | (p & r)")
    assert open_assumptions(t) == {f("p & (q | r)")}
    no_imp_elim(t)


def test_distribution_degenerate():
    p = f("p")
    t = derive_distribution(p, p, p)
    check_nb(t)
    assert open_assumptions(t) == {f("p & (p | p)")}


def test_infinite_distribution():
    t = derive_infinite_distribution(f("p"), "x", fo("Q(x)"))
    check_nb(t)
    assert t.conclusion == f("exists x. p & Q(x)")
    assert open_assumptions(t) == {f("p & (exists x. Q(x))")}


def test_infinite_distribution_top():
    t = derive_infinite_distribution(TOP, "x", fo("Q(x)"))
    check_nb(t)


def test_infinite_distribution_fresh_parameter():
    phi = f("P(#0)")
    body = fo("Q(x)")
    t = derive_infinite_distribution(phi, "x", body)
    check_nb(t)
    # the witness parameter must avoid the parameters of the fixed conjunct
    from bqlcd.proofkernel import analyze
    an = analyze(t)
    witness = [an.leaf_formula[x] for x in t.discharges]
    assert witness and all(0 not in parameters_of(w) for w in witness)


def test_and_release():
    p, q, r = f("p"), f("q"), f("r")
    t = derive_and_release(p, q, r)
    check_nb(t)
    assert t.conclusion == f("p -> (q -> r)")
    assert open_assumptions(t) == {f("p & q -> r")}
    no_imp_elim(t)


def test_forall_embedding_base():
    t = derive_forall_embedding(0, "x", fo("P(x)"))
    assert t.rule == "assume"
    assert t.conclusion == f("forall x. P(x)")


def test_forall_embedding_step():
    t = derive_forall_embedding(1, "x", fo("P(x)"))
    check_nb(t)
    assert t.conclusion == box(1, f("forall x. P(x)"))
    assert open_assumptions(t) == {f("forall x. true -> P(x)")}


def test_forall_embedding_linear_growth():
    sizes = [proof_size(derive_forall_embedding(n, "x", fo("P(x)")))
             for n in range(1, 6)]
    steps = [b - a for a, b in zip(sizes, sizes[1:])]
    assert len(set(steps)) == 1     # constant increments


# --- conjunction plumbing ---------------------------------------------------------

def test_conj_imp_projection():
    s = big_conj([f("p"), f("q"), f("r")])
    t = derive_conj_imp(s, big_conj([f("r"), f("p")]))
    check_nb(t)
    assert open_assumptions(t) == set()


def test_conj_imp_regroup():
    s = And(big_conj([f("p"), f("q")]), f("r"))
    t = derive_conj_imp(s, big_conj([f("p"), f("q"), f("r")]))
    check_nb(t)


def test_conj_imp_rejects_foreign_piece():
    with pytest.raises(TransformError):
        derive_conj_imp(f("p"), f("q"))


# --- regularity --------------------------------------------------------------------

def test_regularity_identity_at_zero():
    t = mp_from_leaves()
    p2 = node("and_int", f("p & q"), [assume(f("p")), assume(f("q"))])
    assert regularity_transform(p2, 0) == p2


def test_regularity_one_level():
    p2 = node("and_int", f("p & q"), [assume(f("p")), assume(f("q"))])
    out = regularity_transform(p2, 1)
    check_nb(out)
    assert out.conclusion == box(1, f("p & q"))
    assert open_assumptions(out) == {box(1, f("p")), box(1, f("q"))}


def test_regularity_depth_three():
    p2 = node("or_int_l", f("p | q"), [assume(f("p"))])
    out = regularity_transform(p2, 3)
    check_nb(out)
    assert out.conclusion == box(3, f("p | q"))
    assert open_assumptions(out) == {box(3, f("p"))}


def test_regularity_closed_proof():
    t = node("top_int", TOP)
    out = regularity_transform(t, 2)
    check_nb(out)
    assert out.conclusion == box(2, TOP)
    assert open_assumptions(out) == set()


# --- relative deduction ---------------------------------------------------------------

def test_relative_deduction_mp_depth_zero():
    t = mp_from_leaves()
    out = relative_deduction(t, [f("p"), f("p -> q")], [], 0)
    check_nb(out)
    assert out.conclusion == f("true -> q")
    assert open_assumptions(out) <= {f("p"), f("p -> q")}


def test_relative_deduction_sigma_member():
    t = assume(f("p"))
    out = relative_deduction(t, [], [f("q"), f("p")], 1)
    check_nb(out)
    assert out.conclusion == box(1, Imp(big_conj([f("q"), f("p")]), f("p")))
    assert open_assumptions(out) == set()


def test_relative_deduction_top_base():
    t = node("top_int", TOP)
    out = relative_deduction(t, [f("p")], [f("q")], 2)
    check_nb(out)
    assert out.conclusion == box(2, Imp(f("q"), TOP))
    assert open_assumptions(out) == set()


def test_relative_deduction_requires_judgment():
    t = mp_from_leaves()
    with pytest.raises(TransformError):
        relative_deduction(t, [f("p")], [f("p -> q")], 0)   # conditional unsafe


def test_relative_deduction_or_elim_with_sigma():
    p, q, r = f("p"), f("q"), f("r")
    major = assume(Or(p, q), "m")
    dl, dr = assume(p, "dl"), assume(q, "dr")
    side = assume(r, "s1")
    left = node("and_int", And(r, Or(p, q)),
                [side, node("or_int_l", Or(p, q), [dl])])
    left = node("and_elim_r", Or(p, q), [left])
    right = node("or_int_r", Or(p, q), [dr])
    t = node("or_elim", Or(p, q), [major, left, right], {"dl", "dr"})
    check_r(t)
    out = relative_deduction(t, [], [Or(p, q), r], 0)
    check_nb(out)
    assert out.conclusion == Imp(big_conj([Or(p, q), r]), Or(p, q))


# --- reduction ----------------------------------------------------------------------

def test_reduce_identity_on_guard_free():
    p = f("p")
    t = node("imp_int", Imp(p, p), [assume(p, "x")], {"x"})
    got = reduce_proof(t)
    assert got == ReductionResult(0, t, -1)


def test_reduce_mp():
    t = mp_from_leaves()
    got = reduce_proof(t)
    assert got.n == 1 and got.source_stratum == 0
    check_nb(got.proof)
    assert got.proof.conclusion == f("true -> q")
    assert open_assumptions(got.proof) <= {f("p"), f("p -> q")}
    back = unbox(got.proof, 1)
    check_r(back)
    assert back.conclusion == f("q")


def test_reduce_nested_example():
    t = nested_stratum_example()
    got = reduce_proof(t)
    assert got.n == 2
    check_nb(got.proof)
    assert got.proof.conclusion == box(2, f("r"))
    assert open_assumptions(got.proof) <= open_assumptions(t)
    back = unbox(got.proof, 2)
    check_r(back)
    assert back.conclusion == f("r")


def test_unbox_requires_guard():
    with pytest.raises(TransformError):
        unbox(assume(f("p")), 1)


def test_pad_box():
    t = node("imp_int", Imp(f("p"), f("p")), [assume(f("p"), "x")], {"x"})
    out = pad_box(t, 0, 2)
    check_nb(out)
    assert out.conclusion == box(2, Imp(f("p"), f("p")))
    assert pad_box(t, 0, 0) == t
    with pytest.raises(TransformError):
        pad_box(t, 1, 0)


# --- unrestricted eliminations ----------------------------------------------------------

def test_unrestricted_or_elim_plain():
    p, q = f("p"), f("q")
    maj = assume(Or(p, q), "m")
    left = node("or_int_l", Or(p, q), [assume(p, "a")])
    right = node("or_int_r", Or(p, q), [assume(q, "b")])
    out = unrestricted_or_elim(maj, left, right)
    check_r(out)
    assert out.conclusion == Or(p, q)
    assert open_assumptions(out) == {Or(p, q)}


def test_unrestricted_or_elim_with_mp_branches():
    # each branch detaches the goal through an unsafe conditional, which a
    # direct case split could never discharge
    p, q, r = f("p"), f("q"), f("r")
    maj = assume(Or(p, q), "m")
    left = node("imp_elim", r, [assume(p, "a"), assume(Imp(p, r), "g1")])
    right = node("imp_elim", r, [assume(q, "b"), assume(Imp(q, r), "g2")])
    out = unrestricted_or_elim(maj, left, right)
    check_r(out)
    assert out.conclusion == r
    assert open_assumptions(out) == {Or(p, q), Imp(p, r), Imp(q, r)}


def test_unrestricted_exists_elim_plain():
    maj = assume(f("exists x. P(x)"), "m")
    body = node("exists_int", f("exists y. P(y)"), [assume(f("P(#0)"), "w")])
    out = unrestricted_exists_elim(maj, body)
    check_r(out)
    assert out.conclusion == f("exists y. P(y)")
    assert open_assumptions(out) == {f("exists x. P(x)")}


def test_unrestricted_exists_elim_with_mp_body():
    maj = assume(f("exists x. P(x)"), "m")
    body = node("imp_elim", f("q"),
                [assume(f("P(#0)"), "w"), assume(f("P(#0) -> q"), "g")])
    # the guard mentions the witness parameter, which is not allowed
    with pytest.raises(TransformError):
        unrestricted_exists_elim(maj, body)
    body2 = node("imp_elim", f("q"),
                 [assume(f("r"), "h"), assume(f("r -> q"), "g")])
    pair = node("and_int", f("P(#0) & q"), [assume(f("P(#0)"), "w"), body2])
    body3 = node("and_elim_r", f("q"), [pair])
    out = unrestricted_exists_elim(maj, body3)
    check_r(out)
    assert out.conclusion == f("q")
    assert open_assumptions(out) == {f("exists x. P(x)"), f("r"), f("r -> q")}


# --- axiomatic translations ---------------------------------------------------------------

AXIOM_INSTANCES = [
    ("identity", "p -> p"),
    ("imp_top", "q -> true"),
    ("ex_falso", "false -> r"),
    ("and_comp", "(r -> p) & (r -> q) -> (r -> p & q)"),
    ("and_elim_l", "p & q -> p"),
    ("and_elim_r", "p & q -> q"),
    ("or_int_l", "p -> p | q"),
    ("or_int_r", "q -> p | q"),
    ("or_comp", "(p -> r) & (q -> r) -> (p | q -> r)"),
    ("distribution", "p & (q | r) -> (p & q) | (p & r)"),
    ("forall_imp", "(forall x. p -> P(x)) -> (p -> forall x. P(x))"),
    ("forall_inst", "(forall x. P(x)) -> P(c)"),
    ("exists_int", "P(c) -> (exists x. P(x))"),
    ("exists_imp", "(forall x. P(x) -> p) -> ((exists x. P(x)) -> p)"),
    ("cd", "(forall x. p | P(x)) -> p | (forall x. P(x))"),
    ("inf_distribution", "p & (exists x. P(x)) -> (exists x. p & P(x))"),
    ("transitivity", "(p -> q) & (q -> r) -> (p -> r)"),
    ("suffixing", "(p -> q) -> ((q -> r) -> (p -> r))"),
    ("prefixing", "(p -> q) -> ((r -> p) -> (r -> q))"),
    ("weakening", "p -> (q -> p)"),
]


def test_axiom_templates_all_check_guard_free():
    for schema, text in AXIOM_INSTANCES:
        t = nd_axiom_proof(schema, f(text))
        report = check_proof(t, "nbqlcd")
        assert report.valid, (schema, [v.__dict__ for v in report.violations])
        assert t.conclusion == f(text)
        assert not open_assumptions(t)


def test_axiomatic_to_nd_single_axioms():
    for schema, text in AXIOM_INSTANCES:
        t = node(f"axiom:{schema}", f(text))
        out = axiomatic_to_nd(t)
        check_r(out)
        assert out.conclusion == f(text)


def test_axiomatic_to_nd_mp_chain():
    wk = node("axiom:weakening", f("p -> (q -> p)"))
    prem = assume(f("p"), "a")
    t = node("imp_elim", f("q -> p"), [prem, wk])
    out = axiomatic_to_nd(t)
    check_r(out)
    assert out.conclusion == f("q -> p")
    assert open_assumptions(out) == {f("p")}
    assert stratum(out) >= 0


def test_axiomatic_to_nd_or_elim():
    maj = assume(f("p | q"), "m")
    left = node("imp_elim", f("r"), [assume(f("p"), "a"),
                                     assume(f("p -> r"), "g1")])
    right = node("imp_elim", f("r"), [assume(f("q"), "b"),
                                      assume(f("q -> r"), "g2")])
    t = node("or_elim", f("r"), [maj, left, right], {"a", "b"})
    out = axiomatic_to_nd(t)
    check_r(out)
    assert out.conclusion == f("r")
    assert open_assumptions(out) == {f("p | q"), f("p -> r"), f("q -> r")}


def test_axiomatic_to_nd_exists_elim():
    maj = assume(f("exists x. P(x)"), "m")
    body = node("exists_int", f("exists y. P(y)"), [assume(f("P(#0)"), "w")])
    t = node("exists_elim", f("exists y. P(y)"), [maj, body], {"w"})
    out = axiomatic_to_nd(t)
    check_r(out)
    assert out.conclusion == f("exists y. P(y)")


def test_axiomatic_to_nd_affixing():
    t = node("affixing", f("(q -> r) -> (p -> s)"),
             [assume(f("p -> q"), "x"), assume(f("r -> s"), "y")])
    out = axiomatic_to_nd(t)
    check_r(out)
    assert out.conclusion == f("(q -> r) -> (p -> s)")


def test_nd_to_axiomatic_leaf():
    t = assume(f("p"))
    out = nd_to_axiomatic(t)
    assert out.conclusion == f("p -> p")
    assert check_proof(out, "tjk+").valid


def test_nd_to_axiomatic_and_int():
    t = node("and_int", f("p & q"), [assume(f("p")), assume(f("q"))])
    out = nd_to_axiomatic(t)
    assert check_proof(out, "tjk+").valid
    assert out.conclusion == Imp(big_conj([f("p"), f("q")]), f("p & q"))
    assert not open_assumptions(out)


def test_nd_to_axiomatic_imp_int():
    p, q = f("p"), f("q")
    body = node("and_int", And(p, q), [assume(p, "d"), assume(q, "s")])
    t = node("imp_int", Imp(p, And(p, q)), [body], {"d"})
    out = nd_to_axiomatic(t)
    assert check_proof(out, "tjk+").valid
    assert out.conclusion == Imp(q, Imp(p, And(p, q)))


def test_nd_to_axiomatic_or_elim():
    p, q = f("p"), f("q")
    maj = assume(Or(p, q), "m")
    left = node("or_int_r", Or(q, p), [assume(p, "a")])
    right = node("or_int_l", Or(q, p), [assume(q, "b")])
    t = node("or_elim", Or(q, p), [maj, left, right], {"a", "b"})
    out = nd_to_axiomatic(t)
    assert check_proof(out, "tjk+").valid
    assert out.conclusion == Imp(Or(p, q), Or(q, p))


def test_nd_to_axiomatic_quantifiers():
    ex = assume(f("exists x. P(x)"), "m")
    wit = assume(f("P(#0)"), "w")
    body = node("exists_int", f("exists y. P(y)"), [wit])
    t = node("exists_elim", f("exists y. P(y)"), [ex, body], {"w"})
    out = nd_to_axiomatic(t)
    assert check_proof(out, "tjk+").valid
    assert out.conclusion == Imp(f("exists x. P(x)"), f("exists y. P(y)"))

    inst = node("forall_elim", f("P(#1)"), [assume(f("forall y. P(y)"), "u")])
    gen = node("forall_int", f("forall x. P(x)"), [inst])
    out2 = nd_to_axiomatic(gen)
    assert check_proof(out2, "tjk+").valid
    assert out2.conclusion == Imp(f("forall y. P(y)"), f("forall x. P(x)"))


def test_round_trip_axiomatic_nd_axiomatic():
    wk = node("axiom:weakening", f("p -> (q -> p)"))
    prem = assume(f("p"), "a")
    t = node("imp_elim", f("q -> p"), [prem, wk])
    nd_proof = axiomatic_to_nd(t)
    red = reduce_proof(nd_proof)
    gamma0 = sorted(open_assumptions(red.proof), key=pretty)
    back = nd_to_axiomatic(red.proof, gamma0)
    assert check_proof(back, "tjk+").valid
    assert back.conclusion == Imp(big_conj(gamma0), box(red.n, f("q -> p")))


def test_relative_deduction_exists_elim_with_side_context_deep():
    # witness elimination with a split side context, rewritten at depths the
    # random corpus does not reach; exercises the guarded embedding and the
    # distribution of the side conjunct through the existential
    maj = assume(f("exists x. P(x)"), "e")
    wit = assume(f("P(#5)"), "w")
    mp = node("imp_elim", f("q"), [assume(f("s"), "m"), assume(f("s -> q"), "g")])
    side = node("and_int", f("r & q"), [assume(f("r"), "sr"), mp])
    pair = node("and_int", f("P(#5) & (r & q)"), [wit, side])
    body = node("exists_int", f("exists y. P(y) & (r & q)"), [pair])
    t = node("exists_elim", f("exists y. P(y) & (r & q)"), [maj, body], {"w"})
    assert stratum(t) == 0
    assert check_proof(t, "nbqlcd_r").valid
    gamma = frozenset({f("s -> q"), f("s")})
    sigma = [f("exists x. P(x)"), f("r")]
    for n in (1, 2):
        out = relative_deduction(t, gamma, sigma, n)
        assert out.conclusion == box(n, Imp(big_conj(sigma), t.conclusion))
        report = check_proof(out, "nbqlcd")
        assert report.valid, [v.__dict__ for v in report.violations][:3]
        assert set(open_assumptions(out)) <= gamma


def test_relative_deduction_or_elim_with_side_context_deep():
    p, q, r = f("p"), f("q"), f("r")
    maj = assume(Or(p, q), "mj")
    mp1 = node("imp_elim", r, [assume(p, "dl"), assume(Imp(p, r), "g1")])
    mp2 = node("imp_elim", r, [assume(q, "dr"), assume(Imp(q, r), "g2")])
    # the disjunct occurrences sit in minor position, hence stay safe and
    # dischargeable even with detachments in the branches
    t = node("or_elim", r, [maj, mp1, mp2], {"dl", "dr"})
    assert check_proof(t, "nbqlcd_r").valid
    assert stratum(t) == 0
    gamma = frozenset({Imp(p, r), Imp(q, r)})
    sigma = [Or(p, q)]
    for n in (1, 2):
        out = relative_deduction(t, gamma, sigma, n)
        assert out.conclusion == box(n, Imp(Or(p, q), r))
        report = check_proof(out, "nbqlcd")
        assert report.valid, [v.__dict__ for v in report.violations][:3]
        assert set(open_assumptions(out)) <= gamma


def test_rename_nested_shared_eigenparameters():
    # two nested quantifier steps both running on the same parameter index
    inner_wit = assume(f("R(#0, #0)"), "iw")
    inner_body = node("exists_int", f("exists y. R(y, #0)"), [inner_wit])
    # careful: generalize only the first position so #0 stays in the matrix
    from bqlcd.syntax import parse_inferring
    ex_concl = parse_inferring("exists y. R(y, #0)")[0]
    maj = assume(f("exists x. R(x, #0)"), "im")
    elim = node("exists_elim", ex_concl, [maj, inner_body], {"iw"})
    from bqlcd.proofkernel import eigenparameter
    assert check_proof(elim, "nbqlcd_r").valid is False  # witness clashes with #0 context

    # a clean nesting: outer universal generalisation over a subtree whose
    # existential elimination uses its own fresh parameter
    src = assume(f("forall z. exists x. P(x)"), "s1")
    inst = node("forall_elim", f("exists x. P(x)"), [src])
    wit = assume(f("P(#1)"), "w1")
    body = node("exists_int", f("exists y. P(y)"), [wit])
    elim2 = node("exists_elim", f("exists y. P(y)"), [inst, body], {"w1"})
    assert check_proof(elim2, "nbqlcd_r").valid
    out = rename_eigenvariables(elim2, {1})
    assert check_proof(out, "nbqlcd_r").valid
    from bqlcd.syntax import parameters_of
    assert 1 not in parameters_of(out)
