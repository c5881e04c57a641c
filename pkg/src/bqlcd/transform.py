"""Proof generators and proof-to-proof rewriters.

Everything here outputs trees meant to be re-checked by the kernel: the
distribution and release lemmas, guard regularity, the relative deduction
rewrite that eliminates modus ponens in favour of guards, the unrestricted
elimination rules built on top of it, and the translations between the
natural-deduction systems and the axiomatic ones.

``box(n, phi)`` is the n-fold guard ``true -> ... -> phi``; the key identity
``box(n, true -> phi) == box(n + 1, phi)`` holds structurally and is used
silently throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

from .proofkernel import (
    Judgment, Proof, analyze, assume, canonical_leaf_ids, check_judgment,
    check_proof, eigenparameter, node, open_assumptions,
    rename_eigenvariables, stratum,
)
from .syntax import (
    And, Exists, Forall, Imp, Or, Param, TOP, Formula, big_conj, box,
    formula_params, free_vars, parameters_of, pretty, substitute,
)


class TransformError(ValueError):
    pass


_fresh_graft = itertools.count()


# ---------------------------------------------------------------------------
# small builders
# ---------------------------------------------------------------------------

def vacuous_imp(p: Proof, antecedent: Formula) -> Proof:
    return node("imp_int", Imp(antecedent, p.conclusion), [p])


def boxn(p: Proof, n: int) -> Proof:
    for _ in range(n):
        p = vacuous_imp(p, TOP)
    return p


def close_antecedent(p: Proof, antecedent: Formula) -> Proof:
    """Conditional proof discharging every safe open occurrence of the
    antecedent."""
    an = analyze(p)
    ids = {lid for lid in an.open_leaves_in(())
           if an.leaf_formula[lid] == antecedent and not an.unsafe_for(lid)}
    return node("imp_int", Imp(antecedent, p.conclusion), [p], ids)


def relabel_fresh(p: Proof) -> Proof:
    """Copy with globally fresh leaf ids (for inserting a proof twice)."""
    mapping = {}

    def collect(nd):
        if nd.is_assumption():
            mapping.setdefault(nd.leaf_id, f"g{next(_fresh_graft)}")
        for c in nd.children:
            collect(c)

    collect(p)

    def rebuild(nd):
        return replace(
            nd,
            children=tuple(rebuild(c) for c in nd.children),
            discharges=frozenset(mapping[x] for x in nd.discharges if x in mapping),
            leaf_id=mapping.get(nd.leaf_id) if nd.leaf_id else None)

    return rebuild(p)


def graft(host: Proof, replacements: dict) -> Proof:
    """Replace open assumption leaves by proofs of the same conclusions.

    The host's quantifier parameters are renamed away from everything the
    replacements mention, so the splice stays checkable.
    """
    if not replacements:
        return host
    avoid = set()
    for f_, p_ in replacements.items():
        avoid |= set(formula_params(f_)) | set(parameters_of(p_))
    host = rename_eigenvariables(host, avoid)
    an = analyze(host)
    open_ids = {lid for lid in an.open_leaves_in(())
                if an.leaf_formula[lid] in replacements}

    def go(nd):
        if nd.is_assumption() and nd.leaf_id in open_ids:
            return relabel_fresh(replacements[nd.conclusion])
        if not nd.children:
            return nd
        return replace(nd, children=tuple(go(c) for c in nd.children))

    return go(host)


def ordered_opens(p: Proof) -> list:
    """Distinct open assumption sentences in first-occurrence order."""
    an = analyze(p)
    out = []
    for lid in sorted(an.open_leaves_in(()), key=lambda x: an.leaf_path[x]):
        f_ = an.leaf_formula[lid]
        if f_ not in out:
            out.append(f_)
    return out


def _fresh_param(*items, avoid=()):
    used = set(avoid)
    for x in items:
        used |= set(parameters_of(x))
    return max(used) + 1 if used else 0


# ---------------------------------------------------------------------------
# conjunction plumbing
# ---------------------------------------------------------------------------

def _conj_components(s: Formula) -> dict:
    """Subformula -> elimination path into the conjunction tree."""
    out = {}

    def walk(f_, path):
        if f_ not in out:
            out[f_] = path
        if isinstance(f_, And):
            walk(f_.left, path + "l")
            walk(f_.right, path + "r")

    walk(s, "")
    return out


def derive_conj_imp(source: Formula, target: Formula) -> Proof:
    """Closed proof of ``source -> target`` where the target is assembled
    from pieces of the source conjunction tree (plus the truth constant)."""
    comp = _conj_components(source)

    def build(t):
        if t in comp:
            p = assume(source)
            for step in comp[t]:
                if step == "l":
                    p = node("and_elim_l", p.conclusion.left, [p])
                else:
                    p = node("and_elim_r", p.conclusion.right, [p])
            return p
        if t == TOP:
            return node("top_int", TOP)
        if isinstance(t, And):
            return node("and_int", t, [build(t.left), build(t.right)])
        raise TransformError(
            f"cannot assemble {pretty(t)} out of {pretty(source)}")

    return close_antecedent(build(target), source)


# ---------------------------------------------------------------------------
# the derived lemmas
# ---------------------------------------------------------------------------

def derive_distribution(phi, psi, chi) -> Proof:
    """(phi & psi) | (phi & chi) from the open assumption phi & (psi | chi)."""
    src = And(phi, Or(psi, chi))
    tgt = Or(And(phi, psi), And(phi, chi))
    major = node("and_elim_r", Or(psi, chi), [assume(src)])
    dl, dr = assume(psi), assume(chi)
    left = node("or_int_l", tgt,
                [node("and_int", And(phi, psi),
                      [node("and_elim_l", phi, [assume(src)]), dl])])
    right = node("or_int_r", tgt,
                 [node("and_int", And(phi, chi),
                       [node("and_elim_l", phi, [assume(src)]), dr])])
    return node("or_elim", tgt, [major, left, right], {dl.leaf_id, dr.leaf_id})


def derive_infinite_distribution(phi, v, psi) -> Proof:
    """exists v (phi & psi) from the open assumption phi & exists v psi."""
    if free_vars(phi):
        raise TransformError("the fixed conjunct must be closed")
    if not free_vars(psi) <= {v}:
        raise TransformError("the matrix may only use the bound variable")
    src = And(phi, Exists(v, psi))
    tgt = Exists(v, And(phi, psi))
    i = _fresh_param(phi, psi)
    wit = assume(substitute(psi, v, Param(i)))
    major = node("and_elim_r", Exists(v, psi), [assume(src)])
    pair = node("and_int", And(phi, wit.conclusion),
                [node("and_elim_l", phi, [assume(src)]), wit])
    body = node("exists_int", tgt, [pair])
    return node("exists_elim", tgt, [major, body], {wit.leaf_id})


def derive_and_release(phi, psi, chi) -> Proof:
    """phi -> (psi -> chi) from the open assumption phi & psi -> chi."""
    prem = assume(Imp(And(phi, psi), chi))
    d1, d2 = assume(phi), assume(psi)
    pair = node("and_int", And(phi, psi), [d1, d2])
    inner = node("imp_int", Imp(psi, And(phi, psi)), [pair], {d2.leaf_id})
    chain = node("int_trans", Imp(psi, chi), [inner, prem])
    return node("imp_int", Imp(phi, Imp(psi, chi)), [chain], {d1.leaf_id})


def derive_forall_embedding(n, v, phi) -> Proof:
    """box^n of the universal from the open assumption universalised guard.

    Follows the inductive construction: the guard is pulled inside with the
    internal universal introduction, then chained with the recursive proof.
    """
    if n == 0:
        return assume(Forall(v, phi))
    rec = derive_forall_embedding(n - 1, v, phi)
    lower = Forall(v, box(n - 1, phi))
    prem = assume(Forall(v, box(n, phi)))
    left = node("int_forall_int", Imp(TOP, lower), [prem])
    right = close_antecedent(rec, lower)
    return node("int_trans", Imp(TOP, box(n - 1, Forall(v, phi))), [left, right])


# ---------------------------------------------------------------------------
# regularity
# ---------------------------------------------------------------------------

def regularity_transform(p: Proof, n: int, premises=None) -> Proof:
    """Lift a guard-free-system proof under n guards premise-wise: from the
    premises each guarded n deep, conclude the guarded conclusion."""
    if n < 0:
        raise TransformError("guard depth must be >= 0")
    if premises is None:
        premises = ordered_opens(p)
    else:
        seen, deduped = set(), []
        for f_ in premises:
            if f_ not in seen:
                seen.add(f_)
                deduped.append(f_)
        premises = deduped
    if not set(open_assumptions(p)) <= set(premises):
        raise TransformError("premise list does not cover the open assumptions")
    cur = p
    for k in range(1, n + 1):
        cur = _regularity_step(cur, [box(k - 1, f_) for f_ in premises],
                               [box(k, f_) for f_ in premises])
    return cur


def _regularity_step(q: Proof, lower: list, upper: list) -> Proof:
    if not lower:
        return vacuous_imp(q, TOP)
    big = big_conj(lower)
    comp = _conj_components(big)
    exts = {}
    for f_ in lower:
        if f_ in exts:
            continue
        p = assume(big)
        for step in comp[f_]:
            if step == "l":
                p = node("and_elim_l", p.conclusion.left, [p])
            else:
                p = node("and_elim_r", p.conclusion.right, [p])
        exts[f_] = p
    q2 = graft(q, exts)
    right = close_antecedent(q2, big)
    leaves = [assume(u) for u in upper]
    left = leaves[-1]
    for lf, low in zip(reversed(leaves[:-1]), reversed(lower[:-1])):
        # lf concludes true -> lower_i; left concludes true -> (rest)
        left = node("int_and_int", Imp(TOP, And(low, left.conclusion.right)),
                    [lf, left])
    return node("int_trans", Imp(TOP, q.conclusion), [left, right])


def boxed_chain(template: Proof, n: int, pairs) -> Proof:
    """Regularity applied to a small rule proof, then premise proofs grafted
    onto its guarded assumptions.  ``pairs``: list of (premise, proof of the
    premise guarded n deep)."""
    seen, premises, mapping = set(), [], {}
    for f_, p_ in pairs:
        if f_ not in seen:
            seen.add(f_)
            premises.append(f_)
            mapping[box(n, f_)] = p_
    lifted = regularity_transform(template, n, premises)
    return graft(lifted, mapping)


def chain_imp(n, a, b, c, p_ab, p_bc) -> Proof:
    tmpl = node("int_trans", Imp(a, c), [assume(Imp(a, b)), assume(Imp(b, c))])
    return boxed_chain(tmpl, n, [(Imp(a, b), p_ab), (Imp(b, c), p_bc)])


def pair_imp(n, s, a, b, p_sa, p_sb) -> Proof:
    tmpl = node("int_and_int", Imp(s, And(a, b)),
                [assume(Imp(s, a)), assume(Imp(s, b))])
    return boxed_chain(tmpl, n, [(Imp(s, a), p_sa), (Imp(s, b), p_sb)])


def or_join(n, a, b, c, p_ac, p_bc) -> Proof:
    tmpl = node("int_or_elim", Imp(Or(a, b), c),
                [assume(Imp(a, c)), assume(Imp(b, c))])
    return boxed_chain(tmpl, n, [(Imp(a, c), p_ac), (Imp(b, c), p_bc)])


# ---------------------------------------------------------------------------
# relative deduction
# ---------------------------------------------------------------------------

_ZERO_PREMISE = {"top_int", "eq_int", "id_xm"}
_UNARY = {"bot_elim", "and_elim_l", "and_elim_r", "or_int_l", "or_int_r",
          "int_forall_int", "int_exists_elim", "forall_elim", "cd",
          "exists_int"}
_BINARY = {"and_int", "int_trans", "int_and_int", "int_or_elim", "eq_elim"}


def relative_deduction(t: Proof, gamma, sigma, n: int, identity="absent",
                       skip_check=False) -> Proof:
    """Rewrite a stratum-n proof into a guard-free proof of the guarded
    conditional: from unsafe context only, conclude box^n of (the side
    context conjoined) -> conclusion."""
    gamma = frozenset(gamma)
    sigma = list(sigma)
    if n < 0:
        raise TransformError("the rewrite is defined for depth >= 0")
    if not skip_check:
        ok, report = check_judgment(
            Judgment(tuple(gamma), tuple(sigma), n, t.conclusion), t, identity)
        if not ok:
            msgs = "; ".join(v.message for v in report.violations) or "context mismatch"
            raise TransformError(f"judgment does not hold: {msgs}")
    out = _rd(t, gamma, sigma, n)
    return canonical_leaf_ids(out)


def _rd(t: Proof, gamma, sigma, n: int) -> Proof:
    s_conj = big_conj(sigma)
    concl = t.conclusion
    rule = t.rule

    if rule in _ZERO_PREMISE:
        return boxn(vacuous_imp(node(rule, concl), s_conj), n)

    if rule == "assume":
        if concl in gamma:
            return boxn(vacuous_imp(assume(concl), s_conj), n)
        if concl in sigma:
            return boxn(derive_conj_imp(s_conj, concl), n)
        raise TransformError(f"open assumption {pretty(concl)} outside both contexts")

    if rule in _UNARY or (rule == "forall_int" and _pinned_eigenparam(t) is None):
        # vacuous generalisation behaves like any other unary rule
        alpha = t.children[0].conclusion
        a1 = _rd(t.children[0], gamma, sigma, n)
        tmpl = close_antecedent(node(rule, concl, [assume(alpha)]), alpha)
        return chain_imp(n, s_conj, alpha, concl, a1, boxn(tmpl, n))

    if rule in _BINARY:
        alpha, beta = (c.conclusion for c in t.children)
        a1 = _rd(t.children[0], gamma, sigma, n)
        a2 = _rd(t.children[1], gamma, sigma, n)
        paired = pair_imp(n, s_conj, alpha, beta, a1, a2)
        ab = And(alpha, beta)
        tmpl = close_antecedent(
            node(rule, concl, [node("and_elim_l", alpha, [assume(ab)]),
                               node("and_elim_r", beta, [assume(ab)])]), ab)
        return chain_imp(n, s_conj, ab, concl, paired, boxn(tmpl, n))

    if rule == "or_elim":
        return _rd_or_elim(t, gamma, sigma, n)
    if rule == "imp_int":
        return _rd_imp_int(t, gamma, sigma, n)
    if rule == "imp_elim":
        return _rd_imp_elim(t, gamma, sigma, n)
    if rule == "forall_int":
        return _rd_forall_int(t, gamma, sigma, n)
    if rule == "exists_elim":
        return _rd_exists_elim(t, gamma, sigma, n)
    raise TransformError(f"rule {rule} has no rewrite case")


def _pinned_eigenparam(t: Proof):
    if t.rule in ("forall_int", "exists_elim"):
        return eigenparameter(t)
    return None


def _sub_contexts(sub: Proof, gamma, sigma, exclude=()):
    """Minimal split contexts for a quantifier subproof: the open
    assumptions, routed to the unsafe side when they were there already."""
    opens = set(open_assumptions(sub)) - set(exclude)
    gamma_star = frozenset(g for g in gamma if g in opens)
    sigma_star = []
    for s_ in sigma:
        if s_ in opens and s_ not in gamma_star and s_ not in sigma_star \
                and s_ not in exclude:
            sigma_star.append(s_)
    leftover = opens - set(gamma_star) - set(sigma_star)
    if leftover:
        raise TransformError(
            f"open assumptions outside both contexts: "
            f"{', '.join(sorted(map(pretty, leftover)))}")
    return gamma_star, sigma_star


def _rd_or_elim(t, gamma, sigma, n):
    s_conj = big_conj(sigma)
    major, left, right = t.children
    disj = major.conclusion
    alpha, beta = disj.left, disj.right
    concl = t.conclusion
    a1 = _rd(major, gamma, sigma, n)
    if not sigma:
        a2 = _rd(left, gamma, [alpha], n)
        a3 = _rd(right, gamma, [beta], n)
        joined = or_join(n, alpha, beta, concl, a2, a3)
        return chain_imp(n, TOP, disj, concl, a1, joined)
    a2 = _lift_branch(left, gamma, sigma, alpha, concl, n)
    a3 = _lift_branch(right, gamma, sigma, beta, concl, n)
    dist = boxn(close_antecedent(derive_distribution(s_conj, alpha, beta),
                                 And(s_conj, disj)), n)
    joined = or_join(n, And(s_conj, alpha), And(s_conj, beta), concl, a2, a3)
    body = chain_imp(n, And(s_conj, disj), Or(And(s_conj, alpha), And(s_conj, beta)),
                     concl, dist, joined)
    refl = boxn(derive_conj_imp(s_conj, s_conj), n)
    pair = pair_imp(n, s_conj, s_conj, disj, refl, a1)
    return chain_imp(n, s_conj, And(s_conj, disj), concl, pair, body)


def _lift_branch(branch, gamma, sigma, extra, concl, n):
    """box^n((sigma-conjunction & extra) -> concl) from the branch."""
    s_conj = big_conj(sigma)
    ext = sigma + [extra]
    raw = _rd(branch, gamma, ext, n)
    glue = boxn(derive_conj_imp(And(s_conj, extra), big_conj(ext)), n)
    return chain_imp(n, And(s_conj, extra), big_conj(ext), concl, glue, raw)


def _rd_imp_int(t, gamma, sigma, n):
    body = t.children[0]
    concl = t.conclusion
    phi, psi = concl.left, concl.right
    if not sigma:
        inner = _rd(body, gamma, [phi], n)
        return vacuous_imp(inner, TOP)
    s_conj = big_conj(sigma)
    lifted = _lift_branch(body, gamma, sigma, phi, psi, n)
    release = derive_and_release(s_conj, phi, psi)
    return boxed_chain(release, n, [(Imp(And(s_conj, phi), psi), lifted)])


def _rd_imp_elim(t, gamma, sigma, n):
    s_conj = big_conj(sigma)
    minor, major = t.children
    alpha = minor.conclusion
    concl = t.conclusion
    m = stratum(major)
    if m >= n:
        raise TransformError(f"right premise stratum {m} is not below {n}")
    a1 = _rd(minor, gamma, sigma, n)
    if m == -1:
        a2 = boxn(relabel_fresh(major), n)
    else:
        reduced = _rd(major, gamma, [], m)      # box(m+1, alpha -> concl)
        a2 = boxn(reduced, n - m - 1)
    return chain_imp(n, s_conj, alpha, concl, a1, a2)


def _rd_forall_int(t, gamma, sigma, n):
    # the generalisation parameter needs no explicit handling: the checker
    # re-infers it from the rewritten premise, and the freshness conditions
    # carry over from the input proof
    s_conj = big_conj(sigma)
    sub = t.children[0]
    concl = t.conclusion
    v, phi = concl.var, concl.body
    gamma_star, sigma_star = _sub_contexts(sub, gamma, sigma)
    s_star = big_conj(sigma_star)
    inner = _rd(sub, gamma_star, sigma_star, n)
    gen = node("forall_int", Forall(v, box(n, Imp(s_star, phi))), [inner])
    emb = derive_forall_embedding(n, v, Imp(s_star, phi))
    embedded = graft(emb, {gen.conclusion: gen})
    tmpl = node("int_forall_int", Imp(s_star, Forall(v, phi)),
                [assume(Forall(v, Imp(s_star, phi)))])
    narrowed = boxed_chain(tmpl, n, [(Forall(v, Imp(s_star, phi)), embedded)])
    glue = boxn(derive_conj_imp(s_conj, s_star), n)
    return chain_imp(n, s_conj, s_star, Forall(v, phi), glue, narrowed)


def _rd_exists_elim(t, gamma, sigma, n):
    s_conj = big_conj(sigma)
    major, body = t.children
    ex = major.conclusion
    v, matrix = ex.var, ex.body
    concl = t.conclusion
    i = _pinned_eigenparam(t)
    if i is None:
        i = _fresh_param(t, *gamma, *sigma)
    xi = substitute(matrix, v, Param(i))
    gamma_star, sigma_star = _sub_contexts(body, gamma, sigma, exclude=(xi,))
    s_star = big_conj(sigma_star)
    a1 = _rd(major, gamma, sigma, n)
    inner = _rd(body, gamma_star, sigma_star + [xi], n)
    if not sigma_star:
        gen = node("forall_int", Forall(v, box(n, Imp(matrix, concl))), [inner])
        emb = graft(derive_forall_embedding(n, v, Imp(matrix, concl)),
                    {gen.conclusion: gen})
        tmpl = node("int_exists_elim", Imp(ex, concl),
                    [assume(Forall(v, Imp(matrix, concl)))])
        narrowed = boxed_chain(tmpl, n, [(Forall(v, Imp(matrix, concl)), emb)])
        return chain_imp(n, s_conj, ex, concl, a1, narrowed)
    paired_matrix = And(s_star, matrix)
    glue1 = boxn(derive_conj_imp(And(s_star, xi), big_conj(sigma_star + [xi])), n)
    lifted = chain_imp(n, And(s_star, xi), big_conj(sigma_star + [xi]), concl,
                       glue1, inner)
    gen = node("forall_int", Forall(v, box(n, Imp(paired_matrix, concl))), [lifted])
    emb = graft(derive_forall_embedding(n, v, Imp(paired_matrix, concl)),
                {gen.conclusion: gen})
    tmpl = node("int_exists_elim", Imp(Exists(v, paired_matrix), concl),
                [assume(Forall(v, Imp(paired_matrix, concl)))])
    narrowed = boxed_chain(tmpl, n, [(Forall(v, Imp(paired_matrix, concl)), emb)])
    infd = boxn(close_antecedent(
        derive_infinite_distribution(s_star, v, matrix), And(s_star, ex)), n)
    h = chain_imp(n, And(s_star, ex), Exists(v, paired_matrix), concl,
                  infd, narrowed)
    glue2 = boxn(derive_conj_imp(And(s_conj, ex), And(s_star, ex)), n)
    k = chain_imp(n, And(s_conj, ex), And(s_star, ex), concl, glue2, h)
    refl = boxn(derive_conj_imp(s_conj, s_conj), n)
    pair = pair_imp(n, s_conj, s_conj, ex, refl, a1)
    return chain_imp(n, s_conj, And(s_conj, ex), concl, pair, k)


# ---------------------------------------------------------------------------
# reduction and unrestricted eliminations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReductionResult:
    n: int
    proof: Proof
    source_stratum: int


def reduce_proof(t: Proof, identity="absent") -> ReductionResult:
    """Eliminate modus ponens: a stratum-s proof of phi becomes a guard-free
    proof of box(s + 1, phi) from the same open assumptions."""
    system = {"absent": "nbqlcd_r", "congruence": "nbqlcd_r+eq",
              "strict": "nbqlcd_r+eqxm"}[identity]
    report = check_proof(t, system)
    if not report.valid:
        msgs = "; ".join(v.message for v in report.violations)
        raise TransformError(f"input does not check: {msgs}")
    s = report.stratum
    if s == -1:
        return ReductionResult(0, t, -1)
    out = _rd(t, frozenset(report.open_assumptions), [], s)
    return ReductionResult(s + 1, canonical_leaf_ids(out), s)


def unbox(t: Proof, n: int) -> Proof:
    """Strip n guards by pairing with the truth constant."""
    concl = t.conclusion
    for _ in range(n):
        if not (isinstance(concl, Imp) and concl.left == TOP):
            raise TransformError(f"conclusion is not guarded: {pretty(concl)}")
        concl = concl.right
        t = node("imp_elim", concl, [node("top_int", TOP), t])
    return t


def pad_box(t: Proof, n: int, m: int) -> Proof:
    """Deepen guards from n to m with vacuous conditional proofs."""
    if m < n:
        raise TransformError("cannot remove guards by padding")
    return boxn(t, m - n)


def unrestricted_or_elim(t_major: Proof, t_left: Proof, t_right: Proof,
                         identity="absent") -> Proof:
    """Case analysis without the discharge restriction: the branches are
    rewritten guard-free, padded to equal depth, eliminated, and unguarded."""
    if t_left.conclusion != t_right.conclusion:
        raise TransformError("branches must conclude the same sentence")
    disj = t_major.conclusion
    if not isinstance(disj, Or):
        raise TransformError("major premise must be a disjunction")
    rl = reduce_proof(t_left, identity)
    rr = reduce_proof(t_right, identity)
    k = max(rl.n, rr.n)
    pl = relabel_fresh(pad_box(rl.proof, rl.n, k))
    pr = relabel_fresh(pad_box(rr.proof, rr.n, k))
    maj = relabel_fresh(t_major)
    target = box(k, t_left.conclusion)
    ids = set()
    for branch, want in ((pl, disj.left), (pr, disj.right)):
        an = analyze(branch)
        ids |= {lid for lid in an.open_leaves_in(())
                if an.leaf_formula[lid] == want}
    out = node("or_elim", target, [maj, pl, pr], ids)
    return canonical_leaf_ids(unbox(out, k))


def unrestricted_exists_elim(t_major: Proof, t_body: Proof, param_index=None,
                             identity="absent") -> Proof:
    """Witness elimination without the discharge restriction."""
    ex = t_major.conclusion
    if not isinstance(ex, Exists):
        raise TransformError("major premise must be existential")
    v, matrix = ex.var, ex.body
    opens = ordered_opens(t_body)
    if param_index is None:
        candidates = []
        for f_ in opens:
            from .syntax import _find_instantiation
            cand = _find_instantiation(matrix, v, f_)
            if isinstance(cand, Param) and substitute(matrix, v, cand) == f_:
                candidates.append(cand.index)
        candidates = sorted(set(candidates))
        if len(candidates) > 1:
            raise TransformError(
                f"ambiguous witness parameter, pass one of {candidates}")
        param_index = candidates[0] if candidates else _fresh_param(
            t_major, t_body)
    xi = substitute(matrix, v, Param(param_index))
    rest = [f_ for f_ in opens if f_ != xi]
    bad = [f_ for f_ in rest + [matrix, t_body.conclusion]
           if param_index in formula_params(f_)]
    if bad:
        raise TransformError(
            f"witness parameter #{param_index} is not fresh for "
            f"{', '.join(pretty(b) for b in bad)}")
    r = reduce_proof(t_body, identity)
    body = relabel_fresh(r.proof)
    an = analyze(body)
    ids = {lid for lid in an.open_leaves_in(()) if an.leaf_formula[lid] == xi}
    out = node("exists_elim", box(r.n, t_body.conclusion),
               [relabel_fresh(t_major), body], ids)
    return canonical_leaf_ids(unbox(out, r.n))


# ---------------------------------------------------------------------------
# axiomatic systems: derived templates for every axiom
# ---------------------------------------------------------------------------

def nd_axiom_proof(schema: str, concl: Formula) -> Proof:
    """A closed guard-free derivation of the given axiom instance."""
    if schema == "identity":
        a = assume(concl.left)
        return node("imp_int", concl, [a], {a.leaf_id})
    if schema == "imp_top":
        return node("imp_int", concl, [node("top_int", TOP)])
    if schema == "ex_falso":
        a = assume(concl.left)
        return node("imp_int", concl,
                    [node("bot_elim", concl.right, [a])], {a.leaf_id})
    if schema == "and_comp":
        src = concl.left
        inner = node("int_and_int", concl.right,
                     [node("and_elim_l", src.left, [assume(src)]),
                      node("and_elim_r", src.right, [assume(src)])])
        return close_antecedent(inner, src)
    if schema in ("and_elim_l", "and_elim_r"):
        a = assume(concl.left)
        return node("imp_int", concl,
                    [node(schema, concl.right, [a])], {a.leaf_id})
    if schema in ("or_int_l", "or_int_r"):
        a = assume(concl.left)
        return node("imp_int", concl,
                    [node(schema, concl.right, [a])], {a.leaf_id})
    if schema == "or_comp":
        src = concl.left
        inner = node("int_or_elim", concl.right,
                     [node("and_elim_l", src.left, [assume(src)]),
                      node("and_elim_r", src.right, [assume(src)])])
        return close_antecedent(inner, src)
    if schema == "distribution":
        src = concl.left
        return close_antecedent(
            derive_distribution(src.left, src.right.left, src.right.right), src)
    if schema == "inf_distribution":
        src = concl.left
        return close_antecedent(
            derive_infinite_distribution(src.left, src.right.var,
                                         src.right.body), src)
    if schema in ("forall_imp", "exists_imp", "cd", "forall_elim_like"):
        rule = {"forall_imp": "int_forall_int", "exists_imp": "int_exists_elim",
                "cd": "cd"}[schema]
        a = assume(concl.left)
        return node("imp_int", concl, [node(rule, concl.right, [a])], {a.leaf_id})
    if schema == "forall_inst":
        a = assume(concl.left)
        return node("imp_int", concl,
                    [node("forall_elim", concl.right, [a])], {a.leaf_id})
    if schema == "exists_int":
        a = assume(concl.left)
        return node("imp_int", concl,
                    [node("exists_int", concl.right, [a])], {a.leaf_id})
    if schema == "transitivity":
        src = concl.left
        inner = node("int_trans", concl.right,
                     [node("and_elim_l", src.left, [assume(src)]),
                      node("and_elim_r", src.right, [assume(src)])])
        return close_antecedent(inner, src)
    if schema == "suffixing":
        first, rest = concl.left, concl.right
        d1 = assume(first)
        d2 = assume(rest.left)
        it = node("int_trans", rest.right, [d1, d2])
        inner = node("imp_int", rest, [it], {d2.leaf_id})
        return node("imp_int", concl, [inner], {d1.leaf_id})
    if schema == "prefixing":
        first, rest = concl.left, concl.right
        d1 = assume(first)
        d2 = assume(rest.left)
        it = node("int_trans", rest.right, [d2, d1])
        inner = node("imp_int", rest, [it], {d2.leaf_id})
        return node("imp_int", concl, [inner], {d1.leaf_id})
    if schema == "weakening":
        d1 = assume(concl.left)
        inner = node("imp_int", concl.right, [d1])
        return node("imp_int", concl, [inner], {d1.leaf_id})
    raise TransformError(f"no template for axiom schema {schema!r}")


def axiomatic_to_nd(t: Proof) -> Proof:
    """Translate an axiomatic derivation into the full natural-deduction
    system, mapping axioms to their derived templates and routing the
    discharging eliminations through their unrestricted counterparts."""
    report = check_proof(t, "tjkd+")
    if not report.valid:
        msgs = "; ".join(v.message for v in report.violations)
        raise TransformError(f"input does not check in the axiomatic system: {msgs}")
    out = _ax2nd(t)
    final = check_proof(out, "nbqlcd_r")
    if not final.valid:
        raise TransformError("internal: translated proof does not check")
    return canonical_leaf_ids(out)


_DIRECT_RULES = {"top_int", "bot_elim", "and_int", "and_elim_l", "and_elim_r",
                 "or_int_l", "or_int_r", "imp_elim", "forall_elim", "cd",
                 "exists_int", "forall_int"}


def _ax2nd(t: Proof) -> Proof:
    if t.is_assumption():
        return t
    if t.rule.startswith("axiom:"):
        return relabel_fresh(nd_axiom_proof(t.rule[6:], t.conclusion))
    if t.rule in _DIRECT_RULES:
        return node(t.rule, t.conclusion, [_ax2nd(c) for c in t.children])
    if t.rule == "affixing":
        p1 = _ax2nd(t.children[0])
        p2 = _ax2nd(t.children[1])
        mid = Imp(t.children[0].conclusion.right, t.children[1].conclusion.left)
        d = assume(mid)
        it1 = node("int_trans",
                   Imp(t.children[0].conclusion.left, mid.right), [p1, d])
        it2 = node("int_trans", t.conclusion.right, [it1, p2])
        return node("imp_int", t.conclusion, [it2], {d.leaf_id})
    if t.rule == "or_elim":
        return unrestricted_or_elim(_ax2nd(t.children[0]),
                                    _ax2nd(t.children[1]),
                                    _ax2nd(t.children[2]))
    if t.rule == "exists_elim":
        idx = eigenparameter(t)
        return unrestricted_exists_elim(_ax2nd(t.children[0]),
                                        _ax2nd(t.children[1]),
                                        param_index=idx)
    raise TransformError(f"rule {t.rule} has no translation")


# ---------------------------------------------------------------------------
# the reverse direction: guard-free proofs into the axiomatic system
# ---------------------------------------------------------------------------

def ax_axiom(schema: str, concl: Formula) -> Proof:
    return node(f"axiom:{schema}", concl)


def ax_mp(p_minor: Proof, p_major: Proof) -> Proof:
    want = p_major.conclusion
    if not (isinstance(want, Imp) and want.left == p_minor.conclusion):
        raise TransformError("detachment premises do not fit")
    return node("imp_elim", want.right, [p_minor, p_major])


def ax_compose(p_ab: Proof, p_bc: Proof) -> Proof:
    """From A -> B and B -> C conclude A -> C via the transitivity axiom."""
    a_b, b_c = p_ab.conclusion, p_bc.conclusion
    if not (isinstance(a_b, Imp) and isinstance(b_c, Imp)
            and a_b.right == b_c.left):
        raise TransformError("composition premises do not chain")
    conj = node("and_int", And(a_b, b_c), [p_ab, p_bc])
    ax = ax_axiom("transitivity", Imp(And(a_b, b_c), Imp(a_b.left, b_c.right)))
    return ax_mp(conj, ax)


def ax_pair(p_sa: Proof, p_sb: Proof) -> Proof:
    """From S -> A and S -> B conclude S -> A & B."""
    sa, sb = p_sa.conclusion, p_sb.conclusion
    if not (isinstance(sa, Imp) and isinstance(sb, Imp) and sa.left == sb.left):
        raise TransformError("pairing premises do not share an antecedent")
    conj = node("and_int", And(sa, sb), [p_sa, p_sb])
    ax = ax_axiom("and_comp",
                  Imp(And(sa, sb), Imp(sa.left, And(sa.right, sb.right))))
    return ax_mp(conj, ax)


def ax_conj_imp(source: Formula, target: Formula) -> Proof:
    """Axiomatic proof of source -> target with the target assembled from
    pieces of the source conjunction tree."""
    if target == source:
        return ax_axiom("identity", Imp(source, source))
    comp = _conj_components(source)
    if target in comp:
        cur = source
        out = None
        for step in comp[target]:
            nxt = cur.left if step == "l" else cur.right
            ax = ax_axiom("and_elim_l" if step == "l" else "and_elim_r",
                          Imp(cur, nxt))
            out = ax if out is None else ax_compose(out, ax)
            cur = nxt
        return out
    if target == TOP:
        return ax_axiom("imp_top", Imp(source, TOP))
    if isinstance(target, And):
        return ax_pair(ax_conj_imp(source, target.left),
                       ax_conj_imp(source, target.right))
    raise TransformError(
        f"cannot assemble {pretty(target)} out of {pretty(source)}")


def ax_release(p: Proof) -> Proof:
    """From a proof of phi & psi -> chi build phi -> (psi -> chi); the
    standard two-stage derivation through weakening and prefixing."""
    fml = p.conclusion
    if not (isinstance(fml, Imp) and isinstance(fml.left, And)):
        raise TransformError("release needs a conjunctive antecedent")
    phi, psi = fml.left.left, fml.left.right
    chi = fml.right
    wk1 = ax_axiom("weakening", Imp(phi, Imp(psi, phi)))
    idd = ax_axiom("identity", Imp(psi, psi))
    wk2 = ax_axiom("weakening", Imp(Imp(psi, psi), Imp(phi, Imp(psi, psi))))
    d_psi = ax_mp(idd, wk2)
    paired = ax_pair(wk1, d_psi)
    inner_comp = ax_axiom(
        "and_comp", Imp(And(Imp(psi, phi), Imp(psi, psi)),
                        Imp(psi, And(phi, psi))))
    d1 = ax_compose(paired, inner_comp)
    pre = ax_axiom("prefixing",
                   Imp(fml, Imp(Imp(psi, fml.left), Imp(psi, chi))))
    d2 = ax_mp(p, pre)
    return ax_compose(d1, d2)


def _ax_extend(p_s_id: Proof, p_extra: Proof) -> Proof:
    """From S -> X build S -> S & X (pairing with the identity axiom)."""
    return ax_pair(p_s_id, p_extra)


def nd_to_axiomatic(t: Proof, gamma=None) -> Proof:
    """Compile a guard-free natural-deduction proof into a closed axiomatic
    derivation of (premises conjoined) -> conclusion.

    Never touches the existential elimination rule of the target system, so
    the output also checks with that rule removed.
    """
    report = check_proof(t, "nbqlcd")
    if not report.valid:
        msgs = "; ".join(v.message for v in report.violations)
        raise TransformError(f"input is not a guard-free proof: {msgs}")
    for p, nd_ in sorted(analyze(t).paths.items()):
        if nd_.rule in ("eq_int", "eq_elim", "id_xm"):
            raise TransformError("identity rules have no axiomatic counterpart here")
    if gamma is None:
        gamma = ordered_opens(t)
    else:
        gamma = list(gamma)
    if not set(open_assumptions(t)) <= set(gamma):
        raise TransformError("premise list does not cover the open assumptions")
    avoid = set()
    for f_ in gamma:
        avoid |= set(formula_params(f_))
    an0 = analyze(t)
    for lid, f_ in an0.leaf_formula.items():
        avoid |= set(formula_params(f_))
    avoid |= set(formula_params(t.conclusion))
    t = rename_eigenvariables(t, avoid)
    an = analyze(t)

    def a_list(path):
        out = []
        for lid in sorted(an.open_leaves_in(path), key=lambda x: an.leaf_path[x]):
            f_ = an.leaf_formula[lid]
            if f_ not in out:
                out.append(f_)
        return out

    def lift(target_conj, inner_list, p):
        """target -> concl from (conj of inner_list) -> concl."""
        src = big_conj(inner_list)
        if target_conj == src:
            return p
        return ax_compose(ax_conj_imp(target_conj, src), p)

    def go(nd_, path):
        a_here = a_list(path)
        s = big_conj(a_here)
        concl = nd_.conclusion
        rule = nd_.rule
        if rule == "assume":
            return ax_conj_imp(s, concl)
        if rule == "top_int":
            return ax_axiom("imp_top", Imp(s, TOP))
        inner_ax = {
            "bot_elim": "ex_falso", "and_elim_l": "and_elim_l",
            "and_elim_r": "and_elim_r", "or_int_l": "or_int_l",
            "or_int_r": "or_int_r", "forall_elim": "forall_inst",
            "exists_int": "exists_int", "cd": "cd",
            "int_forall_int": "forall_imp", "int_exists_elim": "exists_imp",
        }
        if rule in inner_ax:
            sub = lift(s, a_list(path + (0,)), go(nd_.children[0], path + (0,)))
            step = ax_axiom(inner_ax[rule], Imp(nd_.children[0].conclusion, concl))
            return ax_compose(sub, step)
        if rule == "and_int":
            l = lift(s, a_list(path + (0,)), go(nd_.children[0], path + (0,)))
            r = lift(s, a_list(path + (1,)), go(nd_.children[1], path + (1,)))
            return ax_pair(l, r)
        if rule in ("int_trans", "int_and_int", "int_or_elim"):
            l = lift(s, a_list(path + (0,)), go(nd_.children[0], path + (0,)))
            r = lift(s, a_list(path + (1,)), go(nd_.children[1], path + (1,)))
            both = ax_pair(l, r)
            inner = {
                "int_trans": ("transitivity", Imp(
                    And(l.conclusion.right, r.conclusion.right), concl)),
                "int_and_int": ("and_comp", Imp(
                    And(l.conclusion.right, r.conclusion.right), concl)),
                "int_or_elim": ("or_comp", Imp(
                    And(l.conclusion.right, r.conclusion.right), concl)),
            }[rule]
            return ax_compose(both, ax_axiom(*inner))
        if rule == "imp_int":
            phi = concl.left
            body = lift(And(s, phi), a_list(path + (0,)),
                        go(nd_.children[0], path + (0,)))
            return ax_release(body)
        if rule == "or_elim":
            major, left, right = nd_.children
            disj = major.conclusion
            la = lift(s, a_list(path + (0,)), go(major, path + (0,)))
            lifted_l = lift(And(s, disj.left), a_list(path + (1,)),
                            go(left, path + (1,)))
            lifted_r = lift(And(s, disj.right), a_list(path + (2,)),
                            go(right, path + (2,)))
            branches = node("and_int",
                            And(lifted_l.conclusion, lifted_r.conclusion),
                            [lifted_l, lifted_r])
            orc = ax_axiom("or_comp", Imp(
                And(lifted_l.conclusion, lifted_r.conclusion),
                Imp(Or(And(s, disj.left), And(s, disj.right)), concl)))
            joined = ax_mp(branches, orc)
            dist = ax_axiom("distribution", Imp(
                And(s, disj), Or(And(s, disj.left), And(s, disj.right))))
            body = ax_compose(dist, joined)
            pair = ax_pair(ax_axiom("identity", Imp(s, s)), la)
            return ax_compose(pair, body)
        if rule == "forall_int":
            v, phi = concl.var, concl.body
            sub = lift(s, a_list(path + (0,)), go(nd_.children[0], path + (0,)))
            gen = node("forall_int", Forall(v, Imp(s, phi)), [sub])
            step = ax_axiom("forall_imp",
                            Imp(gen.conclusion, Imp(s, concl)))
            return ax_mp(gen, step)
        if rule == "exists_elim":
            major, body_nd = nd_.children
            ex = major.conclusion
            v, matrix = ex.var, ex.body
            idx = eigenparameter(nd_)
            if idx is None:
                idx = _fresh_param(t, *gamma)
            xi = substitute(matrix, v, Param(idx))
            la = lift(s, a_list(path + (0,)), go(major, path + (0,)))
            lifted = lift(And(s, xi), a_list(path + (1,)),
                          go(body_nd, path + (1,)))
            gen = node("forall_int",
                       Forall(v, Imp(And(s, matrix), concl)), [lifted])
            step = ax_axiom("exists_imp", Imp(
                gen.conclusion, Imp(Exists(v, And(s, matrix)), concl)))
            ex_imp = ax_mp(gen, step)
            dist = ax_axiom("inf_distribution",
                            Imp(And(s, ex), Exists(v, And(s, matrix))))
            body = ax_compose(dist, ex_imp)
            pair = ax_pair(ax_axiom("identity", Imp(s, s)), la)
            return ax_compose(pair, body)
        raise TransformError(f"rule {rule} has no axiomatic compilation")

    core = go(t, ())
    out = lift(big_conj(gamma), a_list(()), core)
    final = check_proof(out, "tjk+")
    if not final.valid:
        raise TransformError("internal: compiled proof does not check")
    return canonical_leaf_ids(out)
