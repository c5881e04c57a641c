"""Natural-deduction proof trees and checking.

A proof is a rule-labelled tree of sentences.  Assumption leaves carry ids;
nodes that discharge assumptions list the leaf ids they close.  The checker
enforces, per system:

  C1  only sentences occur in proofs;
  C2  the universal-introduction parameter is fresh for the generalised
      formula and for every open assumption of its subproof;
  C3  the existential-elimination parameter is fresh for the matrix, the
      conclusion and every open assumption of the body besides the witness;
  C4  every open occurrence of the witness assumption is discharged;
  C5  an occurrence sitting inside the right (conditional) premise of a
      modus ponens application below the discharging node may not be
      discharged.

System ids: ``nbqlcd_r`` (full), ``nbqlcd`` = ``nbqlcd[-1]`` (no modus
ponens), ``nbqlcd[n]`` (right premises of modus ponens capped at stratum
n-1), the axiomatic systems ``bd+``, ``djd+``, ``tjd+``, ``tjkd+``, ``tjk+``,
and identity variants ``<nd system>+eq`` / ``<nd system>+eqxm``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace

from .syntax import (
    And, Atom, Bottom, Exists, Forall, Imp, Or, Param, TOP,
    Formula, formula_params, free_vars, infer_signature, is_sentence,
    is_closed_term, match_instantiation, parse_formula, pretty, replace_param,
    substitute,
)


class ProofJsonError(ValueError):
    pass


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------

ASSUME = "assume"

ND_RULES = frozenset({
    "top_int", "bot_elim", "and_int", "and_elim_l", "and_elim_r",
    "or_int_l", "or_int_r", "or_elim", "imp_int", "imp_elim",
    "int_trans", "int_and_int", "int_or_elim", "int_forall_int",
    "int_exists_elim", "forall_int", "forall_elim", "cd",
    "exists_int", "exists_elim",
})

IDENTITY_RULES = frozenset({"eq_int", "eq_elim", "id_xm"})

AX_RULES = frozenset({
    "top_int", "bot_elim", "and_int", "and_elim_l", "and_elim_r",
    "or_int_l", "or_int_r", "or_elim", "imp_elim",
    "forall_int", "forall_elim", "cd", "exists_int", "exists_elim",
    "affixing",
})

DISCHARGING = frozenset({"imp_int", "or_elim", "exists_elim"})

_CHILD_COUNT = {
    "top_int": 0, "eq_int": 0, "id_xm": 0,
    "bot_elim": 1, "and_elim_l": 1, "and_elim_r": 1, "or_int_l": 1,
    "or_int_r": 1, "imp_int": 1, "int_forall_int": 1, "int_exists_elim": 1,
    "forall_int": 1, "forall_elim": 1, "cd": 1, "exists_int": 1,
    "and_int": 2, "imp_elim": 2, "int_trans": 2, "int_and_int": 2,
    "int_or_elim": 2, "exists_elim": 2, "eq_elim": 2, "affixing": 2,
    "or_elim": 3,
}


@dataclass(frozen=True)
class Proof:
    rule: str
    conclusion: Formula
    children: tuple = ()
    discharges: frozenset = frozenset()
    leaf_id: str | None = None

    def is_assumption(self):
        return self.rule == ASSUME


_fresh_leaf_counter = itertools.count()


def assume(phi: Formula, leaf_id=None) -> Proof:
    if leaf_id is None:
        leaf_id = f"t{next(_fresh_leaf_counter)}"
    return Proof(ASSUME, phi, leaf_id=leaf_id)


def node(rule: str, conclusion: Formula, children=(), discharges=()) -> Proof:
    return Proof(rule, conclusion, tuple(children), frozenset(discharges))


def proof_size(t: Proof) -> int:
    return 1 + sum(proof_size(c) for c in t.children)


def proof_depth(t: Proof) -> int:
    return 0 if not t.children else 1 + max(proof_depth(c) for c in t.children)


# ---------------------------------------------------------------------------
# tree analysis
# ---------------------------------------------------------------------------

@dataclass
class Analysis:
    paths: dict            # path tuple -> Proof
    leaf_path: dict        # leaf id -> path
    leaf_formula: dict     # leaf id -> Formula
    discharged_by: dict    # leaf id -> path of discharging node
    imp_elims: tuple       # paths of imp_elim nodes
    problems: list         # structural issues found during indexing

    def in_subtree(self, leaf_id, path):
        lp = self.leaf_path[leaf_id]
        return lp[:len(path)] == path

    def open_in(self, leaf_id, path):
        """Open within the subtree at ``path``: not discharged by a node
        lying inside that subtree."""
        d = self.discharged_by.get(leaf_id)
        return d is None or d[:len(path)] != path

    def open_leaves_in(self, path):
        return [lid for lid, lp in self.leaf_path.items()
                if lp[:len(path)] == path and self.open_in(lid, path)]

    def unsafe_for(self, leaf_id, path=()):
        """Some modus ponens inside the subtree at ``path`` has this leaf in
        its right (conditional-premise) subtree."""
        lp = self.leaf_path[leaf_id]
        for pe in self.imp_elims:
            if pe[:len(path)] != path:
                continue
            right = pe + (1,)
            if lp[:len(right)] == right:
                return True
        return False


def analyze(t: Proof) -> Analysis:
    paths, leaf_path, leaf_formula, discharged_by = {}, {}, {}, {}
    imp_elims = []
    problems = []
    pending_discharges = []

    def walk(nd, path):
        paths[path] = nd
        if nd.is_assumption():
            if nd.leaf_id in leaf_path:
                problems.append(("discharge", path, f"duplicate leaf id {nd.leaf_id!r}"))
            leaf_path[nd.leaf_id] = path
            leaf_formula[nd.leaf_id] = nd.conclusion
        if nd.discharges:
            pending_discharges.append((path, nd.discharges))
        for i, c in enumerate(nd.children):
            walk(c, path + (i,))

    walk(t, ())
    for path, ids in pending_discharges:
        for lid in sorted(ids):
            if lid not in leaf_path:
                problems.append(("discharge", path, f"discharge of unknown leaf {lid!r}"))
                continue
            lp = leaf_path[lid]
            if lp[:len(path)] != path or lp == path:
                problems.append(("discharge", path,
                                 f"leaf {lid!r} is not in the subtree it is discharged from"))
                continue
            if lid in discharged_by:
                problems.append(("discharge", path, f"leaf {lid!r} discharged twice"))
                continue
            discharged_by[lid] = path
    for path, nd in paths.items():
        if nd.rule == "imp_elim":
            imp_elims.append(path)
    return Analysis(paths, leaf_path, leaf_formula, discharged_by,
                    tuple(imp_elims), problems)


def path_str(path) -> str:
    return "r" + "".join(f".{i}" for i in path)


def unsafe_leaves(t: Proof) -> frozenset:
    """Leaf ids (open or discharged) lying in the right subtree of some
    modus ponens application."""
    an = analyze(t)
    return frozenset(lid for lid in an.leaf_path if an.unsafe_for(lid))


def open_assumptions(t: Proof) -> frozenset:
    an = analyze(t)
    return frozenset(an.leaf_formula[lid] for lid in an.open_leaves_in(()))


def split_assumptions(t: Proof):
    """(unsafe_open, safe_only_open) sentence sets; the first is the minimal
    left component of a split-context reading of the proof."""
    an = analyze(t)
    unsafe, safe = set(), set()
    for lid in an.open_leaves_in(()):
        if an.unsafe_for(lid):
            unsafe.add(an.leaf_formula[lid])
        else:
            safe.add(an.leaf_formula[lid])
    return frozenset(unsafe), frozenset(safe - unsafe)


def stratum(t: Proof) -> int:
    """-1 without modus ponens; otherwise one more than the right-premise
    stratum, maximised over the tree."""
    best = -1
    for c in t.children:
        best = max(best, stratum(c))
    if t.rule == "imp_elim":
        best = max(best, stratum(t.children[1]) + 1)
    return best


# ---------------------------------------------------------------------------
# axiom schemas
# ---------------------------------------------------------------------------

def _m_identity(f):
    if isinstance(f, Imp) and f.left == f.right:
        return {"phi": f.left}


def _m_imp_top(f):
    if isinstance(f, Imp) and f.right == TOP:
        return {"phi": f.left}


def _m_ex_falso(f):
    if isinstance(f, Imp) and isinstance(f.left, Bottom):
        return {"phi": f.right}


def _m_and_comp(f):
    if (isinstance(f, Imp) and isinstance(f.left, And)
            and isinstance(f.left.left, Imp) and isinstance(f.left.right, Imp)
            and isinstance(f.right, Imp) and isinstance(f.right.right, And)
            and f.left.left.left == f.left.right.left == f.right.left
            and f.left.left.right == f.right.right.left
            and f.left.right.right == f.right.right.right):
        return {"chi": f.right.left, "phi": f.right.right.left, "psi": f.right.right.right}


def _m_and_elim_l(f):
    if isinstance(f, Imp) and isinstance(f.left, And) and f.left.left == f.right:
        return {"phi": f.left.left, "psi": f.left.right}


def _m_and_elim_r(f):
    if isinstance(f, Imp) and isinstance(f.left, And) and f.left.right == f.right:
        return {"phi": f.left.left, "psi": f.left.right}


def _m_or_int_l(f):
    if isinstance(f, Imp) and isinstance(f.right, Or) and f.right.left == f.left:
        return {"phi": f.right.left, "psi": f.right.right}


def _m_or_int_r(f):
    if isinstance(f, Imp) and isinstance(f.right, Or) and f.right.right == f.left:
        return {"phi": f.right.left, "psi": f.right.right}


def _m_or_comp(f):
    if (isinstance(f, Imp) and isinstance(f.left, And)
            and isinstance(f.left.left, Imp) and isinstance(f.left.right, Imp)
            and isinstance(f.right, Imp) and isinstance(f.right.left, Or)
            and f.left.left.right == f.left.right.right == f.right.right
            and f.right.left.left == f.left.left.left
            and f.right.left.right == f.left.right.left):
        return {"phi": f.right.left.left, "psi": f.right.left.right, "chi": f.right.right}


def _m_distribution(f):
    if (isinstance(f, Imp) and isinstance(f.left, And) and isinstance(f.left.right, Or)
            and isinstance(f.right, Or)
            and isinstance(f.right.left, And) and isinstance(f.right.right, And)
            and f.right.left.left == f.left.left == f.right.right.left
            and f.right.left.right == f.left.right.left
            and f.right.right.right == f.left.right.right):
        return {"phi": f.left.left, "psi": f.left.right.left, "chi": f.left.right.right}


def _m_forall_imp(f):
    if (isinstance(f, Imp) and isinstance(f.left, Forall)
            and isinstance(f.left.body, Imp) and isinstance(f.right, Imp)
            and isinstance(f.right.right, Forall)
            and f.left.var == f.right.right.var
            and f.left.body.left == f.right.left
            and f.left.body.right == f.right.right.body):
        return {"v": f.left.var, "phi": f.right.left, "psi": f.right.right.body}


def _m_forall_inst(f):
    if isinstance(f, Imp) and isinstance(f.left, Forall):
        ok, t = match_instantiation(f.left.body, f.left.var, f.right)
        if ok:
            return {"v": f.left.var, "phi": f.left.body, "t": t}


def _m_exists_int(f):
    if isinstance(f, Imp) and isinstance(f.right, Exists):
        ok, t = match_instantiation(f.right.body, f.right.var, f.left)
        if ok:
            return {"v": f.right.var, "phi": f.right.body, "t": t}


def _m_exists_imp(f):
    if (isinstance(f, Imp) and isinstance(f.left, Forall)
            and isinstance(f.left.body, Imp) and isinstance(f.right, Imp)
            and isinstance(f.right.left, Exists)
            and f.left.var == f.right.left.var
            and f.left.body.left == f.right.left.body
            and f.left.body.right == f.right.right):
        return {"v": f.left.var, "phi": f.right.left.body, "psi": f.right.right}


def _m_cd(f):
    if (isinstance(f, Imp) and isinstance(f.left, Forall)
            and isinstance(f.left.body, Or) and isinstance(f.right, Or)
            and isinstance(f.right.right, Forall)
            and f.left.var == f.right.right.var
            and f.left.body.left == f.right.left
            and f.left.body.right == f.right.right.body):
        return {"v": f.left.var, "phi": f.right.left, "psi": f.right.right.body}


def _m_inf_distribution(f):
    if (isinstance(f, Imp) and isinstance(f.left, And)
            and isinstance(f.left.right, Exists) and isinstance(f.right, Exists)
            and isinstance(f.right.body, And)
            and f.left.right.var == f.right.var
            and f.right.body.left == f.left.left
            and f.right.body.right == f.left.right.body):
        return {"v": f.right.var, "phi": f.left.left, "psi": f.left.right.body}


def _m_transitivity(f):
    if (isinstance(f, Imp) and isinstance(f.left, And)
            and isinstance(f.left.left, Imp) and isinstance(f.left.right, Imp)
            and isinstance(f.right, Imp)
            and f.left.left.right == f.left.right.left
            and f.right.left == f.left.left.left
            and f.right.right == f.left.right.right):
        return {"phi": f.left.left.left, "psi": f.left.left.right, "chi": f.left.right.right}


def _m_suffixing(f):
    if (isinstance(f, Imp) and isinstance(f.left, Imp) and isinstance(f.right, Imp)
            and isinstance(f.right.left, Imp) and isinstance(f.right.right, Imp)
            and f.left.left == f.right.right.left
            and f.left.right == f.right.left.left
            and f.right.left.right == f.right.right.right):
        return {"phi": f.left.left, "psi": f.left.right, "chi": f.right.left.right}


def _m_prefixing(f):
    if (isinstance(f, Imp) and isinstance(f.left, Imp) and isinstance(f.right, Imp)
            and isinstance(f.right.left, Imp) and isinstance(f.right.right, Imp)
            and f.right.left.left == f.right.right.left
            and f.right.left.right == f.left.left
            and f.right.right.right == f.left.right):
        return {"phi": f.left.left, "psi": f.left.right, "chi": f.right.left.left}


def _m_weakening(f):
    if isinstance(f, Imp) and isinstance(f.right, Imp) and f.left == f.right.right:
        return {"phi": f.left, "psi": f.right.left}


AXIOM_MATCHERS = {
    "identity": _m_identity, "imp_top": _m_imp_top, "ex_falso": _m_ex_falso,
    "and_comp": _m_and_comp, "and_elim_l": _m_and_elim_l, "and_elim_r": _m_and_elim_r,
    "or_int_l": _m_or_int_l, "or_int_r": _m_or_int_r, "or_comp": _m_or_comp,
    "distribution": _m_distribution, "forall_imp": _m_forall_imp,
    "forall_inst": _m_forall_inst, "exists_int": _m_exists_int,
    "exists_imp": _m_exists_imp, "cd": _m_cd, "inf_distribution": _m_inf_distribution,
    "transitivity": _m_transitivity, "suffixing": _m_suffixing,
    "prefixing": _m_prefixing, "weakening": _m_weakening,
}

BASE_AXIOMS = frozenset({
    "identity", "imp_top", "ex_falso", "and_comp", "and_elim_l", "and_elim_r",
    "or_int_l", "or_int_r", "or_comp", "distribution", "forall_imp",
    "forall_inst", "exists_int", "exists_imp", "cd", "inf_distribution",
})

AXIOMS_BY_LEVEL = {
    "b": BASE_AXIOMS,
    "dj": BASE_AXIOMS | {"transitivity"},
    "tj": BASE_AXIOMS | {"transitivity", "suffixing", "prefixing"},
    "tjk": BASE_AXIOMS | {"transitivity", "suffixing", "prefixing", "weakening"},
}


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class System:
    kind: str                       # "nd" or "ax"
    stratum_bound: int | None = None  # nd: None = unrestricted, -1 = none
    identity: str = "absent"
    level: str = "tjk"              # ax only
    exists_elim: bool = True        # ax only

    @property
    def name(self):
        if self.kind == "ax":
            return {"b": "bd+", "dj": "djd+", "tj": "tjd+",
                    "tjk": "tjkd+" if self.exists_elim else "tjk+"}[self.level]
        base = "nbqlcd_r" if self.stratum_bound is None else (
            "nbqlcd" if self.stratum_bound == -1 else f"nbqlcd[{self.stratum_bound}]")
        suffix = {"absent": "", "congruence": "+eq", "strict": "+eqxm"}[self.identity]
        return base + suffix


NBQLCD_R = System("nd", None)
NBQLCD = System("nd", -1)


def nbqlcd_n(n: int) -> System:
    return System("nd", n)


def parse_system(s) -> System:
    if isinstance(s, System):
        return s
    text = s.strip().lower()
    identity = "absent"
    if text.endswith("+eqxm"):
        identity, text = "strict", text[:-5]
    elif text.endswith("+eq"):
        identity, text = "congruence", text[:-3]
    ax = {"bd+": ("b", True), "djd+": ("dj", True), "tjd+": ("tj", True),
          "tjkd+": ("tjk", True), "tjk+": ("tjk", False)}
    if text in ax:
        if identity != "absent":
            raise ValueError("identity rules are only wired into the nd systems")
        level, ee = ax[text]
        return System("ax", level=level, exists_elim=ee)
    if text == "nbqlcd_r":
        return System("nd", None, identity)
    if text == "nbqlcd":
        return System("nd", -1, identity)
    if text.startswith("nbqlcd[") and text.endswith("]"):
        return System("nd", int(text[7:-1]), identity)
    raise ValueError(f"unknown system {s!r}")


# ---------------------------------------------------------------------------
# checking
# ---------------------------------------------------------------------------

@dataclass
class Violation:
    node: str
    constraint: str
    message: str

    def to_json(self):
        return {"node": self.node, "constraint": self.constraint, "message": self.message}


@dataclass
class CheckReport:
    valid: bool
    violations: list
    stratum: int
    open_assumptions: frozenset
    unsafe_open: frozenset
    safe_open: frozenset

    def to_json(self):
        return {"valid": self.valid,
                "violations": [v.to_json() for v in self.violations]}


def check_proof(t: Proof, system) -> CheckReport:
    system = parse_system(system)
    an = analyze(t)
    out = [Violation(path_str(p), kind, msg) for kind, p, msg in an.problems]
    for path, nd in sorted(an.paths.items()):
        _check_node(nd, path, an, system, out)
    unsafe, safe = split_assumptions(t)
    return CheckReport(not out, out, stratum(t), open_assumptions(t), unsafe, safe)


def _allowed_rules(system: System):
    if system.kind == "ax":
        rules = set(AX_RULES)
        if not system.exists_elim:
            rules.discard("exists_elim")
        return rules
    rules = set(ND_RULES)
    if system.identity in ("congruence", "strict"):
        rules |= {"eq_int", "eq_elim"}
    if system.identity == "strict":
        rules.add("id_xm")
    if system.stratum_bound == -1:
        rules.discard("imp_elim")
    return rules


def _check_node(nd, path, an, system, out):
    here = path_str(path)

    def bad(constraint, message):
        out.append(Violation(here, constraint, message))

    if not is_sentence(nd.conclusion):
        bad("C1", f"label is not a sentence: {pretty(nd.conclusion)}")
        return
    if nd.is_assumption():
        if nd.children or nd.discharges:
            bad("rule", "assumption leaves have no children or discharges")
        return

    rule = nd.rule
    if rule.startswith("axiom:"):
        _check_axiom_node(nd, rule[6:], system, bad)
        return
    allowed = _allowed_rules(system)
    if rule not in allowed:
        if rule in ND_RULES | IDENTITY_RULES | AX_RULES:
            bad("system", f"rule {rule} is not part of {system.name}")
        else:
            bad("rule", f"unknown rule {rule!r}")
        return
    want = _CHILD_COUNT.get(rule)
    if want is not None and len(nd.children) != want:
        bad("rule", f"{rule} expects {want} premises, got {len(nd.children)}")
        return
    if nd.discharges and rule not in DISCHARGING:
        bad("discharge", f"rule {rule} cannot discharge assumptions")
    _check_shape(nd, path, an, system, bad)


def _check_axiom_node(nd, schema, system, bad):
    if system.kind != "ax":
        bad("system", "axiom leaves only occur in the axiomatic systems")
        return
    if nd.children or nd.discharges:
        bad("rule", "axiom nodes take no premises")
        return
    matcher = AXIOM_MATCHERS.get(schema)
    if matcher is None:
        bad("rule", f"unknown axiom schema {schema!r}")
        return
    if schema not in AXIOMS_BY_LEVEL[system.level]:
        bad("system", f"axiom {schema} is not available in {system.name}")
        return
    if matcher(nd.conclusion) is None:
        bad("rule", f"conclusion does not instantiate {schema}: {pretty(nd.conclusion)}")


def _check_discharges(nd, path, an, bad, slots, enforce_c5):
    """``slots``: list of (child_index, required_formula).  Every discharged
    leaf must be an open occurrence of a slot formula inside the matching
    child; in the simplified systems it must additionally be safe there
    (C5).  The axiomatic systems discharge unrestrictedly."""
    for lid in sorted(nd.discharges):
        if lid not in an.leaf_path:
            continue  # already reported during indexing
        if an.discharged_by.get(lid) != path:
            continue
        placed = False
        for idx, want in slots:
            sub = path + (idx,)
            if an.in_subtree(lid, sub) and an.leaf_formula[lid] == want:
                placed = True
                break
        if not placed:
            bad("discharge",
                f"leaf {lid!r} ({pretty(an.leaf_formula[lid])}) does not match "
                f"a dischargeable assumption of this rule")
            continue
        if enforce_c5 and an.unsafe_for(lid, path):
            bad("C5", f"leaf {lid!r} occurs unsafely and may not be discharged")


def _eigenparam_for_forall(nd):
    """(index or None, error) for a universal introduction node."""
    concl, premise = nd.conclusion, nd.children[0].conclusion
    if not isinstance(concl, Forall):
        return None, "conclusion is not universally quantified"
    body, v = concl.body, concl.var
    if v not in free_vars(body):
        if premise != body:
            return None, "vacuous generalisation must repeat its premise"
        return None, None
    from .syntax import _find_instantiation
    t = _find_instantiation(body, v, premise)
    if not isinstance(t, Param):
        return None, "premise does not instantiate the conclusion with a parameter"
    if substitute(body, v, t) != premise:
        return None, "premise does not match the generalised formula"
    return t.index, None


def _eigenparam_for_exists(nd, an, path):
    """(index or None, witness_formula or None, error)."""
    major, body_node = nd.children
    ex = major.conclusion
    if not isinstance(ex, Exists):
        return None, None, "major premise is not existentially quantified"
    matrix, v = ex.body, ex.var
    discharged = sorted(nd.discharges)
    if v not in free_vars(matrix):
        return None, matrix, None
    if not discharged:
        return None, None, None  # vacuous: any fresh parameter works
    formulas = {an.leaf_formula[lid] for lid in discharged if lid in an.leaf_formula}
    if len(formulas) != 1:
        return None, None, "discharged witness occurrences are not uniform"
    xi = formulas.pop()
    from .syntax import _find_instantiation
    t = _find_instantiation(matrix, v, xi)
    if not isinstance(t, Param) or substitute(matrix, v, t) != xi:
        return None, None, "discharged assumptions are not a parameter instance of the matrix"
    return t.index, xi, None


def _check_shape(nd, path, an, system, bad):
    rule, concl = nd.rule, nd.conclusion
    kids = [c.conclusion for c in nd.children]

    if rule == "top_int":
        if concl != TOP:
            bad("rule", "the truth constant is the only conclusion here")
    elif rule == "bot_elim":
        if not isinstance(kids[0], Bottom):
            bad("rule", "premise must be the falsity constant")
    elif rule == "and_int":
        if concl != And(kids[0], kids[1]):
            bad("rule", "conclusion is not the conjunction of the premises")
    elif rule == "and_elim_l":
        if not (isinstance(kids[0], And) and kids[0].left == concl):
            bad("rule", "conclusion is not the left conjunct of the premise")
    elif rule == "and_elim_r":
        if not (isinstance(kids[0], And) and kids[0].right == concl):
            bad("rule", "conclusion is not the right conjunct of the premise")
    elif rule == "or_int_l":
        if not (isinstance(concl, Or) and concl.left == kids[0]):
            bad("rule", "premise is not the left disjunct of the conclusion")
    elif rule == "or_int_r":
        if not (isinstance(concl, Or) and concl.right == kids[0]):
            bad("rule", "premise is not the right disjunct of the conclusion")
    elif rule == "or_elim":
        major = kids[0]
        if not isinstance(major, Or):
            bad("rule", "major premise is not a disjunction")
            return
        if kids[1] != concl or kids[2] != concl:
            bad("rule", "branches must conclude the main conclusion")
            return
        _check_discharges(nd, path, an, bad,
                          [(1, major.left), (2, major.right)],
                          system.kind == "nd")
    elif rule == "imp_int":
        if not isinstance(concl, Imp):
            bad("rule", "conclusion of conditional proof must be a conditional")
            return
        if kids[0] != concl.right:
            bad("rule", "premise must be the consequent of the conclusion")
            return
        _check_discharges(nd, path, an, bad, [(0, concl.left)],
                          system.kind == "nd")
    elif rule == "imp_elim":
        if not (isinstance(kids[1], Imp) and kids[1].left == kids[0]
                and kids[1].right == concl):
            bad("rule", "premises do not fit modus ponens")
            return
        if system.kind == "nd" and system.stratum_bound is not None \
                and system.stratum_bound >= 0:
            got = stratum(nd.children[1])
            if got >= system.stratum_bound:
                bad("system",
                    f"right premise has stratum {got}, needs < {system.stratum_bound}")
    elif rule == "int_trans":
        ok = (isinstance(kids[0], Imp) and isinstance(kids[1], Imp)
              and isinstance(concl, Imp) and kids[0].right == kids[1].left
              and concl.left == kids[0].left and concl.right == kids[1].right)
        if not ok:
            bad("rule", "premises do not chain")
    elif rule == "int_and_int":
        ok = (isinstance(kids[0], Imp) and isinstance(kids[1], Imp)
              and isinstance(concl, Imp) and isinstance(concl.right, And)
              and kids[0].left == kids[1].left == concl.left
              and concl.right.left == kids[0].right
              and concl.right.right == kids[1].right)
        if not ok:
            bad("rule", "premises do not combine under one antecedent")
    elif rule == "int_or_elim":
        ok = (isinstance(kids[0], Imp) and isinstance(kids[1], Imp)
              and isinstance(concl, Imp) and isinstance(concl.left, Or)
              and kids[0].right == kids[1].right == concl.right
              and concl.left.left == kids[0].left
              and concl.left.right == kids[1].left)
        if not ok:
            bad("rule", "premises do not combine under one consequent")
    elif rule == "int_forall_int":
        ok = (isinstance(kids[0], Forall) and isinstance(kids[0].body, Imp)
              and isinstance(concl, Imp) and isinstance(concl.right, Forall)
              and concl.right.var == kids[0].var
              and kids[0].body.left == concl.left
              and kids[0].body.right == concl.right.body)
        if not ok:
            bad("rule", "premise is not the internalised form of the conclusion")
    elif rule == "int_exists_elim":
        ok = (isinstance(kids[0], Forall) and isinstance(kids[0].body, Imp)
              and isinstance(concl, Imp) and isinstance(concl.left, Exists)
              and concl.left.var == kids[0].var
              and kids[0].body.left == concl.left.body
              and kids[0].body.right == concl.right)
        if not ok:
            bad("rule", "premise is not the internalised form of the conclusion")
    elif rule == "forall_int":
        idx, err = _eigenparam_for_forall(nd)
        if err:
            bad("rule", err)
            return
        if idx is not None:
            if idx in formula_params(concl.body):
                bad("C2", f"parameter #{idx} occurs in the generalised formula")
            for lid in an.open_leaves_in(path + (0,)):
                if idx in formula_params(an.leaf_formula[lid]):
                    bad("C2", f"parameter #{idx} occurs in open assumption "
                              f"{pretty(an.leaf_formula[lid])}")
    elif rule == "forall_elim":
        prem = kids[0]
        if not isinstance(prem, Forall):
            bad("rule", "premise is not universally quantified")
            return
        ok, _ = match_instantiation(prem.body, prem.var, concl)
        if not ok:
            bad("rule", "conclusion is not an instance of the premise")
    elif rule == "cd":
        prem = kids[0]
        ok = (isinstance(prem, Forall) and isinstance(prem.body, Or)
              and isinstance(concl, Or) and isinstance(concl.right, Forall)
              and concl.right.var == prem.var
              and prem.body.left == concl.left
              and prem.body.right == concl.right.body)
        if not ok:
            bad("rule", "conclusion does not pull the quantifier inside the disjunction")
    elif rule == "exists_int":
        if not isinstance(concl, Exists):
            bad("rule", "conclusion is not existentially quantified")
            return
        ok, _ = match_instantiation(concl.body, concl.var, kids[0])
        if not ok:
            bad("rule", "premise is not an instance of the conclusion")
    elif rule == "exists_elim":
        if kids[1] != concl:
            bad("rule", "body must conclude the main conclusion")
            return
        idx, xi, err = _eigenparam_for_exists(nd, an, path)
        if err:
            bad("rule", err)
            return
        major = kids[0]
        body_path = path + (1,)
        if xi is not None:
            _check_discharges(nd, path, an, bad, [(1, xi)],
                              system.kind == "nd")
            # C4: every open occurrence of the witness inside the body is closed here
            for lid in an.open_leaves_in(body_path):
                if an.leaf_formula[lid] == xi and lid not in nd.discharges:
                    bad("C4", f"open witness occurrence {lid!r} is not discharged")
        if idx is not None:
            if idx in formula_params(major.body):
                bad("C3", f"parameter #{idx} occurs in the quantified matrix")
            if idx in formula_params(concl):
                bad("C3", f"parameter #{idx} occurs in the conclusion")
            for lid in an.open_leaves_in(body_path):
                if lid in nd.discharges:
                    continue
                if idx in formula_params(an.leaf_formula[lid]):
                    bad("C3", f"parameter #{idx} occurs in open assumption "
                              f"{pretty(an.leaf_formula[lid])}")
    elif rule == "affixing":
        ok = (isinstance(kids[0], Imp) and isinstance(kids[1], Imp)
              and isinstance(concl, Imp)
              and isinstance(concl.left, Imp) and isinstance(concl.right, Imp)
              and concl.left.left == kids[0].right
              and concl.left.right == kids[1].left
              and concl.right.left == kids[0].left
              and concl.right.right == kids[1].right)
        if not ok:
            bad("rule", "premises do not fit the affixing rule")
    elif rule == "eq_int":
        ok = (isinstance(concl, Atom) and concl.rel == "=" and len(concl.args) == 2
              and concl.args[0] == concl.args[1] and is_closed_term(concl.args[0]))
        if not ok:
            bad("rule", "conclusion is not a reflexive identity")
    elif rule == "eq_elim":
        eq = kids[0]
        if not (isinstance(eq, Atom) and eq.rel == "=" and len(eq.args) == 2):
            bad("rule", "first premise must be an identity")
            return
        t1, t2 = eq.args
        if not _replaces(kids[1], concl, t1, t2):
            bad("rule", "conclusion does not replace occurrences of the identified term")
    elif rule == "id_xm":
        ok = (isinstance(concl, Or) and isinstance(concl.left, Atom)
              and concl.left.rel == "=" and isinstance(concl.right, Imp)
              and concl.right.left == concl.left
              and isinstance(concl.right.right, Bottom))
        if not ok:
            bad("rule", "conclusion is not an identity excluded middle instance")


def _replaces(before, after, t1, t2):
    """``after`` is ``before`` with zero or more occurrences of t1 become t2."""
    if before == after:
        return True
    if type(before) is not type(after):
        return False
    if isinstance(before, Atom):
        if before.rel != after.rel or len(before.args) != len(after.args):
            return False
        return all(_replaces_term(a, b, t1, t2) for a, b in zip(before.args, after.args))
    if isinstance(before, (And, Or, Imp)):
        return (_replaces(before.left, after.left, t1, t2)
                and _replaces(before.right, after.right, t1, t2))
    if isinstance(before, (Forall, Exists)):
        return before.var == after.var and _replaces(before.body, after.body, t1, t2)
    return False


def _replaces_term(a, b, t1, t2):
    if a == b:
        return True
    if a == t1 and b == t2:
        return True
    from .syntax import Fn
    if isinstance(a, Fn) and isinstance(b, Fn) and a.name == b.name \
            and len(a.args) == len(b.args):
        return all(_replaces_term(x, y, t1, t2) for x, y in zip(a.args, b.args))
    return False


# ---------------------------------------------------------------------------
# judgments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Judgment:
    gamma: tuple
    sigma: tuple
    stratum_claim: object        # int >= -1 or "r"
    conclusion: Formula


def system_for_claim(claim, identity="absent") -> System:
    if claim == "r":
        return System("nd", None, identity)
    return System("nd", int(claim), identity)


def check_judgment(j: Judgment, t: Proof, identity="absent"):
    """True iff the proof checks in the claimed system, concludes the stated
    sentence, its open assumptions fall inside both contexts together, and
    its unsafely-occurring open assumptions fall inside the left context."""
    report = check_proof(t, system_for_claim(j.stratum_claim, identity))
    if not report.valid or t.conclusion != j.conclusion:
        return False, report
    allowed = set(j.gamma) | set(j.sigma)
    if not set(report.open_assumptions) <= allowed:
        return False, report
    if not set(report.unsafe_open) <= set(j.gamma):
        return False, report
    return True, report


# ---------------------------------------------------------------------------
# eigenvariable renaming
# ---------------------------------------------------------------------------

def _rename_params_in_tree(t: Proof, old: int, new: int) -> Proof:
    concl = replace_param(t.conclusion, old, new)
    children = tuple(_rename_params_in_tree(c, old, new) for c in t.children)
    return replace(t, conclusion=concl, children=children)


def eigenparameter(nd: Proof) -> int | None:
    """The inferred parameter of a quantifier node, when it is pinned."""
    if nd.rule == "forall_int":
        idx, _ = _eigenparam_for_forall(nd)
        return idx
    if nd.rule == "exists_elim":
        an = analyze(nd)
        idx, _, _ = _eigenparam_for_exists(nd, an, ())
        return idx
    return None


def rename_eigenvariables(t: Proof, avoid) -> Proof:
    """Rename quantifier parameters so none of them lies in ``avoid``.

    Conclusion and open assumptions are untouched (their parameters are never
    eigenparameters of a valid proof), so grafting the result into a host
    that uses ``avoid`` stays checkable.
    """
    avoid = set(avoid)
    from .syntax import parameters_of
    used = set(parameters_of(t)) | avoid
    counter = itertools.count(max(used) + 1 if used else 0)

    def fresh():
        return next(counter)

    def go(nd):
        children = tuple(go(c) for c in nd.children)
        nd = replace(nd, children=children)
        idx = eigenparameter(nd)
        if idx is not None and idx in avoid:
            new = fresh()
            if nd.rule == "forall_int":
                sub = _rename_params_in_tree(nd.children[0], idx, new)
                nd = replace(nd, children=(sub,))
            else:
                body = _rename_params_in_tree(nd.children[1], idx, new)
                nd = replace(nd, children=(nd.children[0], body))
        return nd

    return go(t)


# ---------------------------------------------------------------------------
# canonical form and JSON
# ---------------------------------------------------------------------------

def canonical_leaf_ids(t: Proof) -> Proof:
    mapping = {}

    def collect(nd):
        if nd.is_assumption() and nd.leaf_id not in mapping:
            mapping[nd.leaf_id] = f"a{len(mapping)}"
        for c in nd.children:
            collect(c)

    collect(t)

    def rebuild(nd):
        children = tuple(rebuild(c) for c in nd.children)
        return replace(nd, children=children,
                       discharges=frozenset(mapping[x] for x in nd.discharges
                                            if x in mapping),
                       leaf_id=mapping.get(nd.leaf_id) if nd.leaf_id else None)

    return rebuild(t)


def proofs_equal(a: Proof, b: Proof) -> bool:
    return canonical_leaf_ids(a) == canonical_leaf_ids(b)


def proof_to_json(t: Proof) -> dict:
    if t.is_assumption():
        return {"assume": pretty(t.conclusion), "id": t.leaf_id}
    out = {"rule": t.rule, "conclusion": pretty(t.conclusion),
           "children": [proof_to_json(c) for c in t.children]}
    if t.discharges:
        out["discharges"] = sorted(t.discharges)
    return out


def _collect_texts(data, texts):
    if not isinstance(data, dict):
        raise ProofJsonError(f"proof nodes must be objects, got {type(data).__name__}")
    if "assume" in data:
        texts.append(data["assume"])
        return
    if "conclusion" not in data or "rule" not in data:
        raise ProofJsonError("proof node needs 'rule' and 'conclusion'")
    texts.append(data["conclusion"])
    for c in data.get("children", ()):
        _collect_texts(c, texts)


def proof_from_json(data, sig=None) -> Proof:
    texts: list = []
    _collect_texts(data, texts)
    if sig is None:
        try:
            sig = infer_signature(texts)
        except ValueError as exc:
            raise ProofJsonError(str(exc)) from exc
    counter = itertools.count()

    def build(d):
        try:
            if "assume" in d:
                phi = parse_formula(d["assume"], sig)
                lid = str(d.get("id") or f"L{next(counter)}")
                return Proof(ASSUME, phi, leaf_id=lid)
            phi = parse_formula(d["conclusion"], sig)
            children = tuple(build(c) for c in d.get("children", ()))
            discharges = frozenset(str(x) for x in d.get("discharges", ()))
            return Proof(str(d["rule"]), phi, children, discharges)
        except ProofJsonError:
            raise
        except ValueError as exc:
            raise ProofJsonError(str(exc)) from exc

    return build(data)


def load_proof(path, sig=None) -> Proof:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProofJsonError(f"not valid JSON: {exc}") from exc
    return proof_from_json(data, sig)
