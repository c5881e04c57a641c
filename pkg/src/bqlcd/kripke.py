"""Finite Kripke models over transitive frames, evaluation and model search.

Worlds are strings, the quantification domain is ``range(n)`` and is shared
by all worlds.  ``edges`` holds the accessibility relation as (lower, upper)
pairs: ``(w, u)`` means w sees u, and everything true at w persists to u.
Consequence is evaluated at reflexive worlds only; dropping that restriction
is the ``bqlcd`` search mode.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from .syntax import (
    And, Atom, Bottom, Const, Exists, Forall, Imp, Or, Param, Signature,
    Top, Var, free_vars, infer_signature, pretty,
)


class ModelError(ValueError):
    pass


class IntersectionConfigError(ValueError):
    """Preconditions of the intersection configuration are violated."""


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KripkeModel:
    worlds: tuple
    edges: frozenset            # (w, u) pairs, transitively closed
    domain_size: int
    consts: dict = field(default_factory=dict)     # name -> element
    funs: dict = field(default_factory=dict)       # name -> flat row-major table
    fun_arity: dict = field(default_factory=dict)
    rels: dict = field(default_factory=dict)       # name -> {world: frozenset(tuples)}
    rel_arity: dict = field(default_factory=dict)
    identity: str = "absent"

    def successors(self, w):
        return tuple(u for u in self.worlds if (w, u) in self.edges)

    def reflexive_worlds(self):
        return tuple(w for w in self.worlds if (w, w) in self.edges)

    def rel_at(self, name, w):
        return self.rels.get(name, {}).get(w, frozenset())

    def domain(self):
        return range(self.domain_size)


def transitive_closure(pairs, worlds):
    closed = set(pairs)
    changed = True
    while changed:
        changed = False
        for (a, b), (c, d) in itertools.product(tuple(closed), tuple(closed)):
            if b == c and (a, d) not in closed:
                closed.add((a, d))
                changed = True
    return frozenset(closed)


def make_model(worlds, edges, domain_size, consts=None, funs=None, fun_arity=None,
               rels=None, rel_arity=None, identity="absent", close=False, validate=True):
    worlds = tuple(worlds)
    edges = frozenset(tuple(e) for e in edges)
    if close:
        edges = transitive_closure(edges, worlds)
    rels = {r: dict(per) for r, per in (rels or {}).items()}
    rel_arity = dict(rel_arity or {})
    for r, per in rels.items():
        if r not in rel_arity:
            arities = {len(t) for ts in per.values() for t in ts}
            rel_arity[r] = arities.pop() if len(arities) == 1 else 0
        for w in worlds:
            per.setdefault(w, frozenset())
            per[w] = frozenset(tuple(t) for t in per[w])
    m = KripkeModel(worlds, edges, domain_size, dict(consts or {}), dict(funs or {}),
                    dict(fun_arity or {}), rels, rel_arity, identity)
    if validate:
        validate_model(m)
    return m


def validate_model(m: KripkeModel):
    """Exhaustive well-formedness check; raises ModelError on violation."""
    if not m.worlds:
        raise ModelError("model needs at least one world")
    if m.domain_size < 1:
        raise ModelError("domain must be non-empty")
    wset = set(m.worlds)
    for (w, u) in m.edges:
        if w not in wset or u not in wset:
            raise ModelError(f"edge ({w},{u}) uses an unknown world")
    for (w, u) in m.edges:
        for (x, z) in m.edges:
            if u == x and (w, z) not in m.edges:
                raise ModelError(f"accessibility not transitive: {w}<{u}<{z}")
    dom = set(m.domain())
    for c, v in m.consts.items():
        if v not in dom:
            raise ModelError(f"constant {c} denotes {v}, outside the domain")
    for f, table in m.funs.items():
        ar = m.fun_arity.get(f)
        if ar is None or len(table) != m.domain_size ** ar:
            raise ModelError(f"function table for {f} has the wrong size")
        if any(v not in dom for v in table):
            raise ModelError(f"function {f} maps outside the domain")
    for r, per in m.rels.items():
        ar = m.rel_arity[r]
        for w, tuples in per.items():
            for t in tuples:
                if len(t) != ar or any(v not in dom for v in t):
                    raise ModelError(f"tuple {t} bad for relation {r} at {w}")
        for (w, u) in m.edges:
            if not per.get(w, frozenset()) <= per.get(u, frozenset()):
                raise ModelError(f"persistence fails for {r} between {w} and {u}")
    if m.identity != "absent":
        _validate_identity(m)


def _validate_identity(m):
    per = m.rels.get("=")
    if per is None or m.rel_arity.get("=") != 2:
        raise ModelError("identity mode set but '=' missing or not binary")
    diag = frozenset((a, a) for a in m.domain())
    if m.identity == "strict":
        for w in m.worlds:
            if per[w] != diag:
                raise ModelError(f"strict identity requires the diagonal at {w}")
        return
    for w in m.worlds:
        eq = per[w]
        if not diag <= eq:
            raise ModelError(f"'=' not reflexive at {w}")
        if any((b, a) not in eq for (a, b) in eq):
            raise ModelError(f"'=' not symmetric at {w}")
        if any((a, d) not in eq for (a, b) in eq for (c, d) in eq if b == c):
            raise ModelError(f"'=' not transitive at {w}")
        for f, table in m.funs.items():
            ar = m.fun_arity[f]
            for xs in itertools.product(m.domain(), repeat=ar):
                for ys in itertools.product(m.domain(), repeat=ar):
                    if all((x, y) in eq for x, y in zip(xs, ys)):
                        fx = _apply_fun(m, f, xs)
                        fy = _apply_fun(m, f, ys)
                        if (fx, fy) not in eq:
                            raise ModelError(f"'=' not a congruence for {f} at {w}")
        for r, rper in m.rels.items():
            if r == "=":
                continue
            ar = m.rel_arity[r]
            ext = rper[w]
            for xs in ext:
                for ys in itertools.product(m.domain(), repeat=ar):
                    if all((x, y) in eq for x, y in zip(xs, ys)) and ys not in ext:
                        raise ModelError(f"'=' not compatible with {r} at {w}")


def _apply_fun(m, name, args):
    idx = 0
    for a in args:
        idx = idx * m.domain_size + a
    return m.funs[name][idx]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def eval_term(m: KripkeModel, t, asg=None):
    if isinstance(t, Var):
        if asg is None or t.name not in asg:
            raise ModelError(f"no assignment for variable {t.name}")
        return asg[t.name]
    if isinstance(t, Const):
        if t.name not in m.consts:
            raise ModelError(f"constant {t.name} not interpreted")
        return m.consts[t.name]
    if isinstance(t, Param):
        key = f"#{t.index}"
        if key not in m.consts:
            raise ModelError(f"parameter #{t.index} not interpreted")
        return m.consts[key]
    return _apply_fun(m, t.name, tuple(eval_term(m, a, asg) for a in t.args))


class Evaluator:
    """Satisfaction with memoisation over (world, formula, relevant assignment)."""

    def __init__(self, model: KripkeModel):
        self.m = model
        self.memo = {}
        self.succ = {w: model.successors(w) for w in model.worlds}

    def sat(self, w, phi, asg=None):
        asg = asg or {}
        key = (w, phi, tuple(sorted((v, asg[v]) for v in free_vars(phi))))
        got = self.memo.get(key)
        if got is None:
            got = self._sat(w, phi, asg)
            self.memo[key] = got
        return got

    def _sat(self, w, phi, asg):
        if isinstance(phi, Top):
            return True
        if isinstance(phi, Bottom):
            return False
        if isinstance(phi, Atom):
            vals = tuple(eval_term(self.m, t, asg) for t in phi.args)
            return vals in self.m.rel_at(phi.rel, w)
        if isinstance(phi, And):
            return self.sat(w, phi.left, asg) and self.sat(w, phi.right, asg)
        if isinstance(phi, Or):
            return self.sat(w, phi.left, asg) or self.sat(w, phi.right, asg)
        if isinstance(phi, Imp):
            return all(not self.sat(u, phi.left, asg) or self.sat(u, phi.right, asg)
                       for u in self.succ[w])
        sub = dict(asg)
        if isinstance(phi, Exists):
            for b in self.m.domain():
                sub[phi.var] = b
                if self.sat(w, phi.body, sub):
                    return True
            return False
        for b in self.m.domain():
            sub[phi.var] = b
            if not self.sat(w, phi.body, sub):
                return False
        return True


def satisfies(model: KripkeModel, w, phi, asg=None) -> bool:
    if w not in model.worlds:
        raise ModelError(f"unknown world {w!r}")
    return Evaluator(model).sat(w, phi, asg)


def entails_in_model(model: KripkeModel, gamma, phi) -> bool:
    """True iff no reflexive world satisfies all of gamma but not phi."""
    ev = Evaluator(model)
    for w in model.reflexive_worlds():
        if all(ev.sat(w, g) for g in gamma) and not ev.sat(w, phi):
            return False
    return True


def check_persistence(model: KripkeModel, phi, sample=None) -> bool:
    """No (w, u, assignment) with w < u, w |= phi and u |/= phi."""
    if sample is None:
        fvs = sorted(free_vars(phi))
        sample = [dict(zip(fvs, combo))
                  for combo in itertools.product(model.domain(), repeat=len(fvs))]
    ev = Evaluator(model)
    for (w, u) in model.edges:
        for asg in sample:
            if ev.sat(w, phi, asg) and not ev.sat(u, phi, asg):
                return False
    return True


# ---------------------------------------------------------------------------
# chains of worlds
# ---------------------------------------------------------------------------

def add_chain(model: KripkeModel, w, n: int) -> KripkeModel:
    """Append a descending chain of n fresh irreflexive worlds below ``w``.

    Every fresh world sees the ones added before it, ``w``, and everything
    ``w`` sees; relation interpretations at fresh worlds are empty (the
    minimal persistent choice).  Satisfaction at the original worlds is
    untouched.
    """
    if n < 1:
        raise ValueError("chain length must be >= 1")
    if w not in model.worlds:
        raise ModelError(f"unknown world {w!r}")
    used = set(model.worlds)
    fresh = []
    i = 1
    while len(fresh) < n:
        cand = f"u{i}"
        if cand not in used:
            fresh.append(cand)
            used.add(cand)
        i += 1
    edges = set(model.edges)
    above = [w] + [u for u in model.worlds if (w, u) in model.edges]
    for j, new in enumerate(fresh):
        for up in above + fresh[:j]:
            edges.add((new, up))
    rels = {r: {**per, **{new: frozenset() for new in fresh}}
            for r, per in model.rels.items()}
    return replace(model, worlds=model.worlds + tuple(fresh),
                   edges=frozenset(edges), rels=rels)


# ---------------------------------------------------------------------------
# intersection configurations
# ---------------------------------------------------------------------------

def _check_or_exists_free(phi):
    if isinstance(phi, (Or, Exists)):
        raise IntersectionConfigError(f"formula contains a banned connective: {pretty(phi)}")
    if isinstance(phi, (And, Imp)):
        _check_or_exists_free(phi.left)
        _check_or_exists_free(phi.right)
    elif isinstance(phi, Forall):
        _check_or_exists_free(phi.body)


def check_intersection_config(model: KripkeModel, w, us, phi) -> bool:
    """Whether ``w`` agrees with the family ``us`` on the given formula.

    Demands the configuration: the interpretation at w of every relation is
    the intersection over the family, every family member is reflexive and
    seen by w, and every proper successor of w is seen by some member.  A
    violated condition raises, it does not return False.
    """
    us = tuple(us)
    if not us:
        raise IntersectionConfigError("the family of worlds is empty")
    _check_or_exists_free(phi)
    for r in model.rels:
        inter = None
        for u in us:
            ext = model.rel_at(r, u)
            inter = ext if inter is None else inter & ext
        if model.rel_at(r, w) != inter:
            raise IntersectionConfigError(f"condition (i) fails for relation {r}")
    for u in us:
        if (u, u) not in model.edges:
            raise IntersectionConfigError(f"condition (ii): {u} is not reflexive")
        if (w, u) not in model.edges:
            raise IntersectionConfigError(f"condition (iii): {w} does not see {u}")
    for z in model.worlds:
        if (w, z) in model.edges and z != w:
            if not any((u, z) in model.edges for u in us):
                raise IntersectionConfigError(f"condition (iv): no family member sees {z}")
    ev = Evaluator(model)
    left = ev.sat(w, phi)
    right = all(ev.sat(u, phi) for u in us)
    return left == right


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def model_to_json(m: KripkeModel) -> dict:
    return {
        "worlds": list(m.worlds),
        "edges": sorted([w, u] for (w, u) in m.edges),
        "domain": m.domain_size,
        "consts": dict(sorted(m.consts.items())),
        "funs": {f: list(t) for f, t in sorted(m.funs.items())},
        "fun_arity": dict(sorted(m.fun_arity.items())),
        "rels": {r: {w: sorted(list(t) for t in per.get(w, frozenset()))
                     for w in m.worlds}
                 for r, per in sorted(m.rels.items())},
        "rel_arity": dict(sorted(m.rel_arity.items())),
        "identity": m.identity,
    }


def model_from_json(data: dict) -> KripkeModel:
    """Load a model; edges are transitively closed, then everything is
    re-validated (a closure that breaks persistence is an error)."""
    try:
        worlds = [str(w) for w in data["worlds"]]
        edges = [(str(a), str(b)) for a, b in data.get("edges", [])]
        domain = int(data["domain"])
        rels = {}
        for r, per in data.get("rels", {}).items():
            rels[r] = {str(w): frozenset(tuple(int(x) for x in t) for t in tuples)
                       for w, tuples in per.items()}
        consts = {str(c): int(v) for c, v in data.get("consts", {}).items()}
        funs = {str(f): tuple(int(x) for x in t) for f, t in data.get("funs", {}).items()}
        fun_arity = {str(f): int(a) for f, a in data.get("fun_arity", {}).items()}
        rel_arity = {str(r): int(a) for r, a in data.get("rel_arity", {}).items()}
        identity = data.get("identity", "absent")
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed model JSON: {exc}") from exc
    return make_model(worlds, edges, domain, consts, funs, fun_arity,
                      rels, rel_arity, identity, close=True, validate=True)


def signature_of_model(m: KripkeModel) -> Signature:
    return Signature(frozenset(c for c in m.consts if not c.startswith("#")),
                     dict(m.fun_arity), dict(m.rel_arity), m.identity)


# ---------------------------------------------------------------------------
# countermodel search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchBounds:
    max_worlds: int
    max_domain: int
    require_reflexive_root: bool = True

    def __post_init__(self):
        if self.max_worlds < 1 or self.max_domain < 1:
            raise ValueError("search bounds must be >= 1")


@dataclass
class SearchResult:
    model: KripkeModel | None
    witness: str | None
    exhausted: bool
    notes: tuple = ()

    @property
    def found(self):
        return self.model is not None


MODES = ("bqlcd_r", "bqlcd", "strict", "congruence")

_FUN_TABLE_CAP = 4096


_frame_cache: dict = {}


def _frames(k: int):
    """Canonical transitive frames on k labelled worlds, isomorphism-pruned."""
    got = _frame_cache.get(k)
    if got is not None:
        return got
    nodes = tuple(range(k))
    pairs = [(a, b) for a in nodes for b in nodes]
    frames = []
    seen = set()
    perms = list(itertools.permutations(nodes))
    for bits in range(2 ** len(pairs)):
        rel = frozenset(p for i, p in enumerate(pairs) if bits >> i & 1)
        ok = True
        for (a, b) in rel:
            for (c, d) in rel:
                if b == c and (a, d) not in rel:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        key = min(tuple(sorted((perm[a], perm[b]) for (a, b) in rel)) for perm in perms)
        if key in seen:
            continue
        seen.add(key)
        frames.append(rel)
    frames.sort(key=lambda rel: (len(rel), tuple(sorted(rel))))
    out = []
    for rel in frames:
        succ = {a: tuple(b for b in nodes if (a, b) in rel) for a in nodes}
        upsets = [frozenset(s) for r in range(k + 1)
                  for s in itertools.combinations(nodes, r)
                  if all(b in s for a in s for b in succ[a])]
        upsets.sort(key=lambda s: (len(s), tuple(sorted(s))))
        auts = [perm for perm in perms
                if all((perm[a], perm[b]) in rel for (a, b) in rel)]
        out.append((rel, succ, upsets, auts))
    _frame_cache[k] = out
    return out


def _eq_assignments(frame_succ, nodes, m):
    """Persistent per-world equivalence relations over domain size m."""
    diag = frozenset((a, a) for a in range(m))
    eqs = [diag]
    # all equivalence relations on a tiny domain, built from set partitions
    def partitions(elems):
        if not elems:
            yield []
            return
        head, rest = elems[0], elems[1:]
        for part in partitions(rest):
            for i in range(len(part)):
                yield part[:i] + [[head] + part[i]] + part[i + 1:]
            yield [[head]] + part
    rels = []
    for part in partitions(list(range(m))):
        rel = frozenset((a, b) for block in part for a in block for b in block)
        rels.append(rel)
    rels = sorted(set(rels), key=lambda r: (len(r), tuple(sorted(r))))
    for combo in itertools.product(rels, repeat=len(nodes)):
        ok = all(combo[a] <= combo[b] for a in nodes for b in frame_succ[a])
        if ok:
            yield {a: combo[a] for a in nodes}


def countermodel_search(gamma, phi, bounds: SearchBounds, mode="bqlcd_r") -> SearchResult:
    """Exhaustive bounded search for a model refuting ``gamma |= phi``.

    Deterministic: models are enumerated in a fixed canonical order (world
    count, then domain size, then frame, then interpretations) and the first
    refuting world of the first refuting model is returned.  A ``None`` model
    with ``exhausted=True`` is not a validity proof, only exhaustion of the
    bounds.
    """
    if mode not in MODES:
        raise ValueError(f"unknown search mode {mode!r}")
    gamma = list(gamma)
    identity = {"strict": "strict", "congruence": "congruence"}.get(mode, "absent")
    sig = infer_signature(gamma + [phi], identity_mode=identity)
    need_reflexive = mode != "bqlcd"
    params = set()
    for f in gamma + [phi]:
        params |= _formula_params_set(f)
    params = sorted(params)
    const_names = sorted(sig.constants) + [f"#{i}" for i in params]
    rel_names = sorted(r for r in sig.relations if not (identity != "absent" and r == "="))
    fun_names = sorted(sig.functions)
    notes = []
    quantified = any(_has_quantifier(f) for f in gamma + [phi])
    uses_terms = bool(const_names or fun_names) or quantified or identity != "absent"
    max_domain = bounds.max_domain if uses_terms else 1
    if not quantified and not fun_names and identity == "absent":
        # quantifier- and function-free satisfaction only touches the
        # denotations of the occurring constants
        max_domain = min(max_domain, max(1, len(const_names)))

    for k in range(1, bounds.max_worlds + 1):
        for m in range(1, max_domain + 1):
            for frame, succ, upsets, auts in _frames(k):
                refl = tuple(a for a in range(k) if (a, a) in frame)
                if need_reflexive and not refl:
                    continue
                found = _search_frame(gamma, phi, k, m, frame, succ, upsets, auts,
                                      const_names, rel_names, fun_names,
                                      sig, identity, need_reflexive, notes)
                if found is not None:
                    return found
    return SearchResult(None, None, True, tuple(notes))


def _formula_params_set(phi):
    from .syntax import formula_params
    return set(formula_params(phi))


def _has_quantifier(phi):
    if isinstance(phi, (Forall, Exists)):
        return True
    if isinstance(phi, (And, Or, Imp)):
        return _has_quantifier(phi.left) or _has_quantifier(phi.right)
    return False


def _flat_apply(table, m, args):
    idx = 0
    for a in args:
        idx = idx * m + a
    return table[idx]


def _search_frame(gamma, phi, k, m, frame, succ, upsets, auts,
                  const_names, rel_names, fun_names, sig, identity,
                  need_reflexive, notes):
    nodes = tuple(range(k))
    witnesses = tuple(a for a in nodes if (a, a) in frame) if need_reflexive else nodes
    succ_mask = tuple(sum(1 << b for b in succ[a]) for a in nodes)
    full_mask = (1 << k) - 1
    upset_masks = [sum(1 << a for a in s) for s in upsets]

    fun_spaces = []
    for f in fun_names:
        ar = sig.functions[f]
        count = m ** (m ** ar)
        if count > _FUN_TABLE_CAP:
            note = f"skipped k={k} m={m}: function {f} has {count} tables"
            if note not in notes:
                notes.append(note)
            return None
        fun_spaces.append(list(itertools.product(range(m), repeat=m ** ar)))

    rel_specs = []          # (name, arity, tuples, choice space of mask vectors)
    for r in rel_names:
        ar = sig.relations[r]
        n_tuples = m ** ar
        rel_specs.append((r, ar, list(itertools.product(range(m), repeat=ar)),
                          list(itertools.product(upset_masks, repeat=n_tuples))))

    eq_assignments = [None]
    if identity != "absent":
        if identity == "strict":
            diag = frozenset((a, a) for a in range(m))
            eq_assignments = [{a: diag for a in nodes}]
        else:
            eq_assignments = list(_eq_assignments(succ, nodes, m))

    sentences = list(gamma) + [phi]
    rel_index = {r: i for i, (r, _, _, _) in enumerate(rel_specs)}
    if identity != "absent":
        rel_index["="] = len(rel_specs)
    const_index = {c: i for i, c in enumerate(const_names)}
    fun_index = {f: i for i, f in enumerate(fun_names)}

    def term_val(t, env, const_vals, fun_tables):
        if isinstance(t, Const):
            return const_vals[const_index[t.name]]
        if isinstance(t, Param):
            return const_vals[const_index[f"#{t.index}"]]
        if isinstance(t, Var):
            return env[t.name]
        idx = 0
        for a in t.args:
            idx = idx * m + term_val(a, env, const_vals, fun_tables)
        return fun_tables[fun_index[t.name]][idx]

    all_caches = []

    def compile_sentence(f_):
        """Closure evaluating the formula to a world mask, caching on the
        slice of the interpretation it actually mentions plus the variable
        environment.  Caches are flushed when constants or functions move."""
        dep = tuple(sorted(rel_deps(f_, set())))
        cache = {}
        all_caches.append(cache)

        if isinstance(f_, Top):
            return lambda interp, cv, ft, env: full_mask
        if isinstance(f_, Bottom):
            return lambda interp, cv, ft, env: 0
        if isinstance(f_, Atom):
            ridx = rel_index[f_.rel]
            args = f_.args

            def run_atom(interp, cv, ft, env):
                idx = 0
                for t in args:
                    idx = idx * m + term_val(t, dict(env), cv, ft)
                return interp[ridx][idx]
            return run_atom
        if isinstance(f_, (And, Or)):
            lk = compile_sentence(f_.left)
            rk = compile_sentence(f_.right)
            if isinstance(f_, And):
                return lambda interp, cv, ft, env: \
                    lk(interp, cv, ft, env) & rk(interp, cv, ft, env)
            return lambda interp, cv, ft, env: \
                lk(interp, cv, ft, env) | rk(interp, cv, ft, env)
        if isinstance(f_, Imp):
            lk = compile_sentence(f_.left)
            rk = compile_sentence(f_.right)

            def run_imp(interp, cv, ft, env):
                key = (tuple(interp[i] for i in dep), env)
                got = cache.get(key)
                if got is None:
                    bad = lk(interp, cv, ft, env) & ~rk(interp, cv, ft, env)
                    got = 0
                    for a in nodes:
                        if not (succ_mask[a] & bad):
                            got |= 1 << a
                    cache[key] = got
                return got
            return run_imp
        body = compile_sentence(f_.body)
        var = f_.var
        if isinstance(f_, Exists):
            def run_ex(interp, cv, ft, env):
                key = (tuple(interp[i] for i in dep), env)
                got = cache.get(key)
                if got is None:
                    got = 0
                    base = tuple((k_, v_) for (k_, v_) in env if k_ != var)
                    for b in range(m):
                        got |= body(interp, cv, ft,
                                    tuple(sorted(base + ((var, b),))))
                        if got == full_mask:
                            break
                    cache[key] = got
                return got
            return run_ex

        def run_all(interp, cv, ft, env):
            key = (tuple(interp[i] for i in dep), env)
            got = cache.get(key)
            if got is None:
                got = full_mask
                base = tuple((k_, v_) for (k_, v_) in env if k_ != var)
                for b in range(m):
                    got &= body(interp, cv, ft,
                                tuple(sorted(base + ((var, b),))))
                    if not got:
                        break
                cache[key] = got
            return got
        return run_all

    def rel_deps(f_, acc):
        if isinstance(f_, Atom):
            acc.add(rel_index[f_.rel])
        elif isinstance(f_, (And, Or, Imp)):
            rel_deps(f_.left, acc)
            rel_deps(f_.right, acc)
        elif isinstance(f_, (Forall, Exists)):
            rel_deps(f_.body, acc)
        return acc

    compiled = [compile_sentence(f_) for f_ in sentences]
    witness_mask = sum(1 << a for a in witnesses)

    const_space = list(itertools.product(range(m), repeat=len(const_names)))
    for const_vals in const_space:
        for fun_tables in itertools.product(*fun_spaces) if fun_spaces else [()]:
            for cache in all_caches:
                cache.clear()
            for rel_choice in itertools.product(*(space for (_, _, _, space) in rel_specs)) \
                    if rel_specs else [()]:
                for eqs in eq_assignments:
                    interp = list(rel_choice)
                    if eqs is not None:
                        if identity == "congruence" and not _congruence_masks_ok(
                                eqs, rel_choice, rel_specs, fun_tables,
                                fun_names, sig, m, nodes):
                            continue
                        eq_masks = []
                        for pair in itertools.product(range(m), repeat=2):
                            eq_masks.append(sum(1 << a for a in nodes
                                                if pair in eqs[a]))
                        interp.append(tuple(eq_masks))
                    interp = tuple(interp)
                    phi_mask = compiled[-1](interp, const_vals, fun_tables, ())
                    live = witness_mask & ~phi_mask
                    if not live:
                        continue
                    for idx in range(len(gamma)):
                        live &= compiled[idx](interp, const_vals, fun_tables, ())
                        if not live:
                            break
                    if not live:
                        continue
                    hit = (live & -live).bit_length() - 1
                    model = _materialize_masks(
                        nodes, frame, m, const_names, const_vals,
                        fun_names, fun_tables, rel_specs, rel_choice,
                        eqs, sig, identity)
                    validate_model(model)
                    w = model.worlds[hit]
                    ev = Evaluator(model)
                    assert all(ev.sat(w, g) for g in gamma) \
                        and not ev.sat(w, phi)
                    return SearchResult(model, w, False, tuple(notes))
    return None


def _congruence_masks_ok(eqs, rel_choice, rel_specs, fun_tables, fun_names,
                         sig, m, nodes):
    for a in nodes:
        eq = eqs[a]
        for fi, f in enumerate(fun_names):
            ar = sig.functions[f]
            table = fun_tables[fi]
            for xs in itertools.product(range(m), repeat=ar):
                for ys in itertools.product(range(m), repeat=ar):
                    if all((x, y) in eq for x, y in zip(xs, ys)):
                        if (_flat_apply(table, m, xs),
                                _flat_apply(table, m, ys)) not in eq:
                            return False
        for (r, ar, tuples, _), masks in zip(rel_specs, rel_choice):
            bit = 1 << a
            ext = {t for t, mask in zip(tuples, masks) if mask & bit}
            for xs in ext:
                for ys in itertools.product(range(m), repeat=ar):
                    if all((x, y) in eq for x, y in zip(xs, ys)) and ys not in ext:
                        return False
    return True


def _materialize_masks(nodes, frame, m, const_names, const_vals, fun_names,
                       fun_tables, rel_specs, rel_choice, eqs, sig, identity):
    worlds = tuple(f"w{a}" for a in nodes)
    edges = frozenset((worlds[a], worlds[b]) for (a, b) in frame)
    rels, rel_arity = {}, {}
    for (r, ar, tuples, _), masks in zip(rel_specs, rel_choice):
        rels[r] = {worlds[a]: frozenset(t for t, mask in zip(tuples, masks)
                                        if mask & (1 << a))
                   for a in nodes}
        rel_arity[r] = ar
    if eqs is not None:
        rels["="] = {worlds[a]: frozenset(eqs[a]) for a in nodes}
        rel_arity["="] = 2
    consts = dict(zip(const_names, const_vals))
    funs = {f: tuple(tab) for f, tab in zip(fun_names, fun_tables)}
    return KripkeModel(worlds, edges, m, consts, funs, dict(sig.functions),
                       rels, rel_arity, identity)
