"""Fixed-point truth construction over a descending chain of worlds.

A finite universe of sentences over a signature with the unary truth
predicate T and quotation constants ``q<k>`` (denoting the code k) is
evaluated over a chain w0 > w1 > ... each new world sitting below all the
previous ones and seeing them.  At each world the extension of T is the
least fixed point of the evaluation jump; extensions shrink as the chain
descends, and once the satisfaction record of the bottom world repeats, a
reflexive loop can be added without disturbing any truth value.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .kripke import Evaluator, KripkeModel
from .syntax import (
    And, Atom, Bottom, Const, Exists, Fn, Forall, Imp, Or, Param, Top,
    Formula, Signature, is_sentence, pretty, subformulas,
)


class UniverseError(ValueError):
    pass


class ChainInvariantError(RuntimeError):
    """An invariant the construction guarantees failed; a bug, not an input
    problem."""


_QUOTE_RE = re.compile(r"q(\d+)$")


# ---------------------------------------------------------------------------
# universes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SentenceUniverse:
    sentences: tuple           # Formula, ...
    texts: tuple               # original renderings, aligned with sentences
    code: dict                 # Formula -> domain element
    domain_size: int

    def codes(self):
        return frozenset(self.code.values())

    def code_of(self, phi):
        return self.code[phi]


def _quote_constants(phi):
    out = {}

    def on_term(t):
        if isinstance(t, Const):
            m = _QUOTE_RE.fullmatch(t.name)
            if not m:
                raise UniverseError(
                    f"only quotation constants q<k> may appear, got {t.name!r}")
            out[t.name] = int(m.group(1))
        elif isinstance(t, Fn):
            raise UniverseError("universe sentences use no function symbols")

    def walk(f_):
        if isinstance(f_, Atom):
            for a in f_.args:
                if isinstance(a, (Param,)):
                    raise UniverseError("parameters may not appear in universes")
                on_term(a)
        elif isinstance(f_, (And, Or, Imp)):
            walk(f_.left)
            walk(f_.right)
        elif isinstance(f_, (Forall, Exists)):
            walk(f_.body)

    walk(phi)
    return out


def make_universe(texts, codes, domain_size) -> SentenceUniverse:
    """Validate and build: sentences closed and subformula-closed, codes
    injective into the domain, every T-atom grounded in the domain."""
    if domain_size < 1:
        raise UniverseError("domain must be non-empty")
    sig = Signature(frozenset(), {}, {"T": 1})
    parsed = []
    consts = {}
    for text in texts:
        phi, inferred = _parse_universe_sentence(text)
        parsed.append(phi)
        consts.update(_quote_constants(phi))
    code = {}
    by_text = {}
    for text, phi in zip(texts, parsed):
        if text not in codes:
            raise UniverseError(f"no code assigned to {text!r}")
        by_text[text] = phi
        code[phi] = int(codes[text])
    if set(codes) - set(texts):
        extra = sorted(set(codes) - set(texts))
        raise UniverseError(f"codes listed for unknown sentences: {extra}")
    values = list(code.values())
    if len(set(values)) != len(values):
        raise UniverseError("codes must be injective")
    if any(v < 0 or v >= domain_size for v in values):
        raise UniverseError("codes must lie inside the domain")
    for phi in parsed:
        if not is_sentence(phi):
            raise UniverseError(f"not a sentence: {pretty(phi)}")
        for sub in subformulas(phi):
            # open subformulas live under their quantifier and are not
            # independent members of the universe
            if is_sentence(sub) and sub not in code:
                raise UniverseError(
                    f"not closed under subformulas: {pretty(sub)} missing "
                    f"(from {pretty(phi)})")
    for name, k in consts.items():
        if k >= domain_size:
            raise UniverseError(f"quotation {name} points outside the domain")
    for phi in parsed:
        for sub in subformulas(phi):
            if isinstance(sub, Atom) and sub.rel == "T":
                (arg,) = sub.args
                # bound variables range over the whole domain; only ground
                # references must point at a coded sentence
                if isinstance(arg, Const) and consts[arg.name] not in set(values):
                    raise UniverseError(
                        f"T-atom {pretty(sub)} does not point at a coded sentence")
    return SentenceUniverse(tuple(parsed), tuple(texts), code, domain_size)


def _parse_universe_sentence(text):
    # a tiny closed fragment: T-atoms over quotation constants plus the
    # propositional/quantifier skeleton
    sig = Signature(frozenset(), {}, {"T": 1})
    from .syntax import parse_inferring
    phi, inferred = parse_inferring(text, seed=sig)
    bad = [r for r, ar in inferred.relations.items() if r != "T"]
    if bad:
        raise UniverseError(f"only the truth predicate is available, got {bad}")
    return phi, inferred


def universe_from_json(data) -> SentenceUniverse:
    try:
        texts = [str(s) for s in data["sentences"]]
        codes = {str(k): int(v) for k, v in data["codes"].items()}
        domain = int(data["domain"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UniverseError(f"malformed universe JSON: {exc}") from exc
    return make_universe(texts, codes, domain)


def universe_to_json(u: SentenceUniverse) -> dict:
    return {"sentences": list(u.texts),
            "codes": {t: u.code[s] for t, s in zip(u.texts, u.sentences)},
            "domain": u.domain_size}


# ---------------------------------------------------------------------------
# chain state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainState:
    universe: SentenceUniverse
    t_ext: tuple               # per world, frozenset of codes
    converged_at: tuple        # per world, first stage the jump repeats
    loop_added: bool = False

    @property
    def depth(self):
        return len(self.t_ext) - 1


@dataclass(frozen=True)
class JumpTrace:
    world: int
    stages: tuple              # X(0) ... X(fixed_point_stage)
    fixed_point_stage: int


def _world_name(a):
    return f"w{a}"


def chain_model(universe, t_exts, loop=False) -> KripkeModel:
    """The chain as a plain model.  No validation: hypothetical extensions
    may break persistence and are evaluated regardless."""
    depth = len(t_exts) - 1
    worlds = tuple(_world_name(a) for a in range(depth + 1))
    edges = {(worlds[b], worlds[a]) for b in range(depth + 1) for a in range(b)}
    if loop:
        edges.add((worlds[depth], worlds[depth]))
    # every coded sentence has a designated quotation constant, whether or
    # not it is mentioned in the universe texts
    consts = {f"q{k}": k for k in universe.code.values()}
    rels = {"T": {worlds[a]: frozenset((c,) for c in t_exts[a])
                  for a in range(depth + 1)}}
    return KripkeModel(worlds, frozenset(edges), universe.domain_size,
                       consts, {}, {}, rels, {"T": 1}, "absent")


class _JumpEvaluator:
    """Evaluates at the frontier world for varying candidate extensions.

    Satisfaction at the worlds above never depends on the candidate, so it is
    computed once and shared between jump stages and monotonicity probes.
    """

    def __init__(self, state: ChainState, alpha: int):
        if alpha > state.depth + 1 or alpha < 0:
            raise ValueError(f"world {alpha} is beyond the frontier")
        self.u = state.universe
        self.upper_worlds = [_world_name(b) for b in range(alpha)]
        self.upper = Evaluator(chain_model(self.u, state.t_ext[:alpha])) \
            if alpha else None
        self.x = frozenset()
        self.memo = {}

    def phi(self, x) -> frozenset:
        self.x = frozenset(x)
        self.memo = {}
        return frozenset(self.u.code_of(s) for s in self.u.sentences
                         if self.sat(s, ()))

    def _denote(self, t, env):
        if isinstance(t, Const):
            return int(t.name[1:])
        return dict(env)[t.name]

    def sat(self, phi, env):
        key = (phi, env)
        got = self.memo.get(key)
        if got is None:
            got = self._sat(phi, env)
            self.memo[key] = got
        return got

    def _sat(self, phi, env):
        if isinstance(phi, Top):
            return True
        if isinstance(phi, Bottom):
            return False
        if isinstance(phi, Atom):
            return self._denote(phi.args[0], env) in self.x
        if isinstance(phi, And):
            return self.sat(phi.left, env) and self.sat(phi.right, env)
        if isinstance(phi, Or):
            return self.sat(phi.left, env) or self.sat(phi.right, env)
        if isinstance(phi, Imp):
            asg = dict(env)
            return all(not self.upper.sat(w, phi.left, asg)
                       or self.upper.sat(w, phi.right, asg)
                       for w in self.upper_worlds)
        vals = []
        for b in range(self.u.domain_size):
            sub = tuple(sorted([(k, v) for (k, v) in env if k != phi.var]
                               + [(phi.var, b)]))
            vals.append(self.sat(phi.body, sub))
        return any(vals) if isinstance(phi, Exists) else all(vals)


def phi_operator(state: ChainState, alpha: int, x: frozenset) -> frozenset:
    """Codes of the universe sentences satisfied at world alpha when its
    truth extension is hypothetically ``x``."""
    return _JumpEvaluator(state, alpha).phi(x)


def jump_to_fixpoint(state: ChainState, alpha: int) -> JumpTrace:
    """Iterate the jump from the empty extension until it repeats.

    The universe is finite and the jump monotone, so the fixed point arrives
    within universe-size + 1 stages; a non-monotone step aborts loudly.
    """
    u = state.universe
    ev = _JumpEvaluator(state, alpha)
    stages = [frozenset()]
    for _ in range(len(u.sentences) + 2):
        nxt = ev.phi(stages[-1])
        if not stages[-1] <= nxt:
            raise ChainInvariantError(
                f"jump step lost members at world {alpha}: "
                f"{sorted(stages[-1] - nxt)}")
        if nxt == stages[-1]:
            fp = len(stages) - 1
            if fp > len(u.sentences) + 1:
                raise ChainInvariantError("fixed point arrived too late")
            return JumpTrace(alpha, tuple(stages), fp)
        stages.append(nxt)
    raise ChainInvariantError(f"no fixed point within bounds at world {alpha}")


def initial_chain(universe: SentenceUniverse) -> ChainState:
    empty = ChainState(universe, (), ())
    trace = jump_to_fixpoint(empty, 0)
    return ChainState(universe, (trace.stages[-1],), (trace.fixed_point_stage,))


def extend_chain(state: ChainState) -> ChainState:
    """One more world at the bottom, its extension computed by the jump;
    extensions must keep shrinking down the chain."""
    if state.loop_added:
        raise ValueError("the chain is finished; no worlds below the loop")
    trace = jump_to_fixpoint(state, state.depth + 1)
    new_ext = trace.stages[-1]
    for a, prev in enumerate(state.t_ext):
        if not new_ext <= prev:
            raise ChainInvariantError(
                f"extension at new world exceeds world {a}")
    return ChainState(state.universe, state.t_ext + (new_ext,),
                      state.converged_at + (trace.fixed_point_stage,))


def truncate(state: ChainState, depth: int) -> ChainState:
    if depth > state.depth:
        raise ValueError("cannot truncate upward")
    return ChainState(state.universe, state.t_ext[:depth + 1],
                      state.converged_at[:depth + 1])


def satisfaction_record(state: ChainState, alpha=None) -> tuple:
    """Truth values of every universe sentence at the given (default bottom)
    world."""
    if alpha is None:
        alpha = state.depth
    model = chain_model(state.universe, state.t_ext, loop=state.loop_added)
    ev = Evaluator(model)
    w = _world_name(alpha)
    return tuple(ev.sat(w, phi) for phi in state.universe.sentences)


def detect_convergence(state: ChainState, budget: int):
    """Extend until the bottom-world record repeats or the budget runs out.

    Returns ``(state, result)`` where the state has been extended as far as
    the search went and the result carries the least repeat point (when
    found) plus the full history.  Some universes cannot settle at any
    finite depth; ``stable=False`` reports that honestly.
    """
    history = [satisfaction_record(state, a) for a in range(state.depth + 1)]
    theta = None
    for a in range(len(history) - 1):
        if history[a] == history[a + 1]:
            theta = a
            break
    while theta is None and state.depth < budget:
        state = extend_chain(state)
        history.append(satisfaction_record(state))
        if history[-1] == history[-2]:
            theta = state.depth - 1
    return state, {"theta": theta, "stable": theta is not None,
                   "history": history}


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------

def tb_instance(universe: SentenceUniverse, phi: Formula) -> Formula:
    quote = Atom("T", (Const(f"q{universe.code_of(phi)}"),))
    return And(Imp(quote, phi), Imp(phi, quote))


def add_loop_and_verify(state: ChainState, theta: int) -> dict:
    """Make the world at ``theta`` reflexive and verify the construction:
    no truth value moves, every world stays closed under its extension, the
    truth biconditionals hold at the loop, and detachment has no
    counterexample there.  Any failure is a construction bug and is
    reported, not raised."""
    if not isinstance(theta, int):
        raise ValueError("no stabilisation point: the chain did not settle")
    if theta > state.depth:
        raise ValueError("loop point beyond the chain")
    state = truncate(state, theta)
    flat = chain_model(state.universe, state.t_ext, loop=False)
    looped = chain_model(state.universe, state.t_ext, loop=True)
    ev_flat, ev_loop = Evaluator(flat), Evaluator(looped)
    u = state.universe
    failures = []
    value_changes = []
    for a in range(state.depth + 1):
        w = _world_name(a)
        for phi in u.sentences:
            if ev_flat.sat(w, phi) != ev_loop.sat(w, phi):
                value_changes.append({"world": w, "sentence": pretty(phi)})
    if value_changes:
        failures.append({"check": "loop_preserves_values", "cases": value_changes})
    for a in range(state.depth + 1):
        w = _world_name(a)
        sat_set = frozenset(u.code_of(phi) for phi in u.sentences
                            if ev_loop.sat(w, phi))
        if sat_set != state.t_ext[a]:
            failures.append({"check": "closure", "world": w,
                             "satisfied": sorted(sat_set),
                             "extension": sorted(state.t_ext[a])})
    bottom = _world_name(theta)
    tb_failures = []
    for phi in u.sentences:
        if not ev_loop.sat(bottom, tb_instance(u, phi)):
            tb_failures.append(pretty(phi))
    if tb_failures:
        failures.append({"check": "tarski_biconditionals", "sentences": tb_failures})
    mp_failures = []
    for phi in u.sentences:
        for psi in u.sentences:
            if ev_loop.sat(bottom, phi) and ev_loop.sat(bottom, Imp(phi, psi)) \
                    and not ev_loop.sat(bottom, psi):
                mp_failures.append([pretty(phi), pretty(psi)])
    if mp_failures:
        failures.append({"check": "modus_ponens", "pairs": mp_failures})
    return {
        "ok": not failures,
        "failures": failures,
        "theta": theta,
        "state": replace(state, loop_added=True),
        "model": looped,
    }


# ---------------------------------------------------------------------------
# verification suites over a finished chain
# ---------------------------------------------------------------------------

def verify_monotonicity(state: ChainState, alpha: int, samples=None) -> bool:
    """Spot-check that the jump respects inclusion on subset pairs."""
    codes = sorted(state.universe.codes())
    if samples is None:
        import itertools as it
        pool = [frozenset(c) for r in range(min(3, len(codes)) + 1)
                for c in it.combinations(codes, r)]
        samples = [(a, a | b) for a in pool for b in pool]
    ev = _JumpEvaluator(state, alpha)
    cache = {}

    def jump(x):
        got = cache.get(x)
        if got is None:
            got = ev.phi(x)
            cache[x] = got
        return got

    for x, y in samples:
        if not x <= y:
            continue
        if not jump(x) <= jump(y):
            return False
    return True


def verify_globally_decreasing(state: ChainState) -> bool:
    return all(state.t_ext[b] <= state.t_ext[a]
               for a in range(state.depth + 1)
               for b in range(a, state.depth + 1))


def verify_stagewise_domination(state: ChainState, alpha: int, beta: int) -> bool:
    """Earlier worlds dominate later ones stage by stage along the jump."""
    if alpha > beta:
        alpha, beta = beta, alpha
    tr_a = jump_to_fixpoint(state, alpha) if alpha <= state.depth else None
    tr_b = jump_to_fixpoint(state, beta)
    n = max(len(tr_a.stages), len(tr_b.stages))

    def stage(tr, i):
        return tr.stages[min(i, len(tr.stages) - 1)]

    return all(stage(tr_b, i) <= stage(tr_a, i) for i in range(n))


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

def run_universe(universe: SentenceUniverse, budget: int) -> dict:
    """Build the chain, search for stabilisation, loop and verify; the
    returned report carries everything the command line emits."""
    state = initial_chain(universe)
    state, conv = detect_convergence(state, budget)
    traces = [jump_to_fixpoint(truncate(state, max(a - 1, 0)) if a else
                               ChainState(universe, (), ()), a)
              for a in range(state.depth + 1)]
    model = chain_model(universe, state.t_ext)
    ev = Evaluator(model)
    closure_ok = all(
        frozenset(universe.code_of(phi) for phi in universe.sentences
                  if ev.sat(_world_name(a), phi)) == state.t_ext[a]
        for a in range(state.depth + 1))
    report = {
        "universe": list(universe.texts),
        "depth": state.depth,
        "theta": conv["theta"],
        "stable": conv["stable"],
        "t_ext": {f"w{a}": sorted(state.t_ext[a]) for a in range(state.depth + 1)},
        "converged_at": list(state.converged_at),
        "history": [[bool(v) for v in rec] for rec in conv["history"]],
        "traces": [{"world": tr.world,
                    "stages": [sorted(s) for s in tr.stages],
                    "fixed_point_stage": tr.fixed_point_stage}
                   for tr in traces],
        "checks": {
            "monotonicity": all(verify_monotonicity(state, a)
                                for a in range(state.depth + 1)),
            "locally_increasing": all(
                all(a_ <= b_ for a_, b_ in zip(tr.stages, tr.stages[1:]))
                for tr in traces),
            "globally_decreasing": verify_globally_decreasing(state),
            "stagewise_domination": all(
                verify_stagewise_domination(state, a, b)
                for a in range(state.depth + 1)
                for b in range(a + 1, state.depth + 1)),
            "fixed_points_within_bound":
                all(c <= len(universe.sentences) + 1 for c in state.converged_at),
            "closure": closure_ok,
        },
    }
    if conv["stable"]:
        loop = add_loop_and_verify(state, conv["theta"])
        report["loop"] = {"ok": loop["ok"], "failures": loop["failures"]}
        report["checks"]["loop_verified"] = loop["ok"]
    return report
