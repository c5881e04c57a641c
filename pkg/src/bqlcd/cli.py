"""Command-line front end.

Exit codes: 0 success (valid proof / satisfied formula / countermodel found
/ checks pass), 1 semantic failure (invalid proof, formula false, nothing
found within bounds, a verification failed), 2 malformed input.  All output
is JSON.  Commands are deterministic given their inputs and ``--seed``;
``--jobs`` is accepted for interface compatibility and capped work is always
equivalent to the sequential run.
"""

from __future__ import annotations

import argparse
import json
import random
import sys

from . import bradyfp, kripke, proofgen, transform
from .kripke import (
    Evaluator, ModelError, SearchBounds, countermodel_search, model_from_json,
    model_to_json, signature_of_model,
)
from .proofkernel import (
    ProofJsonError, check_proof, load_proof, open_assumptions, parse_system,
    proof_size, proof_to_json, stratum,
)
from .syntax import (
    And, Exists, Forall, Imp, Or, ParseError,
    free_vars, parse_formula, parse_inferring, pretty,
)


def _emit(data, out_path=None):
    text = json.dumps(data, indent=2, sort_keys=False)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def cmd_check(args) -> int:
    try:
        proof = load_proof(args.proof)
        system = parse_system(args.system)
    except (ProofJsonError, ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = check_proof(proof, system)
    _emit(report.to_json(), args.out)
    return 0 if report.valid else 1


def cmd_reduce(args) -> int:
    try:
        proof = load_proof(args.proof)
    except (ProofJsonError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = check_proof(proof, "nbqlcd_r")
    if not report.valid:
        _emit(report.to_json(), args.out)
        return 1
    result = transform.reduce_proof(proof)
    final = check_proof(result.proof, "nbqlcd")
    if not final.valid:
        print("error: reduced proof failed to re-check", file=sys.stderr)
        return 1
    _emit({
        "n": result.n,
        "proof": proof_to_json(result.proof),
        "stats": {
            "nodes_in": proof_size(proof),
            "nodes_out": proof_size(result.proof),
            "strata": [result.source_stratum, stratum(result.proof)],
        },
    }, args.out)
    return 0


def _sat_trace(model, w, phi, asg, ev, depth=0):
    entry = {"world": w, "formula": pretty(phi), "value": ev.sat(w, phi, asg)}
    kids = []
    if isinstance(phi, (And, Or)):
        kids = [_sat_trace(model, w, phi.left, asg, ev),
                _sat_trace(model, w, phi.right, asg, ev)]
    elif isinstance(phi, Imp):
        kids = [_sat_trace(model, u, phi.left, asg, ev)
                for u in model.successors(w)]
        kids += [_sat_trace(model, u, phi.right, asg, ev)
                 for u in model.successors(w)]
    elif isinstance(phi, (Forall, Exists)):
        for b in model.domain():
            sub = dict(asg or {})
            sub[phi.var] = b
            kids.append(_sat_trace(model, w, phi.body, sub, ev))
    if kids and depth < 6:
        entry["parts"] = kids
    return entry


def cmd_sat(args) -> int:
    try:
        model = model_from_json(_load_json(args.model))
        sig = signature_of_model(model)
        phi = parse_formula(args.formula, sig)
        if free_vars(phi):
            raise ParseError("formula must be closed")
        if args.world not in model.worlds:
            raise ModelError(f"unknown world {args.world!r}")
    except (ModelError, ParseError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ev = Evaluator(model)
    value = ev.sat(args.world, phi)
    payload = {"world": args.world, "formula": pretty(phi), "value": value}
    if args.trace:
        payload["trace"] = _sat_trace(model, args.world, phi, {}, ev)
    _emit(payload, args.out)
    return 0 if value else 1


def cmd_countermodel(args) -> int:
    try:
        premises = []
        for text in args.premises or []:
            premises.append(parse_inferring(text)[0])
        conclusion = parse_inferring(args.conclusion)[0]
        bounds = SearchBounds(args.max_worlds, args.max_domain,
                              args.mode != "bqlcd")
        for phi in premises + [conclusion]:
            if free_vars(phi):
                raise ParseError("premises and conclusion must be closed")
    except (ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = countermodel_search(premises, conclusion, bounds, args.mode)
    if result.found:
        _emit({"found": True, "witness": result.witness,
               "model": model_to_json(result.model),
               "notes": list(result.notes)}, args.out)
        return 0
    _emit({"found": False, "exhausted": result.exhausted,
           "notes": list(result.notes)}, args.out)
    return 1


def cmd_brady(args) -> int:
    try:
        universe = bradyfp.universe_from_json(_load_json(args.universe))
    except (bradyfp.UniverseError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = bradyfp.run_universe(universe, args.depth_budget)
    _emit(report, args.out)
    checks_ok = all(report["checks"].values())
    return 0 if checks_ok else 1


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def _suite_persistence(rng, n=60):
    for _ in range(n):
        model = proofgen.random_model(rng)
        ev = Evaluator(model)
        for _ in range(4):
            phi = proofgen.random_sentence(rng)
            if free_vars(phi):
                continue
            for (w, u) in model.edges:
                if ev.sat(w, phi) and not ev.sat(u, phi):
                    return f"persistence broken at {w} -> {u}: {pretty(phi)}"
    return None


def _suite_modus_ponens(rng, n=40):
    for _ in range(n):
        model = proofgen.random_model(rng)
        ev = Evaluator(model)
        phi = proofgen.random_sentence(rng, 1)
        psi = proofgen.random_sentence(rng, 1)
        for w in model.reflexive_worlds():
            if ev.sat(w, phi) and ev.sat(w, Imp(phi, psi)) \
                    and not ev.sat(w, psi):
                return f"detachment fails at {w}"
    return None


def _suite_roundtrip(rng, n=200):
    for _ in range(n):
        phi = proofgen.random_sentence(rng, 3)
        from .syntax import infer_signature
        sig = infer_signature([phi])
        if parse_formula(pretty(phi), sig) != phi:
            return f"round trip broke on {pretty(phi)}"
    return None


def _suite_intersection(rng, n=120):
    for _ in range(n):
        model, w, us = proofgen.random_intersection_config(rng)
        phi = proofgen.random_or_exists_free_sentence(rng)
        if not kripke.check_intersection_config(model, w, us, phi):
            return f"intersection biconditional failed for {pretty(phi)}"
    return None


def _suite_reduction(rng, n=40):
    corpus = proofgen.generate_corpus(seed=rng.randrange(10 ** 6), size=n)
    for t in corpus:
        red = transform.reduce_proof(t)
        if not check_proof(red.proof, "nbqlcd").valid:
            return "a reduced proof failed to re-check"
        back = transform.unbox(red.proof, red.n)
        if back.conclusion != t.conclusion \
                or not check_proof(back, "nbqlcd_r").valid:
            return "unboxing did not recover the conclusion"
    return None


def _suite_soundness(rng, n=25):
    corpus = proofgen.generate_corpus(seed=rng.randrange(10 ** 6), size=n)
    for t in corpus:
        opens = sorted(open_assumptions(t), key=pretty)
        if len(opens) > 3:
            continue
        res = countermodel_search(opens, t.conclusion, SearchBounds(2, 2))
        if res.found:
            return f"countermodel against a checked proof of {pretty(t.conclusion)}"
    return None


def _suite_truth_construction(rng):
    texts = ["true", "false", "T(q2) -> false", "T(q2)"]
    universe = bradyfp.make_universe(texts, {t: i for i, t in enumerate(texts)}, 4)
    report = bradyfp.run_universe(universe, 5)
    if not (report["stable"] and all(report["checks"].values())):
        return "the paradox universe did not verify"
    return None


def cmd_selftest(args) -> int:
    rng = random.Random(args.seed)
    suites = [
        ("persistence", _suite_persistence),
        ("modus_ponens_at_reflexive", _suite_modus_ponens),
        ("parse_pretty_roundtrip", _suite_roundtrip),
        ("intersection_configurations", _suite_intersection),
        ("reduction_roundtrip", _suite_reduction),
        ("proof_vs_search_soundness", _suite_soundness),
        ("truth_construction", _suite_truth_construction),
    ]
    failures = 0
    results = {}
    for name, suite in suites:
        problem = suite(rng)
        results[name] = "ok" if problem is None else problem
        line = "ok" if problem is None else f"FAIL: {problem}"
        print(f"{name}: {line}")
        if problem is not None:
            failures += 1
    _emit({"seed": args.seed, "results": results}, args.out)
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="bqlcd",
        description="workbench for constant domain basic logic with a "
                    "reflexive root: proof checking, reduction, model "
                    "evaluation, countermodel search and the fixed-point "
                    "truth construction")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker cap (results are identical at any value)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check a proof file against a system")
    p.add_argument("proof")
    p.add_argument("--system", default="nbqlcd_r")
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reduce", help="eliminate modus ponens from a proof")
    p.add_argument("proof")
    p.add_argument("--out")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("sat", help="evaluate a formula at a world of a model")
    p.add_argument("model")
    p.add_argument("--world", required=True)
    p.add_argument("--formula", required=True)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sat)

    p = sub.add_parser("countermodel", help="bounded countermodel search")
    p.add_argument("--premises", nargs="*", default=[])
    p.add_argument("--conclusion", required=True)
    p.add_argument("--max-worlds", type=int, default=3)
    p.add_argument("--max-domain", type=int, default=2)
    p.add_argument("--mode", default="bqlcd_r",
                   choices=["bqlcd_r", "bqlcd", "strict", "congruence"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_countermodel)

    p = sub.add_parser("brady", help="run the fixed-point truth construction")
    p.add_argument("universe")
    p.add_argument("--depth-budget", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_brady)

    p = sub.add_parser("selftest", help="run the invariant batteries")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
