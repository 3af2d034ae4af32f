"""Command line front end.

Exit codes follow one contract everywhere: 0 for success, 1 when the analysis
itself fails (format violations, stratification violations, unproved goals,
non-bisimilar terms, counterexamples, corpus regressions), 2 for usage and
parse errors.  ``--emit json`` swaps the text report for a JSON document that
validates against the schema shipped for the subcommand.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import jsonio
from .bisim import bisimilarity, congruence_probe
from .formats import check_spec_format, classify
from .proofs import WsProver, WsResult, provable_closure
from .reduce import (
    ReduceConfig,
    ReductionTrace,
    reduce_full,
    to_ntmuftheta,
    to_nxmuftheta,
    to_pntree,
)
from .rules import PTSS
from .semantics import (
    SearchSpaceTooLarge,
    Stratification,
    TransitionRelation,
    build_stratified_model,
    build_universe,
    candidate_distributions,
    check_stratification,
    check_supported_model,
)
from .syntax import SpecFile, parse_spec, parse_term, render_rule, render_spec, render_term
from .terms import Term, term_key

DEPTH_ENV = "PTSS_UNIVERSE_DEPTH"


class CliError(Exception):
    """Carries the message and exit code for a failed invocation."""

    def __init__(self, message: str, code: int = 2) -> None:
        super().__init__(message)
        self.code = code


def _load(path: str) -> SpecFile:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror or e}") from e
    sf = parse_spec(text)
    for d in sf.diagnostics:
        print(f"{path}:{d}", file=sys.stderr)
    if not sf.ok or sf.ptss is None:
        raise CliError(f"{path}: parse failed")
    return sf


def _universe(sf: SpecFile, depth: int | None) -> tuple[Term, ...]:
    """Bounded closed-term universe; an explicit flag beats the file header,
    which beats the environment default."""
    if depth is None and sf.universe is None:
        env = os.environ.get(DEPTH_ENV)
        if env is not None:
            try:
                depth = int(env)
            except ValueError:
                raise CliError(f"{DEPTH_ENV} must be an integer, got {env!r}")
    assert sf.ptss is not None
    return build_universe(sf.ptss.signature, sf.universe, depth)


def _strat(sf: SpecFile) -> Stratification:
    return sf.strat if sf.strat is not None else Stratification()


def _model(sf: SpecFile, universe: tuple[Term, ...]) -> TransitionRelation:
    assert sf.ptss is not None
    rel, _ = build_stratified_model(sf.ptss, _strat(sf), universe)
    return rel


def _print(args: argparse.Namespace, payload: dict | list, text: str) -> None:
    if args.emit == "json":
        print(json.dumps(payload, indent=2))
    elif text:
        print(text)


def _dist_text(dist, sig) -> str:
    inner = ", ".join(
        f"{render_term(t, sig)}: {jsonio.fraction_str(p)}"
        for t, p in sorted(dist.entries, key=lambda e: term_key(e[0]))
    )
    return "{" + inner + "}"


def _model_text(rel: TransitionRelation, sig) -> str:
    lines = [
        f"{render_term(tr.source, sig)} -{tr.label}-> {_dist_text(tr.dist, sig)}"
        for tr in rel
    ]
    return "\n".join(lines) if lines else "(no transitions)"


# -- subcommands ----------------------------------------------------------------------


def cmd_check(args: argparse.Namespace) -> int:
    try:
        text = Path(args.file).read_text()
    except OSError as e:
        raise CliError(f"cannot read {args.file}: {e.strerror or e}") from e
    sf = parse_spec(text)
    payload = jsonio.spec_json(sf)
    if args.emit == "text":
        for d in sf.diagnostics:
            print(f"{args.file}:{d}")
    if not sf.ok or sf.ptss is None:
        _print(args, payload, f"{args.file}: parse failed")
        return 2
    n = len(sf.ptss.rules)
    _print(args, payload, f"{args.file}: ok ({n} rules, format {classify(sf.ptss)})")
    return 0


def cmd_format(args: argparse.Namespace) -> int:
    sf = _load(args.file)
    assert sf.ptss is not None
    fmt = args.format or classify(sf.ptss)
    if fmt == "none":
        _print(args, {"ok": False, "format": "none", "reports": []},
               f"{args.file}: no supported format fits")
        return 1
    ok, reports = check_spec_format(sf.ptss, fmt)
    payload = {
        "ok": ok,
        "format": fmt,
        "reports": [jsonio.format_report_json(r) for r in reports],
    }
    lines = [f"{args.file}: format {fmt}: {'ok' if ok else 'violations'}"]
    for r in reports:
        for c in r.conditions:
            if not c.ok:
                lines.append(f"  {r.rule}: {c.tag}: {c.detail}")
        for w in r.warnings:
            lines.append(f"  {r.rule}: warning: {w}")
    _print(args, payload, "\n".join(lines))
    return 0 if ok else 1


def cmd_model(args: argparse.Namespace) -> int:
    sf = _load(args.file)
    assert sf.ptss is not None
    sig = sf.ptss.signature
    universe = _universe(sf, args.depth)
    rel = _model(sf, universe)
    payload: dict = {"ok": True, "model": jsonio.model_json(rel, sig)}
    code = 0
    text = _model_text(rel, sig)
    if args.verify:
        pool = candidate_distributions(sf.ptss, universe)
        rep = check_supported_model(sf.ptss, rel, universe, pool)
        payload["support"] = jsonio.support_json(rep, sig)
        payload["ok"] = rep.is_supported_model
        code = 0 if rep.is_supported_model else 1
        verdict = "supported model" if rep.is_supported_model else "NOT a supported model"
        text += f"\n{verdict}"
    _print(args, payload, text)
    return code


def cmd_strata_check(args: argparse.Namespace) -> int:
    sf = _load(args.file)
    assert sf.ptss is not None
    sig = sf.ptss.signature
    strat = _strat(sf)
    universe = _universe(sf, args.depth)
    violations = check_stratification(sf.ptss, strat, universe)
    payload = {
        "ok": not violations,
        "strict": strat.strict,
        "violations": jsonio.strata_violations_json(violations, sig),
    }
    lines = [f"{args.file}: stratification {'ok' if not violations else 'violated'}"]
    for v in violations:
        lines.append(
            f"  {v.rule}: {v.kind} premise {render_term(v.premise_source, sig)} -{v.premise_label}->"
            f" stratum {v.premise_stratum} vs conclusion stratum {v.conclusion_stratum}"
        )
    _print(args, payload, "\n".join(lines))
    return 0 if not violations else 1


def _ws_query(
    prover: WsProver, term: Term, label: str, negative: bool
) -> "WsResult":
    """Negative queries go straight to the prover; a positive query without a
    target distribution succeeds if any pool candidate is provable."""
    if negative:
        return prover.prove_negative(term, label)
    best = WsResult("notfound")
    for pi in prover.pool:
        r = prover.prove_positive(term, label, pi)
        if r.status in ("proved", "refuted"):
            return r
        if r.status == "exhausted":
            best = r
    return best


def cmd_ws_prove(args: argparse.Namespace) -> int:
    sf = _load(args.file)
    assert sf.ptss is not None
    sig = sf.ptss.signature
    term = parse_term(args.term, sig)
    if term is None:
        raise CliError(f"cannot parse term {args.term!r}")
    if args.label not in sig.labels:
        raise CliError(f"unknown label {args.label!r}")
    universe = _universe(sf, args.depth)
    pool = candidate_distributions(sf.ptss, universe)
    prover = WsProver(sf.ptss, universe, pool, args.proof_depth, args.fuel)
    res = _ws_query(prover, term, args.label, args.negative)
    payload = {
        "ok": res.status == "proved",
        "query": {"source": args.term, "label": args.label, "negative": args.negative},
        "result": jsonio.ws_result_json(res, sig),
    }
    goal = f"{args.term} -/{args.label}->" if args.negative else f"{args.term} -{args.label}->"
    _print(args, payload, f"{goal}: {res.status}")
    return 0 if res.status == "proved" else 1


def cmd_closure(args: argparse.Namespace) -> int:
    sf = _load(args.file)
    assert sf.ptss is not None
    sig = sf.ptss.signature
    result = provable_closure(sf.ptss, args.fuel)
    payload = jsonio.closure_json(result, sig)
    lines = [f"{len(result.rules)} derivable rules (complete: {result.complete})"]
    lines += [f"  [{d.depth}] {render_rule(d.rule, sig)}" for d in result.rules]
    _print(args, payload, "\n".join(lines))
    return 0


def cmd_reduce(args: argparse.Namespace) -> int:
    sf = _load(args.file)
    assert sf.ptss is not None
    config = ReduceConfig(fuel=args.fuel)
    stage = args.stage
    traces = []
    out: PTSS = sf.ptss
    if stage in ("1", "2", "3", "all"):
        out, t = to_ntmuftheta(out)
        traces.append(t)
    if stage in ("2", "3", "all"):
        out, t = to_nxmuftheta(out, config)
        traces.append(t)
    if stage in ("3", "all"):
        universe = _universe(sf, args.depth)
        out, t = to_pntree(out, universe, config)
        traces.append(t)
    trace = ReductionTrace(traces)
    rendered = render_spec(out, sf.strat, sf.universe)
    if args.output:
        Path(args.output).write_text(rendered)
    if args.trace:
        Path(args.trace).write_text(json.dumps(trace.to_json(), indent=2))
    payload = {"ok": trace.complete, **trace.to_json(), "spec": rendered}
    text_lines = [
        f"{t.stage}: {t.rules_in} -> {t.rules_out} rules"
        + ("" if t.complete else " (incomplete)")
        for t in traces
    ]
    if not args.output and args.emit == "text":
        text_lines.append(rendered)
    _print(args, payload, "\n".join(text_lines))
    return 0 if trace.complete else 1


def cmd_bisim(args: argparse.Namespace) -> int:
    sf = _load(args.file)
    assert sf.ptss is not None
    sig = sf.ptss.signature
    t1 = parse_term(args.t1, sig)
    t2 = parse_term(args.t2, sig)
    if t1 is None or t2 is None:
        raise CliError(f"cannot parse term {args.t1 if t1 is None else args.t2!r}")
    universe = _universe(sf, args.depth)
    rel = _model(sf, universe)
    states = list(universe)
    for t in (t1, t2):
        if t not in states:
            states.append(t)
    labels = sorted(sig.labels)
    part = bisimilarity(rel, states, labels)
    eq = part.same_block(t1, t2)
    payload = jsonio.bisim_json(args.t1, args.t2, eq, part, sig)
    _print(args, payload, f"{args.t1} ~ {args.t2}: {'bisimilar' if eq else 'NOT bisimilar'}")
    return 0 if eq else 1


def cmd_congruence(args: argparse.Namespace) -> int:
    sf = _load(args.file)
    assert sf.ptss is not None
    sig = sf.ptss.signature
    universe = _universe(sf, args.universe_depth)
    rel = _model(sf, universe)
    rep = congruence_probe(
        rel,
        universe,
        sorted(sig.labels),
        sig,
        samples=args.samples,
        depth=args.depth,
        seed=args.seed,
    )
    payload = jsonio.congruence_json(rep, sig)
    lines = [rep.summary()]
    for c in rep.counterexamples:
        lines.append(
            f"  {render_term(c.left, sig)} ~ {render_term(c.right, sig)} but "
            f"{render_term(c.context_left, sig)} !~ {render_term(c.context_right, sig)}"
        )
    _print(args, payload, "\n".join(lines))
    return 0 if rep.ok else 1


# -- corpus runner --------------------------------------------------------------------


def _check_model_expectation(sf: SpecFile, universe, expected: list) -> tuple[bool, str]:
    assert sf.ptss is not None
    got = jsonio.model_json(_model(sf, universe), sf.ptss.signature)
    if got == expected:
        return True, f"{len(got)} transitions"
    def keyed(items):
        return {json.dumps(i, sort_keys=True) for i in items}
    missing = sorted(keyed(expected) - keyed(got))
    extra = sorted(keyed(got) - keyed(expected))
    parts = []
    if missing:
        parts.append("missing: " + "; ".join(missing))
    if extra:
        parts.append("extra: " + "; ".join(extra))
    return False, " | ".join(parts) or "transition order differs"


def _run_corpus_entry(path: Path, expect: dict, depth: int | None) -> list[dict]:
    checks: list[dict] = []

    def record(name: str, ok: bool, detail: str = "") -> None:
        checks.append({"name": name, "ok": ok, "detail": detail})

    try:
        text = path.read_text()
    except OSError as e:
        record("read", False, str(e))
        return checks
    sf = parse_spec(text)
    if "parse_ok" in expect:
        record("parse_ok", sf.ok == expect["parse_ok"],
               f"expected {expect['parse_ok']}, got {sf.ok}")
    if sf.ptss is None:
        if "parse_ok" not in expect:
            record("parse_ok", False, "parse failed")
        return checks
    ptss = sf.ptss
    entry_depth = expect.get("universe_depth", depth)
    universe = build_universe(ptss.signature, sf.universe, entry_depth)

    if "classify" in expect:
        got = classify(ptss)
        record("classify", got == expect["classify"],
               f"expected {expect['classify']}, got {got}")
    if "format" in expect:
        want = expect["format"]
        ok, _ = check_spec_format(ptss, want["name"])
        record("format", ok == want["ok"],
               f"{want['name']}: expected ok={want['ok']}, got {ok}")
    if "strata_ok" in expect:
        violations = check_stratification(ptss, _strat(sf), universe)
        got_ok = not violations
        record("strata_ok", got_ok == expect["strata_ok"],
               f"expected {expect['strata_ok']}, got {got_ok}"
               + (f" ({len(violations)} violations)" if violations else ""))
    if "model" in expect:
        try:
            ok, detail = _check_model_expectation(sf, universe, expect["model"])
        except SearchSpaceTooLarge as e:
            ok, detail = False, str(e)
        record("model", ok, detail)
    if "supported" in expect:
        try:
            rel = _model(sf, universe)
            pool = candidate_distributions(ptss, universe)
            rep = check_supported_model(ptss, rel, universe, pool)
            got_ok = rep.is_supported_model
            record("supported", got_ok == expect["supported"],
                   f"expected {expect['supported']}, got {got_ok}")
        except SearchSpaceTooLarge as e:
            record("supported", False, str(e))
    if "ws" in expect:
        pool = candidate_distributions(ptss, universe)
        prover = WsProver(ptss, universe, pool)
        for q in expect["ws"]:
            term = parse_term(q["source"], ptss.signature)
            if term is None:
                record("ws", False, f"bad term {q['source']!r}")
                continue
            res = _ws_query(prover, term, q["label"], bool(q.get("negative")))
            record(f"ws {q['source']} -{q['label']}->",
                   res.status == q["status"],
                   f"expected {q['status']}, got {res.status}")
    if "reduce" in expect:
        want = expect["reduce"]
        try:
            reduced, trace = reduce_full(ptss, universe)
            if "pntree_ok" in want:
                ok, _reports = check_spec_format(reduced, "pntree")
                record("reduce pntree_ok", ok == want["pntree_ok"],
                       f"expected {want['pntree_ok']}, got {ok}")
            if "model_identical" in want:
                rel_in = _model(sf, universe)
                reduced_sf = SpecFile(reduced, sf.strat, sf.universe, [])
                rel_out = _model(reduced_sf, universe)
                same = rel_in == rel_out
                record("reduce model_identical", same == want["model_identical"],
                       f"expected {want['model_identical']}, got {same}")
        except SearchSpaceTooLarge as e:
            record("reduce", False, str(e))
    if "bisim" in expect:
        rel = _model(sf, universe)
        labels = sorted(ptss.signature.labels)
        part = bisimilarity(rel, list(universe), labels)
        for q in expect["bisim"]:
            a = parse_term(q["t1"], ptss.signature)
            b = parse_term(q["t2"], ptss.signature)
            if a is None or b is None:
                record("bisim", False, f"bad term in {q}")
                continue
            got = part.same_block(a, b)
            record(f"bisim {q['t1']} ~ {q['t2']}", got == q["bisimilar"],
                   f"expected {q['bisimilar']}, got {got}")
    return checks


def cmd_corpus(args: argparse.Namespace) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        raise CliError(f"{args.dir}: not a directory")
    warnings: list[str] = []
    entries: list[dict] = []
    specs = sorted(root.glob("*.ptss"))
    if not specs:
        warnings.append(f"{args.dir}: no .ptss files found")
    for spec_path in specs:
        sidecar = spec_path.with_name(spec_path.stem + ".expect.json")
        rel_path = str(spec_path)
        if not sidecar.exists():
            warnings.append(f"{rel_path}: no expectation sidecar, skipped")
            entries.append({"path": rel_path, "status": "skip", "checks": []})
            continue
        try:
            expect = json.loads(sidecar.read_text())
        except (OSError, json.JSONDecodeError) as e:
            entries.append({
                "path": rel_path,
                "status": "fail",
                "checks": [{"name": "sidecar", "ok": False, "detail": str(e)}],
            })
            continue
        checks = _run_corpus_entry(spec_path, expect, args.depth)
        status = "pass" if all(c["ok"] for c in checks) else "fail"
        entries.append({"path": rel_path, "status": status, "checks": checks})
    passed = sum(1 for e in entries if e["status"] == "pass")
    failed = sum(1 for e in entries if e["status"] == "fail")
    skipped = sum(1 for e in entries if e["status"] == "skip")
    payload = {
        "ok": failed == 0,
        "total": len(entries),
        "passed": passed,
        "failed": failed,
        "skipped": skipped,
        "warnings": warnings,
        "entries": entries,
    }
    lines = []
    for w in warnings:
        lines.append(f"warning: {w}")
    for e in entries:
        mark = {"pass": "PASS", "fail": "FAIL", "skip": "SKIP"}[e["status"]]
        lines.append(f"{mark} {e['path']} ({len(e['checks'])} checks)")
        for c in e["checks"]:
            if not c["ok"]:
                lines.append(f"     {c['name']}: {c['detail']}")
    lines.append(f"{passed} passed, {failed} failed, {skipped} skipped")
    _print(args, payload, "\n".join(lines))
    return 0 if failed == 0 else 1


# -- argument parsing -----------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--emit", choices=("text", "json"), default="text",
                   help="output format (default: text)")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="ptss",
        description="Workbench for probabilistic transition system specifications.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse a file and report diagnostics")
    p.add_argument("file")
    _add_common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("format", help="check every rule against a format")
    p.add_argument("file")
    p.add_argument("--format", choices=(
        "ntmuftheta", "ntmuxtheta", "nxmuftheta", "pntree", "simple-pntree"),
        help="format to check (default: classify)")
    _add_common(p)
    p.set_defaults(fn=cmd_format)

    p = sub.add_parser("model", help="build the stratified model on a bounded universe")
    p.add_argument("file")
    p.add_argument("--depth", type=int, default=None, help="universe term depth")
    p.add_argument("--verify", action="store_true",
                   help="also check the result is a supported model")
    _add_common(p)
    p.set_defaults(fn=cmd_model)

    p = sub.add_parser("strata-check", help="verify the declared stratification")
    p.add_argument("file")
    p.add_argument("--depth", type=int, default=None, help="universe term depth")
    _add_common(p)
    p.set_defaults(fn=cmd_strata_check)

    p = sub.add_parser("ws-prove", help="search for a well-supported proof")
    p.add_argument("file")
    p.add_argument("--term", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--negative", action="store_true",
                   help="prove the negative literal instead")
    p.add_argument("--depth", type=int, default=None, help="universe term depth")
    p.add_argument("--proof-depth", type=int, default=6)
    p.add_argument("--fuel", type=int, default=3, help="closure fuel")
    _add_common(p)
    p.set_defaults(fn=cmd_ws_prove)

    p = sub.add_parser("closure", help="enumerate derivable rules up to a depth")
    p.add_argument("file")
    p.add_argument("--fuel", type=int, default=2)
    _add_common(p)
    p.set_defaults(fn=cmd_closure)

    p = sub.add_parser("reduce", help="run the format reduction pipeline")
    p.add_argument("file")
    p.add_argument("--stage", choices=("1", "2", "3", "all"), default="all")
    p.add_argument("--fuel", type=int, default=2)
    p.add_argument("--universe-depth", dest="depth", type=int, default=None)
    p.add_argument("-o", "--output", help="write the reduced system here")
    p.add_argument("--trace", help="write a JSON stage trace here")
    _add_common(p)
    p.set_defaults(fn=cmd_reduce)

    p = sub.add_parser("bisim", help="decide bisimilarity of two closed terms")
    p.add_argument("file")
    p.add_argument("--t1", required=True)
    p.add_argument("--t2", required=True)
    p.add_argument("--depth", type=int, default=None, help="universe term depth")
    _add_common(p)
    p.set_defaults(fn=cmd_bisim)

    p = sub.add_parser("congruence", help="probe bisimilarity for congruence")
    p.add_argument("file")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth", type=int, default=3, help="context depth")
    p.add_argument("--universe-depth", dest="universe_depth", type=int, default=None)
    _add_common(p)
    p.set_defaults(fn=cmd_congruence)

    p = sub.add_parser("corpus", help="run expectation sidecars over a directory")
    p.add_argument("dir")
    p.add_argument("--depth", type=int, default=None, help="default universe term depth")
    _add_common(p)
    p.set_defaults(fn=cmd_corpus)

    return top


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except SearchSpaceTooLarge as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
