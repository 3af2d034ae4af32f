"""JSON views of parse results, models, reports and traces.

Every serializer returns plain dicts and lists ready for ``json.dump``;
probabilities are emitted as exact ``"num/den"`` strings, never floats.
The matching schemas ship in the ``schemas`` directory next to this module
and each serializer names its schema in SCHEMA_FOR.
"""

from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from typing import Any

from .bisim import CongruenceReport, Partition
from .dist import FiniteDistribution
from .formats import FormatReport
from .proofs import ClosureResult, CompletenessReport, WsNode, WsResult
from .rules import PTSS, Rule
from .semantics import (
    StratViolation,
    Stratification,
    SupportReport,
    Transition,
    TransitionRelation,
    UniverseSpec,
)
from .syntax import SpecFile, render_premise, render_rule, render_term
from .terms import Signature, term_key

SCHEMA_FOR = {
    "spec": "spec.schema.json",
    "model": "model.schema.json",
    "format": "format.schema.json",
    "strata": "strata.schema.json",
    "ws": "ws.schema.json",
    "closure": "closure.schema.json",
    "trace": "trace.schema.json",
    "bisim": "bisim.schema.json",
    "congruence": "congruence.schema.json",
    "corpus": "corpus.schema.json",
}


def load_schema(kind: str) -> dict:
    """The shipped JSON schema for one serializer family."""
    name = SCHEMA_FOR[kind]
    text = resources.files("ptss.schemas").joinpath(name).read_text()
    return json.loads(text)


def fraction_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def dist_json(fd: FiniteDistribution, sig: Signature | None = None) -> list[dict]:
    return [
        {"term": render_term(t, sig), "prob": fraction_str(p)}
        for t, p in sorted(fd.entries, key=lambda e: term_key(e[0]))
    ]


def transition_json(tr: Transition, sig: Signature | None = None) -> dict:
    return {
        "source": render_term(tr.source, sig),
        "label": tr.label,
        "distribution": dist_json(tr.dist, sig),
    }


def model_json(rel: TransitionRelation, sig: Signature | None = None) -> list[dict]:
    ordered = sorted(rel.transitions, key=lambda t: (term_key(t.source), t.label, t.dist.key()))
    return [transition_json(t, sig) for t in ordered]


def rule_json(rule: Rule, sig: Signature | None = None) -> dict:
    return {
        "name": rule.name,
        "positive": [render_premise(p, sig) for p in rule.pprem],
        "negative": [render_premise(p, sig) for p in rule.nprem],
        "quantitative": [render_premise(q, sig) for q in rule.qprem],
        "conclusion": render_premise(rule.conclusion, sig),
    }


def spec_json(sf: SpecFile) -> dict:
    out: dict[str, Any] = {
        "ok": sf.ok,
        "diagnostics": [
            {
                "severity": d.severity,
                "line": d.line,
                "col": d.col,
                "code": d.code,
                "message": d.message,
            }
            for d in sf.diagnostics
        ],
    }
    ptss = sf.ptss
    if ptss is not None:
        sig = ptss.signature
        out["signature"] = {
            "functions": [
                {"name": f, "arity": a, "infix": f in sig.infix} for f, a in sig.functions
            ],
            "labels": sorted(sig.labels),
        }
        out["families"] = sorted(ptss.families)
        out["varsets"] = {
            name: [render_term(v, sig) for v in elems] for name, elems in ptss.varsets
        }
        out["rules"] = [rule_json(r, sig) for r in ptss.rules]
        if sf.strat is not None:
            out["strata"] = strata_json(sf.strat, sig)
        if sf.universe is not None:
            out["universe"] = {
                "init": [render_term(t, sig) for t in sf.universe.init],
                "depth": sf.universe.depth,
            }
    return out


def strata_json(strat: Stratification, sig: Signature | None = None) -> dict:
    return {
        "strict": strat.strict,
        "default": strat.default,
        "patterns": [
            {
                "source": render_term(p.source, sig) if p.source is not None else "*",
                "label": p.label if p.label is not None else "*",
                "stratum": p.stratum,
            }
            for p in strat.patterns
        ],
    }


def strata_violations_json(
    violations: list[StratViolation], sig: Signature | None = None
) -> list[dict]:
    return [
        {
            "rule": v.rule,
            "kind": v.kind,
            "premise": {
                "source": render_term(v.premise_source, sig),
                "label": v.premise_label,
                "stratum": v.premise_stratum,
            },
            "conclusion": {
                "source": render_term(v.conclusion_source, sig),
                "label": v.conclusion_label,
                "stratum": v.conclusion_stratum,
            },
        }
        for v in violations
    ]


def format_report_json(rep: FormatReport) -> dict:
    return {
        "rule": rep.rule,
        "format": rep.format,
        "ok": rep.ok,
        "conditions": [
            {"tag": c.tag, "ok": c.ok, "detail": c.detail} for c in rep.conditions
        ],
        "warnings": list(rep.warnings),
    }


def ws_node_json(node: WsNode, sig: Signature | None = None) -> dict:
    out: dict[str, Any] = {
        "literal": node.literal,
        "source": render_term(node.source, sig),
        "label": node.label,
    }
    if node.dist is not None:
        out["distribution"] = dist_json(node.dist, sig)
    out["children"] = [ws_node_json(c, sig) for c in node.children]
    return out


def ws_result_json(res: WsResult, sig: Signature | None = None) -> dict:
    out: dict[str, Any] = {"status": res.status}
    if res.tree is not None:
        out["tree"] = ws_node_json(res.tree, sig)
    return out


def completeness_json(rep: CompletenessReport, sig: Signature | None = None) -> dict:
    return {
        "complete": rep.complete,
        "consistent": rep.consistent,
        "exhausted": rep.exhausted,
        "pairs": [
            {
                "source": render_term(v.source, sig),
                "label": v.label,
                "proved": [dist_json(d, sig) for d in v.dists],
                "denied": v.negative,
                "exhausted": v.exhausted,
            }
            for v in rep.verdicts
        ],
    }


def closure_json(result: ClosureResult, sig: Signature | None = None) -> dict:
    return {
        "complete": result.complete,
        "rules": [
            {"name": d.rule.name, "depth": d.depth, "rule": rule_json(d.rule, sig)}
            for d in result.rules
        ],
    }


def engine_warnings_json(w: Any, sig: Signature | None = None) -> list[str]:
    out = []
    if w.universe_too_small:
        sample = ", ".join(
            sorted({render_term(t, sig) for t in w.universe_too_small})[:5]
        )
        out.append(f"conclusions fall outside the universe: {sample}")
    if w.unanchored:
        out.append("unconstrained distribution variables were drawn from the candidate pool")
    return out


def support_json(rep: SupportReport, sig: Signature | None = None) -> dict:
    return {
        "is_model": rep.is_model,
        "is_supported": rep.is_supported,
        "is_supported_model": rep.is_supported_model,
        "missing_conclusions": [transition_json(t, sig) for t in rep.missing_conclusions],
        "unsupported": [transition_json(t, sig) for t in rep.unsupported],
        "warnings": engine_warnings_json(rep.warnings, sig),
    }


def bisim_json(
    left: str, right: str, equivalent: bool, partition: Partition, sig: Signature | None = None
) -> dict:
    return {
        "left": left,
        "right": right,
        "bisimilar": equivalent,
        "blocks": [[render_term(t, sig) for t in b] for b in partition.blocks],
    }


def congruence_json(rep: CongruenceReport, sig: Signature | None = None) -> dict:
    return {
        "ok": rep.ok,
        "pairs": rep.pairs,
        "checked": rep.checked,
        "contexts_tried": rep.contexts_tried,
        "summary": rep.summary(),
        "counterexamples": [
            {
                "left": render_term(c.left, sig),
                "right": render_term(c.right, sig),
                "context_left": render_term(c.context_left, sig),
                "context_right": render_term(c.context_right, sig),
            }
            for c in rep.counterexamples
        ],
    }
