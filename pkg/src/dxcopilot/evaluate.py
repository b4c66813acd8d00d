"""Hierarchical accuracy evaluation.

Cases carry gold labels at three granularities and the report scores
predictions at each: L1 = category, L2 = subcategory, L3 = exact disease.
A prediction hits L3 when the diagnosis string matches gold after casefold
and trim (never fuzzy — fuzzy matching silently inflates scores); it hits
L2/L1 when the predicted disease's place in the graph hierarchy matches the
gold subcategory/category. With a consistent hierarchy L3 <= L2 <= L1.

The published accuracy numbers this layout mirrors are not reproducible
here: they depend on a private EHR dataset and proprietary backbone LLMs.
This harness reproduces the metric structure and table layout only.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import ServiceAssets
from .errors import MalformedRecord, UnresolvableGoldLabel
from .orchestrator import one_shot


@dataclass(frozen=True)
class EvalCase:
    case_id: str
    input_text: str
    gold_category: str
    gold_subcategory: str
    gold_diagnosis: str


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    predicted_diagnosis: str
    gold_diagnosis: str
    l1_hit: bool
    l2_hit: bool
    l3_hit: bool


@dataclass(frozen=True)
class EvalReport:
    label: str
    n_cases: int
    l1_accuracy: float
    l2_accuracy: float
    l3_accuracy: float
    rows: tuple[CaseResult, ...]


def _norm(label: str) -> str:
    return label.casefold().strip()


def load_cases(path: str | Path) -> list[EvalCase]:
    """Read JSONL eval cases; every field is required and non-empty."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"cases file not found: {path}")
    cases: list[EvalCase] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
            fields = {}
            for key in ("case_id", "input_text", "gold_category", "gold_subcategory", "gold_diagnosis"):
                value = obj.get(key)
                if not isinstance(value, str) or not value.strip():
                    raise MalformedRecord(line_no, f"{key} required")
                fields[key] = value
            cases.append(EvalCase(**fields))
    return cases


def simulate_voice(text: str, drop_rate: float, rng: random.Random) -> str:
    """Word-drop noise standing in for imperfect speech transcription."""
    if drop_rate <= 0.0:
        return text
    words = text.split()
    kept = [w for w in words if rng.random() >= drop_rate]
    if not kept and words:
        kept = [words[0]]
    return " ".join(kept)


def _validate_golds(cases: Sequence[EvalCase], assets: ServiceAssets) -> None:
    kg = assets.kg
    categories = {_norm(n.label) for n in kg.nodes_in_tier("category")}
    subcategories = {_norm(n.label) for n in kg.nodes_in_tier("subcategory")}
    for case in cases:
        if kg.disease_by_label(case.gold_diagnosis) is None:
            raise UnresolvableGoldLabel(case.case_id, f"diagnosis {case.gold_diagnosis!r} not in KG")
        if _norm(case.gold_subcategory) not in subcategories:
            raise UnresolvableGoldLabel(case.case_id, f"subcategory {case.gold_subcategory!r} not in KG")
        if _norm(case.gold_category) not in categories:
            raise UnresolvableGoldLabel(case.case_id, f"category {case.gold_category!r} not in KG")


def evaluate(
    cases: Sequence[EvalCase],
    assets: ServiceAssets,
    label: str = "pipeline",
    modality: str = "text",
    voice_drop_rate: float = 0.0,
    seed: int = 0,
) -> EvalReport:
    """Run every case through the one-shot recommendation path and score it.

    The follow-up loop stays disabled so prediction depends only on the
    case text, the corpus, the graph, and the backbone LLM.
    """
    _validate_golds(cases, assets)
    kg = assets.kg
    rows: list[CaseResult] = []
    for case in cases:
        text = case.input_text
        if modality == "voice":
            rng = random.Random(f"{seed}:{case.case_id}")
            text = simulate_voice(text, voice_drop_rate, rng)
        rec = one_shot(
            text,
            assets.kg,
            assets.corpus,
            assets.index,
            assets.encoder,
            assets.llm,
            assets.pipeline,
            assets.question_generator,
        )
        predicted = rec.diagnosis
        l3 = _norm(predicted) == _norm(case.gold_diagnosis)
        l1 = l2 = False
        node = kg.disease_by_label(predicted)
        if node is not None:
            sub_id = kg.parent_of(node.id)
            cat_id = kg.parent_of(sub_id)
            l2 = _norm(kg.node(sub_id).label) == _norm(case.gold_subcategory)
            l1 = _norm(kg.node(cat_id).label) == _norm(case.gold_category)
        rows.append(
            CaseResult(
                case_id=case.case_id,
                predicted_diagnosis=predicted,
                gold_diagnosis=case.gold_diagnosis,
                l1_hit=l1,
                l2_hit=l2,
                l3_hit=l3,
            )
        )
    rows.sort(key=lambda r: r.case_id)
    n = len(rows)

    def accuracy(hits: int) -> float:
        return 100.0 * hits / n if n else 0.0

    return EvalReport(
        label=label,
        n_cases=n,
        l1_accuracy=accuracy(sum(r.l1_hit for r in rows)),
        l2_accuracy=accuracy(sum(r.l2_hit for r in rows)),
        l3_accuracy=accuracy(sum(r.l3_hit for r in rows)),
        rows=tuple(rows),
    )


def report_to_dict(report: EvalReport) -> dict:
    return {
        "label": report.label,
        "n_cases": report.n_cases,
        "l1_accuracy": report.l1_accuracy,
        "l2_accuracy": report.l2_accuracy,
        "l3_accuracy": report.l3_accuracy,
        "rows": [
            {
                "case_id": r.case_id,
                "predicted_diagnosis": r.predicted_diagnosis,
                "gold_diagnosis": r.gold_diagnosis,
                "l1_hit": r.l1_hit,
                "l2_hit": r.l2_hit,
                "l3_hit": r.l3_hit,
            }
            for r in report.rows
        ],
    }


def report_from_dict(obj: dict) -> EvalReport:
    return EvalReport(
        label=obj["label"],
        n_cases=obj["n_cases"],
        l1_accuracy=obj["l1_accuracy"],
        l2_accuracy=obj["l2_accuracy"],
        l3_accuracy=obj["l3_accuracy"],
        rows=tuple(
            CaseResult(
                case_id=r["case_id"],
                predicted_diagnosis=r["predicted_diagnosis"],
                gold_diagnosis=r["gold_diagnosis"],
                l1_hit=r["l1_hit"],
                l2_hit=r["l2_hit"],
                l3_hit=r["l3_hit"],
            )
            for r in obj["rows"]
        ),
    )


def render_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table: one row per pipeline config, columns L1/L2/L3."""
    label_width = max([len("pipeline")] + [len(r.label) for r in reports])
    header = f"{'pipeline':<{label_width}}  {'L1':>6}  {'L2':>6}  {'L3':>6}"
    lines = [header]
    for report in reports:
        lines.append(
            f"{report.label:<{label_width}}  "
            f"{report.l1_accuracy:>6.2f}  {report.l2_accuracy:>6.2f}  {report.l3_accuracy:>6.2f}"
        )
    return "\n".join(lines)
