"""Generation and metric reporting for trained policies.

Produces one row per configuration (base, dpo, dpo_act, dpo_fin, hin_dpo)
with corpus-level ROUGE-1/2/L, METEOR and semantic scores, rendered as an
aligned text table (values x100, two decimals, best column value starred)
plus a machine-readable JSON file with full precision.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .policy import BOS, EOS, BigramPolicy
from .textmetrics import CharTrigramCosine, SemanticScorer, meteor, rouge_l, rouge_n, tokenize

CONFIG_ORDER = ("base", "dpo", "dpo_act", "dpo_fin", "hin_dpo")

_COLUMNS = ("r1", "r2", "rl", "meteor", "semantic")
_HEADERS = ("R-1", "R-2", "R-L", "MT", "Sem")


@dataclass(frozen=True)
class MetricReport:
    """Corpus-level metric means for one configuration, each in [0, 1]."""

    config_name: str
    r1: float
    r2: float
    rl: float
    meteor: float
    semantic: float


def generate(
    policy: BigramPolicy,
    prompts: Sequence[str],
    max_len: int = 24,
    temperature: float = 0.0,
    seed: int = 0,
) -> list[str]:
    """Decode one response text per prompt.

    temperature 0 means greedy argmax decoding; anything above 0 samples
    with a generator seeded once for the whole batch, so the same seed
    reproduces the same outputs.
    """
    rng = np.random.default_rng(seed)
    texts = []
    for prompt in prompts:
        prompt_tokens = tokenize(prompt)
        if temperature <= 0:
            tokens = policy.greedy_response(prompt_tokens, max_len)
        else:
            tokens = policy.sample_response(prompt_tokens, temperature, max_len, rng)
        texts.append(" ".join(t for t in tokens if t not in (BOS, EOS)))
    return texts


def evaluate(
    generated: Sequence[str],
    references: Sequence[str],
    config_name: str,
    semantic: SemanticScorer | None = None,
) -> MetricReport:
    """Corpus scores as the arithmetic mean of per-pair scores."""
    if len(generated) != len(references):
        raise ValueError(
            "generated and references must have equal length: %d vs %d"
            % (len(generated), len(references))
        )
    semantic = semantic or CharTrigramCosine()
    rows = []
    for cand_text, ref_text in zip(generated, references):
        cand = tokenize(cand_text)
        ref = tokenize(ref_text)
        rows.append(
            (
                rouge_n(cand, ref, 1).f1,
                rouge_n(cand, ref, 2).f1,
                rouge_l(cand, ref).f1,
                meteor(cand, ref),
                semantic.score(cand_text, ref_text),
            )
        )
    means = [float(np.mean(col)) for col in zip(*rows)]
    return MetricReport(config_name, *means)


def _ordered(reports: Sequence[MetricReport]) -> list[MetricReport]:
    by_name = {r.config_name: r for r in reports}
    ordered = [by_name.pop(name) for name in CONFIG_ORDER if name in by_name]
    ordered.extend(by_name.values())
    return ordered


def report_table(reports: Sequence[MetricReport], json_path: str | Path | None = None) -> str:
    """Render the metric table; optionally write the JSON companion file.

    Cells show value x 100 with two decimals; the best value in each
    column carries a trailing ``*``.
    """
    if not reports:
        raise ValueError("need at least one report")
    ordered = _ordered(reports)
    best = {
        column: max(getattr(r, column) for r in ordered) for column in _COLUMNS
    }
    rows = []
    for report in ordered:
        cells = []
        for column in _COLUMNS:
            value = getattr(report, column)
            mark = "*" if value == best[column] else ""
            cells.append("%.2f%s" % (value * 100, mark))
        rows.append((report.config_name, cells))
    name_width = max(len("Config"), max(len(name) for name, _ in rows))
    widths = [
        max(len(header), max(len(cells[i]) for _, cells in rows))
        for i, header in enumerate(_HEADERS)
    ]
    lines = [
        "  ".join(
            ["Config".ljust(name_width)]
            + [header.rjust(widths[i]) for i, header in enumerate(_HEADERS)]
        )
    ]
    for name, cells in rows:
        lines.append(
            "  ".join([name.ljust(name_width)] + [cells[i].rjust(widths[i]) for i in range(len(cells))])
        )
    text = "\n".join(lines) + "\n"
    if json_path is not None:
        payload = [
            {
                "config": r.config_name,
                "r1": r.r1,
                "r2": r.r2,
                "rl": r.rl,
                "meteor": r.meteor,
                "semantic": r.semantic,
            }
            for r in ordered
        ]
        Path(json_path).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    return text


def parse_table(text: str) -> dict[str, dict[str, float]]:
    """Read a rendered table back into {config: {column: value x 100}}."""
    lines = [line for line in text.splitlines() if line.strip()]
    out: dict[str, dict[str, float]] = {}
    for line in lines[1:]:
        parts = line.split()
        name, cells = parts[0], parts[1:]
        out[name] = {
            column: float(re.sub(r"\*$", "", cell))
            for column, cell in zip(_COLUMNS, cells)
        }
    return out
