"""Bundled corpora: a deterministic toy news corpus and a separable set.

The toy corpus stands in for real fact-checked articles so the whole
pipeline runs with zero external data: 60 records, 30 per label, each with
a Devanagari news snippet, a ground-truth explanation, three candidate
explanations of deliberately different quality, and embedded actuality
scores. Everything is generated from a fixed seed, so two builds are
byte-identical.

The separable corpus is a 50-pair sanity set where every preferred
response continues the prompt with token "a" and every rejected response
with token "b"; any working preference loss must drive its margin up.
"""

from __future__ import annotations

import numpy as np

from .dataforge import ArticleRecord, Candidate, CurriculumDataset, PreferencePair

_TOY_SEED = 20240601

_TOPICS = [
    "चुनाव", "टीका", "बाढ़", "वीडियो", "तस्वीर", "बयान", "योजना",
    "रैली", "मौसम", "सड़क", "अस्पताल", "स्कूल", "बिजली", "पानी", "रेल",
]
_PLACES = ["दिल्ली", "मुंबई", "जयपुर", "पटना", "भोपाल", "लखनऊ"]
_FILLER = ["लोग", "खबर", "आज", "पूरी", "तरह", "नया", "पुराना", "बड़ा", "मामला", "सच"]

_MODEL_IDS = ("gen-alpha", "gen-beta", "gen-gamma")


def _news_text(rng: np.random.Generator) -> str:
    # Ends on a token no explanation terminates with, so the prompt-tail
    # bigram row is not also a response-ending row.
    place = _PLACES[rng.integers(len(_PLACES))]
    topic = _TOPICS[rng.integers(len(_TOPICS))]
    return "सोशल मीडिया पर %s में %s को लेकर दावा वायरल" % (place, topic)


def _ground_truth(label: str, news: str, rng: np.random.Generator) -> str:
    topic = news.split()[5]
    place = news.split()[3]
    if label == "fake":
        return "जांच में %s की %s वाली खबर गलत साबित हुई यह दावा झूठा है पुष्टि नहीं हुई" % (place, topic)
    return "जांच में %s की %s वाली खबर सही पाई गई इस दावे की पुष्टि हुई है" % (place, topic)


def _near_copy(truth: str, rng: np.random.Generator) -> str:
    # Drop one interior word: high but imperfect overlap.
    words = truth.split()
    drop = int(rng.integers(1, len(words) - 1))
    return " ".join(words[:drop] + words[drop + 1 :])


def _partial(truth: str, rng: np.random.Generator) -> str:
    words = truth.split()
    kept = words[: len(words) // 2]
    extra = [_FILLER[int(rng.integers(len(_FILLER)))] for _ in range(4)]
    return " ".join(kept + extra)


def _unrelated(rng: np.random.Generator) -> str:
    words = [_FILLER[int(rng.integers(len(_FILLER)))] for _ in range(8)]
    words.append(_TOPICS[int(rng.integers(len(_TOPICS)))])
    return " ".join(words)


def toy_corpus() -> list[ArticleRecord]:
    """The bundled 60-record corpus (30 fake, 30 real), fully deterministic."""
    rng = np.random.default_rng(_TOY_SEED)
    records = []
    for i in range(60):
        label = "fake" if i % 2 == 0 else "real"
        news = _news_text(rng)
        truth = _ground_truth(label, news, rng)
        texts = [_near_copy(truth, rng), _partial(truth, rng), _unrelated(rng)]
        quality_act = [
            round(float(rng.uniform(0.55, 0.95)), 2),
            round(float(rng.uniform(0.30, 0.70)), 2),
            round(float(rng.uniform(0.00, 0.40)), 2),
        ]
        # Shuffle which model produced which quality tier.
        perm = rng.permutation(3)
        records.append(
            ArticleRecord(
                id="art-%03d" % (i + 1),
                label=label,
                news_text=news,
                ground_truth_explanation=truth,
                candidates=[
                    Candidate(model_id=_MODEL_IDS[slot], text=texts[perm[slot]])
                    for slot in range(3)
                ],
                actuality_preferred=round(float(rng.uniform(0.85, 1.0)), 2),
                actuality_candidates=[quality_act[perm[slot]] for slot in range(3)],
            )
        )
    return records


def separable_curriculum(
    n_pairs: int = 50,
    seed: int = 0,
    preferred_actuality: float = 0.5,
    rejected_actuality: float = 0.5,
) -> CurriculumDataset:
    """Single-stage curriculum of trivially separable preference pairs."""
    rng = np.random.default_rng(seed)
    prompts = ["p%d" % i for i in range(5)]
    pairs = []
    for i in range(n_pairs):
        prompt = prompts[int(rng.integers(len(prompts)))]
        pairs.append(
            PreferencePair(
                id="sep-%03d" % i,
                article_id="sep-%03d" % i,
                candidate_index=0,
                model_id="synthetic",
                prompt=prompt,
                preferred="a",
                rejected="b",
                fs=0.0,
                rank=0,
                s_w=preferred_actuality,
                s_l=rejected_actuality,
                bucket="B_H",
            )
        )
    return CurriculumDataset(stages=[("B_H", pairs)], order="algorithm1")
