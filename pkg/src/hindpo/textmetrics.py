"""Tokenization and text-similarity scoring.

All scorers operate on token sequences produced by :func:`tokenize`, which
is Unicode-aware: Devanagari grapheme clusters survive intact and only
Latin letters are case-folded. Lexical metrics (ROUGE-N, ROUGE-L, METEOR)
are exact-match based. Semantic similarity is pluggable behind
:class:`SemanticScorer`; the built-in implementation is a character
trigram cosine so the whole pipeline runs without external services.

The weighted blend used to rank candidate explanations is
``(semantic + 3 * (rouge_l + meteor)) / 4``; see :func:`final_score`.
"""

from __future__ import annotations

import unicodedata
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from math import sqrt

TokenSequence = list[str]

MAX_FINAL_SCORE = 1.75


@dataclass(frozen=True)
class PrfScore:
    """Precision / recall / F1 triple, each in [0, 1]."""

    precision: float
    recall: float
    f1: float


class SemanticScorerError(RuntimeError):
    """A semantic-score provider failed; never silently mapped to 0."""


class SemanticScorer(ABC):
    """Similarity of two raw strings, in [0, 1].

    Implementations must return 1.0 for identical non-empty strings and
    must raise :class:`SemanticScorerError` on provider failure.
    """

    @abstractmethod
    def score(self, cand: str, ref: str) -> float: ...


@lru_cache(maxsize=4096)
def _normalize_char(ch: str) -> str:
    # Case-fold Latin letters only; other scripts pass through untouched.
    if "LATIN" in unicodedata.name(ch, ""):
        return ch.lower()
    return ch


def _is_separator(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> TokenSequence:
    """Split text into normalized tokens.

    Applies canonical composition (NFC), splits on whitespace and any
    punctuation class (including the Devanagari danda), and lowercases
    Latin script. Combining marks stay attached to their base character,
    so Devanagari clusters are never broken apart. Pure and deterministic;
    empty input yields an empty sequence.
    """
    text = unicodedata.normalize("NFC", text)
    tokens: list[str] = []
    current: list[str] = []
    for ch in text:
        if _is_separator(ch):
            if current:
                tokens.append("".join(current))
                current = []
        else:
            current.append(_normalize_char(ch))
    if current:
        tokens.append("".join(current))
    return tokens


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ngrams(tokens: TokenSequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(cand: TokenSequence, ref: TokenSequence, n: int) -> PrfScore:
    """N-gram overlap score over multisets of n-grams."""
    if n < 1:
        raise ValueError("n must be >= 1, got %d" % n)
    cand_grams = _ngrams(cand, n)
    ref_grams = _ngrams(ref, n)
    total_cand = sum(cand_grams.values())
    total_ref = sum(ref_grams.values())
    if total_cand == 0 or total_ref == 0:
        return PrfScore(0.0, 0.0, 0.0)
    overlap = sum((cand_grams & ref_grams).values())
    precision = overlap / total_cand
    recall = overlap / total_ref
    return PrfScore(precision, recall, _f1(precision, recall))


def _lcs_length(a: TokenSequence, b: TokenSequence) -> int:
    # Row-rolling O(len(a) * len(b)) dynamic program.
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        row = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                row.append(prev[j - 1] + 1)
            else:
                row.append(max(prev[j], row[j - 1]))
        prev = row
    return prev[-1]


def rouge_l(cand: TokenSequence, ref: TokenSequence) -> PrfScore:
    """Longest-common-subsequence score with F1 weighting."""
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand) if cand else 0.0
    recall = lcs / len(ref) if ref else 0.0
    return PrfScore(precision, recall, _f1(precision, recall))


def _greedy_alignment(cand: TokenSequence, ref: TokenSequence) -> list[tuple[int, int]]:
    # Each token matches at most once; candidate positions scan left to
    # right and claim the first unused identical reference token.
    used = [False] * len(ref)
    pairs: list[tuple[int, int]] = []
    for ci, token in enumerate(cand):
        for rj, ref_token in enumerate(ref):
            if not used[rj] and token == ref_token:
                used[rj] = True
                pairs.append((ci, rj))
                break
    return pairs


def meteor(cand: TokenSequence, ref: TokenSequence) -> float:
    """Exact-match METEOR score.

    Unigram matches come from a greedy left-to-right alignment. With m
    matches, P = m/|cand|, R = m/|ref|, Fmean = 10PR/(R + 9P). The
    fragmentation penalty is 0.5 * (chunks/m)^3, where a chunk is a
    maximal run of matches contiguous in both sequences. No stemming or
    synonym matching is applied.
    """
    if not cand or not ref:
        return 0.0
    pairs = _greedy_alignment(cand, ref)
    m = len(pairs)
    if m == 0:
        return 0.0
    precision = m / len(cand)
    recall = m / len(ref)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    chunks = 1
    for (prev_c, prev_r), (cur_c, cur_r) in zip(pairs, pairs[1:]):
        if cur_c != prev_c + 1 or cur_r != prev_r + 1:
            chunks += 1
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1 - penalty)


class CharTrigramCosine(SemanticScorer):
    """Cosine similarity over character 3-gram frequency vectors.

    Deterministic stand-in for embedding-based semantic scorers. Identical
    non-empty strings score exactly 1.0; strings sharing no trigram score
    0.0. Only ordering and identity properties should be relied upon, not
    absolute values.
    """

    def _vector(self, text: str) -> Counter:
        text = unicodedata.normalize("NFC", text)
        return Counter(text[i : i + 3] for i in range(len(text) - 2))

    def score(self, cand: str, ref: str) -> float:
        cand = unicodedata.normalize("NFC", cand)
        ref = unicodedata.normalize("NFC", ref)
        if cand and cand == ref:
            return 1.0
        vc = self._vector(cand)
        vr = self._vector(ref)
        if not vc or not vr:
            return 0.0
        dot = sum(count * vr[gram] for gram, count in vc.items())
        norm = sqrt(sum(c * c for c in vc.values())) * sqrt(sum(c * c for c in vr.values()))
        return min(dot / norm, 1.0)


def final_score(semantic: float, rouge_l_f1: float, meteor_score: float) -> float:
    """Weighted blend ``(semantic + 3 * (rouge_l_f1 + meteor_score)) / 4``.

    The lexical metrics carry weight 3 because their typical range is much
    narrower than semantic similarity's; the result lives in [0, 1.75].
    Inputs outside [0, 1] raise ValueError.
    """
    for name, value in (
        ("semantic", semantic),
        ("rouge_l_f1", rouge_l_f1),
        ("meteor_score", meteor_score),
    ):
        if not 0.0 <= value <= 1.0:
            raise ValueError("%s must be in [0, 1], got %r" % (name, value))
    lexical = rouge_l_f1 + meteor_score
    # Summed rather than multiplied by 3: keeps (0.9, 0.3, 0.3) -> 0.675 exact.
    return (semantic + lexical + lexical + lexical) / 4.0
