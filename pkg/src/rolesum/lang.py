"""Reference-based language detection and language-appropriate tokenization.

The whole scoring protocol (tokenizer, embedding backbone) is selected from the
*reference* summary's language so that candidate and reference are always scored
under identical settings. Detection is a deterministic CJK-ratio rule; Chinese
segmentation is greedy longest-match against a pluggable lexicon.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

DEFAULT_CJK_THRESHOLD = 0.3

# CJK ideograph blocks; kana/hangul are irrelevant for a zh/en corpus.
_CJK_RANGES = (
    (0x4E00, 0x9FFF),    # unified ideographs
    (0x3400, 0x4DBF),    # extension A
    (0xF900, 0xFAFF),    # compatibility ideographs
    (0x20000, 0x2A6DF),  # extension B
)


class LanguageTag(str, Enum):
    ZH = "zh"
    EN = "en"


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def detect_language(reference_text: str, cjk_threshold: float = DEFAULT_CJK_THRESHOLD) -> LanguageTag:
    """Tag text as zh iff CJK codepoints make up >= `cjk_threshold` of its letters.

    Counting is order-independent, so the result is invariant under character
    permutation. Text with no letter codepoints at all falls back to en.
    """
    if not reference_text.strip():
        raise ValueError("cannot detect language of empty text")
    letters = 0
    cjk = 0
    for ch in reference_text:
        if unicodedata.category(ch).startswith("L"):
            letters += 1
            if _is_cjk(ch):
                cjk += 1
    if letters == 0:
        return LanguageTag.EN
    return LanguageTag.ZH if cjk / letters >= cjk_threshold else LanguageTag.EN


@dataclass(frozen=True)
class TokenSequence:
    """Word-level tokens plus the language tag they were produced under."""

    tokens: tuple[str, ...]
    language: LanguageTag

    def __post_init__(self) -> None:
        if any(not t for t in self.tokens):
            raise ValueError("token sequence contains an empty token")

    def __len__(self) -> int:
        return len(self.tokens)


class GreedyLexiconSegmenter:
    """Greedy longest-match word segmenter over a fixed lexicon.

    Out-of-lexicon characters fall back to single-character tokens, so no input
    character is ever dropped (punctuation and whitespace aside).
    """

    def __init__(self, words: Iterable[str] = ()):
        self._words = {w for w in (word.strip() for word in words) if w}
        self._max_len = max((len(w) for w in self._words), default=1)

    @classmethod
    def from_file(cls, path: str | Path) -> "GreedyLexiconSegmenter":
        """Load a lexicon file: UTF-8, one word per line."""
        text = Path(path).read_text(encoding="utf-8")
        return cls(text.splitlines())

    def __len__(self) -> int:
        return len(self._words)

    def segment(self, text: str) -> list[str]:
        out: list[str] = []
        i = 0
        n = len(text)
        while i < n:
            ch = text[i]
            if ch.isspace() or _is_punct(ch):
                i += 1
                continue
            matched = None
            for j in range(min(self._max_len, n - i), 1, -1):
                piece = text[i : i + j]
                if piece in self._words:
                    matched = piece
                    break
            if matched is None:
                matched = ch
            out.append(matched)
            i += len(matched)
        return out


_EMPTY_SEGMENTER = GreedyLexiconSegmenter()

# Minimal English stopword list; only consulted when stopword removal is
# explicitly enabled (off by default, matching the reporting protocol).
_EN_STOPWORDS = frozenset(
    "a an and are as at be but by for if in into is it no not of on or such "
    "that the their then there these they this to was will with".split()
)


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and _is_punct(token[start]):
        start += 1
    while end > start and _is_punct(token[end - 1]):
        end -= 1
    return token[start:end]


def _light_stem(token: str) -> str:
    # Plural folding only; full stemming is out of protocol.
    if token.endswith("sses"):
        return token[:-2]
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith("s") and not token.endswith("ss") and len(token) > 3:
        return token[:-1]
    return token


def tokenize(
    text: str,
    lang: LanguageTag,
    segmenter: GreedyLexiconSegmenter | None = None,
    stemming: bool = False,
    stopwords: bool = False,
) -> TokenSequence:
    """Tokenize at word level: en lowercases and splits on whitespace with
    surrounding punctuation stripped; zh runs the greedy lexicon segmenter.

    `stemming` and `stopwords` apply to English only and default off.
    """
    if lang is LanguageTag.ZH:
        seg = segmenter if segmenter is not None else _EMPTY_SEGMENTER
        return TokenSequence(tuple(seg.segment(text)), lang)
    tokens = []
    for raw in text.lower().split():
        tok = _strip_punct(raw)
        if not tok:
            continue
        if stopwords and tok in _EN_STOPWORDS:
            continue
        if stemming:
            tok = _light_stem(tok)
        tokens.append(tok)
    return TokenSequence(tuple(tokens), lang)
