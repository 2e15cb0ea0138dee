"""Tokenization and sentence splitting.

Tokens are runs of word characters or single punctuation marks, so
``"San Francisco, CA"`` is four tokens. The rule is platform independent and
stands in for a model tokenizer; chunk budgets are therefore approximate
model tokens.
"""

from __future__ import annotations

import re

TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+|\n+")
_WS = re.compile(r"\s+")


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text)


def count_tokens(text: str) -> int:
    return sum(1 for _ in TOKEN_RE.finditer(text))


def collapse_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation followed by whitespace, and on newlines."""
    return [s.strip() for s in _SENTENCE_END.split(text) if s.strip()]


STOPWORDS = frozenset(
    """
    a an the of in on at to for from by with and or but is are was were be been
    being which who whom whose what when where why how that this these those it
    its as into than then there their they he she his her him them we you i do
    does did has have had not no yes if so about after before during while also
    """.split()
)


def content_words(text: str) -> list[str]:
    """Lower-cased word tokens minus stopwords; underscores split words."""
    words = []
    for tok in TOKEN_RE.findall(text.replace("_", " ")):
        if not tok[0].isalnum():
            continue
        low = tok.lower()
        if low not in STOPWORDS:
            words.append(low)
    return words
