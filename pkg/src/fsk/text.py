"""Tokenizer shared by prompt embedding, response parsing and text metrics."""

import re

_TOKEN = re.compile(r"\w+|[^\w\s]")

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


def tokenize(text: str) -> list[str]:
    """Lowercase, then split into word runs and single punctuation marks.

    >>> tokenize("Is this face real?")
    ['is', 'this', 'face', 'real', '?']
    """
    return _TOKEN.findall(text.lower())


def fnv1a_64(data) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h
