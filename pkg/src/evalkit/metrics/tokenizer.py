"""The single shared tokenizer used by every statistical metric.

Unicode-aware lowercased word tokenization: maximal runs of letters, digits,
and combining marks; punctuation and underscores are discarded. Keeping one
tokenizer per toolkit keeps metric values comparable.
"""

from __future__ import annotations

import re

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())
