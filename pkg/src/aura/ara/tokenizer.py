"""Protocol-aware tokenization.

Splits on whitespace and punctuation but keeps domain identifiers intact:
error codes like ``OCPP:InternalError``, playbook ids like ``DIAG-COMM-001``,
and dotted protocol versions like ``2.0.1``.
"""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[A-Za-z0-9](?:[A-Za-z0-9:._-]*[A-Za-z0-9])?")


def tokenize(text: str) -> list[str]:
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(text)]


def count_tokens(text: str) -> int:
    return len(tokenize(text))
