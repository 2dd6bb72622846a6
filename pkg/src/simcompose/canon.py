"""Canonical JSON helpers shared by every document format.

All documents the engine emits (knowledge-base classes, composites, plans,
workflows, run results, service bodies) go through :func:`canonical_json`
so that repeated serialization of the same structure is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

FORMAT_VERSION = 1


def canonical_json(doc: Any) -> str:
    """Render *doc* as canonical JSON: sorted keys, two-space indent,
    no NaN/Infinity, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def content_id(*docs: Any, prefix: str = "", length: int = 16) -> str:
    """Deterministic identifier derived from document content."""
    h = hashlib.sha256()
    for doc in docs:
        h.update(canonical_json(doc).encode("utf-8"))
    return prefix + h.hexdigest()[:length]
