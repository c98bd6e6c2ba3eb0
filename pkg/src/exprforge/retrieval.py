"""Free-text to expression-tag retrieval.

The default retriever is a deterministic field-weighted BM25 over the tag
name, aliases, definition, and stories, so results are reproducible and work
offline. An exact hit on a canonical name or alias always wins rank 1. An
optional adapter delegates the same task to an external chat-completion
endpoint and validates every returned name against the database.
"""

from __future__ import annotations

import math
import os
import re
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

import requests

from .errors import EndpointUnavailable
from .expression_db import ExpressionDatabase, resolve_alias

FIELDS = ("name", "alias", "definition", "story")
FIELD_WEIGHTS = {"name": 4.0, "alias": 4.0, "definition": 2.0, "story": 1.0}
BM25_K1 = 1.2
BM25_B = 0.75

_WORD_RE = re.compile(r"[a-z0-9]+")

# Script ranges tokenized as character bigrams instead of whitespace words.
_CJK_RANGES = (
    (0x1100, 0x11FF),   # hangul jamo
    (0x3040, 0x30FF),   # hiragana, katakana
    (0x3400, 0x4DBF),   # CJK ideographs ext A
    (0x4E00, 0x9FFF),   # CJK unified ideographs
    (0xAC00, 0xD7AF),   # hangul syllables
    (0xF900, 0xFAFF),   # CJK compat ideographs
    (0xFF66, 0xFF9F),   # half-width katakana
)


def _is_cjk(ch: str) -> bool:
    code = ord(ch)
    return any(lo <= code <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens for Latin script, character bigrams for CJK."""
    tokens: list[str] = []
    latin: list[str] = []
    cjk: list[str] = []

    def flush_latin():
        if latin:
            tokens.extend(_WORD_RE.findall("".join(latin).lower()))
            latin.clear()

    def flush_cjk():
        if cjk:
            run = "".join(cjk)
            if len(run) == 1:
                tokens.append(run)
            else:
                tokens.extend(run[i:i + 2] for i in range(len(run) - 1))
            cjk.clear()

    for ch in text:
        if _is_cjk(ch):
            flush_latin()
            cjk.append(ch)
        else:
            flush_cjk()
            latin.append(ch)
    flush_latin()
    flush_cjk()
    return tokens


@dataclass(frozen=True)
class RetrievalQuery:
    text: str
    language_hint: str | None = None
    k: int = 5

    def __post_init__(self):
        if not self.text:
            raise ValueError("query text must be non-empty")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class ScoredTag:
    tag_name: str
    score: float
    matched_fields: tuple[str, ...]


class _FieldIndex:
    """Token statistics for one field across all tags."""

    def __init__(self, docs: list[list[str]]):
        self.term_freqs = [Counter(d) for d in docs]
        self.doc_lens = [len(d) for d in docs]
        self.n_docs = len(docs)
        total = sum(self.doc_lens)
        self.avgdl = total / self.n_docs if self.n_docs and total else 0.0
        df: Counter = Counter()
        for tf in self.term_freqs:
            for term in tf:
                df[term] += 1
        # Non-negative idf so scores stay >= 0.
        self.idf = {
            t: math.log(1.0 + (self.n_docs - n + 0.5) / (n + 0.5)) for t, n in df.items()
        }

    def score(self, doc_idx: int, query_tokens: list[str]) -> float:
        if self.avgdl == 0.0:
            return 0.0
        tf = self.term_freqs[doc_idx]
        norm = BM25_K1 * (1 - BM25_B + BM25_B * self.doc_lens[doc_idx] / self.avgdl)
        s = 0.0
        for term in query_tokens:
            f = tf.get(term, 0)
            if f:
                s += self.idf[term] * f * (BM25_K1 + 1) / (f + norm)
        return s


class RetrievalIndex:
    """Deterministic lexical index over a loaded database."""

    def __init__(self, db: ExpressionDatabase):
        self.db = db
        self.tag_names = [t.name for t in db.tags]
        self._fields: dict[str, _FieldIndex] = {
            "name": _FieldIndex([tokenize(t.name) for t in db.tags]),
            "alias": _FieldIndex(
                [tokenize(" ".join(a.text for a in t.aliases)) for t in db.tags]
            ),
            "definition": _FieldIndex([tokenize(t.definition) for t in db.tags]),
            "story": _FieldIndex(
                [tokenize(" ".join(s.text for s in t.stories)) for t in db.tags]
            ),
        }

    @property
    def n_docs(self) -> int:
        return len(self.tag_names)

    def field_stats(self, name: str) -> _FieldIndex:
        return self._fields[name]


def build_index(db: ExpressionDatabase) -> RetrievalIndex:
    return RetrievalIndex(db)


def retrieve(index: RetrievalIndex, query: RetrievalQuery) -> list[ScoredTag]:
    """Ranked tags for a free-text query, at most ``query.k`` results.

    An exact match of the query text against a canonical name or alias
    short-circuits to rank 1 with an infinite score; remaining slots are
    filled by the BM25 scorer. Ties break by database order.
    """
    results: list[ScoredTag] = []
    exact_name: str | None = None
    stripped = query.text.strip()
    exact_tag = resolve_alias(index.db, stripped)
    if exact_tag is not None:
        exact_name = exact_tag.name
        matched = "name" if stripped == exact_tag.name else "alias"
        results.append(ScoredTag(exact_name, math.inf, (matched,)))

    q_tokens = tokenize(query.text)
    scored: list[tuple[float, int, str, tuple[str, ...]]] = []
    if q_tokens:
        for i, name in enumerate(index.tag_names):
            if name == exact_name:
                continue
            total = 0.0
            matched_fields = []
            for fname in FIELDS:
                s = index.field_stats(fname).score(i, q_tokens)
                if s > 0.0:
                    total += FIELD_WEIGHTS[fname] * s
                    matched_fields.append(fname)
            if total > 0.0:
                scored.append((total, i, name, tuple(matched_fields)))
    scored.sort(key=lambda row: (-row[0], row[1]))

    for total, _i, name, matched_fields in scored:
        if len(results) >= query.k:
            break
        results.append(ScoredTag(name, total, matched_fields))
    return results[: query.k]


# --- LLM-backed retrieval ---

class LlmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


@dataclass
class LlmEndpointConfig:
    base_url: str
    model: str
    api_key: str | None = None
    timeout: float = 30.0

    @classmethod
    def from_env(cls) -> "LlmEndpointConfig":
        base_url = os.environ.get("EXPRFORGE_LLM_BASE_URL", "")
        if not base_url:
            raise EndpointUnavailable("EXPRFORGE_LLM_BASE_URL is not set")
        return cls(
            base_url=base_url,
            model=os.environ.get("EXPRFORGE_LLM_MODEL", ""),
            api_key=os.environ.get("EXPRFORGE_LLM_API_KEY"),
            timeout=float(os.environ.get("EXPRFORGE_LLM_TIMEOUT", "30")),
        )


class HttpLlmClient:
    """Minimal chat-completions client for OpenAI-compatible endpoints."""

    def __init__(self, config: LlmEndpointConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        url = self.config.base_url.rstrip("/") + "/v1/chat/completions"
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=self.config.timeout)
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except requests.RequestException as e:
            raise EndpointUnavailable(f"llm endpoint failed: {e}") from e
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise EndpointUnavailable(f"unexpected llm response shape: {e}") from e


@dataclass
class LlmRetrievalResult:
    tags: list[ScoredTag]
    degraded: bool = False
    detail: str | None = None


def build_llm_context(db: ExpressionDatabase, query: RetrievalQuery) -> str:
    lines = ["You match user text to facial expression tags.", "Known expression tags:"]
    for tag in db.tags:
        aka = ", ".join(a.text for a in tag.aliases)
        line = f"- {tag.name}: {tag.definition}"
        if aka:
            line += f" (also known as: {aka})"
        lines.append(line)
    lines.append("")
    lines.append("User text:")
    lines.append(query.text)
    lines.append("")
    lines.append(
        f"Reply with the {query.k} most relevant tag names from the list above, "
        "comma-separated or one per line. Output tag names only, nothing else."
    )
    return "\n".join(lines)


def parse_llm_tag_reply(db: ExpressionDatabase, reply: str) -> list[str]:
    """Extract tag names from a model reply: exact and alias lookup only."""
    names: list[str] = []
    for piece in re.split(r"[,\n]", reply):
        candidate = piece.strip().strip("\"'").strip()
        candidate = re.sub(r"^\d+[.)]\s*", "", candidate)  # tolerate numbered lists
        if not candidate:
            continue
        tag = resolve_alias(db, candidate)
        if tag is not None and tag.name not in names:
            names.append(tag.name)
    return names


def retrieve_via_llm(
    db: ExpressionDatabase, query: RetrievalQuery, llm: LlmClient
) -> LlmRetrievalResult:
    """Ask an external model for tag names; validate strictly against the DB.

    Unknown or unparseable names are dropped. When nothing valid is left the
    result falls back to the lexical retriever and is marked degraded.
    Endpoint failures raise EndpointUnavailable so the caller can decide
    whether to retry lexically.
    """
    prompt = build_llm_context(db, query)
    reply = llm.complete(prompt)
    names = parse_llm_tag_reply(db, reply)[: query.k]
    if names:
        tags = [
            ScoredTag(n, 1.0, ("name",) if n in reply else ("alias",)) for n in names
        ]
        return LlmRetrievalResult(tags=tags, degraded=False)
    fallback = retrieve(build_index(db), query)
    return LlmRetrievalResult(
        tags=fallback,
        degraded=True,
        detail="no valid tag name in model reply; fell back to lexical retrieval",
    )
