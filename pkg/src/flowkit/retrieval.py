"""Retrieval node: paragraph-unit corpus ingestion and native BM25 top-k
search behind the Retrieval service interface.

Analysis is deliberately simple and fully documented: lowercase, split on
non-alphanumeric boundaries, drop the classic 33-word English stopword list,
no stemming.
"""

from __future__ import annotations

import argparse
import json
import math
import re
from dataclasses import dataclass, field

from .errors import DuplicateDocId, MalformedLine, UnknownCorpus, UnknownDoc

# The classic standard-analyzer English stop set (33 words).
STOPWORDS = frozenset(
    "a an and are as at be but by for if in into is it no not of on or such "
    "that the their then there these they this to was will with".split()
)

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    """Lowercased alphanumeric tokens with character offsets into the original
    text; stopwords removed."""
    out = []
    for m in _TOKEN_RE.finditer(text):
        tok = m.group().lower()
        if tok not in STOPWORDS:
            out.append(Token(tok, m.start(), m.end()))
    return out


def terms(text: str) -> list[str]:
    return [t.text for t in tokenize(text)]


@dataclass
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")


@dataclass
class InvertedIndex:
    corpus_id: str
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)
    docs: dict[str, tuple[str, str, str]] = field(default_factory=dict)  # id, title, text
    N: int = 0
    avgdl: float = 0.0


def _paragraphs(text: str) -> list[str]:
    """Split on blank-line boundaries; paragraphs keep internal newlines."""
    parts = re.split(r"\n\s*\n", text)
    return [p for p in (part.strip() for part in parts) if p]


def ingest(corpus_id: str, lines) -> InvertedIndex:
    """Build an index from a JSONL stream of {"id","title","text"} documents,
    one retrieval unit per paragraph (doc_id "<id>#<paragraph-index>")."""
    index = InvertedIndex(corpus_id)
    seen_ids: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            doc = json.loads(raw)
            doc_id, title, text = doc["id"], doc["title"], doc["text"]
            if not all(isinstance(v, str) for v in (doc_id, title, text)):
                raise TypeError("id/title/text must be strings")
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedLine(f"bad corpus line: {exc}", line=lineno) from exc
        if doc_id in seen_ids:
            raise DuplicateDocId(f"duplicate document id {doc_id!r}", line=lineno)
        seen_ids.add(doc_id)
        for para_idx, para in enumerate(_paragraphs(text)):
            ref = f"{doc_id}#{para_idx}"
            toks = terms(para)
            index.docs[ref] = (doc_id, title, para)
            index.doc_lengths[ref] = len(toks)
            tf: dict[str, int] = {}
            for t in toks:
                tf[t] = tf.get(t, 0) + 1
            for t, count in tf.items():
                index.postings.setdefault(t, []).append((ref, count))
    index.N = len(index.docs)
    index.avgdl = (sum(index.doc_lengths.values()) / index.N) if index.N else 0.0
    return index


def idf(index: InvertedIndex, term: str) -> float:
    """ln(1 + (N - n + 0.5)/(n + 0.5)); non-negative for all 0 <= n <= N."""
    n = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.N - n + 0.5) / (n + 0.5))


def bm25_score(index: InvertedIndex, params: Bm25Params,
               query_terms: list[str], doc: str) -> float:
    if doc not in index.docs:
        raise UnknownDoc(f"no document {doc!r} in corpus {index.corpus_id!r}")
    dl = index.doc_lengths[doc]
    score = 0.0
    for q in query_terms:
        tf = 0
        for ref, count in index.postings.get(q, ()):
            if ref == doc:
                tf = count
                break
        if tf == 0:
            continue
        denom = tf + params.k1 * (1.0 - params.b + params.b * dl / index.avgdl)
        score += idf(index, q) * tf * (params.k1 + 1.0) / denom
    return score


def retrieve(index: InvertedIndex, params: Bm25Params, query: str,
             k: int) -> list[dict]:
    """Top-k paragraphs by descending score, ties by ascending doc_id; only
    positive scores are returned."""
    if k <= 0:
        return []
    query_terms = terms(query)
    candidates: set[str] = set()
    for q in query_terms:
        candidates.update(ref for ref, _ in index.postings.get(q, ()))
    scored = []
    for ref in candidates:
        s = bm25_score(index, params, query_terms, ref)
        if s > 0:
            scored.append((ref, s))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    out = []
    for ref, s in scored[:k]:
        _, title, text = index.docs[ref]
        out.append({"doc_id": ref, "title": title, "text": text, "score": s})
    return out


class RetrievalService:
    """Business logic behind the Retrieval node: multiple named corpora."""

    def __init__(self, params: Bm25Params | None = None):
        self.params = params or Bm25Params()
        self.indexes: dict[str, InvertedIndex] = {}

    def add_corpus(self, corpus_id: str, lines) -> InvertedIndex:
        index = ingest(corpus_id, lines)
        self.indexes[corpus_id] = index
        return index

    def handle(self, request: dict) -> dict:
        from .nodekit import HandlerError

        corpus_id = request["corpus_id"]
        if corpus_id not in self.indexes:
            raise HandlerError(f"no such corpus {corpus_id!r}",
                               code=UnknownCorpus.code)
        docs = retrieve(self.indexes[corpus_id], self.params,
                        request["query"], request["k"])
        return {"docs": docs}


def main(argv=None) -> None:
    from .demo import load_demo_schemas
    from .nodekit import serve_node

    parser = argparse.ArgumentParser(prog="ir-node",
                                     description="BM25 retrieval node")
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--corpus", action="append", default=[],
                        metavar="NAME=PATH", required=False)
    parser.add_argument("--k1", type=float, default=1.2)
    parser.add_argument("--b", type=float, default=0.75)
    args = parser.parse_args(argv)

    service = RetrievalService(Bm25Params(args.k1, args.b))
    for spec in args.corpus:
        name, _, path = spec.partition("=")
        if not path:
            parser.error(f"--corpus expects NAME=PATH, got {spec!r}")
        with open(path, encoding="utf-8") as fh:
            service.add_corpus(name, fh)
    schemas = load_demo_schemas()
    server = serve_node(schemas, schemas.services["Retrieval"], service.handle,
                        args.port)
    print(f"ir-node listening on {server.address}", flush=True)
    server.serve_forever()


if __name__ == "__main__":
    main()
