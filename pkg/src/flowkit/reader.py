"""Reader node: deterministic lexical span extraction over a single
question/passage pair.

Stands in for a neural reading-comprehension model behind the same service
interface: it returns the passage span whose stopword-filtered tokens have
the best F1 overlap with the question's content terms, plus a complementary
no-answer score.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from .retrieval import tokenize

DEFAULT_MAX_SPAN_TOKENS = 30


@dataclass(frozen=True)
class Answer:
    text: str
    begin_char: int
    end_char: int
    score: float
    no_answer_score: float
    doc_id: str

    def to_value(self) -> dict:
        return {
            "text": self.text,
            "begin_char": self.begin_char,
            "end_char": self.end_char,
            "score": self.score,
            "no_answer_score": self.no_answer_score,
            "doc_id": self.doc_id,
        }


def content_terms(question: str) -> set[str]:
    """Distinct stopword-filtered lowercase tokens of the question."""
    return {t.text for t in tokenize(question)}


def read_span(question: str, passage: str, doc_id: str = "",
              max_span_tokens: int = DEFAULT_MAX_SPAN_TOKENS) -> Answer:
    """Best span by F1 overlap between span tokens and question content terms.

    Tie-breaking: higher score, then earlier start, then shorter span. Span
    character extent runs from the first to the last token of the span in the
    original text, so returned text is an exact passage slice.
    """
    qterms = content_terms(question)
    tokens = tokenize(passage)
    best = (0.0, 0, 0)  # score, start index, length
    found = False
    if qterms and tokens:
        for i in range(len(tokens)):
            span_terms: set[str] = set()
            for j in range(i, min(i + max_span_tokens, len(tokens))):
                span_terms.add(tokens[j].text)
                m = len(span_terms & qterms)
                if m == 0:
                    continue
                length = j - i + 1
                p = m / length
                r = m / len(qterms)
                score = 2 * p * r / (p + r)
                if not found or score > best[0] or (
                        score == best[0] and (i, length) < (best[1], best[2])):
                    best = (score, i, length)
                    found = True
    if not found or best[0] == 0.0:
        return Answer("", 0, 0, 0.0, 1.0, doc_id)
    score, start, length = best
    begin = tokens[start].start
    end = tokens[start + length - 1].end
    return Answer(passage[begin:end], begin, end, score, 1.0 - score, doc_id)


class ReaderService:
    def __init__(self, max_span_tokens: int = DEFAULT_MAX_SPAN_TOKENS):
        self.max_span_tokens = max_span_tokens

    def handle(self, request: dict) -> dict:
        answer = read_span(request["question"], request["text"],
                           request["doc_id"], self.max_span_tokens)
        return {"answer": answer.to_value()}


def main(argv=None) -> None:
    from .demo import load_demo_schemas
    from .nodekit import serve_node

    parser = argparse.ArgumentParser(prog="reader-node",
                                     description="lexical span reader node")
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--max-span-tokens", type=int,
                        default=DEFAULT_MAX_SPAN_TOKENS)
    args = parser.parse_args(argv)

    schemas = load_demo_schemas()
    service = ReaderService(args.max_span_tokens)
    server = serve_node(schemas, schemas.services["Reader"], service.handle,
                        args.port)
    print(f"reader-node listening on {server.address}", flush=True)
    server.serve_forever()


if __name__ == "__main__":
    main()
