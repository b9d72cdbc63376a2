"""Answer post-processing: de-duplication and final combining/thresholding."""

from __future__ import annotations

import argparse
import re
import string

_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace."""
    t = text.lower()
    t = t.translate(_PUNCT_TABLE)
    t = _ARTICLE_RE.sub(" ", t)
    return " ".join(t.split())


def dedup(answers: list[dict]) -> list[dict]:
    """Group answers by normalized text, keep the best-scoring member of each
    group (ties: lowest doc_id, then lowest begin_char), preserve input order
    of kept members, and drop answers that normalize to the empty string."""
    best: dict[str, tuple] = {}  # key -> (sort key, input index)
    for i, a in enumerate(answers):
        key = normalize_answer(a["text"])
        if not key:
            continue
        rank = (-a["score"], a["doc_id"], a["begin_char"])
        if key not in best or rank < best[key][0]:
            best[key] = (rank, i)
    keep = sorted(i for _, i in best.values())
    return [answers[i] for i in keep]


def combine(answers: list[dict], threshold: float, top_n: int) -> list[dict]:
    """Filter by score threshold, rank by (score desc, doc_id asc, begin_char
    asc), truncate to top_n."""
    kept = [a for a in answers if a["score"] >= threshold]
    kept.sort(key=lambda a: (-a["score"], a["doc_id"], a["begin_char"]))
    return kept[: max(top_n, 0)]


def handle_dedup(request: dict) -> dict:
    return {"answers": dedup(request["answers"])}


def handle_combine(request: dict) -> dict:
    return {"answers": combine(request["answers"], request["threshold"],
                               request["top_n"])}


def _node_main(prog: str, service_name: str, handler, argv=None) -> None:
    from .demo import load_demo_schemas
    from .nodekit import serve_node

    parser = argparse.ArgumentParser(prog=prog)
    parser.add_argument("--port", type=int, required=True)
    args = parser.parse_args(argv)
    schemas = load_demo_schemas()
    server = serve_node(schemas, schemas.services[service_name], handler,
                        args.port)
    print(f"{prog} listening on {server.address}", flush=True)
    server.serve_forever()


def dedup_main(argv=None) -> None:
    _node_main("dedup-node", "Dedup", handle_dedup, argv)


def combiner_main(argv=None) -> None:
    _node_main("combiner-node", "Combiner", handle_combine, argv)
