"""Offline evaluation: token-level F1 scoring, optimal-threshold selection by
exhaustive sweep over observed scores, and end-to-end latency percentiles
against a live gateway.
"""

from __future__ import annotations

import argparse
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import EmptyResults, GatewayUnreachable, MalformedExample, NoGold
from .metrics import percentile
from .postproc import normalize_answer


def _norm_tokens(text: str) -> list[str]:
    return normalize_answer(text).split()


def token_f1(prediction: str, golds: list[str]) -> float:
    """Bag-of-tokens F1 over normalized tokens, max over golds. An empty gold
    list means unanswerable: the empty prediction scores 1.0, anything else 0.0."""
    pred = _norm_tokens(prediction)
    gold_lists = [_norm_tokens(g) for g in golds] if golds else [[]]
    best = 0.0
    for gold in gold_lists:
        if not pred and not gold:
            best = max(best, 1.0)
            continue
        if not pred or not gold:
            continue
        overlap = 0
        counts: dict[str, int] = {}
        for t in gold:
            counts[t] = counts.get(t, 0) + 1
        for t in pred:
            if counts.get(t, 0) > 0:
                counts[t] -= 1
                overlap += 1
        if overlap == 0:
            continue
        p = overlap / len(pred)
        r = overlap / len(gold)
        best = max(best, 2 * p * r / (p + r))
    return best


@dataclass(frozen=True)
class ThresholdCurvePoint:
    threshold: float
    precision: float
    recall: float
    f1: float

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def optimal_threshold(results: list[tuple[float, float, bool]]
                      ) -> tuple[float, float, list[ThresholdCurvePoint]]:
    """Sweep candidate thresholds (every distinct score plus +inf); at each,
    examples with score >= threshold count as answered. Returns the threshold
    maximizing aggregate F1 (ties -> largest threshold), its F1, and the curve.

    results: (score, f1_if_answered, has_gold) per example.
    """
    if not results:
        raise EmptyResults("no evaluation results")
    total_gold = sum(1 for _, _, has_gold in results if has_gold)
    if total_gold == 0:
        raise NoGold("no example has a gold answer")
    candidates = sorted({score for score, _, _ in results}) + [math.inf]
    curve: list[ThresholdCurvePoint] = []
    best_tau, best_f1 = candidates[0], -1.0
    for tau in candidates:
        answered = [(s, f1) for s, f1, _ in results if s >= tau]
        f1_sum = sum(f1 for _, f1 in answered)
        precision = f1_sum / len(answered) if answered else 0.0
        recall = f1_sum / total_gold
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        curve.append(ThresholdCurvePoint(tau, precision, recall, f1))
        if f1 >= best_f1:  # ascending sweep, so >= keeps the largest tau
            best_tau, best_f1 = tau, f1
    return best_tau, best_f1, curve


def _ask(gateway: str, question: str, corpus_id: str, k: int) -> tuple[dict, float]:
    body = {"input": {"question": question, "corpus_id": corpus_id,
                      "k": k, "threshold": 0.0}}
    start = time.perf_counter()
    try:
        resp = requests.post(f"{gateway.rstrip('/')}/entry/ask", json=body,
                             timeout=30)
    except requests.RequestException as exc:
        raise GatewayUnreachable(f"cannot reach gateway {gateway!r}: {exc}") from exc
    latency_ms = (time.perf_counter() - start) * 1000.0
    if resp.status_code != 200:
        raise GatewayUnreachable(
            f"gateway returned HTTP {resp.status_code}: {resp.text[:200]}")
    return resp.json(), latency_ms


def load_examples(path: str | Path) -> list[dict]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                ex = json.loads(raw)
                if not isinstance(ex.get("question"), str) or not ex["question"]:
                    raise ValueError("question must be a nonempty string")
                if not isinstance(ex.get("gold_answers"), list):
                    raise ValueError("gold_answers must be a list")
                if not isinstance(ex.get("corpus_id"), str):
                    raise ValueError("corpus_id must be a string")
            except (json.JSONDecodeError, ValueError) as exc:
                raise MalformedExample(str(exc), line=lineno) from exc
            examples.append(ex)
    if not examples:
        raise EmptyResults(f"no examples in {path}")
    return examples


def run_eval(gateway: str, examples_path: str | Path, k: int, *,
             concurrency: int = 1, out_dir: str | Path | None = None) -> dict:
    """Query the gateway for every example, then report the optimal threshold,
    aggregate F1, exact match, and end-to-end latency percentiles."""
    examples = load_examples(examples_path)

    def one(ex: dict) -> dict:
        payload, latency_ms = _ask(gateway, ex["question"], ex["corpus_id"], k)
        answers = payload["output"]["answers"]
        pred = answers[0]["text"] if answers else ""
        score = answers[0]["score"] if answers else 0.0
        return {
            "question": ex["question"],
            "gold_answers": ex["gold_answers"],
            "prediction": pred,
            "score": score,
            "f1": token_f1(pred, ex["gold_answers"]),
            "exact_match": int(normalize_answer(pred) in
                               {normalize_answer(g) for g in ex["gold_answers"]}
                               if ex["gold_answers"] else pred == ""),
            "latency_ms": latency_ms,
        }

    if concurrency > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            rows = list(pool.map(one, examples))
    else:
        rows = [one(ex) for ex in examples]

    results = [(r["score"], r["f1"], bool(r["gold_answers"])) for r in rows]
    tau, best_f1, curve = optimal_threshold(results)
    latencies = [r["latency_ms"] for r in rows]
    report = {
        "examples": len(rows),
        "k": k,
        "optimal_threshold": tau,
        "best_f1": best_f1,
        "exact_match": sum(r["exact_match"] for r in rows) / len(rows),
        "latency_ms": {
            "p50": percentile(latencies, 50),
            "p95": percentile(latencies, 95),
        },
        "under_load": concurrency > 1,
        "curve": [pt.to_json() for pt in curve],
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "raw.jsonl", "w", encoding="utf-8") as fh:
            for r in rows:
                fh.write(json.dumps(r, ensure_ascii=False) + "\n")
        (out / "report.json").write_text(
            json.dumps(report, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8")
        (out / "table.txt").write_text(format_table(report), encoding="utf-8")
    return report


def format_table(report: dict) -> str:
    """Aligned summary table (F1 and latency percentiles in seconds)."""
    header = f"{'System':<12} {'F1':>6} {'T_50':>7} {'T_95':>7}"
    suffix = " (under load)" if report.get("under_load") else ""
    row = (f"{'this-run':<12} {report['best_f1'] * 100:>6.1f} "
           f"{report['latency_ms']['p50'] / 1000:>7.2f} "
           f"{report['latency_ms']['p95'] / 1000:>7.2f}")
    return f"{header}{suffix}\n{row}\n"


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(prog="flow-eval",
                                     description="offline pipeline evaluation")
    parser.add_argument("--gateway", required=True)
    parser.add_argument("--examples", required=True)
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--concurrency", type=int, default=1)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    report = run_eval(args.gateway, args.examples, args.k,
                      concurrency=args.concurrency, out_dir=args.out)
    print(json.dumps({k: v for k, v in report.items() if k != "curve"},
                     indent=2))
    print(format_table(report), end="")


if __name__ == "__main__":
    main()
