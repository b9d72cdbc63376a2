"""Latency metrics: a synchronized sample registry and nearest-rank percentiles."""

from __future__ import annotations

import math
import threading

from .errors import EmptySamples


def percentile(samples: list[float], k: float) -> float:
    """Nearest-rank percentile: sort ascending, take the ceil(k/100 * n)-th
    element (1-based). k must be in (0, 100]."""
    if not samples:
        raise EmptySamples("percentile of empty sample list")
    if not 0 < k <= 100:
        raise ValueError(f"percentile K must be in (0, 100], got {k}")
    ordered = sorted(samples)
    rank = math.ceil(k / 100 * len(ordered))
    return ordered[rank - 1]


class MetricsRegistry:
    """Append-only per-node duration samples plus per-entry request counters.

    The only cross-request mutable structure in the system; all access is
    internally locked.
    """

    def __init__(self, node_names: list[str] | None = None):
        self._lock = threading.Lock()
        self._node_samples: dict[str, list[tuple[float, str]]] = {
            n: [] for n in (node_names or [])
        }
        self._entry_counts: dict[str, dict[str, int]] = {}

    def record_node(self, node: str, duration_ms: float, status: str) -> None:
        with self._lock:
            self._node_samples.setdefault(node, []).append((duration_ms, status))

    def record_entry(self, entry: str, ok: bool) -> None:
        with self._lock:
            counts = self._entry_counts.setdefault(
                entry, {"requests": 0, "errors": 0})
            counts["requests"] += 1
            if not ok:
                counts["errors"] += 1

    def snapshot(self) -> dict:
        with self._lock:
            nodes = {n: list(s) for n, s in self._node_samples.items()}
            entries = {e: dict(c) for e, c in self._entry_counts.items()}
        return {"nodes": nodes, "entries": entries}


def metrics_report(registry: MetricsRegistry) -> dict:
    """Per-node count/p50/p95 report with canonical key order; percentiles are
    null when a node has no samples."""
    snap = registry.snapshot()
    nodes = {}
    for name in sorted(snap["nodes"]):
        samples = [d for d, _ in snap["nodes"][name]]
        nodes[name] = {
            "count": len(samples),
            "p50_ms": percentile(samples, 50) if samples else None,
            "p95_ms": percentile(samples, 95) if samples else None,
        }
    entries = {
        name: {"requests": c["requests"], "errors": c["errors"]}
        for name, c in sorted(snap["entries"].items())
    }
    return {"nodes": nodes, "entries": entries}
