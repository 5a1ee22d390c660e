"""High-certainty pseudo-source construction.

Prediction uncertainty is the squared distance between a probability row and
the one-hot encoding of its argmax; the bank keeps the k most certain
embeddings seen so far (ties broken toward earlier arrivals), optionally
re-balanced to match predicted class proportions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples, InvalidInput
from .linalg import covariance

PROB_SUM_ATOL = 1e-6


def one_hot(p) -> np.ndarray:
    """Indicator vector of the argmax; ties break to the lowest index."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise InvalidInput("probability vector must be 1-D and non-empty")
    out = np.zeros_like(p)
    out[int(np.argmax(p))] = 1.0
    return out


def prediction_uncertainty(p) -> float:
    """Squared Euclidean distance between p and one_hot(p); lies in [0, 2)."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise InvalidInput("probability vector must be 1-D and non-empty")
    if np.min(p) < 0:
        raise InvalidInput(f"probabilities must be nonnegative, got min {np.min(p):.3e}")
    total = float(np.sum(p))
    if abs(total - 1.0) > PROB_SUM_ATOL:
        raise InvalidInput(f"probabilities must sum to 1 within {PROB_SUM_ATOL}, got {total}")
    diff = one_hot(p) - p
    return float(diff @ diff)


def batch_uncertainties(probs) -> np.ndarray:
    """Row-wise prediction uncertainty for an n x c probability matrix."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] < 1:
        raise InvalidInput("probability matrix must be 2-D")
    if np.min(probs) < 0:
        raise InvalidInput("probabilities must be nonnegative")
    sums = probs.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > PROB_SUM_ATOL:
        raise InvalidInput(f"probability rows must sum to 1 within {PROB_SUM_ATOL}")
    n = probs.shape[0]
    top = probs[np.arange(n), probs.argmax(axis=1)]
    # ||onehot - p||^2 = sum p^2 - p_max^2 + (1 - p_max)^2
    return np.sum(probs * probs, axis=1) - top * top + (1.0 - top) ** 2


@dataclass
class BankEntry:
    """One stored (embedding, uncertainty, predicted class) observation."""

    embedding: np.ndarray
    uncertainty: float
    predicted_class: int
    arrival_index: int

    def __post_init__(self):
        self.embedding = np.asarray(self.embedding, dtype=np.float64)
        if self.embedding.ndim != 1:
            raise InvalidInput("bank entry embedding must be a 1-D vector")
        if not np.all(np.isfinite(self.embedding)):
            raise InvalidInput("bank entry embedding contains non-finite values")
        if not 0.0 <= self.uncertainty < 2.0:
            raise InvalidInput(f"uncertainty must lie in [0, 2), got {self.uncertainty}")
        if self.predicted_class < 0:
            raise InvalidInput("predicted class must be nonnegative")

    def sort_key(self) -> tuple[float, int]:
        # eviction order: higher uncertainty first, later arrival first on ties
        return (self.uncertainty, self.arrival_index)


class PseudoSourceBank:
    """Capacity-k store of the lowest-uncertainty entries seen so far.

    The retained set after any update sequence equals the k smallest entries
    of the whole stream ordered by (uncertainty, arrival_index), which makes
    streaming and offline selection interchangeable. Single writer only.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidInput(f"bank capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.entries: list[BankEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, entry: BankEntry) -> "PseudoSourceBank":
        """Insert an entry, evicting the worst (uncertainty, arrival) if over capacity."""
        if self.entries and entry.embedding.shape != self.entries[0].embedding.shape:
            raise InvalidInput(
                f"entry dimension {entry.embedding.shape[0]} does not match bank "
                f"dimension {self.entries[0].embedding.shape[0]}"
            )
        self.entries.append(entry)
        if len(self.entries) > self.capacity:
            worst = max(range(len(self.entries)), key=lambda i: self.entries[i].sort_key())
            self.entries.pop(worst)
        return self

    def snapshot(self) -> list[BankEntry]:
        """Retained entries in arrival order."""
        return sorted(self.entries, key=lambda e: e.arrival_index)

    def embedding_matrix(self) -> np.ndarray:
        if not self.entries:
            raise InsufficientSamples("bank is empty")
        return np.vstack([e.embedding for e in self.snapshot()])


def pseudo_stats(bank: PseudoSourceBank) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the banked embeddings (the pseudo-source statistics)."""
    if len(bank) < 2:
        raise InsufficientSamples(f"pseudo-source statistics need >= 2 entries, got {len(bank)}")
    return covariance(bank.embedding_matrix())


@dataclass
class BalancedSelection:
    """Result of class-proportional selection; ``fallback`` marks a global top-k rescue."""

    entries: list[BankEntry]
    quotas: dict[int, int] = field(default_factory=dict)
    fallback: bool = False


def _largest_remainder(weights: np.ndarray, slots: int, class_ids: list[int]) -> dict[int, int]:
    """Apportion ``slots`` among classes proportionally to ``weights``.

    Floor quotas first, then hand leftover slots to the largest remainders;
    remainder ties prefer the larger weight, then the lower class index.
    """
    total = float(weights.sum())
    exact = weights * (slots / total)
    base = np.floor(exact).astype(int)
    leftover = slots - int(base.sum())
    order = sorted(
        range(len(class_ids)),
        key=lambda i: (-(exact[i] - base[i]), -weights[i], class_ids[i]),
    )
    quotas = {class_ids[i]: int(base[i]) for i in range(len(class_ids))}
    for i in order[:leftover]:
        quotas[class_ids[i]] += 1
    return quotas


def class_balanced_select(entries, k: int, class_counts) -> BalancedSelection:
    """Pick min(k, len(entries)) entries matching predicted-class proportions.

    Per-class quotas follow the largest-remainder rule over ``class_counts``;
    within a class the lowest-uncertainty entries win. Classes short of their
    quota surrender the shortfall, which is re-apportioned over classes that
    still have candidates left.
    """
    if k < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    entries = list(entries)
    class_counts = np.asarray(class_counts, dtype=np.int64)
    if class_counts.ndim != 1 or np.min(class_counts, initial=0) < 0:
        raise InvalidInput("class_counts must be a 1-D vector of nonnegative counts")
    if not entries:
        return BalancedSelection(entries=[], quotas={}, fallback=False)

    budget = min(k, len(entries))
    by_class: dict[int, list[BankEntry]] = {}
    for e in sorted(entries, key=lambda e: e.sort_key()):
        by_class.setdefault(e.predicted_class, []).append(e)

    nonzero = [j for j in range(len(class_counts)) if class_counts[j] > 0]
    if not nonzero or class_counts.sum() == 0:
        # no proportions to honor: degenerate global top-k
        picked = sorted(entries, key=lambda e: e.sort_key())[:budget]
        return BalancedSelection(entries=picked, quotas={}, fallback=True)

    quotas = _largest_remainder(class_counts[nonzero].astype(np.float64), budget, nonzero)
    if all(q == 0 for q in quotas.values()):
        picked = sorted(entries, key=lambda e: e.sort_key())[:budget]
        return BalancedSelection(entries=picked, quotas=quotas, fallback=True)

    picked: list[BankEntry] = []
    remaining = {j: by_class.get(j, []) for j in nonzero}
    # entries predicted as a zero-count class can only enter via fallback
    demand = dict(quotas)
    while True:
        shortfall = 0
        for j, q in demand.items():
            take = remaining[j][:q]
            picked.extend(take)
            remaining[j] = remaining[j][q:]
            shortfall += q - len(take)
        if shortfall == 0 or len(picked) >= budget:
            break
        open_classes = [j for j in nonzero if remaining[j]]
        if not open_classes:
            break
        demand = _largest_remainder(
            class_counts[open_classes].astype(np.float64), shortfall, open_classes
        )
        # guard against a zero-progress apportionment when shortfall < #classes
        if all(demand[j] == 0 for j in open_classes):
            j = max(open_classes, key=lambda j: (class_counts[j], -j))
            demand = {j: shortfall}
    if len(picked) < budget:
        # not enough candidates in counted classes; top up globally
        chosen = {id(e) for e in picked}
        rest = [e for e in sorted(entries, key=lambda e: e.sort_key()) if id(e) not in chosen]
        picked.extend(rest[: budget - len(picked)])
    picked = sorted(picked, key=lambda e: e.arrival_index)[:budget]
    return BalancedSelection(entries=picked, quotas=quotas, fallback=False)
