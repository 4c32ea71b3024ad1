"""Embedding-similarity scoring: greedy token matching over cosine similarity
(BERTScore-style, unweighted — no IDF).

Row maxima are summed with math.fsum, which returns the correctly rounded sum,
so scores are invariant under token reordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GreedyMatchScore:
    precision: float
    recall: float
    f1: float


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """L2-normalize each row; all-zero rows are left at zero."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array of token vectors, got ndim={arr.ndim}")
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    return arr / np.where(norms == 0.0, 1.0, norms)


def similarity_matrix(candidate_vectors: np.ndarray, reference_vectors: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity: entry [i, j] compares candidate token i with
    reference token j."""
    cand = normalize_rows(candidate_vectors)
    ref = normalize_rows(reference_vectors)
    if cand.shape[1] != ref.shape[1]:
        raise ValueError(
            f"embedding dim mismatch: candidate {cand.shape[1]} vs reference {ref.shape[1]}"
        )
    return cand @ ref.T


def greedy_match(candidate_vectors: np.ndarray, reference_vectors: np.ndarray) -> GreedyMatchScore:
    """Each candidate token greedily takes its best reference match (precision)
    and vice versa (recall); F1 combines the two. Empty sides score 0."""
    cand = np.asarray(candidate_vectors, dtype=np.float64)
    ref = np.asarray(reference_vectors, dtype=np.float64)
    if cand.size == 0 or ref.size == 0:
        return GreedyMatchScore(0.0, 0.0, 0.0)
    sim = similarity_matrix(cand, ref)
    precision = math.fsum(sim.max(axis=1)) / sim.shape[0]
    recall = math.fsum(sim.max(axis=0)) / sim.shape[1]
    denom = precision + recall
    f1 = 2.0 * precision * recall / denom if denom else 0.0
    return GreedyMatchScore(precision, recall, f1)


def bertscore_f1(candidate_vectors: np.ndarray, reference_vectors: np.ndarray) -> float:
    return greedy_match(candidate_vectors, reference_vectors).f1
