"""Shared numeric helpers: feature standardization and seed derivation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def stable_key(name: str) -> int:
    """Map a domain name to a fixed 64-bit integer (platform independent)."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(seed: int, *keys: int | str) -> np.random.Generator:
    """Deterministic child generator for (seed, keys).

    Distinct key tuples give statistically independent streams, so parallel
    tasks seeded this way are reproducible regardless of scheduling.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for k in keys:
        entropy.append(stable_key(k) if isinstance(k, str) else int(k) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class Standardizer:
    """Per-feature mean/std transform fitted on a training matrix.

    Zero-variance features get scale 1 so they pass through unchanged
    instead of dividing by zero.
    """

    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        center = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0.0, scale, 1.0)
        return cls(center=center, scale=scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.center) / self.scale

    def l1_distance(self, a: np.ndarray, b: np.ndarray) -> float:
        """L1 distance between two single rows in standardized space."""
        return float(np.abs((a - b) / self.scale).sum())
