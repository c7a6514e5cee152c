"""Labeled seed derivation so each stage draws from an independent stream."""
from __future__ import annotations

import hashlib

import numpy as np


def child_seed(master: int, label: str) -> int:
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def child_rng(master: int, label: str) -> np.random.Generator:
    return np.random.default_rng(child_seed(master, label))
