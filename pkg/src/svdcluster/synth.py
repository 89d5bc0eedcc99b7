"""Seeded synthetic collections covering the regimes the bounds care about."""

from __future__ import annotations

import numpy as np

from .collection import Collection

PROFILES = ("gaussian", "shared-subspace", "decaying-spectrum", "nested", "orthogonal-families")


def _orthonormal(rng: np.random.Generator, m: int, k: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((m, k)))
    # sign-fix so the draw is a deterministic function of the rng stream
    return Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))


def gaussian(rng, count, rows, cols):
    return [rng.standard_normal((rows, cols)) for _ in range(count)]


def shared_subspace(rng, count, rows, cols, true_rank):
    if not 1 <= true_rank <= rows:
        raise ValueError(f"true rank must lie in [1, {rows}]")
    U = _orthonormal(rng, rows, true_rank)
    return [U @ rng.standard_normal((true_rank, cols)) for _ in range(count)]


def decaying_spectrum(rng, count, rows, cols, alpha):
    """Each block has singular values ``scale * i**-alpha`` with random singular vectors."""
    k = min(rows, cols)
    decay = np.arange(1, k + 1, dtype=np.float64) ** (-float(alpha))
    out = []
    for _ in range(count):
        scale = rng.uniform(0.5, 2.0)
        U = _orthonormal(rng, rows, k)
        V = _orthonormal(rng, cols, k)
        out.append((U * (scale * decay)) @ V.T)
    return out


def nested(rng, count, rows, cols):
    """``A_i = A_1 X_i`` so every range sits inside ``range(A_1)``; norms halve each step."""
    A1 = rng.standard_normal((rows, cols))
    out = [A1]
    n1 = np.linalg.norm(A1)
    for i in range(1, count):
        A = A1 @ rng.standard_normal((cols, cols))
        out.append(A * (0.5**i * n1 / np.linalg.norm(A)))
    return out


def orthogonal_families(rng, count, rows, cols):
    """Blocks drawn from mutually orthogonal column subspaces of one orthogonal matrix."""
    k = min(cols, rows // count)
    if k < 1:
        raise ValueError(f"orthogonal-families needs rows >= count ({rows} < {count})")
    Q = _orthonormal(rng, rows, k * count)
    out = []
    for i in range(count):
        basis = Q[:, i * k : (i + 1) * k]
        out.append(basis @ rng.standard_normal((k, cols)) * rng.uniform(0.5, 2.0))
    return out


def generate(
    profile: str,
    count: int,
    rows: int,
    cols: int,
    seed: int,
    *,
    true_rank: int = 4,
    alpha: float = 1.0,
) -> Collection:
    """Deterministic collection for ``profile``; ids are ``b0000, b0001, ...``."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    if count < 1 or rows < 1 or cols < 1:
        raise ValueError("count, rows and cols must be positive")
    rng = np.random.default_rng(seed)
    if profile == "gaussian":
        arrays = gaussian(rng, count, rows, cols)
    elif profile == "shared-subspace":
        arrays = shared_subspace(rng, count, rows, cols, true_rank)
    elif profile == "decaying-spectrum":
        arrays = decaying_spectrum(rng, count, rows, cols, alpha)
    elif profile == "nested":
        arrays = nested(rng, count, rows, cols)
    else:
        arrays = orthogonal_families(rng, count, rows, cols)
    return Collection.from_arrays(arrays)
