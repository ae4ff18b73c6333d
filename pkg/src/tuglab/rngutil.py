"""Deterministic seeding and uniform-ball sampling.

Two RNG flavors are used deliberately:

* the per-step game loop runs on ``random.Random`` (cheap scalar calls),
* batch estimators run on ``numpy.random.Generator`` (vectorized draws).

Both are seeded through :func:`derive_seed`, a stable 64-bit hash mix of the
master seed and a label path, so results are reproducible and independent of
scheduling or thread count.
"""

from __future__ import annotations

import hashlib
import math
import random

import numpy as np

from .errors import ParameterError

_MASK64 = (1 << 64) - 1


def derive_seed(master: int, *parts) -> int:
    """Stable 64-bit seed from a master seed and a label path.

    Parts may be ints or strings; the encoding is unambiguous so
    ("a", 1) and ("a1",) derive different seeds.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(int(master & _MASK64).to_bytes(8, "little"))
    for part in parts:
        if isinstance(part, int):
            h.update(b"i")
            h.update(part.to_bytes(16, "little", signed=True))
        else:
            raw = str(part).encode("utf-8")
            h.update(b"s")
            h.update(len(raw).to_bytes(4, "little"))
            h.update(raw)
    return int.from_bytes(h.digest(), "little")


def make_rng(master: int, *parts) -> random.Random:
    """Scalar RNG for game episodes."""
    return random.Random(derive_seed(master, *parts))


def make_np_rng(master: int, *parts) -> np.random.Generator:
    """Vector RNG for batch estimators."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *parts)))


def uniform_ball_point(rng: random.Random, n: int, eps: float) -> tuple:
    """One point uniform in the open ball B_eps(0) in R^n.

    Direction from n standard normals, radius eps * U^(1/n). The radius draw
    uses U in [0, 1), so the boundary has probability zero by construction;
    the guard loop resamples the (measure-zero) degenerate direction.
    """
    if n < 1:
        raise ParameterError(f"dimension must be >= 1, got {n}")
    while True:
        g = [rng.gauss(0.0, 1.0) for _ in range(n)]
        s = math.sqrt(sum(gi * gi for gi in g))
        if s > 0.0:
            break
    rad = eps * rng.random() ** (1.0 / n)
    if rad >= eps:  # defensive; cannot happen with U in [0,1)
        rad = math.nextafter(eps, 0.0)
    return tuple(rad * gi / s for gi in g)


def uniform_ball_batch(rng: np.random.Generator, m: int, n: int, eps: float) -> np.ndarray:
    """(m, n) array of independent uniform draws from the open ball B_eps(0)."""
    g = rng.standard_normal((m, n))
    norms = np.linalg.norm(g, axis=1)
    bad = norms == 0.0
    while bad.any():  # probability-zero guard
        g[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(g, axis=1)
        bad = norms == 0.0
    radii = eps * rng.random(m) ** (1.0 / n)
    return g * (radii / norms)[:, None]
