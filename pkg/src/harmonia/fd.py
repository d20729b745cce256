"""Central finite-difference stencils with one Richardson level.

A stencil is a set of offsets around a base point plus linear weights that
turn the sampled values into derivative estimates.  The Richardson-combined
central differences ``(4 D(h) - D(2h)) / 3`` are fourth-order accurate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = ["Stencil", "gradient_stencil", "hessian_stencil", "central_stencil", "apply_stencil", "jet"]

# evaluations per call are chunked so that stacked arrays stay small
CHUNK_POINTS = 4096


@dataclass(frozen=True)
class Stencil:
    """Offsets (in units of ``h``) with weights for value/gradient/Hessian.

    ``w1[a, s]`` gives ``d/du_a`` and ``w2[a, b, s]`` gives ``d^2/du_a du_b``
    after division by ``h`` and ``h**2`` respectively.
    """

    offsets: np.ndarray  # (S, n)
    w1: np.ndarray  # (n, S)
    w2: np.ndarray | None  # (n, n, S)
    center: int

    @property
    def size(self) -> int:
        return self.offsets.shape[0]


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


@lru_cache(maxsize=None)
def gradient_stencil(n: int) -> Stencil:
    """``4n + 1`` points: centre and ``+-h, +-2h`` along each axis."""
    offsets = [np.zeros(n)]
    w1 = np.zeros((n, 4 * n + 1))
    eye = np.eye(n)
    for a in range(n):
        base = len(offsets)
        offsets += [eye[a], -eye[a], 2 * eye[a], -2 * eye[a]]
        # (4 D(h) - D(2h)) / 3 with D(h) = (f(h) - f(-h)) / 2h
        w1[a, base: base + 4] = [8 / 12, -8 / 12, -1 / 12, 1 / 12]
    offsets = np.array(offsets)
    _freeze(offsets, w1)
    return Stencil(offsets, w1, None, 0)


@lru_cache(maxsize=None)
def hessian_stencil(n: int) -> Stencil:
    """``4 n^2 + 1`` points giving value, gradient and Hessian together."""
    eye = np.eye(n)
    offsets = [np.zeros(n)]
    index: dict[tuple[float, ...], int] = {tuple(np.zeros(n)): 0}

    def idx(vec: np.ndarray) -> int:
        key = tuple(vec)
        if key not in index:
            index[key] = len(offsets)
            offsets.append(vec)
        return index[key]

    rows1: list[dict[int, float]] = [dict() for _ in range(n)]
    rows2: list[list[dict[int, float]]] = [[dict() for _ in range(n)] for _ in range(n)]

    def add(row: dict[int, float], k: int, w: float) -> None:
        row[k] = row.get(k, 0.0) + w

    for a in range(n):
        for s in (1, 2):
            rich = 4 / 3 if s == 1 else -1 / 3
            p, m = idx(s * eye[a]), idx(-s * eye[a])
            add(rows1[a], p, rich / (2 * s))
            add(rows1[a], m, -rich / (2 * s))
            add(rows2[a][a], p, rich / s**2)
            add(rows2[a][a], m, rich / s**2)
            add(rows2[a][a], 0, -2 * rich / s**2)
    for a in range(n):
        for b in range(a + 1, n):
            for s in (1, 2):
                rich = 4 / 3 if s == 1 else -1 / 3
                for sa, sb, sign in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                    k = idx(s * (sa * eye[a] + sb * eye[b]))
                    add(rows2[a][b], k, sign * rich / (4 * s * s))
            rows2[b][a] = rows2[a][b]
    S = len(offsets)
    w1 = np.zeros((n, S))
    w2 = np.zeros((n, n, S))
    for a in range(n):
        for k, w in rows1[a].items():
            w1[a, k] = w
        for b in range(n):
            for k, w in rows2[a][b].items():
                w2[a, b, k] = w
    offsets = np.array(offsets)
    _freeze(offsets, w1, w2)
    return Stencil(offsets, w1, w2, 0)


@lru_cache(maxsize=None)
def central_stencil(n: int) -> Stencil:
    """Plain second-order ``+-h`` stencil (no Richardson), used by the oracles."""
    eye = np.eye(n)
    offsets = [np.zeros(n)]
    w1 = np.zeros((n, 2 * n + 1))
    for a in range(n):
        offsets += [eye[a], -eye[a]]
        w1[a, 1 + 2 * a] = 0.5
        w1[a, 2 + 2 * a] = -0.5
    offsets = np.array(offsets)
    _freeze(offsets, w1)
    return Stencil(offsets, w1, None, 0)


def stencil_points(u: np.ndarray, stencil: Stencil, h: float) -> np.ndarray:
    """``(P, S, n)`` evaluation points around each base point of ``u`` (``(P, n)``)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    return u[:, None, :] + h * stencil.offsets[None, :, :]


def evaluate_chunked(fn: Callable[[np.ndarray], np.ndarray], pts: np.ndarray) -> np.ndarray:
    """Evaluate ``fn`` on ``(..., n)`` points in flat chunks and restore the leading shape."""
    lead = pts.shape[:-1]
    flat = pts.reshape(-1, pts.shape[-1])
    outs = [fn(flat[i: i + CHUNK_POINTS]) for i in range(0, flat.shape[0], CHUNK_POINTS)]
    out = np.concatenate(outs, axis=0)
    return out.reshape(lead + out.shape[1:])


def apply_stencil(values: np.ndarray, stencil: Stencil, h: float, order: int):
    """Turn sampled ``values`` (``(P, S, ...)``) into derivative estimates.

    Returns ``(value, grad)`` for ``order == 1`` and ``(value, grad, hess)`` for
    ``order == 2``; ``grad`` has shape ``(P, n, ...)``, ``hess`` ``(P, n, n, ...)``.
    """
    value = values[:, stencil.center]
    grad = np.einsum("as,ps...->pa...", stencil.w1, values) / h
    if order == 1:
        return value, grad
    if stencil.w2 is None:
        raise ValueError("stencil carries no second-derivative weights")
    hess = np.einsum("abs,ps...->pab...", stencil.w2, values) / (h * h)
    return value, grad, hess


def jet(fn: Callable[[np.ndarray], np.ndarray], u: np.ndarray, h: float, order: int = 1):
    """Value and derivatives of a vectorised ``fn`` at the points ``u`` (``(P, n)``)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    n = u.shape[-1]
    stencil = gradient_stencil(n) if order == 1 else hessian_stencil(n)
    values = evaluate_chunked(fn, stencil_points(u, stencil, h))
    return apply_stencil(values, stencil, h, order)
