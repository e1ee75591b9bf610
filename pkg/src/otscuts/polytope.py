"""Exact vertex enumeration for small polytopes.

Brute force over active sets: every choice of ``dim - #equalities``
inequalities is solved together with the equalities. A batched float pass
discards singular or clearly infeasible choices; every survivor is then
re-solved and re-checked in exact rational arithmetic, so the returned
vertices are exact.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .lp import LpError, _sparse_solve

Vertex = Tuple[Fraction, ...]

_SCREEN_DET = 1e-9
_SCREEN_FEAS = 1e-6
_CHUNK = 20000


def _as_fractions(rows):
    return [[Fraction(v) for v in r] for r in rows]


def exact_vertices(A_ub: Sequence[Sequence], b_ub: Sequence,
                   A_eq: Optional[Sequence[Sequence]] = None,
                   b_eq: Optional[Sequence] = None) -> List[Vertex]:
    """Vertices of ``{z : A_eq z = b_eq, A_ub z <= b_ub}``, sorted.

    ``A_eq`` must have full row rank. The polytope is assumed pointed.
    """
    A_ub = _as_fractions(A_ub)
    b_ub = [Fraction(v) for v in b_ub]
    A_eq = _as_fractions(A_eq or [])
    b_eq = [Fraction(v) for v in (b_eq or [])]
    dim = len(A_ub[0]) if A_ub else len(A_eq[0])
    k = dim - len(A_eq)
    if k < 0:
        raise ValueError("more equalities than variables")
    Fu = np.array([[float(v) for v in r] for r in A_ub]).reshape(len(A_ub), dim)
    fb = np.array([float(v) for v in b_ub])
    Fe = np.array([[float(v) for v in r] for r in A_eq]).reshape(len(A_eq), dim)
    fe = np.array([float(v) for v in b_eq])
    found = set()
    screened = set()
    combos = itertools.combinations(range(len(A_ub)), k)
    while True:
        chunk = list(itertools.islice(combos, _CHUNK))
        if not chunk:
            break
        idx = np.array(chunk, dtype=int).reshape(len(chunk), k)
        M = np.concatenate([np.broadcast_to(Fe, (len(chunk),) + Fe.shape), Fu[idx]], axis=1)
        rhs = np.concatenate([np.broadcast_to(fe, (len(chunk), len(fe))), fb[idx]], axis=1)
        det = np.linalg.det(M) if dim else np.ones(len(chunk))
        ok = np.abs(det) > _SCREEN_DET
        if not ok.any():
            continue
        z = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
        slack = z @ Fu.T - fb
        feas = (slack <= _SCREEN_FEAS).all(axis=1)
        for c, zf in zip(np.array(chunk)[ok][feas], z[feas]):
            # degenerate vertices arise from many active sets; solve each once
            key = tuple(np.round(zf, 7))
            if key in screened:
                continue
            screened.add(key)
            v = _exact_point(A_eq, b_eq, A_ub, b_ub, [int(i) for i in c], dim)
            if v is not None:
                found.add(v)
    return sorted(found)


def _exact_point(A_eq, b_eq, A_ub, b_ub, active, dim) -> Optional[Vertex]:
    rows = list(A_eq) + [A_ub[i] for i in active]
    rhs = list(b_eq) + [b_ub[i] for i in active]
    sparse = [{j: v for j, v in enumerate(r) if v != 0} for r in rows]
    try:
        z = _sparse_solve(sparse, rhs, dim)
    except LpError:
        return None
    z = tuple(z)
    for r, b in zip(A_ub, b_ub):
        if sum(a * v for a, v in zip(r, z)) > b:
            return None
    return z
