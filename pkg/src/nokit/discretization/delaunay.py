"""Bowyer-Watson Delaunay triangulation in the plane.

Insertion runs inside a super-triangle.  Removing the super-triangle can
leave pockets along the convex hull, so the boundary is closed by ear
filling and the result is legalized with Lawson flips.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import DegenerateGeometry, InvalidArgument

INCIRCLE_TOL = 1e-12
DUPLICATE_TOL = 1e-12


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _incircle_many(P, tris, p) -> np.ndarray:
    """4x4 incircle determinants for ccw triangles ``tris`` against point ``p``.

    Rows ``[x, y, x^2 + y^2, 1]`` are translated by ``p`` first, which leaves
    the determinant unchanged and reduces it to a 3x3 one.
    """
    A = P[tris[:, 0]] - p
    B = P[tris[:, 1]] - p
    C = P[tris[:, 2]] - p
    a2 = np.einsum("ij,ij->i", A, A)
    b2 = np.einsum("ij,ij->i", B, B)
    c2 = np.einsum("ij,ij->i", C, C)
    return (
        A[:, 0] * (B[:, 1] * c2 - b2 * C[:, 1])
        - A[:, 1] * (B[:, 0] * c2 - b2 * C[:, 0])
        + a2 * (B[:, 0] * C[:, 1] - B[:, 1] * C[:, 0])
    )


def _incircle(P, a, b, c, d) -> float:
    return float(_incircle_many(P, np.array([[a, b, c]]), P[d])[0])


def _check_points(points: np.ndarray) -> np.ndarray:
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != 2:
        raise InvalidArgument(f"expected (n, 2) points, got {P.shape}")
    if P.shape[0] < 3:
        raise DegenerateGeometry(f"need at least 3 points, got {P.shape[0]}")
    if cKDTree(P).query_pairs(DUPLICATE_TOL):
        raise InvalidArgument("duplicate points in Delaunay input")
    return P


def _normalize(P: np.ndarray) -> np.ndarray:
    lo = P.min(axis=0)
    scale = float(np.max(P.max(axis=0) - lo))
    return (P - lo) / scale


def convex_hull(P: np.ndarray) -> list:
    """Monotone-chain hull, ccw, collinear boundary points dropped."""
    idx = sorted(range(len(P)), key=lambda i: (P[i][0], P[i][1]))
    lower, upper = [], []
    for i in idx:
        while len(lower) >= 2 and _orient(P[lower[-2]], P[lower[-1]], P[i]) <= 0:
            lower.pop()
        lower.append(i)
    for i in reversed(idx):
        while len(upper) >= 2 and _orient(P[upper[-2]], P[upper[-1]], P[i]) <= 0:
            upper.pop()
        upper.append(i)
    return lower[:-1] + upper[:-1]


def _bowyer_watson(Q: np.ndarray) -> list:
    n = len(Q)
    # super-triangle comfortably enclosing the unit box
    big = 20.0
    S = np.array([[-big, -big], [big + 1.0, -big], [0.5, big + 1.0]])
    P = np.vstack([Q, S])
    tris = np.array([[n, n + 1, n + 2]], dtype=np.int64)
    for i in range(n):
        det = _incircle_many(P, tris, P[i])
        bad = det > INCIRCLE_TOL
        if not np.any(bad):
            # point lies on a circumcircle of its containing triangle; use the
            # triangle(s) containing it so the cavity is never empty
            bad = _containing(P, tris, P[i])
        edges = {}
        for t in tris[bad]:
            for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                key = (min(e), max(e))
                if key in edges:
                    edges[key] = None
                else:
                    edges[key] = e
        new = [(e[0], e[1], i) for e in edges.values() if e is not None]
        tris = np.vstack([tris[~bad], np.array(new, dtype=np.int64)])
    keep = np.all(tris < n, axis=1)
    return [tuple(int(v) for v in t) for t in tris[keep]]


def _containing(P, tris, p) -> np.ndarray:
    A, B, C = P[tris[:, 0]], P[tris[:, 1]], P[tris[:, 2]]

    def side(u, v):
        return (v[:, 0] - u[:, 0]) * (p[1] - u[:, 1]) - (v[:, 1] - u[:, 1]) * (p[0] - u[:, 0])

    return (side(A, B) >= -INCIRCLE_TOL) & (side(B, C) >= -INCIRCLE_TOL) & (side(C, A) >= -INCIRCLE_TOL)


def _boundary_cycle(tris: list) -> list:
    count = {}
    for t in tris:
        for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (min(e), max(e))
            count[key] = count.get(key, 0) + 1
    nxt = {}
    for t in tris:
        for u, v in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            if count[(min(u, v), max(u, v))] == 1:
                nxt[u] = v
    start = next(iter(nxt))
    cycle, v = [start], nxt[start]
    while v != start:
        cycle.append(v)
        v = nxt[v]
    return cycle


def _fill_pockets(Q: np.ndarray, tris: list) -> list:
    """Add ears along the boundary until it is convex."""
    cycle = _boundary_cycle(tris)
    changed = True
    while changed:
        changed = False
        m = len(cycle)
        for k in range(m):
            u, v, w = cycle[k - 1], cycle[k], cycle[(k + 1) % m]
            # boundary runs ccw; a clockwise turn marks a pocket
            if _orient(Q[u], Q[v], Q[w]) < -INCIRCLE_TOL:
                if _ear_is_empty(Q, u, w, v):
                    tris.append((u, w, v))
                    del cycle[k]
                    changed = True
                    break
    return tris


def _ear_is_empty(Q, a, b, c) -> bool:
    A, B, C = Q[a], Q[b], Q[c]
    others = np.ones(len(Q), dtype=bool)
    others[[a, b, c]] = False
    X = Q[others]

    def side(u, v):
        return (v[0] - u[0]) * (X[:, 1] - u[1]) - (v[1] - u[1]) * (X[:, 0] - u[0])

    inside = (side(A, B) > INCIRCLE_TOL) & (side(B, C) > INCIRCLE_TOL) & (side(C, A) > INCIRCLE_TOL)
    return not np.any(inside)


def _legalize(Q: np.ndarray, tris: list) -> list:
    """Lawson flips until every interior edge passes the incircle test."""
    tris = [tuple(t) for t in tris]
    # cocircular quads keep the diagonal touching the lexicographically
    # smallest vertex: a consistent symbolic perturbation, so flips terminate
    rank = np.empty(len(Q), dtype=np.int64)
    rank[np.lexsort((Q[:, 1], Q[:, 0]))] = np.arange(len(Q))
    edge_map = {}

    def add(ti):
        t = tris[ti]
        for u, v in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            edge_map[(u, v)] = ti

    for ti in range(len(tris)):
        add(ti)
    stack = list(edge_map.keys())
    while stack:
        u, v = stack.pop()
        if (u, v) not in edge_map or (v, u) not in edge_map:
            continue
        t1, t2 = edge_map[(u, v)], edge_map[(v, u)]
        a = next(x for x in tris[t1] if x not in (u, v))
        b = next(x for x in tris[t2] if x not in (u, v))
        # t1 = (u, v, a) ccw, t2 = (v, u, b) ccw
        det = _incircle(Q, u, v, a, b)
        if det > INCIRCLE_TOL or (abs(det) <= INCIRCLE_TOL and min(rank[a], rank[b]) < min(rank[u], rank[v])):
            if _orient(Q[a], Q[b], Q[v]) <= 0 or _orient(Q[b], Q[a], Q[u]) <= 0:
                continue
            for x, y in ((u, v), (v, a), (a, u), (v, u), (u, b), (b, v)):
                edge_map.pop((x, y), None)
            tris[t1] = (a, b, v)
            tris[t2] = (b, a, u)
            add(t1)
            add(t2)
            stack.extend([(v, a), (a, u), (u, b), (b, v)])
    return tris


def triangulate(points: np.ndarray) -> np.ndarray:
    """Delaunay triangles as an ``(m, 3)`` array of ccw vertex indices."""
    P = _check_points(points)
    Q = _normalize(P)
    hull = convex_hull(Q)
    if len(hull) < 3:
        raise DegenerateGeometry("all points are collinear")
    area = 0.5 * abs(sum(_orient(Q[hull[0]], Q[hull[k]], Q[hull[k + 1]]) for k in range(1, len(hull) - 1)))
    if area <= 1e-14:
        raise DegenerateGeometry("all points are collinear")
    tris = _bowyer_watson(Q)
    tris = _fill_pockets(Q, tris)
    tris = _legalize(Q, tris)
    return np.array(tris, dtype=np.int64)


def delaunay_weights_2d(points: np.ndarray) -> np.ndarray:
    """Quadrature weights: each triangle hands a third of its area to each vertex."""
    P = np.asarray(points, dtype=np.float64)
    tris = triangulate(P)
    a, b, c = P[tris[:, 0]], P[tris[:, 1]], P[tris[:, 2]]
    area = 0.5 * np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    delta = np.zeros(len(P))
    for k in range(3):
        np.add.at(delta, tris[:, k], area / 3)
    return delta


def hull_area(points: np.ndarray) -> float:
    P = np.asarray(points, dtype=np.float64)
    h = convex_hull(P)
    x, y = P[h, 0], P[h, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
