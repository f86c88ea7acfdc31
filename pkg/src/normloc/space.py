"""Finite metric spaces with integer graph metrics.

The whole package works over a finite metric space given by an explicit
distance table.  Graph families (cycles, paths, grids, trees, random regular
graphs) are turned into metric spaces through breadth-first shortest paths,
so their distances are exact integers.  Closed balls, geometry profiles and
metric-axiom validation live here as well.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import (
    DisconnectedGraph,
    FormatError,
    InvalidParams,
    UnknownPoint,
)

# Above this size the exact triangle-inequality sweep is replaced by seeded
# sampling of triples; every space used by the bundled experiments is smaller.
EXACT_VALIDATION_LIMIT = 512


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A finite metric space: labelled points and a distance table.

    The constructor only enforces shape consistency, so syntactically valid
    but metrically broken tables can be built and then fed to
    :func:`validate_metric`.  The distance table is copied and frozen.
    """

    labels: tuple[str, ...]
    dist: np.ndarray
    name: str = "space"

    def __post_init__(self) -> None:
        table = np.array(self.dist)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise FormatError("distance table must be a square matrix")
        if len(self.labels) != table.shape[0]:
            raise FormatError(
                f"{len(self.labels)} labels for {table.shape[0]} points"
            )
        if table.dtype.kind not in "iuf":
            raise FormatError("distances must be numeric")
        # Integer tables stay integers so graph metrics compare exactly.
        if table.dtype.kind in "iu":
            table = table.astype(np.int64)
        else:
            table = table.astype(np.float64)
        table.setflags(write=False)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        object.__setattr__(self, "dist", table)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def __repr__(self) -> str:
        return f"FiniteMetricSpace({self.name!r}, n={self.n})"


@dataclass(frozen=True)
class GeometryProfile:
    """Ball statistics of a space at one radius."""

    radius: float
    ball_sizes: tuple[int, ...]
    max_ball: int
    diameter: float

    def to_json(self) -> dict:
        return {
            "radius": self.radius,
            "ball_sizes": list(self.ball_sizes),
            "max_ball": self.max_ball,
            "diameter": self.diameter,
        }


def check_point(space: FiniteMetricSpace, x: int) -> int:
    """Return ``x`` as a plain int after bounds checking."""
    x = int(x)
    if not 0 <= x < space.n:
        raise UnknownPoint(f"point {x} outside space of size {space.n}")
    return x


def ball(space: FiniteMetricSpace, x: int, radius: float) -> np.ndarray:
    """Indices of the closed ball around ``x``, in increasing order."""
    x = check_point(space, x)
    if radius < 0:
        raise InvalidParams(f"ball radius must be nonnegative, got {radius}")
    return np.flatnonzero(space.dist[x] <= radius)


def geometry_profile(space: FiniteMetricSpace, radius: float) -> GeometryProfile:
    """Ball sizes, their maximum, and the diameter at the given radius."""
    if radius < 0:
        raise InvalidParams(f"radius must be nonnegative, got {radius}")
    sizes = (space.dist <= radius).sum(axis=1)
    diam = space.dist.max() if space.n else 0
    return GeometryProfile(
        radius=radius,
        ball_sizes=tuple(int(s) for s in sizes),
        max_ball=int(sizes.max()) if space.n else 0,
        diameter=float(diam) if space.dist.dtype.kind == "f" else int(diam),
    )


def from_graph(
    n: int,
    edges,
    labels: tuple[str, ...] | None = None,
    name: str = "graph",
) -> FiniteMetricSpace:
    """Shortest-path metric of a connected undirected graph.

    Edges are pairs of vertex indices in ``range(n)``.  Self loops are
    rejected, duplicate edges are merged.  Raises
    :class:`DisconnectedGraph` when some pair of vertices is unreachable.
    """
    n = int(n)
    if n < 1:
        raise InvalidParams(f"graph needs at least one vertex, got n={n}")
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    for e in edges:
        u, v = (int(p) for p in e)
        if not (0 <= u < n and 0 <= v < n):
            raise UnknownPoint(f"edge ({u}, {v}) outside vertex range 0..{n - 1}")
        if u == v:
            raise InvalidParams(f"self loop at vertex {u}")
        graph.add_edge(u, v)
    dist = np.full((n, n), -1, dtype=np.int64)
    for u, lengths in nx.all_pairs_shortest_path_length(graph):
        for v, d in lengths.items():
            dist[u, v] = d
    if (dist < 0).any():
        raise DisconnectedGraph(f"graph {name!r} is not connected")
    if labels is None:
        labels = tuple(str(i) for i in range(n))
    return FiniteMetricSpace(labels=labels, dist=dist, name=name)


def _require_params(kind: str, params: dict, keys: tuple[str, ...]) -> tuple:
    got = set(params)
    want = set(keys)
    if got != want:
        raise InvalidParams(
            f"family {kind!r} takes parameters {sorted(want)}, got {sorted(got)}"
        )
    return tuple(int(params[k]) for k in keys)


def generate_family(
    kind: str, params: dict, seed: int | None = None
) -> FiniteMetricSpace:
    """Build a named graph family as a metric space.

    Supported kinds and parameters:

    - ``cycle``: ``{"n": k}`` with k >= 3
    - ``path``: ``{"n": k}`` with k >= 1
    - ``grid``: ``{"rows": r, "cols": c}`` with r, c >= 1
    - ``binary_tree``: ``{"depth": d}`` with d >= 0; node ``i`` has children
      ``2i + 1`` and ``2i + 2``
    - ``random_regular``: ``{"n": k, "d": d}``; requires a seed, resamples
      (deterministically) until the graph is connected

    Seeds are ignored by the deterministic families.
    """
    if kind == "cycle":
        (n,) = _require_params(kind, params, ("n",))
        if n < 3:
            raise InvalidParams(f"cycle needs n >= 3, got {n}")
        graph = nx.cycle_graph(n)
        return from_graph(n, graph.edges, name=f"cycle_{n}")
    if kind == "path":
        (n,) = _require_params(kind, params, ("n",))
        if n < 1:
            raise InvalidParams(f"path needs n >= 1, got {n}")
        graph = nx.path_graph(n)
        return from_graph(n, graph.edges, name=f"path_{n}")
    if kind == "grid":
        rows, cols = _require_params(kind, params, ("rows", "cols"))
        if rows < 1 or cols < 1:
            raise InvalidParams(f"grid needs rows, cols >= 1, got {rows}x{cols}")
        graph = nx.grid_2d_graph(rows, cols)
        relabel = {(r, c): r * cols + c for r in range(rows) for c in range(cols)}
        graph = nx.relabel_nodes(graph, relabel)
        return from_graph(rows * cols, graph.edges, name=f"grid_{rows}x{cols}")
    if kind == "binary_tree":
        (depth,) = _require_params(kind, params, ("depth",))
        if depth < 0:
            raise InvalidParams(f"binary_tree needs depth >= 0, got {depth}")
        # balanced_tree labels by breadth-first order: children of i are
        # 2i + 1 and 2i + 2, which is the layout the rest of the code assumes.
        graph = nx.balanced_tree(2, depth)
        n = 2 ** (depth + 1) - 1
        return from_graph(n, graph.edges, name=f"binary_tree_{depth}")
    if kind == "random_regular":
        n, d = _require_params(kind, params, ("n", "d"))
        if seed is None:
            raise InvalidParams("random_regular requires a seed")
        if n <= d or d < 1 or (n * d) % 2 != 0:
            raise InvalidParams(
                f"random_regular needs 1 <= d < n and n*d even, got n={n}, d={d}"
            )
        rng = random.Random(int(seed))
        # The model can produce disconnected graphs; resample with the same
        # generator so the whole procedure stays a pure function of the seed.
        for _ in range(200):
            graph = nx.random_regular_graph(d, n, seed=rng)
            if nx.is_connected(graph):
                return from_graph(
                    n, graph.edges, name=f"random_regular_{n}_{d}_{int(seed)}"
                )
        raise InvalidParams(
            f"no connected {d}-regular graph on {n} vertices in 200 draws"
        )
    raise InvalidParams(f"unknown family kind {kind!r}")


def restrict(
    space: FiniteMetricSpace, points, name: str | None = None
) -> FiniteMetricSpace:
    """Sub-metric space on the given points (with the inherited metric)."""
    idx = np.array([check_point(space, p) for p in points], dtype=np.int64)
    if idx.size == 0:
        raise InvalidParams("cannot restrict to an empty point set")
    if len(set(idx.tolist())) != idx.size:
        raise InvalidParams("restriction points must be distinct")
    labels = tuple(space.labels[i] for i in idx)
    sub = space.dist[np.ix_(idx, idx)]
    return FiniteMetricSpace(
        labels=labels, dist=sub, name=name or f"{space.name}_restricted"
    )


def validate_metric(
    space: FiniteMetricSpace,
    seed: int = 0,
    sample_triples: int = 200_000,
    max_messages: int = 20,
) -> list[str]:
    """Check the metric axioms; return a list of human-readable violations.

    An empty list means the table passed.  Diagonal, positivity and symmetry
    are always checked exactly.  The triangle inequality is checked exactly
    up to ``EXACT_VALIDATION_LIMIT`` points and by seeded sampling of triples
    beyond that.  Message prefixes (``diagonal:``, ``positivity:``,
    ``symmetry:``, ``triangle:``, ``finite:``) are stable.
    """
    d = space.dist
    n = space.n
    problems: list[str] = []

    def report(msg: str) -> bool:
        # Returns False once the message budget is exhausted.
        if len(problems) < max_messages:
            problems.append(msg)
            return True
        if len(problems) == max_messages:
            problems.append("... further violations suppressed")
        return False

    if d.dtype.kind == "f" and not np.isfinite(d).all():
        bad = np.argwhere(~np.isfinite(d))
        for y, z in bad[:3]:
            report(f"finite: d({y}, {z}) is not finite")
        return problems

    for x in np.flatnonzero(np.diagonal(d) != 0):
        if not report(f"diagonal: d({x}, {x}) = {d[x, x]} != 0"):
            break

    off = ~np.eye(n, dtype=bool)
    for y, z in np.argwhere((d <= 0) & off):
        if not report(f"positivity: d({y}, {z}) = {d[y, z]} <= 0"):
            break

    for y, z in np.argwhere(d != d.T):
        if y < z and not report(
            f"symmetry: d({y}, {z}) = {d[y, z]} but d({z}, {y}) = {d[z, y]}"
        ):
            break

    if n <= EXACT_VALIDATION_LIMIT:
        for k in range(n):
            # d(y, z) <= d(y, k) + d(k, z) for all y, z, one mediator at a time.
            viol = d > d[:, k : k + 1] + d[k : k + 1, :]
            if viol.any():
                for y, z in np.argwhere(viol):
                    if not report(
                        f"triangle: d({y}, {z}) = {d[y, z]} > "
                        f"d({y}, {k}) + d({k}, {z}) = {d[y, k] + d[k, z]}"
                    ):
                        return problems
        return problems

    rng = np.random.default_rng(seed)
    triples = rng.integers(0, n, size=(sample_triples, 3))
    y, k, z = triples[:, 0], triples[:, 1], triples[:, 2]
    bad = np.flatnonzero(d[y, z] > d[y, k] + d[k, z])
    for i in bad:
        if not report(
            f"triangle: d({y[i]}, {z[i]}) = {d[y[i], z[i]]} > "
            f"d({y[i]}, {k[i]}) + d({k[i]}, {z[i]}) = {d[y[i], k[i]] + d[k[i], z[i]]}"
        ):
            break
    return problems


def space_to_json(space: FiniteMetricSpace) -> dict:
    """Serializable dict with name, labels and the full distance table."""
    return {
        "name": space.name,
        "labels": list(space.labels),
        "dist": space.dist.tolist(),
    }


def space_from_json(obj: dict) -> FiniteMetricSpace:
    """Read a space from either a distance table dict or a graph dict.

    Accepted layouts::

        {"labels": [...], "dist": [[...]], "name": optional}
        {"n": int, "edges": [[u, v], ...], "name": optional}

    Graph input goes through :func:`from_graph` and therefore must describe
    a connected graph on vertices ``0..n-1``.
    """
    if not isinstance(obj, dict):
        raise FormatError("space document must be a JSON object")
    if "dist" in obj:
        dist = obj["dist"]
        if not isinstance(dist, list) or not dist:
            raise FormatError("'dist' must be a nonempty list of rows")
        n = len(dist)
        if any(not isinstance(row, list) or len(row) != n for row in dist):
            raise FormatError("'dist' must be a square matrix")
        labels = obj.get("labels", [str(i) for i in range(n)])
        if len(labels) != n:
            raise FormatError(f"{len(labels)} labels for {n} points")
        try:
            table = np.array(dist)
        except ValueError as exc:
            raise FormatError(f"bad distance table: {exc}") from None
        return FiniteMetricSpace(
            labels=tuple(str(s) for s in labels),
            dist=table,
            name=str(obj.get("name", "space")),
        )
    if "edges" in obj:
        if "n" not in obj:
            raise FormatError("graph document needs 'n'")
        edges = obj["edges"]
        if not isinstance(edges, list) or any(len(e) != 2 for e in edges):
            raise FormatError("'edges' must be a list of [u, v] pairs")
        return from_graph(
            int(obj["n"]),
            edges,
            name=str(obj.get("name", "graph")),
        )
    raise FormatError("space document needs either 'dist' or 'n'+'edges'")


def save_space(space: FiniteMetricSpace, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(space_to_json(space), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_space(path: str) -> FiniteMetricSpace:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    return space_from_json(obj)
