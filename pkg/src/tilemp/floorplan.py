"""Tile floorplan: a grid graph whose vertices are data, ancilla or magic-port tiles."""
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

from . import _accel
from ._accel import INF

DENSE_DIST_LIMIT = 4096


class TileClass(IntEnum):
    DATA = 0
    ANCILLA = 1
    PORT = 2


@dataclass(frozen=True)
class LayoutSpec:
    rows: int
    cols: int
    data_density: float = 0.5
    layout_pattern: str = "bands"
    num_ports: int = 50
    port_rule: str = "boundary"
    seed: int = 0


PATTERNS = ("bands", "checkerboard", "random")


def grid_csr(rows, cols):
    """4-neighbour adjacency of a rows x cols grid in CSR form (row-major ids)."""
    n = rows * cols
    nbrs = [[] for _ in range(n)]
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if r > 0:
                nbrs[v].append(v - cols)
            if c > 0:
                nbrs[v].append(v - 1)
            if c < cols - 1:
                nbrs[v].append(v + 1)
            if r < rows - 1:
                nbrs[v].append(v + cols)
    indptr = np.zeros(n + 1, dtype=np.int32)
    indptr[1:] = np.cumsum([len(x) for x in nbrs])
    indices = np.array([u for x in nbrs for u in x], dtype=np.int32)
    return indptr, indices


def boundary_ring(rows, cols):
    """Boundary tile ids in clockwise order starting at the top-left corner."""
    if rows == 1:
        return list(range(cols))
    if cols == 1:
        return [r * cols for r in range(rows)]
    ring = [c for c in range(cols)]
    ring += [r * cols + cols - 1 for r in range(1, rows)]
    ring += [(rows - 1) * cols + c for c in range(cols - 2, -1, -1)]
    ring += [r * cols for r in range(rows - 2, 0, -1)]
    return ring


class FloorplanGraph:
    """Immutable floorplan graph with precomputed hop distances.

    Vertices are row-major tile ids.  ``tile_class[v]`` is a :class:`TileClass`.
    Distances are a dense matrix up to ``DENSE_DIST_LIMIT`` vertices and
    computed per source on demand above that.
    """

    def __init__(self, rows, cols, tile_class, indptr=None, indices=None, spec=None):
        if indptr is None:
            indptr, indices = grid_csr(rows, cols)
        self.rows = rows
        self.cols = cols
        self.n = int(indptr.shape[0] - 1)
        self.indptr = indptr
        self.indices = indices
        self.tile_class = np.asarray(tile_class, dtype=np.int8)
        self.spec = spec
        for arr in (self.indptr, self.indices, self.tile_class):
            arr.setflags(write=False)
        self.is_data = self.tile_class == TileClass.DATA
        self.is_ancilla = self.tile_class == TileClass.ANCILLA
        self.is_port = self.tile_class == TileClass.PORT
        self.data = np.flatnonzero(self.is_data).astype(np.int32)
        self.ancilla = np.flatnonzero(self.is_ancilla).astype(np.int32)
        self.ports = np.flatnonzero(self.is_port).astype(np.int32)
        self._nbrs = [tuple(int(u) for u in indices[indptr[v]:indptr[v + 1]]) for v in range(self.n)]
        if self.n <= DENSE_DIST_LIMIT:
            self.dist = _accel.bfs_all_pairs(self.indptr, self.indices, self.n)
            self.dist.setflags(write=False)
        else:
            self.dist = None
            self._row = lru_cache(maxsize=8192)(self._bfs_row)

    # -- queries ---------------------------------------------------------
    def neighbors(self, v):
        return self._nbrs[v]

    def coord(self, v):
        return divmod(int(v), self.cols)

    def tile(self, r, c):
        return r * self.cols + c

    def _bfs_row(self, v):
        src = np.zeros(self.n, dtype=np.bool_)
        src[v] = True
        allowed = np.ones(self.n, dtype=np.bool_)
        row = _accel.zero_one_bfs(self.indptr, self.indices, np.ones(self.n, dtype=np.int8), allowed, src)
        row.setflags(write=False)
        return row

    def dist_row(self, v):
        if self.dist is not None:
            return self.dist[v]
        return self._row(int(v))

    def d(self, u, v):
        return int(self.dist_row(u)[v])

    def dist_to_set(self, tiles):
        """Vector of d_G(x, tiles) for every vertex x."""
        tiles = list(tiles)
        if not tiles:
            raise ValueError("distance to an empty set is undefined")
        if self.dist is not None:
            return self.dist[tiles].min(axis=0)
        out = np.full(self.n, INF, dtype=np.int32)
        for t in tiles:
            np.minimum(out, self.dist_row(t), out=out)
        return out

    def counts(self):
        return {"data": int(self.data.size), "ancilla": int(self.ancilla.size), "ports": int(self.ports.size)}

    def edges(self):
        return [(v, u) for v in range(self.n) for u in self._nbrs[v] if v < u]

    def __repr__(self):
        c = self.counts()
        return f"FloorplanGraph({self.rows}x{self.cols}, data={c['data']}, ancilla={c['ancilla']}, ports={c['ports']})"


def _layout_tiers(rows, cols, pattern, rng):
    n = rows * cols
    if pattern == "bands":
        tier = np.full(n, 2, dtype=np.int64)
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                interior = 0 < r < rows - 1 and 0 < c < cols - 1
                if rows < 3 or cols < 3:
                    interior = True
                if interior:
                    bus = rows >= 3 and (r - 1) % 3 == 1
                    tier[v] = 2 if bus else 0
                else:
                    tier[v] = 1
        return np.lexsort((np.arange(n), tier))
    if pattern == "checkerboard":
        tier = np.array([(r + c) % 2 for r in range(rows) for c in range(cols)])
        return np.lexsort((np.arange(n), tier))
    if pattern == "random":
        return rng.permutation(n)
    raise ValueError(f"unknown layout pattern {pattern!r}; expected one of {PATTERNS}")


def build_grid(spec: LayoutSpec) -> FloorplanGraph:
    """Build a floorplan from a layout spec.

    Ports are spread evenly along the clockwise boundary ring.  Data tiles are
    picked in the pattern's preference order, skipping any pick that would
    leave a data tile without an adjacent ancilla tile.
    """
    rows, cols = spec.rows, spec.cols
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    if not (0.0 < spec.data_density <= 1.0):
        raise ValueError(f"data_density must be in (0, 1], got {spec.data_density}")
    if spec.port_rule != "boundary":
        raise ValueError(f"unknown port rule {spec.port_rule!r}")
    n = rows * cols
    ring = boundary_ring(rows, cols)
    if spec.num_ports < 0 or spec.num_ports > len(ring):
        raise ValueError(f"{spec.num_ports} ports do not fit on {len(ring)} boundary tiles")
    n_data = int(np.floor(spec.data_density * n + 0.5))
    if n_data + spec.num_ports > n:
        raise ValueError("data tiles and ports exceed the grid")

    cls = np.full(n, TileClass.ANCILLA, dtype=np.int8)
    for k in range(spec.num_ports):
        cls[ring[(k * len(ring)) // spec.num_ports]] = TileClass.PORT

    indptr, indices = grid_csr(rows, cols)
    nbrs = [indices[indptr[v]:indptr[v + 1]] for v in range(n)]
    rng = np.random.default_rng(spec.seed)
    order = _layout_tiers(rows, cols, spec.layout_pattern, rng)

    # A full-density grid has no ancilla at all, so the adjacency rule is void.
    need_ancilla = n_data + spec.num_ports < n

    def has_free_nbr(v, extra):
        return any(cls[u] == TileClass.ANCILLA and u != extra for u in nbrs[v])

    placed = 0
    for v in order:
        if placed == n_data:
            break
        if cls[v] != TileClass.ANCILLA:
            continue
        if need_ancilla:
            if not has_free_nbr(v, -1):
                continue
            if any(cls[u] == TileClass.DATA and not has_free_nbr(u, v) for u in nbrs[v]):
                continue
        cls[v] = TileClass.DATA
        placed += 1
    if placed < n_data:
        # Constraint cannot be met for this density; fill the remainder plainly.
        for v in order:
            if placed == n_data:
                break
            if cls[v] == TileClass.ANCILLA:
                cls[v] = TileClass.DATA
                placed += 1
    return FloorplanGraph(rows, cols, cls, indptr, indices, spec=spec)


def from_classes(rows, cols, classes):
    """Floorplan with an explicit class per tile (row-major), e.g. 'DADAP'."""
    lut = {"D": TileClass.DATA, "A": TileClass.ANCILLA, "P": TileClass.PORT}
    if isinstance(classes, str):
        classes = [lut[ch] for ch in classes if not ch.isspace()]
    if len(classes) != rows * cols:
        raise ValueError("class list does not match grid size")
    return FloorplanGraph(rows, cols, np.asarray(classes, dtype=np.int8))


def path_graph(classes):
    """A 1 x n path floorplan, handy for hand-traced examples."""
    s = [ch for ch in classes if not ch.isspace()]
    return from_classes(1, len(s), "".join(s))


class Occupancy:
    """Tile ownership; one owner id per occupied tile (-1 = free)."""

    def __init__(self, g: FloorplanGraph):
        self.g = g
        self.owner = np.full(g.n, -1, dtype=np.int32)
        self.version = 0

    def occupy(self, tiles, wid):
        tiles = np.asarray(list(tiles), dtype=np.int64)
        if tiles.size == 0:
            return
        clash = self.owner[tiles]
        if np.any((clash >= 0) & (clash != wid)):
            raise ValueError(f"tiles already owned: {tiles[(clash >= 0) & (clash != wid)].tolist()}")
        self.owner[tiles] = wid
        self.version += 1

    def release(self, tiles):
        tiles = np.asarray(list(tiles), dtype=np.int64)
        if tiles.size:
            self.owner[tiles] = -1
            self.version += 1

    def release_owner(self, wid):
        self.owner[self.owner == wid] = -1
        self.version += 1

    def tiles_of(self, wid):
        return set(np.flatnonzero(self.owner == wid).tolist())

    @property
    def occupied_data(self):
        return set(np.flatnonzero((self.owner >= 0) & self.g.is_data).tolist())

    @property
    def occupied_ancilla(self):
        return set(np.flatnonzero((self.owner >= 0) & self.g.is_ancilla).tolist())

    @property
    def reserved_ports(self):
        return set(np.flatnonzero((self.owner >= 0) & self.g.is_port).tolist())

    def free_mask(self):
        return (self.owner < 0) & ~self.g.is_port

    def copy(self):
        o = Occupancy(self.g)
        o.owner = self.owner.copy()
        return o


def shortest_dist(g: FloorplanGraph, u, tiles):
    """d_G(u, tiles) = min over v in tiles of d_G(u, v)."""
    tiles = list(tiles)
    if not tiles:
        raise ValueError("shortest_dist needs a non-empty target set")
    row = g.dist_row(u)
    return int(min(row[v] for v in tiles))


def free_components_mask(g: FloorplanGraph, free_mask):
    labels, k = _accel.components(g.indptr, g.indices, np.ascontiguousarray(free_mask, dtype=np.bool_))
    return labels, k


def free_components(g: FloorplanGraph, occ: Occupancy):
    """Connected components of the free data+ancilla subgraph, ordered by lowest tile id."""
    labels, k = free_components_mask(g, occ.free_mask())
    comps = [set() for _ in range(k)]
    for v in np.flatnonzero(labels >= 0):
        comps[labels[v]].add(int(v))
    return comps
