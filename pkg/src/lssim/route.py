"""Occupancy-aware routing of lattice-surgery operations and effective path lengths.

Costs are counted in data qubits. A path that stays in the Logic layer pays
``d^2`` per allocated cell and ``d`` per cell gap between consecutive cells,
which gives ``d(Ld + L - 1)`` for ``L`` cells.

On a Bypass plane the fragment layer is modelled with two node kinds: cell
fragments (``d`` data qubits, one per Logic cell) and gap fragments (``d``
data qubits plus ``2d`` ancillas, one per horizontal gap). A gap fragment
touches the left/right boundaries of the two Logic cells it separates, so
paths enter and leave the Bypass layer only there and run horizontally
through alternating gap and cell fragments. A pure bypass merge of two data
cells ``L`` columns apart then involves ``d(2d + 2L - 3)`` data qubits. The
effective length is ``L' = cost / d^2``.

Path cells use ``(layer, row, col)`` with ``layer == n_logic`` for cell
fragments and ``layer == n_logic + 1`` for the gap fragment between
``col`` and ``col + 1``.
"""

from __future__ import annotations

import heapq
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as cs_dijkstra

from .errors import ContractError
from .isa import Instruction, Opcode
from .plane import Plane, Role

Coord = tuple[int, int, int]

ZZ, XX = "ZZ", "XX"


def data_qubit_count(L: int, d: int, via_bypass: bool = False) -> int:
    """Data qubits merged by a straight path of ``L`` cells (endpoints included)."""
    if L < 2:
        raise ContractError("a two-operand path spans at least 2 cells")
    if via_bypass:
        return d * (2 * d + 2 * L - 3)
    return d * (L * d + L - 1)


@dataclass(frozen=True)
class EffectiveLength:
    L: int
    L_prime: float
    data_qubits: int


@dataclass(frozen=True)
class Path:
    cells: tuple[Coord, ...]
    nodes: tuple[int, ...]
    via_bypass: bool
    basis: str | None
    data_qubits: int
    L: int
    d: int
    n_logic: int = 1

    @property
    def L_prime(self) -> float:
        return self.data_qubits / (self.d * self.d)

    @property
    def target(self) -> Coord:
        return self.cells[-1]


@dataclass(frozen=True)
class Blocked:
    """No free path exists; ``blockers`` are busy cells met at the search frontier."""

    blockers: frozenset[Coord]


def effective_length(path: Path, d: int | None = None) -> EffectiveLength:
    """L and L' of a path; passing another ``d`` re-costs the same geometry."""
    d = path.d if d is None else d
    qubits = _geometry_cost(path.cells, d, path.n_logic)
    return EffectiveLength(path.L, qubits / (d * d), qubits)


def _geometry_cost(cells: tuple[Coord, ...], d: int, n_logic: int) -> int:
    """Sum of segment contributions for an ordered cell list."""
    cost = 0
    prev = None
    for cell in cells:
        if cell[0] < n_logic:
            cost += d * d
            if prev is not None and prev[0] < n_logic:
                cost += d  # Logic-layer cell gap
        else:
            cost += d  # cell fragment or the data part of a gap fragment
        prev = cell
    return cost


def _count_L(cells: tuple[Coord, ...], n_logic: int) -> int:
    return len({(0 if l == n_logic else l, r, c) for l, r, c in cells if l <= n_logic})


# ---------------------------------------------------------------------------
# Routing graph
# ---------------------------------------------------------------------------

class RouteGraph:
    """Static adjacency of one plane; costs per the model in the module docstring."""

    def __init__(self, plane: Plane):
        self.plane = plane
        d = plane.d
        self.d = d
        NL, H, W = plane.logic.shape
        self.NL, self.H, self.W = NL, H, W
        self.n_logic_nodes = NL * H * W
        self.frag0 = self.n_logic_nodes
        self.gap0 = self.frag0 + H * W
        self.n_nodes = self.gap0 + H * (W - 1)
        self.lateral = d + d * d  # Logic cell plus the Logic gap before it
        self.frag = d  # entering a cell or gap fragment
        self.land = d * d  # entering a Logic cell from a gap fragment

        roles = plane.logic.reshape(-1)
        passable = np.zeros(self.n_nodes, dtype=bool)
        passable[: self.n_logic_nodes] = roles == Role.ANCILLA
        passable[self.frag0:self.gap0] = plane.fragments.reshape(-1)
        passable[self.gap0:] = plane.gap_fragments.reshape(-1)
        self.passable = passable
        self.passable_list = passable.tolist()
        self.no_busy = [False] * self.n_nodes
        self.roles = roles

        # adjacency among passable nodes
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_nodes)]
        # attach[basis][endpoint] -> [(neighbor, cost endpoint->neighbor, cost neighbor->endpoint)]
        self.attach: dict[str, dict[int, list[tuple[int, int, int]]]] = {ZZ: {}, XX: {}}

        for l in range(NL):
            for r in range(H):
                for c in range(W):
                    u = self.lid(l, r, c)
                    role = roles[u]
                    if role == Role.ANCILLA:
                        for v in self._logic_neighbors(l, r, c):
                            if passable[v]:
                                self.adj[u].append((v, self.lateral))
                        if l == 0:
                            for v in self._gap_sides(r, c):
                                self.adj[u].append((v, self.frag))
                    elif role in (Role.DATA, Role.POOL):
                        self._build_attach(u, l, r, c, role)
        for r in range(H):
            for c in range(W - 1):
                u = self.gid(r, c)
                if not passable[u]:
                    continue
                for cc in (c, c + 1):
                    if passable[self.bid(r, cc)]:
                        self.adj[u].append((self.bid(r, cc), self.frag))
                        self.adj[self.bid(r, cc)].append((u, self.frag))
                    if passable[self.lid(0, r, cc)]:
                        self.adj[u].append((self.lid(0, r, cc), self.land))

    def lid(self, l: int, r: int, c: int) -> int:
        return (l * self.H + r) * self.W + c

    def bid(self, r: int, c: int) -> int:
        return self.frag0 + r * self.W + c

    def gid(self, r: int, c: int) -> int:
        return self.gap0 + r * (self.W - 1) + c

    def coord(self, node: int) -> Coord:
        if node >= self.gap0:
            r, c = divmod(node - self.gap0, self.W - 1)
            return (self.NL + 1, r, c)
        if node >= self.frag0:
            r, c = divmod(node - self.frag0, self.W)
            return (self.NL, r, c)
        l, rest = divmod(node, self.H * self.W)
        r, c = divmod(rest, self.W)
        return (l, r, c)

    def node(self, cell: Coord) -> int:
        l, r, c = cell
        width = self.W - 1 if l == self.NL + 1 else self.W
        if not (0 <= r < self.H and 0 <= c < width and 0 <= l <= self.NL + 1):
            raise ContractError(f"cell {cell} is not on the plane")
        if l == self.NL + 1:
            return self.gid(r, c)
        return self.bid(r, c) if l == self.NL else self.lid(l, r, c)

    def _logic_neighbors(self, l, r, c, dirs=((0, 1), (0, -1), (-1, 0), (1, 0)), other_layer=True):
        out = []
        for dr, dc in dirs:
            r2, c2 = r + dr, c + dc
            if 0 <= r2 < self.H and 0 <= c2 < self.W:
                out.append(self.lid(l, r2, c2))
        if other_layer and self.NL == 2:
            out.append(self.lid(1 - l, r, c))
        return out

    def _gap_sides(self, r, c) -> list[int]:
        """Present gap fragments at the right and left boundaries of Logic cell (0, r, c)."""
        out = []
        for gc in (c, c - 1):
            if 0 <= gc < self.W - 1 and self.passable[self.gid(r, gc)]:
                out.append(self.gid(r, gc))
        return out

    def _build_attach(self, u, l, r, c, role):
        all_sides = ((0, 1), (0, -1), (-1, 0), (1, 0))
        if role == Role.POOL:
            sides = {ZZ: all_sides, XX: all_sides}
        else:
            sides = {ZZ: ((0, 1), (0, -1)), XX: ((-1, 0), (1, 0))}
        for basis, dirs in sides.items():
            lst = []
            # data patches of two-layer planes also merge through the face toward the other layer
            for v in self._logic_neighbors(l, r, c, dirs, other_layer=role == Role.DATA):
                lst.append((v, self.lateral, self.lateral))
            if l == 0 and (basis == ZZ or role == Role.POOL):
                for v in self._gap_sides(r, c):
                    lst.append((v, self.frag, self.land))
            self.attach[basis][u] = lst

    # ------------------------------------------------------------------
    def search(self, src: int, targets: dict[int, int], basis: str, busy: np.ndarray | None):
        """Dijkstra from ``src`` to any node of ``targets`` (node -> tie rank).

        Returns ``(cost, node list)`` or ``(None, blockers)``.
        """
        d2 = self.d * self.d
        tgt_in: dict[int, list[tuple[int, int]]] = {}
        for t in targets:
            for v, _, cin in self.attach[basis].get(t, ()):
                tgt_in.setdefault(v, []).append((t, cin))
        passable = self.passable_list
        blocked = busy.tolist() if busy is not None else self.no_busy
        adj = self.adj
        n_t = len(targets)
        dist = [None] * self.n_nodes
        dist[src] = d2
        prev: dict[int, int] = {}
        heap: list[tuple[int, int, int]] = []
        blockers: set[int] = set()
        done = bytearray(self.n_nodes)
        push, pop = heapq.heappush, heapq.heappop

        def relax(u, v, c):
            old = dist[v]
            if old is None or c < old:
                dist[v] = c
                prev[v] = u
                # equal costs: targets first (by rank), then Logic nodes (lower ids) before Bypass nodes
                rank = targets.get(v)
                push(heap, (c, v + n_t if rank is None else rank, v))

        for v, cout, _ in self.attach[basis].get(src, ()):
            if v in targets:
                relax(src, v, d2 + cout)
            elif passable[v]:
                if blocked[v]:
                    blockers.add(v)
                else:
                    relax(src, v, d2 + cout)
        while heap:
            cost, _, u = pop(heap)
            if done[u]:
                continue
            done[u] = 1
            if u in targets:
                path = [u]
                while path[-1] != src:
                    path.append(prev[path[-1]])
                return cost, path[::-1]
            if u in tgt_in:
                for t, cin in tgt_in[u]:
                    if not done[t]:
                        relax(u, t, cost + cin)
            for v, w in adj[u]:
                if done[v]:
                    continue
                if blocked[v]:
                    blockers.add(v)
                    continue
                c = cost + w
                old = dist[v]
                if old is None or c < old:
                    dist[v] = c
                    prev[v] = u
                    rank = targets.get(v)
                    push(heap, (c, v + n_t if rank is None else rank, v))
        return None, blockers


_graphs: "weakref.WeakKeyDictionary[Plane, Router]" = weakref.WeakKeyDictionary()


def router_for(plane: Plane) -> Router:
    r = _graphs.get(plane)
    if r is None:
        r = Router(plane)
        _graphs[plane] = r
    return r


class Router:
    """Routing front-end with an empty-plane path cache.

    A cached empty-plane optimum whose cells are all free under the current
    occupancy is also optimal for that occupancy, so most searches are skipped.
    """

    def __init__(self, plane: Plane):
        self.plane = plane
        self.g = RouteGraph(plane)
        self._cache: dict[tuple[int, int, str], Path | None] = {}
        self._pool_order: dict[tuple[int, str], list[tuple[int, int]]] = {}
        self.pool_nodes = [self.g.lid(*p) for p in plane.pools]

    def _make_path(self, cost: int, nodes: list[int], basis: str | None) -> Path:
        g = self.g
        cells = tuple(g.coord(n) for n in nodes)
        via = any(n >= g.frag0 for n in nodes)
        return Path(cells, tuple(nodes), via, basis, int(cost), _count_L(cells, g.NL), g.d, g.NL)

    def _search(self, src: int, targets: dict[int, int], basis: str, busy) -> Path | Blocked:
        cost, res = self.g.search(src, targets, basis, busy)
        if cost is None:
            return Blocked(frozenset(self.g.coord(n) for n in res))
        return self._make_path(cost, res, basis)

    def empty_path(self, src: int, tgt: int, basis: str) -> Path | None:
        key = (src, tgt, basis)
        if key not in self._cache:
            p = self._search(src, {tgt: 0}, basis, None)
            self._cache[key] = p if isinstance(p, Path) else None
        return self._cache[key]

    def route_pair(self, src: int, tgt: int, basis: str, busy: np.ndarray | None) -> Path | Blocked:
        p = self.empty_path(src, tgt, basis)
        if p is None:
            return Blocked(frozenset())
        if busy is None or not busy[list(p.nodes)].any():
            return p
        return self._search(src, {tgt: 0}, basis, busy)

    def pool_order(self, src: int, basis: str) -> list[tuple[int, int]]:
        """Pools by (empty-plane cost, pool index); unreachable pools omitted."""
        key = (src, basis)
        if key not in self._pool_order:
            order = []
            for i, pn in enumerate(self.pool_nodes):
                p = self.empty_path(src, pn, basis)
                if p is not None:
                    order.append((p.data_qubits, i))
            self._pool_order[key] = sorted(order)
        return self._pool_order[key]

    def route_magic(self, src: int, basis: str, busy: np.ndarray | None,
                    available: list[int] | None = None) -> Path | Blocked:
        """Route to the cheapest reachable pool among ``available`` pool indices."""
        allowed = set(range(len(self.pool_nodes))) if available is None else set(available)
        order = [(c, i) for c, i in self.pool_order(src, basis) if i in allowed]
        if not order:
            return Blocked(frozenset())
        _, first = order[0]
        p = self.empty_path(src, self.pool_nodes[first], basis)
        if busy is None or not busy[list(p.nodes)].any():
            return p
        targets = {self.pool_nodes[i]: rank for rank, (_, i) in enumerate(order)}
        return self._search(src, targets, basis, busy)

    def single(self, op: Opcode, src: int, busy: np.ndarray | None) -> Path | Blocked:
        g = self.g
        if op in (Opcode.OP_H, Opcode.OP_S):
            l, r, c = g.coord(src)
            blockers = []
            for v in g._logic_neighbors(l, r, c, other_layer=False):
                if not g.passable[v] or v >= g.n_logic_nodes:
                    continue
                if busy is not None and busy[v]:
                    blockers.append(g.coord(v))
                    continue
                cells = (g.coord(src), g.coord(v))
                return Path(cells, (src, v), False, None, g.d * g.d + g.lateral, 2, g.d, g.NL)
            return Blocked(frozenset(blockers))
        return Path((g.coord(src),), (src,), False, None, g.d * g.d, 1, g.d, g.NL)

    def pool_index(self, node: int) -> int:
        return self.pool_nodes.index(node)


def find_path(plane: Plane, occupancy: np.ndarray | None, op: Instruction,
              operand_cells: list) -> Path | Blocked:
    """Cheapest free path for ``op`` between its operand cells.

    ``occupancy`` is a boolean vector over routing nodes (see
    :func:`occupancy_vector`) or ``None`` for an empty plane. For MAGIC the
    second operand cell may be a pool coordinate or a list of pool coordinates.
    """
    router = router_for(plane)
    g = router.g
    src_cell = tuple(operand_cells[0])
    src = g.node(src_cell)
    if src >= g.n_logic_nodes or g.roles[src] != Role.DATA:
        raise ContractError(f"operand {src_cell} is not a data cell")
    if op.opcode.arity == 1:
        return router.single(op.opcode, src, occupancy)
    basis = op.opcode.basis
    second = operand_cells[1]
    if op.uses_magic:
        pools = [second] if isinstance(second[0], (int, np.integer)) else list(second)
        idx = []
        for cell in pools:
            n = g.node(tuple(cell))
            if n not in router.pool_nodes:
                raise ContractError(f"MAGIC operand {tuple(cell)} is not a pool cell")
            idx.append(router.pool_index(n))
        return router.route_magic(src, basis, occupancy, idx)
    tgt = g.node(tuple(second))
    if g.roles[tgt] != Role.DATA:
        raise ContractError(f"operand {tuple(second)} is not a data cell")
    if tgt == src:
        raise ContractError("two-operand instruction needs distinct cells")
    return router.route_pair(src, tgt, basis, occupancy)


def occupancy_vector(plane: Plane, busy_cells=()) -> np.ndarray:
    g = router_for(plane).g
    occ = np.zeros(g.n_nodes, dtype=bool)
    for cell in busy_cells:
        occ[g.node(tuple(cell))] = True
    return occ


# ---------------------------------------------------------------------------
# Static analyses
# ---------------------------------------------------------------------------

def endpoint_lprime_matrices(plane: Plane, basis: str = ZZ) -> tuple[np.ndarray, np.ndarray]:
    """Empty-plane minimum L' from every data cell to every data cell and every pool.

    Runs one multi-source shortest-path pass over a graph in which each
    endpoint is split into an outgoing and an incoming node, so paths cannot
    pass through other data or pool cells. Returns ``(data x data, data x pool)``
    matrices with zeros on the data diagonal.
    """
    g = router_for(plane).g
    d2 = g.d * g.d
    data = [g.lid(*c) for c in plane.data_cells]
    pools = [g.lid(*c) for c in plane.pools]
    ends = data + pools
    N = g.n_nodes
    out_id = {u: N + i for i, u in enumerate(data)}
    in_id = {u: N + len(data) + i for i, u in enumerate(ends)}
    rows, cols, vals = [], [], []
    for u in range(N):
        if not g.passable[u]:
            continue
        for v, w in g.adj[u]:
            rows.append(u)
            cols.append(v)
            vals.append(w)
    for u in ends:
        for v, cout, cin in g.attach[basis].get(u, ()):
            if g.passable[v]:
                rows.append(v)
                cols.append(in_id[u])
                vals.append(cin)
                if u in out_id:
                    rows.append(out_id[u])
                    cols.append(v)
                    vals.append(cout)
            elif u in out_id and v in in_id:
                rows.append(out_id[u])
                cols.append(in_id[v])
                vals.append(cout)
    M = N + len(data) + len(ends)
    graph = coo_matrix((vals, (rows, cols)), shape=(M, M)).tocsr()
    dist = cs_dijkstra(graph, directed=True, indices=[out_id[u] for u in data])
    res = (dist[:, [in_id[u] for u in ends]] + d2) / d2
    dd, dp = res[:, : len(data)], res[:, len(data):]
    np.fill_diagonal(dd, 0.0)
    return dd, dp


def pairwise_lprime_matrix(plane: Plane, basis: str = ZZ) -> np.ndarray:
    """Empty-plane minimum L' between every ordered pair of data cells."""
    return endpoint_lprime_matrices(plane, basis)[0]


def avg_pairwise_effective_length(plane: Plane) -> float:
    """Mean empty-plane L' over all unordered data-cell pairs (ZZ basis)."""
    if len(plane.data_cells) < 2:
        raise ContractError("need at least 2 data cells")
    m = pairwise_lprime_matrix(plane, ZZ)
    iu = np.triu_indices(len(m), k=1)
    vals = m[iu]
    if not np.all(np.isfinite(vals)):
        raise ContractError("some data-cell pairs are not connected")
    return float(vals.mean())


def static_path_lengths(plane: Plane, program, assignment) -> list[float]:
    """Empty-plane L' of each MEAS_ZZ/MEAS_XX of ``program``, in program order.

    ``assignment[q]`` is the data-cell index of logical qubit ``q``; MAGIC
    operands go to the cheapest pool.
    """
    mats = {}
    out = []
    for ins in program.instructions:
        basis = ins.opcode.basis
        if basis is None:
            continue
        if basis not in mats:
            mats[basis] = endpoint_lprime_matrices(plane, basis)
        dd, dp = mats[basis]
        a = assignment[ins.operands[0]]
        val = float(dp[a].min()) if ins.uses_magic else float(dd[a, assignment[ins.operands[1]]])
        if not np.isfinite(val):
            raise ContractError(f"no path for {ins.to_text()} on an empty plane")
        out.append(val)
    return out
