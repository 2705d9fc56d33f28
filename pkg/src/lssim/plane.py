"""Qubit-plane layouts: data-cell arrangements, floor plans and resource counts.

A plane is a stack of cell grids. Logic layers hold one role per grid
position; a Bypass plane additionally carries a sparse layer of SC fragments,
one ``d x 1`` fragment per Logic cell and one ``d + 2d`` fragment per
horizontal cell gap. Columns are split into three floor parts from left to
right: Factories, Pools and Cells.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np
from scipy import ndimage

from .errors import ConfigError, ContractError, ValidationError

PLANE_FORMAT = "lssim.plane"
PLANE_VERSION = 1

FACTORIES, POOLS, CELLS = "Factories", "Pools", "Cells"


class Role(IntEnum):
    VOID = 0  # no cell at this position (second layer above Factories/Pools)
    ANCILLA = 1
    DATA = 2
    POOL = 3
    FACTORY = 4


ROLE_CHARS = {Role.VOID: ".", Role.ANCILLA: "A", Role.DATA: "D", Role.POOL: "P", Role.FACTORY: "F"}
CHAR_ROLES = {v: k for k, v in ROLE_CHARS.items()}


class LayoutKind(str, Enum):
    ONE_LAYER_D = "1L-D"
    TWO_LAYER_DD = "2L-DD"
    TWO_LAYER_DP = "2L-DP"
    BYPASS = "Bypass"

    @classmethod
    def parse(cls, name: str | LayoutKind) -> LayoutKind:
        if isinstance(name, LayoutKind):
            return name
        key = str(name).strip().lower().replace("_", "-")
        aliases = {
            "1l-d": cls.ONE_LAYER_D, "1l": cls.ONE_LAYER_D, "onelayerd": cls.ONE_LAYER_D,
            "2l-dd": cls.TWO_LAYER_DD, "twolayerdd": cls.TWO_LAYER_DD,
            "2l-dp": cls.TWO_LAYER_DP, "twolayerdp": cls.TWO_LAYER_DP,
            "bypass": cls.BYPASS,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown layout {name!r}", field="layout") from None


class PatternKind(str, Enum):
    SPARSE25 = "Sparse25"
    DENSE44 = "Dense44"
    DENSE50 = "Dense50"

    @classmethod
    def parse(cls, name: str | PatternKind) -> PatternKind:
        if isinstance(name, PatternKind):
            return name
        key = str(name).strip().lower()
        aliases = {"sparse25": cls.SPARSE25, "25": cls.SPARSE25, "dense44": cls.DENSE44, "44": cls.DENSE44,
                   "dense50": cls.DENSE50, "50": cls.DENSE50}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown pattern {name!r}", field="pattern") from None

    @property
    def nominal_density(self) -> float:
        return {"Sparse25": 0.25, "Dense44": 4 / 9, "Dense50": 0.5}[self.value]


@dataclass(frozen=True)
class ArrangementPattern:
    """A data-cell pattern plus the shape of the tiled Cells region.

    ``shape`` is ``"square"`` or ``"wide"``; for wide arrangements ``height``
    fixes the Cells-region height in cells, ``None`` asks the floor planner to
    pick the height minimizing the average effective path length.
    """

    kind: PatternKind
    shape: str = "square"
    height: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PatternKind.parse(self.kind))
        if self.shape not in ("square", "wide"):
            raise ConfigError(f"unknown shape {self.shape!r}", field="shape")
        if self.height is not None and (self.shape != "wide" or self.height < 1):
            raise ConfigError("height is only valid for a wide shape and must be >= 1", field="height")

    @classmethod
    def square(cls, kind) -> ArrangementPattern:
        return cls(PatternKind.parse(kind))

    @classmethod
    def wide(cls, kind, height: int | None = None) -> ArrangementPattern:
        return cls(PatternKind.parse(kind), "wide", height)

    def label(self) -> str:
        if self.shape == "square":
            return self.kind.value
        return f"{self.kind.value}-wide" + ("" if self.height is None else f"{self.height}")


def check_distance(d: int) -> int:
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 3 or d % 2 == 0:
        raise ConfigError(f"code distance must be an odd integer >= 3, got {d!r}", field="d")
    return int(d)


# ---------------------------------------------------------------------------
# Arrangements
# ---------------------------------------------------------------------------

def _valid_dim(kind: PatternKind, x: int) -> int:
    """Smallest admissible grid dimension >= x for the pattern's tiling."""
    x = max(x, 3)
    if kind is PatternKind.SPARSE25:
        return x if x % 2 == 1 else x + 1
    if kind is PatternKind.DENSE44:
        return x + (1 - x) % 3
    return x


def _pattern_grid(kind: PatternKind, h: int, w: int) -> np.ndarray:
    r, c = np.indices((h, w))
    if kind is PatternKind.SPARSE25:
        data = (r % 2 == 1) & (c % 2 == 1)
    elif kind is PatternKind.DENSE44:
        data = (r % 3 != 0) & (c % 3 != 0)
    else:
        # diagonal ancilla staircases (c - r) % 4 in {0, 1}, joined by the ring
        data = ((c - r) % 4 >= 2)
    data &= (r > 0) & (r < h - 1) & (c > 0) & (c < w - 1)
    return np.where(data, Role.DATA, Role.ANCILLA).astype(np.int8)


def pattern_grid(kind: PatternKind | str, rows: int, cols: int) -> np.ndarray:
    """The pattern cut to exactly ``rows x cols`` cells, ancilla border included."""
    if rows < 1 or cols < 1:
        raise ConfigError("grid dimensions must be positive", field="rows")
    return _pattern_grid(PatternKind.parse(kind), rows, cols)


def _n_data(kind: PatternKind, h: int, w: int) -> int:
    return int((_pattern_grid(kind, h, w) == Role.DATA).sum())


def generate_arrangement(pattern: ArrangementPattern | str, n_data_cells: int) -> np.ndarray:
    """Smallest tiling of ``pattern`` holding at least ``n_data_cells`` data cells.

    Returns a ``(rows, cols)`` int8 array of :class:`Role` values (DATA or
    ANCILLA). Every pattern is framed by an ancilla border so that the region
    is IO-capable on its own and reachable from the Pools column.
    """
    if isinstance(pattern, (str, PatternKind)):
        pattern = ArrangementPattern.square(pattern)
    if not isinstance(pattern, ArrangementPattern):
        raise ConfigError(f"unknown pattern {pattern!r}", field="pattern")
    if n_data_cells < 1:
        raise ConfigError("n_data_cells must be >= 1", field="n_data_cells")
    kind = pattern.kind

    if pattern.shape == "wide":
        h = _valid_dim(kind, pattern.height or 3)
        w = _valid_dim(kind, 3)
        while _n_data(kind, h, w) < n_data_cells:
            w = _valid_dim(kind, w + 1)
        return _pattern_grid(kind, h, w)

    best = None
    h = _valid_dim(kind, 3)
    while True:
        for w in (h, _valid_dim(kind, h + 1)):
            if _n_data(kind, h, w) >= n_data_cells:
                cand = (h * w, h, w)
                if best is None or cand < best:
                    best = cand
        if _n_data(kind, h, h) >= n_data_cells:
            break
        h = _valid_dim(kind, h + 1)
    _, h, w = best
    return _pattern_grid(kind, h, w)


def trim_data_cells(grid: np.ndarray, n_data_cells: int) -> np.ndarray:
    """Turn surplus data cells (last in row-major order) into ancilla cells."""
    grid = grid.copy()
    rows, cols = np.nonzero(grid == Role.DATA)
    if len(rows) < n_data_cells:
        raise ConfigError(f"grid holds {len(rows)} data cells, {n_data_cells} requested")
    grid[rows[n_data_cells:], cols[n_data_cells:]] = Role.ANCILLA
    return grid


@dataclass
class IoReport:
    capable: bool
    cond1_violations: list[tuple[int, int]] = field(default_factory=list)
    cond2_violations: list[list[tuple[int, int]]] = field(default_factory=list)


def check_io_capable(grid) -> IoReport:
    """Check the two immediate-operation conditions on a 2D role grid.

    (I) every data cell has an in-grid ancilla neighbour on its left or right
    and one above or below; (II) the ancilla cells form a single 4-connected
    component. Positions that are neither data nor ancilla count as absent.
    """
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.size == 0:
        raise ValidationError("grid must be a nonempty 2D array")
    anc = grid == Role.ANCILLA
    pad = np.pad(anc, 1, constant_values=False)
    horiz = pad[1:-1, :-2] | pad[1:-1, 2:]
    vert = pad[:-2, 1:-1] | pad[2:, 1:-1]
    bad = (grid == Role.DATA) & ~(horiz & vert)
    cond1 = [(int(r), int(c)) for r, c in zip(*np.nonzero(bad))]

    labels, n = ndimage.label(anc)
    cond2: list[list[tuple[int, int]]] = []
    if n > 1:
        sizes = np.bincount(labels.ravel())[1:]
        keep = int(np.argmax(sizes)) + 1
        for lab in range(1, n + 1):
            if lab != keep:
                cond2.append([(int(r), int(c)) for r, c in zip(*np.nonzero(labels == lab))])
    return IoReport(not cond1 and not cond2, cond1, cond2)


@dataclass
class DensityBound:
    """Exhaustive-search outcome for one grid size."""

    rows: int
    cols: int
    max_ratio: Fraction
    best_grid: np.ndarray
    min_margin: int  # min over IO-capable grids of N_a - N_d
    n_cond1: int  # assignments passing condition (I)


MAX_BRUTEFORCE_CELLS = 20


def max_density_bruteforce(rows: int, cols: int) -> DensityBound:
    """Maximum data ratio over every IO-capable role assignment of a grid."""
    n = rows * cols
    if rows < 1 or cols < 1:
        raise ConfigError("grid dimensions must be positive")
    if n > MAX_BRUTEFORCE_CELLS:
        raise ConfigError(f"{rows}x{cols} grid has {n} cells; exhaustive search is limited to "
                          f"{MAX_BRUTEFORCE_CELLS}", field="size")
    masks = np.arange(1 << n, dtype=np.int64)
    data = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    anc = ~data

    ok = np.ones(len(masks), dtype=bool)
    for i in range(n):
        r, c = divmod(i, cols)
        h = np.zeros(len(masks), dtype=bool)
        v = np.zeros(len(masks), dtype=bool)
        if c > 0:
            h |= anc[:, i - 1]
        if c < cols - 1:
            h |= anc[:, i + 1]
        if r > 0:
            v |= anc[:, i - cols]
        if r < rows - 1:
            v |= anc[:, i + cols]
        ok &= anc[:, i] | (h & v)

    n_data = data.sum(axis=1)
    cand = np.nonzero(ok)[0]
    order = cand[np.lexsort((cand, -n_data[cand]))]
    for m in order:
        grid = np.where(data[m].reshape(rows, cols), Role.DATA, Role.ANCILLA).astype(np.int8)
        if check_io_capable(grid).capable:
            nd = int(n_data[m])
            return DensityBound(rows, cols, Fraction(nd, n), grid, n - 2 * nd, int(ok.sum()))
    raise AssertionError("the all-ancilla grid is always IO-capable")  # pragma: no cover


# ---------------------------------------------------------------------------
# Planes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Plane:
    """Cell-level map of a qubit plane. Immutable once built."""

    layout: LayoutKind
    d: int
    logic: np.ndarray  # (n_logic_layers, H, W) Role codes
    fragments: np.ndarray  # (H, W) bool, Bypass layer cell fragments
    gap_fragments: np.ndarray  # (H, W - 1) bool, fragment between (r, c) and (r, c + 1)
    floor_parts: dict[str, tuple[int, int]]  # part -> [col_start, col_stop)
    pattern: ArrangementPattern | None = None
    n_factories: int = 0

    def __post_init__(self):
        for arr in (self.logic, self.fragments, self.gap_fragments):
            arr.setflags(write=False)

    @property
    def n_logic(self) -> int:
        return self.logic.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.logic.shape[1], self.logic.shape[2]

    @property
    def has_bypass(self) -> bool:
        return self.layout is LayoutKind.BYPASS

    @cached_property
    def data_cells(self) -> list[tuple[int, int, int]]:
        return [tuple(int(x) for x in p) for p in np.argwhere(self.logic == Role.DATA)]

    @cached_property
    def pools(self) -> list[tuple[int, int, int]]:
        return [tuple(int(x) for x in p) for p in np.argwhere(self.logic == Role.POOL)]

    def role(self, layer: int, r: int, c: int) -> Role:
        return Role(int(self.logic[layer, r, c]))

    def part_of_column(self, c: int) -> str:
        for name, (lo, hi) in self.floor_parts.items():
            if lo <= c < hi:
                return name
        raise ContractError(f"column {c} outside the plane")

    def cells_grid(self, layer: int = 0) -> np.ndarray:
        lo, hi = self.floor_parts[CELLS]
        return self.logic[layer, :, lo:hi]

    @property
    def data_ratio(self) -> float:
        g = self.cells_grid(0)
        return float((g == Role.DATA).sum() / max(1, ((g == Role.DATA) | (g == Role.ANCILLA)).sum()))

    @classmethod
    def from_grid(cls, grid, d: int = 3, layout: LayoutKind | str = LayoutKind.ONE_LAYER_D,
                  second=None) -> Plane:
        """Plane over a bare Cells grid (no Factories/Pools), used by tests and tools.

        ``second`` is the role grid of the second Logic layer for two-layer
        layouts; it defaults to a copy (2L-DD) or an all-ancilla grid (2L-DP).
        """
        layout = LayoutKind.parse(layout)
        d = check_distance(d)
        g = np.asarray(grid, dtype=np.int8)
        if g.ndim == 2:
            g = g[None]
        if layout in (LayoutKind.TWO_LAYER_DD, LayoutKind.TWO_LAYER_DP) and g.shape[0] == 1:
            if second is None:
                second = g[0].copy() if layout is LayoutKind.TWO_LAYER_DD else np.full(g.shape[1:], Role.ANCILLA)
            g = np.stack([g[0], np.asarray(second, dtype=np.int8)])
        frag, gap = _fragments_for(layout, g[0], first_col=0)
        return cls(layout, d, g.copy(), frag, gap, {CELLS: (0, g.shape[2])})


def _fragments_for(layout: LayoutKind, layer0: np.ndarray, first_col: int) -> tuple[np.ndarray, np.ndarray]:
    h, w = layer0.shape
    frag = np.zeros((h, w), dtype=bool)
    if layout is LayoutKind.BYPASS:
        present = (layer0 != Role.VOID) & (layer0 != Role.FACTORY)
        present[:, :first_col] = False
        frag = present
    gap = frag[:, :-1] & frag[:, 1:]
    return frag, gap


def build_floor_plan(layout: LayoutKind | str, pattern: ArrangementPattern | str, n_data_cells: int,
                     n_F: int, d: int) -> Plane:
    """Factories column, Pools column and a Cells region holding exactly ``n_data_cells``.

    Two-layer DD planes split the data cells over both Logic layers with the
    same pattern; DP planes keep layer two all-ancilla. Wide Cells regions are
    only allowed for Bypass planes and are never lower than ``n_F``.
    """
    layout = LayoutKind.parse(layout)
    if isinstance(pattern, (str, PatternKind)):
        pattern = ArrangementPattern.square(pattern)
    d = check_distance(d)
    if n_F < 1:
        raise ConfigError("n_F must be >= 1", field="n_F")
    if n_data_cells < 1:
        raise ConfigError("n_data_cells must be >= 1", field="n_data_cells")
    if pattern.shape == "wide":
        if layout is not LayoutKind.BYPASS:
            raise ConfigError(f"wide arrangements are only defined for the Bypass layout, not {layout.value}",
                              field="shape")
        height = pattern.height
        if height is None:
            height = optimize_wide_height(n_data_cells, pattern, n_F, d)
        pattern = ArrangementPattern.wide(pattern.kind, max(height, n_F))

    per_layer = math.ceil(n_data_cells / 2) if layout is LayoutKind.TWO_LAYER_DD else n_data_cells
    base = generate_arrangement(pattern, per_layer)
    grid0 = trim_data_cells(base, per_layer)
    hc, wc = grid0.shape
    H = max(hc, n_F)
    W = 2 + wc

    def place(cells: np.ndarray) -> np.ndarray:
        out = np.full((H, wc), Role.ANCILLA, dtype=np.int8)
        out[:hc] = cells
        return out

    layer0 = np.full((H, W), Role.VOID, dtype=np.int8)
    layer0[:, 1] = Role.ANCILLA
    for i in range(n_F):
        r = (2 * i + 1) * H // (2 * n_F)
        layer0[r, 0] = Role.FACTORY
        layer0[r, 1] = Role.POOL
    layer0[:, 2:] = place(grid0)
    layers = [layer0]
    if layout is LayoutKind.TWO_LAYER_DD:
        layer1 = np.full((H, W), Role.VOID, dtype=np.int8)
        layer1[:, 2:] = place(trim_data_cells(base, n_data_cells - per_layer))
        layers.append(layer1)
    elif layout is LayoutKind.TWO_LAYER_DP:
        layer1 = np.full((H, W), Role.VOID, dtype=np.int8)
        layer1[:, 2:] = Role.ANCILLA
        layers.append(layer1)
    logic = np.stack(layers)
    frag, gap = _fragments_for(layout, layer0, first_col=1)
    parts = {FACTORIES: (0, 1), POOLS: (1, 2), CELLS: (2, W)}
    return Plane(layout, d, logic, frag, gap, parts, pattern, n_F)


def optimize_wide_height(n_data_cells: int, pattern: ArrangementPattern | str, n_F: int, d: int) -> int:
    """Cells-region height minimizing the average pairwise L' of a Bypass plane, clamped to >= n_F."""
    kind = pattern.kind if isinstance(pattern, ArrangementPattern) else PatternKind.parse(pattern)
    if kind is not PatternKind.DENSE50:
        raise ConfigError("wide-height optimization is defined for the Dense50 pattern", field="pattern")
    if n_data_cells <= 1:
        return max(1, n_F)
    square_h = generate_arrangement(ArrangementPattern.square(kind), n_data_cells).shape[0]
    if square_h <= n_F:
        return n_F
    return max(_best_wide_height(n_data_cells, kind, square_h, check_distance(d)), n_F)


@lru_cache(maxsize=256)
def _best_wide_height(n_data_cells: int, kind: PatternKind, max_height: int, d: int) -> int:
    from .route import avg_pairwise_effective_length

    best = None
    for h in range(3, max_height + 1):
        plane = build_floor_plan(LayoutKind.BYPASS, ArrangementPattern.wide(kind, h), n_data_cells, 1, d)
        score = avg_pairwise_effective_length(plane)
        if best is None or score < best[0] - 1e-12:
            best = (score, h)
    return best[1]


# ---------------------------------------------------------------------------
# Resources
# ---------------------------------------------------------------------------

@dataclass
class PartCount:
    data_qubits: int = 0
    ancilla_qubits: int = 0
    cells_weighted: Fraction = Fraction(0)

    @property
    def qubits(self) -> int:
        return self.data_qubits + self.ancilla_qubits


@dataclass
class ResourceCount:
    data_qubits: int
    ancilla_qubits: int
    total_cells_weighted: Fraction
    parts: dict[str, PartCount]

    @property
    def total_qubits(self) -> int:
        return self.data_qubits + self.ancilla_qubits

    @property
    def cells_and_pools_qubits(self) -> int:
        return sum(p.qubits for name, p in self.parts.items() if name != FACTORIES)

    @property
    def cells_and_pools_weighted(self) -> Fraction:
        return sum((p.cells_weighted for name, p in self.parts.items() if name != FACTORIES), Fraction(0))


def count_physical_qubits(plane: Plane) -> ResourceCount:
    """Physical qubits per floor part.

    A Logic cell has ``d^2`` data and ``(d+1)^2`` ancilla qubits; every pair of
    adjacent cells in a layer shares one gap of ``d`` data qubits (perimeter
    excluded). Bypass planes add ``d`` data qubits per cell fragment and
    ``d + 2d`` qubits per gap fragment. Gaps belong to the part of their right
    (or lower) cell.
    """
    d = plane.d
    parts = {name: PartCount() for name in plane.floor_parts}
    present = plane.logic != Role.VOID
    _, H, W = plane.logic.shape
    for c in range(W):
        part = parts[plane.part_of_column(c)]
        n_cells = int(present[:, :, c].sum())
        part.data_qubits += n_cells * d * d
        part.ancilla_qubits += n_cells * (d + 1) ** 2
        part.cells_weighted += n_cells
        if c > 0:
            part.data_qubits += int((present[:, :, c] & present[:, :, c - 1]).sum()) * d
        part.data_qubits += int((present[:, 1:, c] & present[:, :-1, c]).sum()) * d
        nf = int(plane.fragments[:, c].sum())
        part.data_qubits += nf * d
        part.cells_weighted += Fraction(nf, d)
        if c > 0:
            ng = int(plane.gap_fragments[:, c - 1].sum())
            part.data_qubits += ng * d
            part.ancilla_qubits += ng * 2 * d
    return ResourceCount(
        data_qubits=sum(p.data_qubits for p in parts.values()),
        ancilla_qubits=sum(p.ancilla_qubits for p in parts.values()),
        total_cells_weighted=sum((p.cells_weighted for p in parts.values()), Fraction(0)),
        parts=parts,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _grid_rows(grid: np.ndarray) -> list[str]:
    return ["".join(ROLE_CHARS[Role(int(x))] for x in row) for row in grid]


def plane_to_dict(plane: Plane) -> dict:
    doc = {
        "format": PLANE_FORMAT,
        "version": PLANE_VERSION,
        "layout": plane.layout.value,
        "d": plane.d,
        "pattern": None if plane.pattern is None else {
            "kind": plane.pattern.kind.value, "shape": plane.pattern.shape, "height": plane.pattern.height},
        "n_factories": plane.n_factories,
        "floor_parts": {k: list(v) for k, v in plane.floor_parts.items()},
        "layers": [_grid_rows(layer) for layer in plane.logic],
    }
    if plane.has_bypass:
        doc["fragments"] = ["".join("1" if x else "0" for x in row) for row in plane.fragments]
        doc["gap_fragments"] = ["".join("1" if x else "0" for x in row) for row in plane.gap_fragments]
    return doc


def plane_from_dict(doc: dict) -> Plane:
    if doc.get("format") != PLANE_FORMAT:
        raise ValidationError(f"not a plane document (format={doc.get('format')!r})")
    if doc.get("version") != PLANE_VERSION:
        raise ValidationError(f"unsupported plane document version {doc.get('version')!r}")
    try:
        logic = np.array([[[CHAR_ROLES[ch] for ch in row] for row in layer] for layer in doc["layers"]],
                         dtype=np.int8)
    except KeyError as exc:
        raise ValidationError(f"unknown role character {exc.args[0]!r}") from None
    H, W = logic.shape[1:]
    if "fragments" in doc:
        frag = np.array([[ch == "1" for ch in row] for row in doc["fragments"]], dtype=bool).reshape(H, W)
        gap = np.array([[ch == "1" for ch in row] for row in doc["gap_fragments"]], dtype=bool).reshape(H, W - 1)
    else:
        frag = np.zeros((H, W), dtype=bool)
        gap = np.zeros((H, W - 1), dtype=bool)
    pat = doc.get("pattern")
    pattern = None if pat is None else ArrangementPattern(PatternKind.parse(pat["kind"]), pat["shape"], pat["height"])
    parts = {k: tuple(v) for k, v in doc["floor_parts"].items()}
    return Plane(LayoutKind.parse(doc["layout"]), check_distance(doc["d"]), logic, frag, gap, parts,
                 pattern, int(doc.get("n_factories", 0)))


def dumps_plane(plane: Plane) -> str:
    return json.dumps(plane_to_dict(plane), indent=1) + "\n"


def loads_plane(text: str) -> Plane:
    return plane_from_dict(json.loads(text))
