"""Honeycomb spin-network graphs: H_n, O_n, HH_n, BO_n and the pixel importer.

Cells live on the rhombic patch {(I, J): 0 <= I, J < n} with hexagon (I, J)
centered at integer coordinates (I - J, 3(I + J)).  Row I+J runs bottom to
top; column I-J runs left to right, so the transpose (I, J) -> (J, I) is the
left-right mirror x -> -x.  Hexagons are drawn with two vertical side edges
(the e-labeled edges) plus four slanted edges meeting at a top and a bottom
peak.

Networks keep their unit edges (binary "drawing" vertices included); the
smoothed view that merges runs of binary vertices into single spin-network
edges is computed on demand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

__all__ = [
    "EdgeLabel",
    "Edge",
    "HoneycombNet",
    "PixelGrid",
    "SmoothedNet",
    "build_h",
    "build_o",
    "build_hh",
    "build_bo",
    "compose",
    "mirror_net",
    "pixels_to_coloring",
    "read_pixel_text",
    "read_pgm",
    "net_to_json",
]


@dataclass(frozen=True, order=True)
class EdgeLabel:
    """Spin-color label: letter, level subscript, position superscript."""

    letter: str
    level: int
    pos: int

    def __str__(self):
        return f"{self.letter}_{self.level}^{self.pos}"

    def mirrored(self) -> "EdgeLabel":
        """Left-right mirror: swaps c<->d and a<->b, negates the position."""
        swap = {"c": "d", "d": "c", "a": "b", "b": "a"}
        return EdgeLabel(swap.get(self.letter, self.letter), self.level, -self.pos)


@dataclass(frozen=True)
class Edge:
    endpoints: tuple  # ((x1, y1), (x2, y2)), sorted
    label: EdgeLabel | None = None
    cells: frozenset = frozenset()


def _eid(a, b):
    return tuple(sorted((a, b)))


@dataclass
class HoneycombNet:
    """Unit-level honeycomb graph with labels and open-end bookkeeping."""

    kind: tuple  # ("H", n) / ("O", n) / ("HH", n) / ("BO", n)
    edges: dict  # edge id -> Edge
    open_ends: list = field(default_factory=list)  # free endpoint coordinates
    is_zero: bool = False
    meta: dict = field(default_factory=dict)

    def vertex_map(self):
        vm: dict = {}
        for eid in self.edges:
            for v in eid:
                vm.setdefault(v, []).append(eid)
        for v in vm:
            vm[v].sort()
        return vm

    def vertices(self):
        return sorted(self.vertex_map())

    def degree_profile(self):
        from collections import Counter

        return Counter(len(es) for es in self.vertex_map().values())

    def cells(self):
        out = set()
        for e in self.edges.values():
            out |= e.cells
        return sorted(out)

    def uniform_coloring(self, color: int) -> dict:
        return {eid: color for eid in self.edges}


# ---------------------------------------------------------------------------
# Hexagon geometry.

# Edges of hexagon (I, J) with center (c, h); last entry marks verticals.
def _hex_edges(I, J):
    c, h = I - J, 3 * (I + J)
    top, bottom = (c, h + 2), (c, h - 2)
    ul, ur = (c - 1, h + 1), (c + 1, h + 1)
    ll, lr = (c - 1, h - 1), (c + 1, h - 1)
    return [
        (_eid(ll, ul), "west"),
        (_eid(lr, ur), "east"),
        (_eid(ll, bottom), "bottom-left"),
        (_eid(bottom, lr), "bottom-right"),
        (_eid(ul, top), "top-left"),
        (_eid(top, ur), "top-right"),
    ]


def _patch_edges(n):
    """edge id -> set of owning cells for the n x n rhombic patch."""
    cells: dict = {}
    for I in range(n):
        for J in range(n):
            for eid, _ in _hex_edges(I, J):
                cells.setdefault(eid, set()).add((I, J))
    return cells


def _is_vertical(eid):
    (x1, y1), (x2, y2) = eid
    return x1 == x2


def _row_of_vertical(eid):
    (_, y1), (_, y2) = eid
    return (min(y1, y2) + 1) // 3


def _symmetric_positions(count):
    half = count // 2
    left = list(range(-half, 0))
    mid = [0] if count % 2 else []
    return left + mid + list(range(1, half + 1))


def _label_edges(edge_cells, n):
    """Attach the level/position labeling scheme to an edge->cells map."""
    labels: dict = {}
    # Verticals: e_row^pos with symmetric positions, omitting 0 on even rows.
    by_row: dict = {}
    for eid in edge_cells:
        if _is_vertical(eid):
            by_row.setdefault(_row_of_vertical(eid), []).append(eid)
    vert_info = {}
    for row, eids in by_row.items():
        eids.sort(key=lambda e: e[0][0])
        for pos, eid in zip(_symmetric_positions(len(eids)), eids):
            labels[eid] = EdgeLabel("e", row, pos)
            top = max(eid, key=lambda v: v[1])
            vert_info[top] = (row, pos)
    # Slants: labeled from the vertical below their lower endpoint.
    for eid in edge_cells:
        if _is_vertical(eid):
            continue
        lower = min(eid, key=lambda v: v[1])
        upper = max(eid, key=lambda v: v[1])
        if lower in vert_info:
            row, pos = vert_info[lower]
            letter = "c" if upper[0] > lower[0] else "d"
            labels[eid] = EdgeLabel(letter, row, pos)
        else:
            # bottom arc: no vertical below; d descends rightward, c leftward
            letter = "d" if upper[0] < lower[0] else "c"
            labels[eid] = EdgeLabel(letter, -1, upper[0] + lower[0])
    if n == 1:
        # Pin the base hexagon to its published labeling exactly.
        labels = {
            _eid((-1, -1), (-1, 1)): EdgeLabel("e", 0, -1),
            _eid((1, -1), (1, 1)): EdgeLabel("e", 0, 1),
            _eid((-1, 1), (0, 2)): EdgeLabel("c", 0, -1),
            _eid((0, 2), (1, 1)): EdgeLabel("d", 0, 1),
            _eid((-1, -1), (0, -2)): EdgeLabel("d", -1, 0),
            _eid((0, -2), (1, -1)): EdgeLabel("c", -1, 0),
        }
    return labels


def build_h(n: int) -> HoneycombNet:
    """Side-n rhombic honeycomb patch H_n with the full labeling scheme."""
    if n < 1:
        raise ValueError("build_h requires n >= 1")
    edge_cells = _patch_edges(n)
    labels = _label_edges(edge_cells, n)
    edges = {
        eid: Edge(endpoints=eid, label=labels.get(eid), cells=frozenset(cells))
        for eid, cells in edge_cells.items()
    }
    return HoneycombNet(kind=("H", n), edges=edges)


def build_o(n: int) -> HoneycombNet:
    """Crown spin-network O_n, positioned in situ on top of H_n.

    One hexagonal cell (the top cell of H_{n+1}) plus three open branches;
    each lateral branch alternates n slanted and n-1 vertical edges.  Open
    ends sit on upper-perimeter vertices of H_n.
    """
    if n < 1:
        raise ValueError("build_o requires n >= 1")
    big, small = _patch_edges(n + 1), _patch_edges(n)
    small_vertices = {v for eid in small for v in eid}
    labels = _label_edges(big, n + 1)
    edges = {}
    open_ends = []
    for eid, cells in big.items():
        if eid in small:
            continue
        edges[eid] = Edge(endpoints=eid, label=labels.get(eid), cells=frozenset(cells))
        for v in eid:
            if v in small_vertices:
                open_ends.append(v)
    open_ends = sorted(set(open_ends))
    branches = {
        v: ("center" if v[0] == 0 else ("left" if v[0] < 0 else "right"))
        for v in open_ends
    }
    return HoneycombNet(
        kind=("O", n),
        edges=edges,
        open_ends=open_ends,
        meta={"branches": branches},
    )


_UPPER_PERIMETER_DELETES = "cells deleted relative to H_n"


def build_hh(n: int) -> HoneycombNet:
    """H_n with the hexagons along the upper perimeter deleted.

    HH_1 degenerates to the single (smoothed) edge forming the lower
    perimeter of H_1; for n >= 2 the deleted cells are the upper-perimeter
    crown minus its two extreme cells.
    """
    if n < 1:
        raise ValueError("build_hh requires n >= 1")
    if n == 1:
        h1 = build_h(1)
        keep = {
            eid: e for eid, e in h1.edges.items() if max(v[1] for v in eid) <= -1
        }
        return HoneycombNet(kind=("HH", 1), edges=keep, meta={"degenerate": True})
    deleted = {(i, n - 1) for i in range(1, n)} | {(n - 1, j) for j in range(1, n - 1)}
    h = build_h(n)
    keep = {
        eid: e for eid, e in h.edges.items() if not e.cells <= deleted
    }
    return HoneycombNet(kind=("HH", n), edges=keep, meta={_UPPER_PERIMETER_DELETES: sorted(deleted)})


def build_bo(n: int) -> HoneycombNet:
    """Bubble-octopus BO_n: O_n with each lateral vertex blown into a bubble.

    Built on synthetic coordinates (it is never composed positionally): the
    hexagonal cell keeps only its upper arc, the innermost lateral verticals
    are joined by a long bottom arc carrying the central open leg, and each
    lateral vertex becomes a bubble whose lower arc carries the stub vertex.
    """
    if n < 1:
        raise ValueError("build_bo requires n >= 1")
    edges = {}
    open_ends = []

    def add(a, b, tag):
        eid = _eid(a, b)
        edges[eid] = Edge(endpoints=eid, label=None, cells=frozenset())
        return eid

    # upper hexagon arc between the two innermost branch attachment points
    L0, R0 = (-2, 0), (2, 0)
    add(L0, (0, 2), "hex-upper-left")
    add((0, 2), R0, "hex-upper-right")
    C = (0, -4)
    central_free = (0, -6)
    add(C, central_free, "central-leg")
    open_ends.append(central_free)

    stub_feet = {}
    for side in (-1, 1):
        prev = L0 if side < 0 else R0
        for k in range(1, n):
            vin = (side * (4 * k), 0)
            vout = (side * (4 * k + 2), 0)
            mid = (side * (4 * k + 1), -1)
            add(prev, vin, "branch")
            add(vin, vout, "bubble-upper")
            add(vin, mid, "bubble-lower-in")
            add(mid, vout, "bubble-lower-out")
            foot = (mid[0], -3)
            add(mid, foot, "stub")
            if k == 1:
                stub_feet[side] = foot
            else:
                open_ends.append(foot)
            prev = vout
        tail_free = (side * (4 * n + 2), 0)
        add(prev, tail_free, "branch-end")
        open_ends.append(tail_free)

    # The innermost lateral verticals are joined by the long bottom arc that
    # replaces the lower half of the hexagon and carries the central leg.
    left_anchor = stub_feet.get(-1, L0)
    right_anchor = stub_feet.get(1, R0)
    add(left_anchor, C, "connect-left")
    add(C, right_anchor, "connect-right")

    return HoneycombNet(
        kind=("BO", n),
        edges=edges,
        open_ends=sorted(set(open_ends)),
        meta={"bubbles": 2 * (n - 1)},
    )


def compose(
    base: HoneycombNet,
    attach: HoneycombNet,
    at: list,
    base_coloring: dict | None = None,
    attach_coloring: dict | None = None,
):
    """Join an open-end network onto `base` at the listed vertices.

    The i-th open end of `attach` is identified with vertex at[i] of
    `base`; in-situ coordinates must already agree.  When colorings are
    supplied, a mismatch at any join vertex marks the result as the zero
    network.  Overlapping edges must agree and are merged (idempotent
    projectors); base labels win on overlap.
    """
    if len(at) != len(attach.open_ends):
        raise ValueError(
            f"arity mismatch: {len(attach.open_ends)} open ends vs {len(at)} vertices"
        )
    for v, target in zip(attach.open_ends, at):
        if v != target:
            raise ValueError(f"open end {v} does not sit on requested vertex {target}")
    edges = dict(attach.edges)
    edges.update(base.edges)  # base labels win
    coloring = None
    is_zero = False
    if base_coloring is not None and attach_coloring is not None:
        coloring = dict(attach_coloring)
        coloring.update(base_coloring)
        merged = HoneycombNet(kind=base.kind, edges=edges)
        for v, incident in merged.vertex_map().items():
            cols = [coloring[e] for e in incident if e in coloring]
            if len(incident) == 2 and len(set(cols)) > 1:
                is_zero = True
    kind = ("H", base.kind[1] + 1) if base.kind[0] == "H" and attach.kind[0] == "O" else base.kind
    out = HoneycombNet(kind=kind, edges=edges, is_zero=is_zero)
    return (out, coloring) if coloring is not None else out


def mirror_net(net: HoneycombNet) -> HoneycombNet:
    """Left-right mirror x -> -x; realizes the label involution geometrically."""

    def mv(v):
        return (-v[0], v[1])

    edges = {}
    for eid, e in net.edges.items():
        nid = _eid(mv(eid[0]), mv(eid[1]))
        edges[nid] = Edge(
            endpoints=nid,
            label=e.label.mirrored() if e.label else None,
            cells=frozenset((J, I) for I, J in e.cells),
        )
    return HoneycombNet(
        kind=net.kind,
        edges=edges,
        open_ends=sorted(mv(v) for v in net.open_ends),
        is_zero=net.is_zero,
    )


def mirror_coloring(net: HoneycombNet, coloring: dict) -> dict:
    """Pull a coloring back through the left-right mirror."""

    def mv(v):
        return (-v[0], v[1])

    return {_eid(mv(a), mv(b)): coloring[(a, b)] for a, b in coloring}


# ---------------------------------------------------------------------------
# Smoothed view.


@dataclass
class SmoothedNet:
    """Spin-network view of a honeycomb: binary vertices merged away.

    arcs: arc id -> dict(units=tuple of unit edge ids, endpoints=(v, w),
    label, cells, level).  circles: arcs with no trivalent endpoint (unit
    cycles), listed as tuples of unit edge ids.  ccw: trivalent vertex ->
    (arc id, end) triples in counterclockwise planar order.
    """

    arcs: dict
    circles: list
    ccw: dict
    net: HoneycombNet

    def arc_of_unit(self):
        out = {}
        for aid, arc in self.arcs.items():
            for u in arc["units"]:
                out[u] = aid
        for ci, units in enumerate(self.circles):
            for u in units:
                out[u] = ("circle", ci)
        return out

    def arc_coloring(self, unit_coloring: dict):
        """Project a unit-edge coloring; None when an arc is non-constant."""
        out = {}
        for aid, arc in self.arcs.items():
            cols = {unit_coloring[u] for u in arc["units"]}
            if len(cols) != 1:
                return None
            out[aid] = cols.pop()
        for ci, units in enumerate(self.circles):
            cols = {unit_coloring[u] for u in units}
            if len(cols) != 1:
                return None
            out[("circle", ci)] = cols.pop()
        return out

    def to_closed_net(self):
        """ClosedNet for the oracle (circles become self-glued projectors)."""
        from .tl import ClosedNet

        vertices = []
        for v in sorted(self.ccw):
            vertices.append([(aid, end) for aid, end in self.ccw[v]])
        for ci in range(len(self.circles)):
            vertices.append([(("circle", ci), 0), (("circle", ci), 1)])
        return ClosedNet(vertices=vertices, name=f"{self.net.kind}")


def smooth(net: HoneycombNet) -> SmoothedNet:
    """Merge runs of binary vertices into spin-network arcs."""
    vm = net.vertex_map()
    trivalent = {v for v, es in vm.items() if len(es) == 3}
    for v, es in vm.items():
        if len(es) not in (1, 2, 3):
            raise ValueError(f"vertex {v} has unsupported valence {len(es)}")

    seen = set()
    arcs = {}
    circles = []

    def walk(start_v, first_eid):
        """Follow a chain of binary vertices from start_v along first_eid."""
        units = [first_eid]
        prev, cur = start_v, _other(first_eid, start_v)
        while cur not in trivalent and len(vm[cur]) == 2:
            nxt = [e for e in vm[cur] if e != units[-1]][0]
            units.append(nxt)
            prev, cur = cur, _other(nxt, cur)
        return units, cur

    for v in sorted(trivalent):
        for eid in vm[v]:
            if eid in seen:
                continue
            units, end_v = walk(v, eid)
            seen.update(units)
            aid = len(arcs)
            arcs[aid] = {
                "units": tuple(units),
                "endpoints": (v, end_v),
                "label": _arc_label(net, units),
                "cells": frozenset().union(*(net.edges[u].cells for u in units)),
            }
    # circles: leftover cycles entirely through binary vertices
    leftover = [eid for eid in sorted(net.edges) if eid not in seen]
    visited = set()
    for eid in leftover:
        if eid in visited:
            continue
        units = [eid]
        visited.add(eid)
        start = eid[0]
        prev_v, cur_v = eid[0], eid[1]
        while cur_v != start:
            nxt = [e for e in vm[cur_v] if e != units[-1]][0]
            units.append(nxt)
            visited.add(nxt)
            cur_v = _other(nxt, cur_v)
        circles.append(tuple(units))

    for aid, arc in arcs.items():
        arc["level"] = min(max(c) for c in arc["cells"]) if arc["cells"] else -1

    ccw = {}
    for v in trivalent:
        incident = []
        for aid, arc in arcs.items():
            for end, w in enumerate(arc["endpoints"]):
                if w == v:
                    unit = arc["units"][0 if end == 0 else -1]
                    other = _other(unit, v)
                    ang = math.atan2(other[1] - v[1], other[0] - v[0])
                    incident.append((ang, aid, end))
        incident.sort()
        if len(incident) != 3:
            raise ValueError(f"trivalent vertex {v} resolved to {len(incident)} arcs")
        ccw[v] = tuple((aid, end) for _, aid, end in incident)
    return SmoothedNet(arcs=arcs, circles=circles, ccw=ccw, net=net)


def _other(eid, v):
    return eid[1] if eid[0] == v else eid[0]


_LEFT_ORDER = {"c": 0, "d": 1, "e": 2, "a": 3, "b": 4}
_RIGHT_ORDER = {"d": 0, "c": 1, "e": 2, "b": 3, "a": 4}


def _arc_label(net, units):
    """Merged-arc label: smallest constituent under the side ordering."""
    cands = [net.edges[u].label for u in units if net.edges[u].label]
    if not cands:
        return None

    def rank(lab):
        order = _RIGHT_ORDER if lab.pos > 0 else _LEFT_ORDER
        return (lab.level, order.get(lab.letter, 9), abs(lab.pos), lab.pos)

    return min(cands, key=rank)


# ---------------------------------------------------------------------------
# Pixel import.


@dataclass
class PixelGrid:
    n: int
    maxval: int
    values: list  # row-major n x n, values[i][j], row 0 at the top

    def __post_init__(self):
        if len(self.values) != self.n or any(len(r) != self.n for r in self.values):
            raise ValueError("pixel grid must be n x n")
        for row in self.values:
            for v in row:
                if not (0 <= v <= self.maxval):
                    raise ValueError(f"pixel value {v} outside [0, {self.maxval}]")


def pixels_to_coloring(grid: PixelGrid):
    """Map a pixel grid to H_n with summed colors on shared edges."""
    n = grid.n
    net = build_h(n)
    pix = {}
    for i in range(n):
        for j in range(n):
            pix[(n - 1 - j, n - 1 - i)] = grid.values[i][j]
    coloring = {
        eid: sum(pix[c] for c in e.cells) for eid, e in net.edges.items()
    }
    return net, coloring


def read_pixel_text(path) -> PixelGrid:
    """Plain text grid: first line 'n maxval', then n rows of n integers."""
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split()
    n, maxval = int(tokens[0]), int(tokens[1])
    vals = [int(t) for t in tokens[2:]]
    if len(vals) != n * n:
        raise ValueError(f"expected {n * n} pixel values, found {len(vals)}")
    rows = [vals[i * n : (i + 1) * n] for i in range(n)]
    return PixelGrid(n=n, maxval=maxval, values=rows)


def read_pgm(path) -> PixelGrid:
    """Binary (P5) 8-bit grayscale PGM; must be square."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ValueError("only binary P5 PGM images are supported")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if width != height:
        raise ValueError(f"pixel image must be square, got {width}x{height}")
    if maxval > 255:
        raise ValueError("only 8-bit PGM is supported")
    pos += 1
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ValueError("truncated PGM raster")
    rows = [list(raster[i * width : (i + 1) * width]) for i in range(height)]
    return PixelGrid(n=width, maxval=maxval, values=rows)


def net_to_json(net: HoneycombNet) -> str:
    """Stable-order JSON dump of a network (diff friendly)."""
    payload = {
        "kind": list(net.kind),
        "is_zero": net.is_zero,
        "vertices": [list(v) for v in net.vertices()],
        "edges": [
            {
                "endpoints": [list(eid[0]), list(eid[1])],
                "label": str(net.edges[eid].label) if net.edges[eid].label else None,
                "cells": sorted(map(list, net.edges[eid].cells)),
            }
            for eid in sorted(net.edges)
        ],
        "open_ends": [list(v) for v in sorted(net.open_ends)],
    }
    return json.dumps(payload, indent=1, sort_keys=True)
