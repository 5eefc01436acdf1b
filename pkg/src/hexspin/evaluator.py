"""Exact evaluation of colored honeycomb spin-networks.

The engine reduces a closed trivalent plane diagram by three exact moves:

* bigon burst (diagrammatic Schur's lemma): a two-sided face collapses to a
  single edge, forcing its two leg colors equal and contributing a
  theta/Delta factor;
* triangle collapse (bubble move): a three-sided face collapses to one
  vertex, contributing sixj * Delta^-1 * theta;
* recoupling: an internal edge is re-expanded over admissible intermediate
  colors with 6j weights, shrinking the two faces it borders.

Moves are chosen by a deterministic top-down policy (highest lattice level
first; bursts before collapses before recouplings), which reproduces the
level-by-level crown reduction: H_n passes through the exact shape of
H_{n-1}, and the surviving summation indices counted by the trace follow
a_n = a_{n-1} + 2n - 5.  Arithmetic is exact on the classical backend, and
every value is cross-checked against the Temperley-Lieb oracle in the test
suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .backend import CLASSICAL, QParam, QScalar
from .lattice import EdgeLabel, HoneycombNet, SmoothedNet, build_h, smooth
from .recoupling import admissible_range, delta, is_admissible, sixj, theta

__all__ = [
    "Factor",
    "CoeffTerm",
    "iota",
    "evaluate_term",
    "bubble_move",
    "summation_count",
    "EvaluationTrace",
    "evaluate",
    "replay",
    "reduce_step",
    "level_factors",
    "psi_coeff",
    "phi_coeff",
]


# ---------------------------------------------------------------------------
# Coefficient terms and the label involution.


@dataclass(frozen=True)
class Factor:
    """One multiplicative factor; kind in {sixj, theta, delta, delta_inv}."""

    kind: str
    labels: tuple

    def __str__(self):
        return f"{self.kind}({','.join(str(l) for l in self.labels)})"


@dataclass(frozen=True)
class CoeffTerm:
    """Product of tagged factors plus the summation indices they consume."""

    factors: tuple = ()
    summed: tuple = ()

    def __mul__(self, other: "CoeffTerm") -> "CoeffTerm":
        return CoeffTerm(self.factors + other.factors, self.summed + other.summed)


def _map_label(lab):
    return lab.mirrored() if isinstance(lab, EdgeLabel) else lab


def iota(term: CoeffTerm) -> CoeffTerm:
    """Formal involution: swaps c and d, negates superscripts, keeps subscripts."""
    return CoeffTerm(
        tuple(Factor(f.kind, tuple(_map_label(l) for l in f.labels)) for f in term.factors),
        tuple(_map_label(l) for l in term.summed),
    )


def evaluate_term(term: CoeffTerm, colors: dict, p: QParam = CLASSICAL) -> QScalar:
    """Evaluate a CoeffTerm against a label/index -> color assignment."""
    out = p.one()
    for f in term.factors:
        cols = [colors[l] for l in f.labels]
        if f.kind == "sixj":
            out = out * sixj(*cols, p)
        elif f.kind == "theta":
            out = out * theta(*cols, p)
        elif f.kind == "delta":
            out = out * delta(cols[0], p)
        elif f.kind == "delta_inv":
            dv = delta(cols[0], p)
            if dv == 0:
                return p.zero()
            out = out / dv
        else:
            raise ValueError(f"unknown factor kind {f.kind}")
        if p.is_classical and out == 0:
            return out
    return out


def bubble_move(a: int, b: int, c: int, d: int, e: int, f: int, p: QParam = CLASSICAL) -> QScalar:
    """Coefficient collapsing a bubble with arcs (e, a, d) and legs (b, c, f).

    Returns sixj(a,b,e,c,d,f) * Delta_f^-1 * theta(a,d,f); exactly zero on
    any non-admissible triple, with the Delta inversion guarded first.
    """
    if not (
        is_admissible(a, b, e, p)
        and is_admissible(c, d, e, p)
        and is_admissible(a, d, f, p)
        and is_admissible(b, c, f, p)
    ):
        return p.zero()
    df = delta(f, p)
    if df == 0:
        return p.zero()
    return sixj(a, b, e, c, d, f, p) / df * theta(a, d, f, p)


def summation_count(n: int) -> int:
    """Summation indices needed for <H_n>: a_2 = 0, a_n = a_{n-1} + 2n - 5."""
    if n < 2:
        raise ValueError("summation_count is defined for n >= 2")
    return sum(2 * k - 5 for k in range(3, n + 1))


# ---------------------------------------------------------------------------
# Plane diagrams (combinatorial maps with counterclockwise vertex orders).


class PlanarDiagram:
    """Mutable closed trivalent plane multigraph with colored edges."""

    def __init__(self):
        self.vdarts = {}       # vertex -> [dart, ...] counterclockwise
        self.dart_vertex = {}  # dart -> vertex
        self.dart_edge = {}    # dart -> edge
        self.dart_twin = {}    # dart -> dart
        self.edges = {}        # edge -> (dart, dart)
        self.color = {}        # edge -> int
        self.sym = {}          # edge -> None | summation index name
        self.name = {}         # edge -> EdgeLabel | str (reporting)
        self.level = {}        # edge -> int (lattice metadata; new edges inherit)
        self._counter = 0

    def _new(self):
        self._counter += 1
        return self._counter

    @classmethod
    def from_smoothed(cls, sm: SmoothedNet, arc_colors: dict):
        dg = cls()
        dart_of = {}
        for v in sorted(sm.ccw):
            vid = dg._new()
            darts = []
            for aid, end in sm.ccw[v]:
                d = dg._new()
                dart_of[(aid, end)] = d
                dg.dart_vertex[d] = vid
                darts.append(d)
            dg.vdarts[vid] = darts
        edge_of_arc = {}
        for aid in sorted(sm.arcs):
            arc = sm.arcs[aid]
            eid = dg._new()
            edge_of_arc[aid] = eid
            d0, d1 = dart_of[(aid, 0)], dart_of[(aid, 1)]
            dg.edges[eid] = (d0, d1)
            dg.dart_twin[d0], dg.dart_twin[d1] = d1, d0
            dg.dart_edge[d0] = dg.dart_edge[d1] = eid
            dg.color[eid] = arc_colors[aid]
            dg.sym[eid] = None
            dg.name[eid] = arc["label"]
            dg.level[eid] = arc["level"]
        circles = [arc_colors[("circle", ci)] for ci in range(len(sm.circles))]
        return dg, circles, edge_of_arc

    def clone(self):
        dg = PlanarDiagram.__new__(PlanarDiagram)
        dg.vdarts = {v: list(ds) for v, ds in self.vdarts.items()}
        dg.dart_vertex = dict(self.dart_vertex)
        dg.dart_edge = dict(self.dart_edge)
        dg.dart_twin = dict(self.dart_twin)
        dg.edges = dict(self.edges)
        dg.color = dict(self.color)
        dg.sym = dict(self.sym)
        dg.name = dict(self.name)
        dg.level = dict(self.level)
        dg._counter = self._counter
        return dg

    def check_admissible(self, p: QParam) -> bool:
        for darts in self.vdarts.values():
            cols = [self.color[self.dart_edge[d]] for d in darts]
            if not is_admissible(*cols, p):
                return False
        return True

    def _after(self, d):
        darts = self.vdarts[self.dart_vertex[d]]
        return darts[(darts.index(d) + 1) % len(darts)]

    def faces(self):
        """Orbits of dart -> next_ccw(twin(dart)); the outer face included."""
        out, seen = [], set()
        for d0 in sorted(self.dart_vertex):
            if d0 in seen:
                continue
            orbit, d = [], d0
            while True:
                orbit.append(d)
                seen.add(d)
                d = self._after(self.dart_twin[d])
                if d == d0:
                    break
            out.append(orbit)
        return out

    def edge_key(self, eid):
        return (self.level[eid], str(self.name[eid]), eid)

    def leg_darts(self, orbit):
        """For a bigon/triangle face: the third dart at each face vertex."""
        face_edges = {self.dart_edge[d] for d in orbit}
        out = []
        for d in orbit:
            v = self.dart_vertex[d]
            out.append([x for x in self.vdarts[v] if self.dart_edge[x] not in face_edges][0])
        return out

    # -- rewrites ------------------------------------------------------------

    def burst_bigon(self, orbit):
        """Collapse a 2-gon; legs must already be known color compatible.

        Returns ("circle", color) when the component was a theta-net, else
        ("edge", merged_edge_id).
        """
        d1, d2 = orbit
        v1, v2 = self.dart_vertex[d1], self.dart_vertex[d2]
        e1, e2 = self.dart_edge[d1], self.dart_edge[d2]
        dl1, dl2 = self.leg_darts(orbit)
        l1, l2 = self.dart_edge[dl1], self.dart_edge[dl2]
        if l1 == l2:
            color = self.color[l1]
            for e in (l1, e1, e2):
                self._remove_edge(e)
            del self.vdarts[v1], self.vdarts[v2]
            return ("circle", color)
        far1, far2 = self.dart_twin[dl1], self.dart_twin[dl2]
        merged = self._new()
        self.edges[merged] = (far1, far2)
        self.dart_twin[far1], self.dart_twin[far2] = far2, far1
        self.dart_edge[far1] = self.dart_edge[far2] = merged
        self.color[merged] = self.color[l1]
        self.sym[merged] = self.sym[l1] if self.sym[l1] is not None else self.sym[l2]
        self.name[merged] = self.name[l1]
        self.level[merged] = min(self.level[l1], self.level[l2])
        for eid, dl in ((l1, dl1), (l2, dl2)):
            del self.edges[eid], self.color[eid], self.sym[eid], self.name[eid], self.level[eid]
            for d in (dl,):
                del self.dart_edge[d], self.dart_twin[d], self.dart_vertex[d]
        self._remove_edge(e1)
        self._remove_edge(e2)
        del self.vdarts[v1], self.vdarts[v2]
        return ("edge", merged)

    def collapse_triangle(self, orbit):
        """Bubble move on a 3-gon: replace it by a single trivalent vertex."""
        dl = self.leg_darts(orbit)
        vs = [self.dart_vertex[d] for d in orbit]
        new_v = self._new()
        # face orbit (v1, v2, v3): legs attach counterclockwise as (l1, l3, l2)
        self.vdarts[new_v] = [dl[0], dl[2], dl[1]]
        for d in dl:
            self.dart_vertex[d] = new_v
        for d in list(orbit):
            e = self.dart_edge.get(d)
            if e is not None and e in self.edges:
                self._remove_edge(e)
        for v in vs:
            del self.vdarts[v]
        return new_v

    def recouple(self, eid, new_color, new_sym, new_name):
        """Flip edge eid into a new edge joining the opposite leg pairs."""
        de0, de1 = self.edges[eid]
        v1, v2 = self.dart_vertex[de0], self.dart_vertex[de1]
        if v1 == v2:
            raise ValueError("cannot recouple a self-loop")
        _, dx, dy = self._rotated(v1, de0)
        _, du, dw = self._rotated(v2, de1)
        # the summed edge joins the structure one level down (its color is
        # accounted for in the colorings of the smaller honeycomb)
        level = self.level[eid] - 1
        self._remove_edge(eid)
        f = self._new()
        f0, f1 = self._new(), self._new()
        wa, wb = self._new(), self._new()
        self.edges[f] = (f0, f1)
        self.dart_twin[f0], self.dart_twin[f1] = f1, f0
        self.dart_edge[f0] = self.dart_edge[f1] = f
        self.color[f] = new_color
        self.sym[f] = new_sym
        self.name[f] = new_name
        self.level[f] = level
        self.vdarts[wa] = [dy, du, f0]
        self.vdarts[wb] = [dw, dx, f1]
        for d, v in ((dy, wa), (du, wa), (f0, wa), (dw, wb), (dx, wb), (f1, wb)):
            self.dart_vertex[d] = v
        del self.vdarts[v1], self.vdarts[v2]
        return f

    def _rotated(self, v, d):
        darts = self.vdarts[v]
        i = darts.index(d)
        return tuple(darts[i:] + darts[:i])

    def _remove_edge(self, eid):
        for d in self.edges[eid]:
            self.dart_edge.pop(d, None)
            self.dart_twin.pop(d, None)
            self.dart_vertex.pop(d, None)
        del self.edges[eid], self.color[eid], self.sym[eid], self.name[eid], self.level[eid]


# ---------------------------------------------------------------------------
# Canonical form (used to detect the H_{n-1} shape during reduce_step).


def diagram_signature(dg: PlanarDiagram):
    """Canonical code of a connected trivalent plane diagram.

    Minimizes a BFS rotation code over all starting darts and both
    orientations; returns (code, edges_in_canonical_order).
    """
    if not dg.edges:
        return ("empty",), []
    best = None
    for start in sorted(dg.dart_vertex):
        for flip in (False, True):
            cand = _traverse(dg, start, flip)
            if best is None or cand[0] < best[0]:
                best = cand
    return best


def _traverse(dg, start, flip):
    vnum, enum, code, order = {}, {}, [], []
    queue = [start]
    while queue:
        d = queue.pop(0)
        v = dg.dart_vertex[d]
        if v in vnum:
            continue
        vnum[v] = len(vnum)
        darts = dg.vdarts[v]
        i = darts.index(d)
        ordered = darts[i:] + darts[:i]
        if flip:
            ordered = [ordered[0]] + list(reversed(ordered[1:]))
        row = []
        for dd in ordered:
            e = dg.dart_edge[dd]
            if e not in enum:
                enum[e] = len(enum)
                order.append(e)
            row.append(enum[e])
            tw = dg.dart_twin[dd]
            if dg.dart_vertex[tw] not in vnum:
                queue.append(tw)
        code.append(tuple(row))
    return tuple(code), order


# ---------------------------------------------------------------------------
# Move selection.

_TYPE_RANK = {"bigon": 0, "triangle": 1, "recouple": 2}


@dataclass(frozen=True)
class Move:
    kind: str
    level: int
    canon: tuple
    orbit: tuple = ()
    edge: int | None = None


def enumerate_moves(dg: PlanarDiagram):
    moves = []
    best_face = None
    for orbit in dg.faces():
        edges = [dg.dart_edge[d] for d in orbit]
        lvl = max(dg.level[e] for e in edges)
        keys = tuple(sorted(dg.edge_key(e) for e in edges))
        if len(orbit) == 2 and len(set(edges)) == 2:
            moves.append(Move("bigon", lvl, keys, orbit=tuple(orbit)))
        elif len(orbit) == 3 and len(set(edges)) == 3 and len(
            {dg.dart_vertex[d] for d in orbit}
        ) == 3:
            moves.append(Move("triangle", lvl, keys, orbit=tuple(orbit)))
        elif len(orbit) >= 4:
            fkey = (-lvl, len(orbit), keys)
            if best_face is None or fkey < best_face[0]:
                best_face = (fkey, orbit, lvl)
    if best_face is not None:
        _, orbit, lvl = best_face
        candidates = []
        for d in orbit:
            e = dg.dart_edge[d]
            de0, de1 = dg.edges[e]
            if dg.dart_vertex[de0] != dg.dart_vertex[de1]:
                candidates.append(e)
        if candidates:
            e = max(candidates, key=dg.edge_key)
            moves.append(Move("recouple", lvl, (dg.edge_key(e),), edge=e))
    return moves


def default_policy(moves):
    """Highest lattice level first; bursts, then collapses, then recouplings."""
    if not moves:
        return None
    return min(moves, key=lambda m: (-m.level, _TYPE_RANK[m.kind], m.canon))


def _orbit_edges(dg, orbit):
    return [dg.dart_edge[d] for d in orbit]


# ---------------------------------------------------------------------------
# Traces.


@dataclass
class TraceMove:
    kind: str
    edges: tuple           # display names of the edges involved
    factors: tuple = ()    # contributed factors, with index placeholders
    index: str | None = None
    bound: tuple = ()      # index classes identified/bound by a Schur burst


@dataclass
class EvaluationTrace:
    """Move schedule of one evaluation; the schedule is color independent."""

    n: int = 0
    moves: list = field(default_factory=list)
    indices: list = field(default_factory=list)
    value: QScalar | None = None
    _union: dict = field(default_factory=dict)
    _bound: set = field(default_factory=set)

    def new_index(self, base_name):
        idx = f"p{len(self.indices)}<{base_name}>"
        self.indices.append(idx)
        self._union[idx] = idx
        return idx

    def _find(self, i):
        while self._union[i] != i:
            self._union[i] = self._union[self._union[i]]
            i = self._union[i]
        return i

    def bind(self, sym_a, sym_b):
        """Record a Schur color constraint between two edge symbols."""
        if sym_a is None and sym_b is None:
            return ()
        if sym_a is None or sym_b is None:
            idx = self._find(sym_a if sym_a is not None else sym_b)
            self._bound.add(idx)
            return (idx,)
        ra, rb = self._find(sym_a), self._find(sym_b)
        if ra == rb:
            return ()
        self._union[ra] = rb
        if ra in self._bound:
            self._bound.add(rb)
        return (ra, rb)

    def free_indices(self):
        classes = {self._find(i) for i in self.indices}
        return sorted(c for c in classes if c not in self._bound)

    def free_index_count(self) -> int:
        return len(self.free_indices())


# ---------------------------------------------------------------------------
# Reduction driver.

_MAX_MOVES = 10_000


def _legs_by_level(n: int, sm: SmoothedNet, edge_of_arc: dict):
    """Crown connector edges per reduction level, from the lattice geometry.

    Reducing H_m consumes the crown O_{m-1}; its 2m-1 connector edges (the
    ones with an endpoint on the upper perimeter of H_{m-1}) are exactly the
    edges the algorithm recouples.  Arcs are matched through their unit
    edges, and ordered left to right.
    """
    from .lattice import build_h, build_o

    unit_to_arc = {}
    for aid, arc in sm.arcs.items():
        for u in arc["units"]:
            unit_to_arc[u] = aid
    out = {}
    for m in range(3, n + 1):
        crown = build_o(m - 1)
        small_vertices = {v for eid in build_h(m - 1).edges for v in eid}
        leg_arcs = []
        for eid in crown.edges:
            if any(v in small_vertices for v in eid):
                aid = unit_to_arc[eid]
                if aid not in leg_arcs:
                    leg_arcs.append(aid)
        key = lambda aid: (sm.arcs[aid]["label"].pos, str(sm.arcs[aid]["label"]))
        out[m - 1] = [edge_of_arc[a] for a in sorted(leg_arcs, key=key)]
    return out


class _Reducer:
    def __init__(self, p: QParam, trace: EvaluationTrace, policy=default_policy,
                 stop_signature=None, stop_edge_count=None, legs=None):
        self.p = p
        self.trace = trace
        self.policy = policy
        self.stop_signature = stop_signature
        self.stop_edge_count = stop_edge_count
        self.legs = legs or {}
        self.stopped = []

    def run(self, dg: PlanarDiagram, circles: list) -> QScalar:
        return self._reduce(dg, list(circles), self.p.one(), 0)

    def _select(self, dg: PlanarDiagram):
        """Scheduled policy: crown legs drive the level-by-level reduction."""
        pending = {
            lvl: [e for e in eids if e in dg.edges]
            for lvl, eids in self.legs.items()
        }
        live = [lvl for lvl, eids in pending.items() if eids]
        moves = enumerate_moves(dg)
        if not live:
            return self.policy(moves)
        L = max(live)
        bigons = [m for m in moves if m.kind == "bigon"]
        if bigons:
            return min(bigons, key=lambda m: (-m.level, m.canon))
        leg_set = {e for eids in pending.values() for e in eids}
        triangles = [
            m
            for m in moves
            if m.kind == "triangle"
            and m.level >= L - 1
            and not (set(_orbit_edges(dg, m.orbit)) & leg_set)
        ]
        if triangles:
            return min(triangles, key=lambda m: (-m.level, m.canon))
        eid = pending[L][0]
        return Move("recouple", dg.level[eid], (dg.edge_key(eid),), edge=eid)

    def _record(self, depth, mv):
        if len(self.trace.moves) <= depth:
            self.trace.moves.append(mv)
            return True
        return False

    def _reduce(self, dg, circles, weight, depth) -> QScalar:
        p = self.p
        while True:
            if (
                self.stop_signature is not None
                and len(dg.edges) == self.stop_edge_count
            ):
                sig, order = diagram_signature(dg)
                if sig == self.stop_signature:
                    self.stopped.append((weight, dg, list(circles), order))
                    return p.zero()
            if not dg.edges:
                value = weight
                for c in circles:
                    value = value * delta(c, p)
                    self._record(depth, TraceMove("circle", (str(c),),
                                                  factors=(Factor("delta", (str(c),)),)))
                    depth += 1
                return value
            if depth > _MAX_MOVES:
                raise RuntimeError("reduction did not terminate (policy loop?)")
            mv = self._select(dg)
            if mv is None:
                raise RuntimeError("stuck diagram: no applicable move")
            if mv.kind == "bigon":
                coeff = self._apply_bigon(dg, circles, mv, depth)
                depth += 1
                if coeff is None:
                    return p.zero()
                weight = weight * coeff
                if p.is_classical and weight == 0:
                    return p.zero()
                continue
            if mv.kind == "triangle":
                coeff = self._apply_triangle(dg, mv, depth)
                depth += 1
                weight = weight * coeff
                if p.is_classical and weight == 0:
                    return p.zero()
                continue
            return self._apply_recoupling(dg, circles, mv, weight, depth)

    def _apply_bigon(self, dg, circles, mv, depth):
        orbit = mv.orbit
        e1, e2 = (dg.dart_edge[d] for d in orbit)
        dl1, dl2 = dg.leg_darts(orbit)
        l1, l2 = dg.dart_edge[dl1], dg.dart_edge[dl2]
        cx, cy, cl1, cl2 = dg.color[e1], dg.color[e2], dg.color[l1], dg.color[l2]
        if self._record(
            depth,
            TraceMove(
                "bigon",
                tuple(str(dg.name[e]) for e in (e1, e2, l1, l2)),
                factors=(
                    Factor("theta", (_sym_or_name(dg, e1), _sym_or_name(dg, e2), _sym_or_name(dg, l1))),
                    Factor("delta_inv", (_sym_or_name(dg, l1),)),
                ),
            ),
        ):
            bound = self.trace.bind(dg.sym[l1], dg.sym[l2])
            self.trace.moves[depth].bound = bound
        if cl1 != cl2:
            return None
        dv = delta(cl1, self.p)
        if dv == 0:
            return None
        coeff = theta(cx, cy, cl1, self.p) / dv
        res = dg.burst_bigon(orbit)
        if res[0] == "circle":
            circles.append(res[1])
        return coeff

    def _apply_triangle(self, dg, mv, depth):
        orbit = mv.orbit
        e1, e2, e3 = (dg.dart_edge[d] for d in orbit)
        dl1, dl2, dl3 = dg.leg_darts(orbit)
        l1, l2, l3 = (dg.dart_edge[d] for d in (dl1, dl2, dl3))
        # bubble-move roles: a = e3, b = l1, e = e1, c = l2, d = e2, f = l3
        role_edges = (e3, l1, e1, l2, e2, l3)
        ca, cb, ce, cc, cd, cf = (dg.color[e] for e in role_edges)
        self._record(
            depth,
            TraceMove(
                "triangle",
                tuple(str(dg.name[e]) for e in role_edges),
                factors=(
                    Factor("sixj", tuple(_sym_or_name(dg, e) for e in role_edges)),
                    Factor("delta_inv", (_sym_or_name(dg, l3),)),
                    Factor("theta", (_sym_or_name(dg, e3), _sym_or_name(dg, e2), _sym_or_name(dg, l3))),
                ),
            ),
        )
        coeff = bubble_move(ca, cb, cc, cd, ce, cf, self.p)
        dg.collapse_triangle(orbit)
        return coeff

    def _apply_recoupling(self, dg, circles, mv, weight, depth):
        p = self.p
        eid = mv.edge
        de0, de1 = dg.edges[eid]
        v1, v2 = dg.dart_vertex[de0], dg.dart_vertex[de1]
        _, dx, dy = dg._rotated(v1, de0)
        _, du, dw = dg._rotated(v2, de1)
        ex, ey = dg.dart_edge[dx], dg.dart_edge[dy]
        eu, ew = dg.dart_edge[du], dg.dart_edge[dw]
        ca, cb = dg.color[ex], dg.color[ey]
        cc, cd = dg.color[eu], dg.color[ew]
        ce = dg.color[eid]
        base = dg.name[eid]
        if self._record(
            depth,
            TraceMove(
                "recouple",
                tuple(str(dg.name[e]) for e in (ex, ey, eid, eu, ew)),
                index="",
            ),
        ):
            idx = self.trace.new_index(str(base))
            self.trace.moves[depth].index = idx
            self.trace.moves[depth].factors = (
                Factor("sixj", (
                    _sym_or_name(dg, ex), _sym_or_name(dg, ey), _sym_or_name(dg, eid),
                    _sym_or_name(dg, eu), _sym_or_name(dg, ew), idx,
                )),
            )
        else:
            idx = self.trace.moves[depth].index
        total = p.zero()
        f_range = sorted(set(admissible_range(ca, cd, p)) & set(admissible_range(cb, cc, p)))
        new_name = EdgeLabel("p", base.level, base.pos) if isinstance(base, EdgeLabel) else f"p<{base}>"
        for f_col in f_range:
            coeff = sixj(ca, cb, ce, cc, cd, f_col, p)
            if p.is_classical and coeff == 0:
                continue
            child = dg.clone()
            child.recouple(eid, f_col, idx, new_name)
            total = total + self._reduce(child, list(circles), weight * coeff, depth + 1)
        return total


def _sym_or_name(dg, eid):
    return dg.sym[eid] if dg.sym[eid] is not None else dg.name[eid]


# ---------------------------------------------------------------------------
# Public entry points.


def _prepare(net: HoneycombNet, coloring: dict, p: QParam):
    if net.open_ends:
        raise ValueError("evaluate requires a closed network")
    bound = p.max_color()
    if bound is not None:
        for eid, c in coloring.items():
            if c > bound:
                raise ValueError(f"color {c} exceeds level bound r-2={bound}")
    sm = smooth(net)
    arc_cols = sm.arc_coloring(coloring)
    return sm, arc_cols


def evaluate(
    net: HoneycombNet,
    coloring: dict,
    p: QParam = CLASSICAL,
    trace: EvaluationTrace | None = None,
    policy=default_policy,
) -> QScalar:
    """Exact evaluation <H_n> of a colored closed honeycomb network.

    `coloring` assigns a spin color to every unit edge; colorings that are
    inconsistent at binary vertices or non-admissible at any trivalent
    vertex evaluate to exactly zero.
    """
    if net.is_zero:
        return p.zero()
    sm, arc_cols = _prepare(net, coloring, p)
    if arc_cols is None:
        return p.zero()
    if trace is None:
        trace = EvaluationTrace(n=net.kind[1] if net.kind[0] == "H" else 0)
    dg, circles, edge_of_arc = PlanarDiagram.from_smoothed(sm, arc_cols)
    if not dg.check_admissible(p):
        trace.value = p.zero()
        return p.zero()
    legs = {}
    if net.kind[0] == "H" and net.kind[1] >= 3:
        legs = _legs_by_level(net.kind[1], sm, edge_of_arc)
    value = _Reducer(p, trace, policy, legs=legs).run(dg, circles)
    trace.value = value
    return value


def replay(trace: EvaluationTrace, net: HoneycombNet, coloring: dict, p: QParam = CLASSICAL) -> QScalar:
    """Re-run an evaluation; the deterministic policy reproduces the trace."""
    check = EvaluationTrace(n=trace.n)
    value = evaluate(net, coloring, p, trace=check)
    if [m.kind for m in check.moves] != [m.kind for m in trace.moves][: len(check.moves)]:
        raise RuntimeError("trace replay diverged from the recorded schedule")
    return value


def reduce_step(net: HoneycombNet, coloring: dict, p: QParam = CLASSICAL, trace=None):
    """One inductive level: expand H_n into weighted colored copies of H_{n-1}.

    Returns a list of (weight, unit-edge coloring of H_{n-1}) pairs; the
    weights carry all 6j/theta/Delta coefficients accumulated while reducing
    the crown, so that sum(w * <H_{n-1}, c>) = <H_n>.
    """
    kind, m = net.kind
    if kind != "H" or m < 3:
        raise ValueError("reduce_step applies to H_n with n >= 3")
    sm, arc_cols = _prepare(net, coloring, p)
    if arc_cols is None or net.is_zero:
        return []
    dg, circles, edge_of_arc = PlanarDiagram.from_smoothed(sm, arc_cols)
    if not dg.check_admissible(p):
        return []
    target = build_h(m - 1)
    t_sm = smooth(target)
    t_dg, _, t_edge_of_arc = PlanarDiagram.from_smoothed(
        t_sm, {aid: 0 for aid in list(t_sm.arcs) + [("circle", i) for i in range(len(t_sm.circles))]}
    )
    t_sig, t_order = diagram_signature(t_dg)
    arc_of_t_edge = {e: a for a, e in t_edge_of_arc.items()}
    if trace is None:
        trace = EvaluationTrace(n=m)
    legs = _legs_by_level(m, sm, edge_of_arc)
    red = _Reducer(
        p, trace, stop_signature=t_sig, stop_edge_count=len(t_dg.edges),
        legs={m - 1: legs[m - 1]},
    )
    red.run(dg, circles)
    out = []
    for weight, dgx, circles_x, order in red.stopped:
        if circles_x:
            raise RuntimeError("unexpected circles in reduced honeycomb")
        arc_colors = {}
        for pos, e in enumerate(order):
            aid = arc_of_t_edge[t_order[pos]]
            arc_colors[aid] = dgx.color[e]
        unit = {}
        for aid, arc in t_sm.arcs.items():
            for u in arc["units"]:
                unit[u] = arc_colors[aid]
        out.append((weight, unit))
    return out


# ---------------------------------------------------------------------------
# Structured level coefficients (Psi / Phi views over the schedule).


def level_factors(n: int):
    """Factor layout of the crown reduction H_n -> H_{n-1}.

    Runs the structural schedule on H_n and partitions the contributed
    factors by the recoupled/burst edges' mirror position: negative
    positions feed Psi, positive ones its iota image, and position-0
    factors (top bubble, central leg, final merges) form the symmetric
    prefactor.  Bursts pair a theta/Delta fraction with the 6j of the
    recoupling that created the bubble, the Phi factors of the bubble
    rewriting stage for n >= 4.
    """
    if n < 2:
        raise ValueError("level_factors needs n >= 2")
    net = build_h(n)
    trace = EvaluationTrace(n=n)
    reduce_step(net, net.uniform_coloring(0), CLASSICAL, trace=trace) if n >= 3 else evaluate(
        net, net.uniform_coloring(0), CLASSICAL, trace=trace
    )
    psi, mirror_psi, prefactor, phi, phi_mirror = [], [], [], [], []
    for mvx in trace.moves:
        side = _move_side(mvx)
        for f in mvx.factors:
            if mvx.kind == "recouple":
                (psi if side < 0 else mirror_psi if side > 0 else prefactor).append(f)
            elif mvx.kind == "bigon":
                (phi if side < 0 else phi_mirror if side > 0 else prefactor).append(f)
            else:
                prefactor.append(f)
    return {
        "psi": CoeffTerm(tuple(psi), tuple(i for i in trace.free_indices())),
        "iota_psi": CoeffTerm(tuple(mirror_psi)),
        "phi": CoeffTerm(tuple(phi)),
        "iota_phi": CoeffTerm(tuple(phi_mirror)),
        "prefactor": CoeffTerm(tuple(prefactor)),
        "trace": trace,
    }


def _move_side(mv: TraceMove):
    for f in mv.factors:
        for lab in f.labels:
            if isinstance(lab, EdgeLabel) and lab.pos:
                return -1 if lab.pos < 0 else 1
    return 0


def _colors_by_label(net: HoneycombNet, coloring: dict):
    sm = smooth(net)
    arc_cols = sm.arc_coloring(coloring)
    if arc_cols is None:
        return None
    out = {}
    for aid, arc in sm.arcs.items():
        if arc["label"] is not None:
            out[arc["label"]] = arc_cols[aid]
    return out


def psi_coeff(coloring: dict, indices, n: int, p: QParam = CLASSICAL) -> QScalar:
    """The Psi product of recoupling 6j symbols for the level-n reduction.

    `coloring` is a unit-edge coloring of H_n; `indices` assigns colors to
    the free summation indices (sequence in canonical order, or a mapping).
    Empty-product conventions: Psi is 1 for n = 2.
    """
    if n < 3:
        return p.one()
    layout = level_factors(n)
    env = _psi_env(build_h(n), coloring, layout, indices)
    if env is None:
        return p.zero()
    return evaluate_term(layout["psi"], env, p)


def phi_coeff(coloring: dict, n: int, p: QParam = CLASSICAL, indices=()) -> QScalar:
    """The Phi bubble-rewriting product; the identity for n < 4."""
    if n < 4:
        return p.one()
    layout = level_factors(n)
    env = _psi_env(build_h(n), coloring, layout, indices)
    if env is None:
        return p.zero()
    return evaluate_term(layout["phi"] * layout["iota_phi"], env, p)


def _psi_env(net, coloring, layout, indices):
    env = _colors_by_label(net, coloring)
    if env is None:
        return None
    trace = layout["trace"]
    free = trace.free_indices()
    if isinstance(indices, dict):
        assign = dict(indices)
    else:
        if len(indices) != len(free):
            raise ValueError(f"expected {len(free)} summation indices, got {len(indices)}")
        assign = dict(zip(free, indices))
    for idx in trace.indices:
        rep = trace._find(idx)
        if rep in assign:
            env[idx] = assign[rep]
    # indices bound to concrete colors resolve through the mirror label map
    for idx in trace.indices:
        if idx not in env:
            env[idx] = 0
    for lab in list(env):
        if isinstance(lab, EdgeLabel):
            env.setdefault(str(lab), env[lab])
    return env
