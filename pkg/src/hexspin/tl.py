"""Brute-force Temperley-Lieb oracle for closed trivalent spin-networks.

Every edge of a closed net carries a Jones-Wenzl projector; expanding the
projectors into planar pairings and counting loops (each worth d = Delta_1)
gives a convention-free evaluation used to pin and validate all closed-form
recoupling values.

The expansion runs as a frontier contraction: edges are eliminated one at a
time and partial results merge whenever they induce the same pairing on the
not-yet-eliminated strands, which keeps the live state count Catalan-bounded
instead of multiplying projector bases.  Work is metered in
(state x projector-term) units against an explicit budget; exceeding the
budget raises instead of running unbounded.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

from .backend import CLASSICAL, QParam, QScalar

__all__ = [
    "OracleBudgetExceeded",
    "ClosedNet",
    "identity_diagram",
    "cup_cap_diagram",
    "tl_compose",
    "jw_projector",
    "oracle_evaluate",
    "nominal_basis_size",
    "loop_net",
    "theta_net",
    "tet_net",
    "bubble_net",
    "chain_net",
]

DEFAULT_BUDGET = 10**6


class OracleBudgetExceeded(RuntimeError):
    """The frontier expansion exceeded the configured work budget."""


# ---------------------------------------------------------------------------
# Temperley-Lieb diagram algebra on n strands.
#
# A diagram is a perfect non-crossing matching of 2n points, 0..n-1 on the
# bottom and n..2n-1 on the top, stored as a tuple m with m[i] = partner of
# i.  An element of TL_n is a dict {diagram: coefficient}.


def identity_diagram(n: int) -> tuple:
    return tuple(list(range(n, 2 * n)) + list(range(n)))


def cup_cap_diagram(n: int, i: int) -> tuple:
    """Generator e_i: cap joining bottom i, i+1 and cup joining top i, i+1."""
    m = list(identity_diagram(n))
    m[i], m[i + 1] = i + 1, i
    m[n + i], m[n + i + 1] = n + i + 1, n + i
    return tuple(m)


def _compose_diagrams(mx: tuple, my: tuple, n: int):
    """Glue my on top of mx; returns (matching, closed_loop_count)."""

    def glue(node):
        side, i = node
        if side == 0 and i >= n:  # top of x meets bottom of y
            return (1, i - n)
        if side == 1 and i < n:
            return (0, i + n)
        return None

    def mate(node):
        side, i = node
        return (side, mx[i] if side == 0 else my[i])

    exterior = [(0, i) for i in range(n)] + [(1, n + i) for i in range(n)]
    match = {}
    interior_seen = set()
    for ext in exterior:
        if ext in match:
            continue
        cur = mate(ext)
        while True:
            g = glue(cur)
            if g is None:
                break
            interior_seen.add(cur)
            interior_seen.add(g)
            cur = mate(g)
        match[ext] = cur
        match[cur] = ext
    loops = 0
    for i in range(n):
        node = (0, n + i)
        if node in interior_seen:
            continue
        loops += 1
        cur = node
        while cur not in interior_seen:
            interior_seen.add(cur)
            g = glue(cur)
            interior_seen.add(g)
            cur = mate(g)
    # match keys: x-bottom (side 0, i < n) -> result i; y-top (side 1, i >= n) -> i
    result = [0] * (2 * n)
    for a, b in match.items():
        result[a[1]] = b[1]
    return tuple(result), loops


def tl_compose(x: dict, y: dict, n: int, p: QParam = CLASSICAL) -> dict:
    """Compose TL elements (y stacked on top of x), collecting loop factors."""
    d = p.loop_value()
    out: dict = {}
    for mx, cx in x.items():
        for my, cy in y.items():
            m, loops = _compose_diagrams(mx, my, n)
            val = cx * cy * d**loops
            out[m] = out.get(m, p.zero()) + val
    return {m: c for m, c in out.items() if c != 0}


_jw_cache: dict = {}


def jw_projector(n: int, p: QParam = CLASSICAL) -> dict:
    """Jones-Wenzl idempotent on n strands via the Wenzl recursion.

    The identity diagram always carries coefficient 1; composition with any
    cup on adjacent strands kills the element.
    """
    if n < 0:
        raise ValueError("jw_projector expects n >= 0")
    if not p.is_classical and n > p.r - 2:
        raise ValueError(f"jw_projector level violation: n={n} > r-2={p.r - 2}")
    key = (p.key, n)
    hit = _jw_cache.get(key)
    if hit is not None:
        return hit
    from .recoupling import delta  # deferred to avoid an import cycle

    if n in (0, 1):
        value = {identity_diagram(n): p.one()}
    else:
        wide = {_extend(m, n - 1): c for m, c in jw_projector(n - 1, p).items()}
        mu = delta(n - 2, p) / delta(n - 1, p)
        e_last = {cup_cap_diagram(n, n - 2): p.one()}
        pep = tl_compose(tl_compose(wide, e_last, n, p), wide, n, p)
        value = dict(wide)
        for m, c in pep.items():
            value[m] = value.get(m, p.zero()) - mu * c
        value = {m: c for m, c in value.items() if c != 0}
    _jw_cache[key] = value
    return value


def _extend(m: tuple, n: int) -> tuple:
    """Embed a TL_n diagram into TL_{n+1}: append a through strand on the right."""
    out = [0] * (2 * n + 2)
    for i in range(2 * n):
        a = i if i < n else i + 1
        b = m[i] if m[i] < n else m[i] + 1
        out[a] = b
    out[n] = 2 * n + 1
    out[2 * n + 1] = n
    return tuple(out)


# ---------------------------------------------------------------------------
# Closed nets.


@dataclass
class ClosedNet:
    """A closed planar net with binary/trivalent vertices.

    vertices: per vertex, the incident edge ends in counterclockwise order,
    each end written as (edge_id, end) with end in {0, 1}.  Every edge id
    must appear with both of its ends exactly once across all vertices.
    """

    vertices: list
    name: str = ""

    def edge_ids(self):
        ids = set()
        for v in self.vertices:
            for eid, _ in v:
                ids.add(eid)
        return sorted(ids, key=str)

    def validate(self):
        ends = set()
        for v in self.vertices:
            if len(v) not in (2, 3):
                raise ValueError("closed nets must have binary/trivalent vertices")
            for eid, end in v:
                if (eid, end) in ends:
                    raise ValueError(f"duplicate edge end {(eid, end)}")
                ends.add((eid, end))
        for eid in self.edge_ids():
            if (eid, 0) not in ends or (eid, 1) not in ends:
                raise ValueError(f"edge {eid!r} is open; the oracle needs closed nets")
        return self


def _catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)


def nominal_basis_size(net: ClosedNet, coloring: dict) -> int:
    """Product of projector basis sizes: the naive full-expansion term count."""
    out = 1
    for eid in net.edge_ids():
        out *= _catalan(coloring[eid])
    return out


def _ccw_ports(edge_end, color):
    """Ports of an edge end in counterclockwise order around its vertex.

    Across the edge ribbon the transverse coordinate i is shared by both
    ends, so seen from the two endpoints the orders are mutually reversed.
    """
    eid, end = edge_end
    if end == 0:
        return [(eid, 0, i) for i in range(color - 1, -1, -1)]
    return [(eid, 1, i) for i in range(color)]


def _vertex_routing(vertex, coloring):
    """Planar strand routing at a vertex; None when non-admissible."""
    colors = [coloring[eid] for eid, _ in vertex]
    if len(vertex) == 2:
        if colors[0] != colors[1]:
            return None
        m = colors[0]
        p0 = _ccw_ports(vertex[0], m)
        p1 = _ccw_ports(vertex[1], m)
        return [(p0[t], p1[m - 1 - t]) for t in range(m)]
    cx, cy, cz = colors
    if (cx + cy + cz) % 2:
        return None
    gxy = (cx + cy - cz) // 2
    gyz = (cy + cz - cx) // 2
    gzx = (cz + cx - cy) // 2
    if gxy < 0 or gyz < 0 or gzx < 0:
        return None
    px = _ccw_ports(vertex[0], cx)
    py = _ccw_ports(vertex[1], cy)
    pz = _ccw_ports(vertex[2], cz)
    pairs = []
    pairs += [(px[gzx + t], py[gxy - 1 - t]) for t in range(gxy)]
    pairs += [(py[gxy + t], pz[gyz - 1 - t]) for t in range(gyz)]
    pairs += [(pz[gyz + t], px[gzx - 1 - t]) for t in range(gzx)]
    return pairs


def _elimination_order(net: ClosedNet):
    """Greedy edge order keeping the number of touched vertices small."""
    incident: dict = {}
    for vi, v in enumerate(net.vertices):
        for eid, _ in v:
            incident.setdefault(eid, set()).add(vi)
    remaining = set(incident)
    touched: set = set()
    order = []
    while remaining:
        best = min(remaining, key=lambda e: (len(incident[e] - touched), str(e)))
        order.append(best)
        touched |= incident[best]
        remaining.remove(best)
    return order


def oracle_evaluate(
    net: ClosedNet,
    coloring: dict,
    p: QParam = CLASSICAL,
    budget: int = DEFAULT_BUDGET,
) -> QScalar:
    """Evaluate a closed colored net by full Jones-Wenzl expansion.

    Non-admissible colorings (parity or triangle failure at a trivalent
    vertex, mismatched colors at a binary vertex) give exactly zero.
    `budget` bounds the number of (state x term) expansion steps.
    """
    net.validate()
    d = p.loop_value()

    routings = []
    for v in net.vertices:
        r = _vertex_routing(v, coloring)
        if r is None:
            return p.zero()
        routings.append(r)

    links0: dict = {}
    for r in routings:
        for a, b in r:
            links0[a] = b
            links0[b] = a

    states = {frozenset(frozenset(it) for it in links0.items()): p.one()}
    work = 0
    for eid in _elimination_order(net):
        m = coloring[eid]
        proj = jw_projector(m, p)
        term_pairs = [(coeff, _diagram_pairs(diag, m, eid)) for diag, coeff in proj.items()]
        new_states: dict = {}
        for state, amp in states.items():
            base = {}
            for pr in state:
                a, b = tuple(pr)
                base[a] = b
                base[b] = a
            for coeff, pairs in term_pairs:
                work += 1
                if work > budget:
                    raise OracleBudgetExceeded(
                        f"oracle budget exceeded ({budget} expansion steps)"
                    )
                cur = dict(base)
                loops = 0
                for pa, pb in pairs:
                    ea = cur.pop(pa)
                    if ea == pb:
                        cur.pop(pb)
                        loops += 1
                        continue
                    eb = cur.pop(pb)
                    cur[ea] = eb
                    cur[eb] = ea
                key = frozenset(frozenset(it) for it in cur.items())
                val = amp * coeff * d**loops
                new_states[key] = new_states.get(key, p.zero()) + val
        states = {s: v for s, v in new_states.items() if v != 0}
        if not states:
            return p.zero()

    total = p.zero()
    for state, amp in states.items():
        if state:
            raise RuntimeError("internal: dangling ports after elimination")
        total += amp
    return total


def _diagram_pairs(diag: tuple, m: int, eid):
    """A TL diagram's matching expressed on this edge's net ports."""
    out = []
    for i in range(2 * m):
        j = diag[i]
        if j <= i:
            continue
        pa = (eid, 0, i) if i < m else (eid, 1, i - m)
        pb = (eid, 0, j) if j < m else (eid, 1, j - m)
        out.append((pa, pb))
    return out


# ---------------------------------------------------------------------------
# Standard diagram builders (tests, golden values, CLI).


def loop_net() -> ClosedNet:
    """A projector closed into a circle: evaluates to Delta_n."""
    return ClosedNet(vertices=[[("l", 0), ("l", 1)]], name="loop")


def theta_net() -> ClosedNet:
    """Two trivalent vertices joined by edges a, b, c."""
    return ClosedNet(
        vertices=[
            [("a", 0), ("b", 0), ("c", 0)],
            [("c", 1), ("b", 1), ("a", 1)],
        ],
        name="theta",
    )


def tet_net() -> ClosedNet:
    """Tetrahedral net matching recoupling.tet(a, b, c, d, e, f).

    Vertex triples: (a,b,c), (d,e,c), (a,e,f), (b,d,f).
    """
    return ClosedNet(
        vertices=[
            [("a", 0), ("b", 0), ("c", 0)],
            [("c", 1), ("d", 0), ("e", 0)],
            [("e", 1), ("f", 0), ("a", 1)],
            [("b", 1), ("f", 1), ("d", 1)],
        ],
        name="tet",
    )


def bubble_net() -> ClosedNet:
    """Bubble-move left-hand side closed against a dual (b, c, f) vertex.

    The open bubble diagram has a triangle of edges e (top arc), a, d
    (lower arcs) with legs b, c, f; closing the legs with one extra vertex
    makes it evaluable, and the value is the bubble-move coefficient times
    theta(b, c, f).
    """
    return ClosedNet(
        vertices=[
            [("b", 0), ("e", 0), ("a", 0)],
            [("e", 1), ("c", 0), ("d", 0)],
            [("a", 1), ("d", 1), ("f", 0)],
            [("b", 1), ("f", 1), ("c", 1)],
        ],
        name="bubble-closed",
    )


def chain_net(k: int) -> ClosedNet:
    """A loop interrupted by k bigons: the diagrammatic Schur's lemma probe.

    Edges: segments s0..s{k-1} alternating with bigon arc pairs (x_i, y_i).
    The value is prod_i theta(x_i, y_i, s) / Delta_s^{k-1} when all segment
    colors are equal, and 0 otherwise.
    """
    if k < 1:
        raise ValueError("chain_net needs k >= 1")
    vertices = []
    for i in range(k):
        s_in, s_out = f"s{i}", f"s{(i + 1) % k}"
        xi, yi = f"x{i}", f"y{i}"
        vertices.append([(s_in, 1), (xi, 0), (yi, 0)])
        vertices.append([(yi, 1), (xi, 1), (s_out, 0)])
    return ClosedNet(vertices=vertices, name=f"chain-{k}")
