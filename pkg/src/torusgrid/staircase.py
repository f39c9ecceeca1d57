"""Staircase curve of a grid diagram and its coarse invariants.

The base curve runs along grid lines: in column i it climbs
counterclockwise from the positive vertex to the negative one, in row j it
runs counterclockwise from the negative vertex to the positive one, so
that theta+phi locally increases along the traversal.  Curves for the
other three oriented move types are pullbacks of the base curve of the
reflected diagram under the corresponding reflection.  Edge spans are
measured in grid steps, always counterclockwise, so every span lies in
1..n-1.
"""

from collections import namedtuple
from math import gcd

from .diagram import (
    SYM_ID,
    SYM_REFL_BOTH,
    SYM_REFL_PHI,
    SYM_REFL_THETA,
    SYMMETRY_FOR_TYPE,
)

VEdge = namedtuple("VEdge", "col row0 span")
HEdge = namedtuple("HEdge", "row col0 span")


class StaircaseCurve:
    """Immutable edge soup of one staircase curve.

    vedges/hedges hold one edge per column/row with counterclockwise
    interval starts; vdir/hdir record whether traversal follows (+1) or
    opposes (-1) the counterclockwise direction of the phi/theta circle.
    """

    __slots__ = ("n", "vedges", "hedges", "otype", "vdir", "hdir")

    def __init__(self, n, vedges, hedges, otype="II+", vdir=1, hdir=1):
        self.n = n
        self.vedges = tuple(vedges)
        self.hedges = tuple(hedges)
        self.otype = otype
        self.vdir = vdir
        self.hdir = hdir

    def __eq__(self, other):
        if not isinstance(other, StaircaseCurve):
            return NotImplemented
        return (
            self.n == other.n
            and sorted(self.vedges) == sorted(other.vedges)
            and sorted(self.hedges) == sorted(other.hedges)
        )

    def __repr__(self):
        return (
            f"StaircaseCurve(n={self.n}, otype={self.otype!r}, "
            f"{len(self.vedges)}+{len(self.hedges)} edges)"
        )


def staircase_edges(diagram):
    """Base-curve edges of a diagram: (vertical edges, horizontal edges)."""
    n = diagram.n
    vs = [
        VEdge(i, diagram.pos[i], (diagram.neg[i] - diagram.pos[i]) % n)
        for i in range(n)
    ]
    hs = [
        HEdge(j, diagram.neginv[j], (diagram.posinv[j] - diagram.neginv[j]) % n)
        for j in range(n)
    ]
    return vs, hs


def gamma(diagram, otype="II+"):
    """The staircase curve of the given oriented type, on diagram's own grid.

    For types other than II+ the curve of the reflected diagram is pulled
    back through the reflection, so its double points and windings live at
    positions meaningful for the original diagram.
    """
    sym = SYMMETRY_FOR_TYPE[otype]
    refl = diagram.apply_symmetry(sym)
    vs, hs = staircase_edges(refl)
    n = diagram.n
    flip_theta = sym in (SYM_REFL_THETA, SYM_REFL_BOTH)
    flip_phi = sym in (SYM_REFL_PHI, SYM_REFL_BOTH)
    if flip_theta:
        vs = [VEdge(n - 1 - v.col, v.row0, v.span) for v in vs]
        hs = [HEdge(h.row, (n - 1 - h.col0 - h.span) % n, h.span) for h in hs]
    if flip_phi:
        vs = [VEdge(v.col, (n - 1 - v.row0 - v.span) % n, v.span) for v in vs]
        hs = [HEdge(n - 1 - h.row, h.col0, h.span) for h in hs]
    return StaircaseCurve(
        n,
        sorted(vs),
        sorted(hs),
        otype,
        vdir=-1 if flip_phi else 1,
        hdir=-1 if flip_theta else 1,
    )


def strictly_inside(x, start, span, n):
    """Is coordinate x strictly inside the ccw arc from start of given span?"""
    return 0 < (x - start) % n < span


def covers(x, start, span, n):
    """Is x inside the closed ccw arc from start of given span?"""
    return (x - start) % n <= span


def double_points(curve):
    """Self-crossings of a staircase curve, as sorted (column, row) points.

    A vertical edge meets a horizontal edge transversally exactly when each
    passes strictly through the other's grid line; edges never meet at
    vertices or tangentially because every vertex is an endpoint of one
    vertical and one horizontal edge only.
    """
    n = curve.n
    pts = []
    for v in curve.vedges:
        for h in curve.hedges:
            if strictly_inside(h.row, v.row0, v.span, n) and strictly_inside(
                v.col, h.col0, h.span, n
            ):
                pts.append((v.col, h.row))
    pts.sort()
    return pts


def omega(diagram, otype="II+"):
    """(k, l, m): winding in theta, winding in phi, self-crossing count."""
    g = gamma(diagram, otype)
    n = g.n
    total_h = sum(h.span for h in g.hedges)
    total_v = sum(v.span for v in g.vedges)
    assert total_h % n == 0 and total_v % n == 0
    return (total_h // n, total_v // n, len(double_points(g)))


def curve_components(diagram):
    """Connected components of the base curve, as cycles of columns."""
    return diagram.components()


def component_count(diagram):
    return len(diagram.components())


def hedge_passes_gap(h, gap, n):
    """Does this horizontal edge cross the vertical circle between columns
    gap and gap+1?"""
    return (gap - h.col0) % n < h.span


def vedge_passes_gap(v, gap, n):
    """Does this vertical edge cross the horizontal circle between rows
    gap and gap+1?"""
    return (gap - v.row0) % n < v.span


def expected_component_count(k, l, m):
    """Component count forced by homology when the curve is embedded."""
    if m != 0:
        raise ValueError("only defined for embedded curves (m = 0)")
    return gcd(k, l)
