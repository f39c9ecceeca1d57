"""Grid diagrams of links on the torus.

A diagram of size n has n vertical and n horizontal grid lines on the
torus: column i sits at angle theta = 2*pi*i/n, row j at phi = 2*pi*j/n,
both angles growing counterclockwise.  Every column and every row carries
exactly one positive and one negative vertex, and no two vertices share a
cell.  Two diagrams are combinatorially equivalent when independent cyclic
rotations of the columns and of the rows carry one onto the other.
"""

import json
from collections import namedtuple

from .errors import (
    CoincidentVertices,
    GridSyntaxError,
    NotBijection,
    SizeTooSmall,
)

Vertex = namedtuple("Vertex", "col row sign")

ORIENTED_TYPES = ("I+", "I-", "II+", "II-")

SYM_ID = "id"
SYM_REFL_THETA = "refl_theta"
SYM_REFL_PHI = "refl_phi"
SYM_REFL_BOTH = "refl_both"
SYMMETRIES = (SYM_ID, SYM_REFL_THETA, SYM_REFL_PHI, SYM_REFL_BOTH)

# The reflection that swaps moves of the given oriented type with moves of
# type II+ (each entry is an involution on diagrams, so it works both ways).
SYMMETRY_FOR_TYPE = {
    "II+": SYM_ID,
    "I+": SYM_REFL_PHI,
    "I-": SYM_REFL_THETA,
    "II-": SYM_REFL_BOTH,
}

# How each reflection permutes the four oriented move types.
_TYPE_MAP = {
    SYM_ID: {"I+": "I+", "I-": "I-", "II+": "II+", "II-": "II-"},
    SYM_REFL_THETA: {"II+": "I-", "I-": "II+", "II-": "I+", "I+": "II-"},
    SYM_REFL_PHI: {"II+": "I+", "I+": "II+", "II-": "I-", "I-": "II-"},
    SYM_REFL_BOTH: {"II+": "II-", "II-": "II+", "I+": "I-", "I-": "I+"},
}


def reflect_type(sym, otype):
    """Oriented move type after reflecting the ambient torus by sym."""
    return _TYPE_MAP[sym][otype]


class GridDiagram:
    """Immutable grid diagram: pos[i] / neg[i] give the rows of column i's
    positive and negative vertex."""

    __slots__ = ("n", "pos", "neg", "posinv", "neginv", "_canon")

    def __init__(self, pos, neg):
        pos = tuple(pos)
        neg = tuple(neg)
        n = len(pos)
        if len(neg) != n:
            raise NotBijection("pos and neg have different lengths")
        if n < 2:
            raise SizeTooSmall(f"diagram needs at least 2 columns, got {n}")
        for name, seq in (("pos", pos), ("neg", neg)):
            seen = [False] * n
            for v in seq:
                if not isinstance(v, int) or not 0 <= v < n:
                    raise NotBijection(f"{name} entry {v!r} out of range 0..{n - 1}")
                if seen[v]:
                    raise NotBijection(f"{name} hits row {v} twice")
                seen[v] = True
        for i in range(n):
            if pos[i] == neg[i]:
                raise CoincidentVertices(
                    f"column {i} has both vertices in row {pos[i]}"
                )
        self.n = n
        self.pos = pos
        self.neg = neg
        posinv = [0] * n
        neginv = [0] * n
        for i in range(n):
            posinv[pos[i]] = i
            neginv[neg[i]] = i
        self.posinv = tuple(posinv)
        self.neginv = tuple(neginv)
        self._canon = None

    def __eq__(self, other):
        if not isinstance(other, GridDiagram):
            return NotImplemented
        return self.pos == other.pos and self.neg == other.neg

    def __hash__(self):
        return hash((self.pos, self.neg))

    def __repr__(self):
        return f"GridDiagram(pos={list(self.pos)}, neg={list(self.neg)})"

    def rotate(self, dtheta=0, dphi=0):
        """Shift every column by dtheta and every row by dphi, cyclically."""
        n = self.n
        dtheta %= n
        dphi %= n
        pos = [0] * n
        neg = [0] * n
        for i in range(n):
            pos[(i + dtheta) % n] = (self.pos[i] + dphi) % n
            neg[(i + dtheta) % n] = (self.neg[i] + dphi) % n
        return GridDiagram(pos, neg)

    def apply_symmetry(self, sym):
        """Reflect vertex positions; vertex signs are kept."""
        n = self.n
        if sym == SYM_ID:
            return self
        if sym == SYM_REFL_THETA:
            pairs = [(n - 1 - i, self.pos[i], self.neg[i]) for i in range(n)]
        elif sym == SYM_REFL_PHI:
            pairs = [(i, n - 1 - self.pos[i], n - 1 - self.neg[i]) for i in range(n)]
        elif sym == SYM_REFL_BOTH:
            pairs = [
                (n - 1 - i, n - 1 - self.pos[i], n - 1 - self.neg[i])
                for i in range(n)
            ]
        else:
            raise ValueError(f"unknown symmetry {sym!r}")
        pos = [0] * n
        neg = [0] * n
        for i, p, q in pairs:
            pos[i] = p
            neg[i] = q
        return GridDiagram(pos, neg)

    def components(self):
        """Cycles of columns traversed by the underlying curve.

        Leaving column i upward from its positive vertex, the curve enters
        the negative vertex (i, neg[i]), runs along row neg[i], and climbs
        next from column posinv[neg[i]].
        """
        n = self.n
        seen = [False] * n
        comps = []
        for start in range(n):
            if seen[start]:
                continue
            cyc = []
            i = start
            while not seen[i]:
                seen[i] = True
                cyc.append(i)
                i = self.posinv[self.neg[i]]
            comps.append(tuple(cyc))
        return comps

    def _entry_width(self):
        if self.n <= 0xFF:
            return 1
        if self.n <= 0xFFFF:
            return 2
        raise SizeTooSmall(f"diagram too large to serialize: n={self.n}")

    def to_bytes(self):
        """Fixed serialization: 4-byte big-endian n, then pos/neg interleaved
        column by column, each entry 1 byte (2 bytes when n > 255)."""
        width = self._entry_width()
        out = bytearray(self.n.to_bytes(4, "big"))
        for i in range(self.n):
            out += self.pos[i].to_bytes(width, "big")
            out += self.neg[i].to_bytes(width, "big")
        return bytes(out)

    def _rotation_bytes(self, dtheta, dphi, width):
        n = self.n
        out = bytearray(n.to_bytes(4, "big"))
        for i in range(n):
            src = (i - dtheta) % n
            out += ((self.pos[src] + dphi) % n).to_bytes(width, "big")
            out += ((self.neg[src] + dphi) % n).to_bytes(width, "big")
        return bytes(out)

    def canonical_code(self):
        """Lexicographically smallest serialization over all n*n rotations."""
        if self._canon is None:
            width = self._entry_width()
            self._canon = min(
                self._rotation_bytes(dt, dp, width)
                for dt in range(self.n)
                for dp in range(self.n)
            )
        return self._canon

    def canonical_rotations(self):
        """All (dtheta, dphi) whose rotation serializes to the canonical code."""
        width = self._entry_width()
        code = self.canonical_code()
        return [
            (dt, dp)
            for dt in range(self.n)
            for dp in range(self.n)
            if self._rotation_bytes(dt, dp, width) == code
        ]

    def equivalent_to(self, other):
        return self.canonical_code() == other.canonical_code()

    def to_text(self):
        """Grid text, top row (row n-1) first; x positive, o negative."""
        lines = []
        for j in range(self.n - 1, -1, -1):
            row = []
            for i in range(self.n):
                if self.pos[i] == j:
                    row.append("x")
                elif self.neg[i] == j:
                    row.append("o")
                else:
                    row.append(".")
            lines.append(" ".join(row))
        return "\n".join(lines)

    def to_json_obj(self):
        return {"n": self.n, "pos": list(self.pos), "neg": list(self.neg)}

    def to_json(self):
        return json.dumps(self.to_json_obj(), sort_keys=True)


def validate(n, pos, neg):
    """Check raw (n, pos, neg) data and return the immutable diagram."""
    if len(pos) != n or len(neg) != n:
        raise NotBijection(f"expected {n} entries, got {len(pos)}/{len(neg)}")
    return GridDiagram(pos, neg)


def components(d):
    """Partition of the vertices into link components.

    Alternately following vertical edges (shared column) and horizontal
    edges (shared row) groups the two vertices of every column in the
    component's cycle.
    """
    out = []
    for cyc in d.components():
        verts = []
        for c in cyc:
            verts.append(Vertex(c, d.pos[c], 1))
            verts.append(Vertex(c, d.neg[c], -1))
        out.append(tuple(verts))
    return out


def parse_grid_text(text):
    """Parse grid text: one line per row, top row first, cells x/o/.
    (whitespace between cells is ignored)."""
    rows = []
    for line in text.splitlines():
        cells = [ch for ch in line if not ch.isspace()]
        if not cells:
            continue
        for ch in cells:
            if ch not in "xo.":
                raise GridSyntaxError(f"unexpected character {ch!r}")
        rows.append(cells)
    n = len(rows)
    if n == 0:
        raise GridSyntaxError("empty diagram text")
    for k, cells in enumerate(rows):
        if len(cells) != n:
            raise GridSyntaxError(
                f"line {k + 1} has {len(cells)} cells, expected {n}"
            )
    pos = [None] * n
    neg = [None] * n
    for k, cells in enumerate(rows):
        j = n - 1 - k
        for i, ch in enumerate(cells):
            if ch == ".":
                continue
            store = pos if ch == "x" else neg
            if store[i] is not None:
                raise NotBijection(f"column {i} has two {ch!r} vertices")
            store[i] = j
    for i in range(n):
        if pos[i] is None:
            raise NotBijection(f"column {i} has no positive vertex")
        if neg[i] is None:
            raise NotBijection(f"column {i} has no negative vertex")
    return GridDiagram(pos, neg)


def diagram_from_json_obj(obj):
    if not isinstance(obj, dict):
        raise GridSyntaxError("diagram JSON must be an object")
    try:
        pos = obj["pos"]
        neg = obj["neg"]
    except KeyError as missing:
        raise GridSyntaxError(f"diagram JSON lacks key {missing}") from None
    if not isinstance(pos, list) or not isinstance(neg, list):
        raise GridSyntaxError("pos and neg must be arrays")
    if "n" in obj and obj["n"] != len(pos):
        raise GridSyntaxError("declared n does not match pos length")
    return GridDiagram(pos, neg)


def load_diagram(text):
    """Accept either grid text or the JSON object form."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise GridSyntaxError(f"bad JSON: {exc}") from None
        return diagram_from_json_obj(obj)
    return parse_grid_text(text)


def parse_diagram(text):
    """Alias of load_diagram: parse either supported text format."""
    return load_diagram(text)


def serialize(d):
    """JSON text form; parse_diagram(serialize(d)) == d."""
    return d.to_json()
