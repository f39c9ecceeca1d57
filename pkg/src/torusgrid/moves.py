"""Elementary moves on grid diagrams.

A move replaces the vertices in one rectangle of the torus by vertices in
the complementary corners, leaving everything else fixed.  The rectangle's
closed area (for one of the four arc labelings) may contain no other
vertex.  A 2-2 corner split is an exchange, 1-3 is a stabilization, 3-1 a
destabilization.  Stabilizations and destabilizations carry one of the
four oriented types "I+", "I-", "II+", "II-".
"""

from dataclasses import dataclass

from .diagram import (
    ORIENTED_TYPES,
    SYM_REFL_BOTH,
    SYM_REFL_PHI,
    SYM_REFL_THETA,
    GridDiagram,
    reflect_type,
)
from .errors import CapExceeded, InvalidMove, InvalidStep


@dataclass(frozen=True)
class Exchange:
    """Move line `src` of the given axis into the gap between lines gap
    and gap+1 (indices of the source diagram)."""

    axis: str
    src: int
    gap: int

    kind = "exchange"


@dataclass(frozen=True)
class Stab:
    """Split the vertex at (col, row) into three, inserting one new column
    at slot col_slot and one new row at slot row_slot (a slot s means the
    new line takes index s and lines >= s shift up).  Tight moves insert
    both lines next to the split vertex; wide slots are legal as long as
    some rectangle labeling is clean."""

    otype: str
    col: int
    row: int
    col_slot: int
    row_slot: int

    kind = "stab"

    def corner(self):
        """Corner taken by the retained vertex in the new rectangle, for
        tight slots; None when the rectangle is wide."""
        ns = ("N", "S")[self.row_slot != self.row]
        ew = ("E", "W")[self.col_slot != self.col]
        if self.col_slot in (self.col, self.col + 1) and self.row_slot in (
            self.row,
            self.row + 1,
        ):
            return ns + ew
        return None


@dataclass(frozen=True)
class Destab:
    """Remove the rectangle anchored at the vertex (col, row): the anchor,
    its column partner and its row partner disappear, one vertex appears
    at the free corner, and the anchor's two lines are deleted."""

    otype: str
    col: int
    row: int

    kind = "destab"


class MoveSequence:
    """A replayable chain: an initial diagram plus an ordered move list."""

    __slots__ = ("initial", "steps")

    def __init__(self, initial, steps=()):
        self.initial = initial
        self.steps = tuple(steps)

    def __len__(self):
        return len(self.steps)

    def __eq__(self, other):
        if not isinstance(other, MoveSequence):
            return NotImplemented
        return self.initial == other.initial and self.steps == other.steps


# Corner taken by the split vertex, by (oriented type, vertex sign).
_STAB_CORNER = {
    ("II+", 1): "SE",
    ("II+", -1): "NW",
    ("II-", 1): "NW",
    ("II-", -1): "SE",
    ("I+", 1): "NE",
    ("I+", -1): "SW",
    ("I-", 1): "SW",
    ("I-", -1): "NE",
}

# Insertion slots realizing each corner, relative to the vertex (c, r).
_CORNER_SLOTS = {
    "SW": (1, 1),
    "NE": (0, 0),
    "SE": (0, 1),
    "NW": (1, 0),
}


def vertex_sign(d, col, row):
    """+1, -1, or None when the cell is empty."""
    if d.pos[col] == row:
        return 1
    if d.neg[col] == row:
        return -1
    return None


def tight_stab(d, otype, col, row):
    """The unique tight stabilization of the given oriented type at a vertex."""
    s = vertex_sign(d, col, row)
    if s is None:
        raise InvalidMove(f"no vertex at ({col}, {row})")
    dc, dr = _CORNER_SLOTS[_STAB_CORNER[otype, s]]
    return Stab(otype, col, row, col + dc, row + dr)


def _transpose(d):
    # Swap the roles of columns and rows; signs are kept.
    return GridDiagram(d.posinv, d.neginv)


def _avoids_closed_arc(x, start, span, n):
    return (x - start) % n > span


def _exchange_col_valid(d, src, gap):
    n = d.n
    a, b = d.pos[src], d.neg[src]
    arcs = ((a, (b - a) % n), (b, (a - b) % n))
    ccw = [(src + k) % n for k in range(1, (gap - src) % n + 1)]
    cw = [(src - k) % n for k in range(1, (src - gap - 1) % n + 1)]
    for interior in (ccw, cw):
        for start, span in arcs:
            if all(
                _avoids_closed_arc(d.pos[c], start, span, n)
                and _avoids_closed_arc(d.neg[c], start, span, n)
                for c in interior
            ):
                return True
    return False


def _exchange_valid(d, m):
    n = d.n
    if m.axis not in ("col", "row"):
        return False
    if not (0 <= m.src < n and 0 <= m.gap < n):
        return False
    if m.gap == m.src or m.gap == (m.src - 1) % n:
        return False
    if m.axis == "col":
        return _exchange_col_valid(d, m.src, m.gap)
    return _exchange_col_valid(_transpose(d), m.src, m.gap)


def _apply_exchange_cols(d, src, gap):
    order = [c for c in range(d.n) if c != src]
    order.insert(order.index(gap) + 1, src)
    return GridDiagram([d.pos[c] for c in order], [d.neg[c] for c in order])


def _apply_exchange(d, m):
    if not _exchange_valid(d, m):
        raise InvalidMove(f"exchange {m} does not satisfy the rectangle conditions")
    if m.axis == "col":
        return _apply_exchange_cols(d, src=m.src, gap=m.gap)
    return _transpose(_apply_exchange_cols(_transpose(d), src=m.src, gap=m.gap))


def _rectangle_clean(d, t1, t2, f1, f2):
    """No vertex of d inside the closed rectangle (ccw arcs t1->t2, f1->f2)
    other than at its four corners."""
    n = d.n
    tspan = (t2 - t1) % n
    fspan = (f2 - f1) % n
    corners = {(t1, f1), (t1, f2), (t2, f1), (t2, f2)}
    for c in range(n):
        if (c - t1) % n > tspan:
            continue
        for r in (d.pos[c], d.neg[c]):
            if (r - f1) % n <= fspan and (c, r) not in corners:
                return False
    return True


def _classify_rectangle(d, cx, cs, rx, rs, s):
    """Oriented types achievable for a (de)stabilization rectangle in d.

    (cx, rx) is the corner of the retained vertex with sign s (the vertex
    itself is absent from d on the stabilized side); cs, rs are the other
    column and row of the rectangle.  One type per clean arc labeling.
    """
    types = set()
    for t1, t2 in ((cx, cs), (cs, cx)):
        for f1, f2 in ((rx, rs), (rs, rx)):
            if not _rectangle_clean(d, t1, t2, f1, f2):
                continue
            type_ii = (cx, rx) in ((t1, f2), (t2, f1))
            phi0 = f2 if rx == f1 else f1
            fwd = vertex_sign(d, t2, phi0) == 1
            name = "II" if type_ii else "I"
            types.add(name + ("+" if fwd else "-"))
    return types


def _stab_shape(d, m):
    n = d.n
    if vertex_sign(d, m.col, m.row) is None:
        raise InvalidMove(f"no vertex at ({m.col}, {m.row})")
    if not (0 <= m.col_slot <= n and 0 <= m.row_slot <= n):
        raise InvalidMove("insertion slot out of range")
    cx = m.col + (1 if m.col_slot <= m.col else 0)
    rx = m.row + (1 if m.row_slot <= m.row else 0)
    if m.col_slot == cx or m.row_slot == rx:
        raise InvalidMove("degenerate rectangle")
    return cx, rx


def _apply_stab(d, m):
    n = d.n
    cx, rx = _stab_shape(d, m)
    s = vertex_sign(d, m.col, m.row)
    cs, rs = m.col_slot, m.row_slot
    pos = [None] * (n + 1)
    neg = [None] * (n + 1)
    for c in range(n):
        nc = c + (1 if c >= cs else 0)
        for r, store in ((d.pos[c], pos), (d.neg[c], neg)):
            store[nc] = r + (1 if r >= rs else 0)
    # split the vertex: the two rectangle corners sharing a line with it
    # keep its sign, the opposite corner takes the other sign
    same = pos if s == 1 else neg
    other = neg if s == 1 else pos
    assert same[cx] == rx
    same[cx] = rs
    same[cs] = rx
    other[cs] = rs
    out = GridDiagram(pos, neg)
    types = _classify_rectangle(out, cx, cs, rx, rs, s)
    if m.otype not in types:
        raise InvalidMove(
            f"stab at ({m.col},{m.row}) realizes {sorted(types)}, not {m.otype}"
        )
    return out


def _destab_data(d, m):
    n = d.n
    sx = vertex_sign(d, m.col, m.row)
    if sx is None:
        raise InvalidMove(f"no vertex at ({m.col}, {m.row})")
    if sx == 1:
        pr = d.neg[m.col]
        qc = d.neginv[m.row]
    else:
        pr = d.pos[m.col]
        qc = d.posinv[m.row]
    if vertex_sign(d, qc, pr) is not None:
        raise InvalidMove("free corner of the rectangle is occupied")
    types = _classify_rectangle(d, qc, m.col, pr, m.row, -sx)
    return sx, qc, pr, types


def _apply_destab(d, m):
    n = d.n
    sx, qc, pr, types = _destab_data(d, m)
    if m.otype not in types:
        raise InvalidMove(
            f"destab at ({m.col},{m.row}) realizes {sorted(types)}, not {m.otype}"
        )
    pos = [None] * (n - 1)
    neg = [None] * (n - 1)
    for c in range(n):
        if c == m.col:
            continue
        nc = c - (1 if c > m.col else 0)
        for r, store in ((d.pos[c], pos), (d.neg[c], neg)):
            if c == qc and r == m.row:
                r = pr  # the row partner moves to the free corner
            store[nc] = r - (1 if r > m.row else 0)
    return GridDiagram(pos, neg)


def apply_move(d, m):
    """Apply one move, checking the rectangle conditions; raises InvalidMove."""
    if isinstance(m, Exchange):
        return _apply_exchange(d, m)
    if isinstance(m, Stab):
        return _apply_stab(d, m)
    if isinstance(m, Destab):
        return _apply_destab(d, m)
    raise InvalidMove(f"unknown move {m!r}")


def destab_types(d, col, row):
    """Oriented types achievable by destabilizing at the given anchor,
    empty if the rectangle is dirty or the free corner is occupied."""
    try:
        m = Destab("II+", col, row)
        return _destab_data(d, m)[3]
    except InvalidMove:
        return set()


# ---------------------------------------------------------------------------
# enumeration

ALL_KINDS = ("exchange",) + tuple(f"stab:{t}" for t in ORIENTED_TYPES) + tuple(
    f"destab:{t}" for t in ORIENTED_TYPES
)


def _split_kinds(allowed):
    if allowed is None:
        allowed = ALL_KINDS
    want_ex = False
    stab_types_wanted = []
    destab_types_wanted = []
    for kind in allowed:
        if kind == "exchange":
            want_ex = True
        elif kind.startswith("stab:") and kind[5:] in ORIENTED_TYPES:
            stab_types_wanted.append(kind[5:])
        elif kind.startswith("destab:") and kind[7:] in ORIENTED_TYPES:
            destab_types_wanted.append(kind[7:])
        else:
            raise ValueError(f"unknown move kind {kind!r}")
    order = {t: i for i, t in enumerate(ORIENTED_TYPES)}
    stab_types_wanted.sort(key=order.get)
    destab_types_wanted.sort(key=order.get)
    return want_ex, stab_types_wanted, destab_types_wanted


def enumerate_moves(d, allowed=None):
    """Every valid exchange, tight stabilization, and destabilization of the
    requested kinds, in a fixed deterministic order."""
    want_ex, stabs, destabs = _split_kinds(allowed)
    out = []
    n = d.n
    if want_ex:
        for axis in ("col", "row"):
            for src in range(n):
                for gap in range(n):
                    m = Exchange(axis, src, gap)
                    if gap not in (src, (src - 1) % n) and _exchange_valid(d, m):
                        out.append(m)
    if stabs:
        for col in range(n):
            for row in sorted((d.pos[col], d.neg[col])):
                for otype in stabs:
                    out.append(tight_stab(d, otype, col, row))
    if destabs:
        for col in range(n):
            for row in sorted((d.pos[col], d.neg[col])):
                achievable = destab_types(d, col, row)
                for otype in destabs:
                    if otype in achievable:
                        out.append(Destab(otype, col, row))
    return out


def inverse_move(d, m):
    """A move undoing m on apply_move(d, m).

    Stabilizations, destabilizations, and most exchanges round trip
    literally.  An exchange whose undo would have to re-insert a line at
    index 0 has no record with the original labels (insertion is always
    after some line), so the returned exchange replays to a cyclic
    rotation of d instead; callers that need literal chains re-anchor
    with conjugate_chain."""
    if isinstance(m, Stab):
        return Destab(m.otype, m.col_slot, m.row_slot)
    if isinstance(m, Destab):
        sx, qc, pr, types = _destab_data(d, m)
        if m.otype not in types:
            raise InvalidMove("invalid destab has no inverse")
        wc = qc - (1 if qc > m.col else 0)
        wr = pr - (1 if pr > m.row else 0)
        return Stab(m.otype, wc, wr, m.col, m.row)
    if isinstance(m, Exchange):
        if not _exchange_valid(d, m):
            raise InvalidMove("invalid exchange has no inverse")
        e = apply_move(d, m)
        n = d.n
        order = [c for c in range(n) if c != m.src]
        order.insert(order.index(m.gap) + 1, m.src)
        cand = Exchange(m.axis, order.index(m.src), order.index((m.src - 1) % n))
        try:
            if apply_move(e, cand) == d:
                return cand
        except InvalidMove:
            pass
        fallback = None
        for src in range(n):
            for gap in range(n):
                if gap in (src, (src - 1) % n):
                    continue
                c = Exchange(m.axis, src, gap)
                try:
                    r = apply_move(e, c)
                except InvalidMove:
                    continue
                if r == d:
                    return c
                if fallback is None and find_rotation(r, d) is not None:
                    fallback = c
        if fallback is not None:
            return fallback
        raise InvalidMove("exchange undo found no record")
    raise InvalidMove(f"unknown move {m!r}")


def classify_pair(d1, d2):
    """The elementary move carrying d1 to d2 up to grid-line relabeling
    (cyclic rotations), or None."""
    if d1.canonical_code() == d2.canonical_code():
        return None
    code2 = d2.canonical_code()
    dn = d2.n - d1.n
    if dn == 0:
        for m in enumerate_moves(d1, ("exchange",)):
            if apply_move(d1, m).canonical_code() == code2:
                return m
    elif dn == 1:
        for m in enumerate_moves(
            d1, tuple(f"stab:{t}" for t in ORIENTED_TYPES)
        ):
            if apply_move(d1, m).canonical_code() == code2:
                return m
        # wide stabilizations: find them as destabilizations of d2
        code1 = d1.canonical_code()
        for back in enumerate_moves(
            d2, tuple(f"destab:{t}" for t in ORIENTED_TYPES)
        ):
            shrunk = apply_move(d2, back)
            if shrunk.canonical_code() != code1:
                continue
            inv = inverse_move(d2, back)
            for dt, dp in shrunk.canonical_rotations():
                for at, ap in d1.canonical_rotations():
                    a = (at - dt) % d1.n
                    b = (ap - dp) % d1.n
                    if shrunk.rotate(a, b) != d1:
                        continue
                    cand = rotate_move(inv, a, b, d1.n)
                    try:
                        if apply_move(d1, cand).canonical_code() == code2:
                            return cand
                    except InvalidMove:
                        pass
    elif dn == -1:
        for m in enumerate_moves(
            d1, tuple(f"destab:{t}" for t in ORIENTED_TYPES)
        ):
            if apply_move(d1, m).canonical_code() == code2:
                return m
    return None


def replay(seq):
    """Replay a move sequence; fails atomically on the first bad step."""
    d = seq.initial
    for i, m in enumerate(seq.steps):
        try:
            d = apply_move(d, m)
        except (InvalidMove, ValueError) as exc:
            raise InvalidStep(i, str(exc)) from None
    return d


def exchange_class(d, cap=10**6):
    """Canonical codes of every diagram reachable by exchange moves alone."""
    return {rep.canonical_code() for rep in exchange_class_members(d, cap)}


def exchange_class_members(d, cap=10**6):
    """One literal representative per canonical code in the exchange class,
    in BFS discovery order (the input diagram first)."""
    seen = {d.canonical_code()}
    queue = [d]
    out = [d]
    while queue:
        cur = queue.pop(0)
        for m in enumerate_moves(cur, ("exchange",)):
            nxt = apply_move(cur, m)
            code = nxt.canonical_code()
            if code not in seen:
                if len(seen) >= cap:
                    raise CapExceeded(f"exchange class larger than {cap}")
                seen.add(code)
                queue.append(nxt)
                out.append(nxt)
    return out


def rotate_move(m, a, b, n):
    """The move record in coordinates rotated by (a, b) columns/rows.

    apply_move(d.rotate(a,b), rotate_move(m,a,b,d.n)) equals a rotation of
    apply_move(d, m); the exact offset of that rotation depends on the
    renumbering conventions and is recovered by search where needed.
    """
    if isinstance(m, Exchange):
        shift = a if m.axis == "col" else b
        return Exchange(m.axis, (m.src + shift) % n, (m.gap + shift) % n)
    if isinstance(m, Stab):
        return Stab(
            m.otype,
            (m.col + a) % n,
            (m.row + b) % n,
            (m.col_slot - 1 + a) % n + 1,
            (m.row_slot - 1 + b) % n + 1,
        )
    if isinstance(m, Destab):
        return Destab(m.otype, (m.col + a) % n, (m.row + b) % n)
    raise InvalidMove(f"unknown move {m!r}")


_REFL_TYPE_FLIP = {
    SYM_REFL_THETA: ("col",),
    SYM_REFL_PHI: ("row",),
    SYM_REFL_BOTH: ("col", "row"),
}


def reflect_move(m, sym, n):
    """The move record acting on the reflected diagram; oriented types
    conjugate by the type table."""
    flip = _REFL_TYPE_FLIP[sym]
    if isinstance(m, Exchange):
        if m.axis in flip:
            return Exchange(m.axis, (n - 1 - m.src) % n, (n - 2 - m.gap) % n)
        return m
    col, row = m.col, m.row
    if "col" in flip:
        col = n - 1 - col
    if "row" in flip:
        row = n - 1 - row
    if isinstance(m, Destab):
        return Destab(reflect_type(sym, m.otype), col, row)
    cs, rs = m.col_slot, m.row_slot
    if "col" in flip:
        cs = n - m.col_slot
    if "row" in flip:
        rs = n - m.row_slot
    return Stab(reflect_type(sym, m.otype), col, row, cs, rs)


def decompose_move(d, m):
    """Split a wide move into pieces whose swept annuli each pass at most
    one grid line: tight moves return themselves, wide exchanges become
    runs of adjacent transpositions, wide (de)stabilizations become a
    tight (de)stabilization plus exchanges.

    The pieces replay to apply_move(d, m) exactly, except for
    (de)stabilizations whose insertion slot wraps past index 0: there the
    replay lands on a rotation of it (same canonical code), because
    exchange renumbering keeps line 0 in place while a slot-0 insertion
    shifts every index."""
    target = apply_move(d, m)
    if isinstance(m, Exchange):
        pieces = _decompose_exchange(d, m, target)
    elif isinstance(m, Stab):
        pieces = _decompose_stab(d, m, target)
    else:
        inv = inverse_move(d, m)
        back = decompose_move(target, inv)
        pieces = _invert_chain(target, back)
        chain_start = replay(MoveSequence(target, back))
        if chain_start != d:
            pieces = conjugate_chain(chain_start, pieces, d)
    check = d
    for piece in pieces:
        check = apply_move(check, piece)
    if check != target and check.canonical_code() != target.canonical_code():
        raise InvalidMove("decomposition failed to replay")
    return pieces


def _invert_chain(start, pieces):
    """Inverses of a replayable chain, reversed, replaying from its end.

    Replays from the chain's final diagram back to start, or to a cyclic
    rotation of it when some undo record cannot carry the original labels
    (see inverse_move)."""
    diagrams = [start]
    for piece in pieces:
        diagrams.append(apply_move(diagrams[-1], piece))
    out = []
    cur = diagrams[-1]
    for i in range(len(pieces) - 1, -1, -1):
        inv = inverse_move(diagrams[i], pieces[i])
        if cur != diagrams[i + 1]:
            offs = find_rotation(diagrams[i + 1], cur)
            if offs is None:
                raise InvalidMove("chain inversion lost the rotation")
            inv = rotate_move(inv, offs[0], offs[1], cur.n)
        cur = apply_move(cur, inv)
        out.append(inv)
    return out


def find_rotation(d_from, d_to):
    """(a, b) with d_from.rotate(a, b) == d_to, or None."""
    if d_from.n != d_to.n:
        return None
    n = d_from.n
    for a in range(n):
        b = (d_to.pos[a] - d_from.pos[0]) % n
        if all(
            (d_from.pos[i] + b) % n == d_to.pos[(i + a) % n]
            and (d_from.neg[i] + b) % n == d_to.neg[(i + a) % n]
            for i in range(n)
        ):
            return (a, b)
    return None


def conjugate_chain(start_from, chain, start_to):
    """Re-express a chain valid from start_from as records valid from the
    rotated diagram start_to; each step's rotation offset is re-derived, so
    the conjugated replay tracks the original one rotation-for-rotation."""
    offs = find_rotation(start_from, start_to)
    if offs is None:
        raise InvalidMove("diagrams are not rotations of each other")
    a, b = offs
    cur_from, cur_to = start_from, start_to
    out = []
    for m in chain:
        mm = rotate_move(m, a, b, cur_from.n)
        cur_from = apply_move(cur_from, m)
        cur_to = apply_move(cur_to, mm)
        offs = find_rotation(cur_from, cur_to)
        if offs is None:
            raise InvalidMove("conjugated step lost the rotation")
        a, b = offs
        out.append(mm)
    return out


def _decompose_exchange(d, m, target):
    n = d.n
    base = d if m.axis == "col" else _transpose(d)
    a, b = base.pos[m.src], base.neg[m.src]
    arcs = ((a, (b - a) % n), (b, (a - b) % n))
    ccw_len = (m.gap - m.src) % n
    ccw = [(m.src + k) % n for k in range(1, ccw_len + 1)]
    ccw_ok = any(
        all(
            _avoids_closed_arc(base.pos[c], start, span, n)
            and _avoids_closed_arc(base.neg[c], start, span, n)
            for c in ccw
        )
        for start, span in arcs
    )
    steps = ccw_len if ccw_ok else (m.src - m.gap - 1) % n
    if steps <= 1:
        return [m]
    pieces = []
    cur = d
    for _ in range(steps):
        # current index of the moving line, then hop one neighbor over
        src = _locate_line(d, cur, m)
        if ccw_ok:
            piece = Exchange(m.axis, src, (src + 1) % n)
        else:
            piece = Exchange(m.axis, src, (src - 2) % n)
        pieces.append(piece)
        cur = apply_move(cur, piece)
    return pieces


def _locate_line(d0, cur, m):
    # the moving line is identified by its invariant cross-axis data
    if m.axis == "col":
        key = (d0.pos[m.src], d0.neg[m.src])
        for c in range(cur.n):
            if (cur.pos[c], cur.neg[c]) == key:
                return c
    else:
        key = (d0.posinv[m.src], d0.neginv[m.src])
        for r in range(cur.n):
            if (cur.posinv[r], cur.neginv[r]) == key:
                return r
    raise InvalidMove("lost track of the moving line")


def _decompose_stab(d, m, target):
    cx = m.col + (1 if m.col_slot <= m.col else 0)
    rx = m.row + (1 if m.row_slot <= m.row else 0)
    n1 = d.n + 1
    tight_c = (m.col_slot - cx) % n1 in (1, n1 - 1)
    tight_r = (m.row_slot - rx) % n1 in (1, n1 - 1)
    if tight_c and tight_r:
        return [m]
    fallback = None
    for first in (
        Stab(m.otype, m.col, m.row, m.col_slot, m.row + 1),
        Stab(m.otype, m.col, m.row, m.col_slot, m.row),
        Stab(m.otype, m.col, m.row, m.col + 1, m.row_slot),
        Stab(m.otype, m.col, m.row, m.col, m.row_slot),
    ):
        if first == m:
            continue
        try:
            mid = apply_move(d, first)
        except InvalidMove:
            continue
        for axis in ("row", "col"):
            for src in range(mid.n):
                for gap in range(mid.n):
                    if gap in (src, (src - 1) % mid.n):
                        continue
                    ex = Exchange(axis, src, gap)
                    try:
                        got = apply_move(mid, ex)
                    except InvalidMove:
                        continue
                    if got == target:
                        return _stab_pieces(d, first, mid, ex, target)
                    if (
                        fallback is None
                        and got.canonical_code() == target.canonical_code()
                    ):
                        fallback = (first, mid, ex)
    if fallback is not None:
        first, mid, ex = fallback
        return _stab_pieces(d, first, mid, ex, target)
    raise InvalidMove("wide stabilization does not split")


def _stab_pieces(d, first, mid, ex, target):
    head = [first] if _stab_is_tight(d, first) else decompose_move(d, first)
    tail = _decompose_exchange(mid, ex, target)
    mid2 = d
    for p in head:
        mid2 = apply_move(mid2, p)
    if mid2 != mid:
        tail = conjugate_chain(mid, tail, mid2)
    return head + tail


def _stab_is_tight(d, m):
    cx = m.col + (1 if m.col_slot <= m.col else 0)
    rx = m.row + (1 if m.row_slot <= m.row else 0)
    n1 = d.n + 1
    return (m.col_slot - cx) % n1 in (1, n1 - 1) and (m.row_slot - rx) % n1 in (
        1,
        n1 - 1,
    )


def move_to_json_obj(m):
    if isinstance(m, Exchange):
        return {"kind": "exchange", "axis": m.axis, "src": m.src, "gap": m.gap}
    if isinstance(m, Stab):
        return {
            "kind": "stab",
            "type": m.otype,
            "col": m.col,
            "row": m.row,
            "col_slot": m.col_slot,
            "row_slot": m.row_slot,
        }
    if isinstance(m, Destab):
        return {"kind": "destab", "type": m.otype, "col": m.col, "row": m.row}
    raise ValueError(f"unknown move {m!r}")


def move_from_json_obj(obj):
    kind = obj.get("kind")
    if kind == "exchange":
        return Exchange(obj["axis"], int(obj["src"]), int(obj["gap"]))
    if kind == "stab":
        return Stab(
            obj["type"],
            int(obj["col"]),
            int(obj["row"]),
            int(obj["col_slot"]),
            int(obj["row_slot"]),
        )
    if kind == "destab":
        return Destab(obj["type"], int(obj["col"]), int(obj["row"]))
    raise ValueError(f"unknown move kind {kind!r}")


def sequence_to_json_obj(seq):
    return {
        "initial": seq.initial.to_json_obj(),
        "steps": [move_to_json_obj(m) for m in seq.steps],
    }


def sequence_from_json_obj(obj):
    from .diagram import diagram_from_json_obj

    return MoveSequence(
        diagram_from_json_obj(obj["initial"]),
        [move_from_json_obj(s) for s in obj["steps"]],
    )
