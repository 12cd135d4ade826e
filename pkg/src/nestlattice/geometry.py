"""Strut geometry of nested X-cross lattice unit cells.

A design is a stack of concentric cubes (nesting orders). Order ``i`` has
side ``L_i`` obtained from the ring-spacing recursion, carries an X-cross
on each of its three central planes and may be rotated by an angle about a
principal axis. The base structure is made cubic-symmetric by folding it
four times about Y, then X, then Z, and finally trimmed to the cell box.

The cell occupies ``[-L0/2, L0/2]**3`` and all rotations act about its
center (the origin).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidSpec, NonPositiveLength

AXES = ("X", "Y", "Z")
DEDUP_TOL = 1e-6

DEFAULT_CELL_SIZE = 8.75
DEFAULT_SPACING = 1.81
DEFAULT_DIAMETER = 0.8
CATALOG_ANGLES = (0, 15, 30, 45)


@dataclass(frozen=True)
class NestingOrderSpec:
    index: int
    orientation_deg: float = 0.0
    diameter_mm: float = DEFAULT_DIAMETER

    def __post_init__(self):
        if self.index < 0:
            raise InvalidSpec(f"nesting index must be >= 0, got {self.index}")
        if not self.diameter_mm > 0:
            raise InvalidSpec(f"strut diameter must be > 0, got {self.diameter_mm}")
        if self.index == 0 and self.orientation_deg != 0:
            raise InvalidSpec("the outermost nesting order must keep orientation 0")


@dataclass(frozen=True)
class NestedLatticeSpec:
    """Parametric description of one nested X-cross design.

    Parameters
    ----------
    cell_size_mm : float
        Side ``L0`` of the unit cell.
    spacing_mm : tuple of float
        Radial gap between successive nesting rings, one per transition
        ``i -> i+1``.
    orders : tuple of NestingOrderSpec
        Orders present in the design, sorted by index.
    orientation_axis : {'X', 'Y', 'Z'}
        Principal axis about which orientation angles are applied.
    name : str
        Label, e.g. ``"XNFS:0-1:0-30"``.
    """

    cell_size_mm: float = DEFAULT_CELL_SIZE
    spacing_mm: tuple = (DEFAULT_SPACING, DEFAULT_SPACING)
    orders: tuple = (NestingOrderSpec(0),)
    orientation_axis: str = "Z"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "spacing_mm", tuple(float(a) for a in self.spacing_mm))
        object.__setattr__(self, "orders", tuple(self.orders))
        if not self.cell_size_mm > 0:
            raise InvalidSpec(f"cell size must be > 0, got {self.cell_size_mm}")
        if any(not a > 0 for a in self.spacing_mm):
            raise InvalidSpec("every spacing entry must be > 0")
        if self.orientation_axis not in AXES:
            raise InvalidSpec(f"orientation axis must be one of {AXES}")
        if not self.orders:
            raise InvalidSpec("a design needs at least one nesting order")
        idx = [o.index for o in self.orders]
        if idx != sorted(set(idx)):
            raise InvalidSpec("nesting orders must be sorted by index without repeats")
        if max(idx) > len(self.spacing_mm):
            raise InvalidSpec(f"order {max(idx)} needs {max(idx)} spacing entries")
        # rejects geometrically infeasible designs up front
        self.side_lengths()

    def side_lengths(self):
        count = max(o.index for o in self.orders) + 1
        return nesting_side_lengths(self.cell_size_mm, self.spacing_mm, count)

    def with_diameters(self, diameters):
        """Copy with new strut diameters, given per order index (dict) or as one scalar."""
        if np.isscalar(diameters):
            diameters = {o.index: float(diameters) for o in self.orders}
        orders = tuple(replace(o, diameter_mm=float(diameters.get(o.index, o.diameter_mm)))
                       for o in self.orders)
        return replace(self, orders=orders)

    def order(self, index):
        for o in self.orders:
            if o.index == index:
                return o
        raise KeyError(index)


@dataclass(frozen=True)
class Segment:
    endpoint_a: tuple
    endpoint_b: tuple
    radius_mm: float

    def __post_init__(self):
        a = tuple(float(v) for v in self.endpoint_a)
        b = tuple(float(v) for v in self.endpoint_b)
        object.__setattr__(self, "endpoint_a", a)
        object.__setattr__(self, "endpoint_b", b)
        if not self.radius_mm > 0:
            raise InvalidSpec(f"segment radius must be > 0, got {self.radius_mm}")
        if a == b:
            raise InvalidSpec("segment endpoints must be distinct")

    @property
    def length(self):
        return math.dist(self.endpoint_a, self.endpoint_b)


@dataclass(frozen=True)
class StrutModel:
    cell_size_mm: float
    segments: tuple = ()
    spec: NestedLatticeSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    def __len__(self):
        return len(self.segments)

    def as_arrays(self):
        """Return ``(a, b, r)`` arrays of shape (m, 3), (m, 3), (m,)."""
        if not self.segments:
            return np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0)
        a = np.array([s.endpoint_a for s in self.segments])
        b = np.array([s.endpoint_b for s in self.segments])
        r = np.array([s.radius_mm for s in self.segments])
        return a, b, r

    def same_segments(self, other, tol=DEDUP_TOL):
        """Set equality of the segment lists within ``tol`` (orientation-insensitive)."""
        return _segment_set_equal(self.segments, other.segments, tol)


def nesting_side_lengths(L0, spacings, count):
    """Side lengths ``[L0, L1, ...]`` of ``count`` nested cubes.

    Each square is inscribed in a ring whose radius shrinks by the spacing
    ``alpha_i``, so ``L_{i+1} = sqrt(2) * (L_i / sqrt(2) - alpha_i)``.
    """
    if not L0 > 0:
        raise NonPositiveLength(f"cell size must be positive, got {L0}")
    if count < 1:
        raise ValueError("count must be >= 1")
    if len(spacings) < count - 1:
        raise InvalidSpec(f"{count} orders need {count - 1} spacings, got {len(spacings)}")
    sides = [float(L0)]
    for i in range(count - 1):
        nxt = math.sqrt(2.0) * (sides[-1] / math.sqrt(2.0) - spacings[i])
        if nxt <= 0:
            raise NonPositiveLength(
                f"side length L{i + 1} = {nxt:.4g} mm is not positive")
        sides.append(nxt)
    return sides


def rotation_matrix(axis, angle_deg):
    """Right-handed rotation about a principal axis; exact for multiples of 90 deg."""
    k = AXES.index(axis.upper())
    if float(angle_deg) % 90 == 0:
        c, s = [(1, 0), (0, 1), (-1, 0), (0, -1)][int(angle_deg // 90) % 4]
    else:
        t = math.radians(angle_deg)
        c, s = math.cos(t), math.sin(t)
    i, j = [(1, 2), (2, 0), (0, 1)][k]
    R = np.eye(3)
    R[i, i], R[i, j], R[j, i], R[j, j] = c, -s, s, c
    return R


def _transform(segments, R, center):
    center = np.asarray(center, dtype=float)
    out = []
    for s in segments:
        a = R @ (np.asarray(s.endpoint_a) - center) + center
        b = R @ (np.asarray(s.endpoint_b) - center) + center
        out.append(Segment(tuple(a), tuple(b), s.radius_mm))
    return out


def xcross_struts(side_mm, orientation_deg=0.0, axis="Z", diameter_mm=DEFAULT_DIAMETER,
                  center=(0.0, 0.0, 0.0)):
    """Six face-diagonal struts on the central XY, YZ and XZ planes of a cube.

    The cube of side ``side_mm`` is centered at ``center``; the struts are
    then rotated anti-clockwise by ``orientation_deg`` about ``axis``.
    """
    if not side_mm > 0:
        raise NonPositiveLength(f"side must be positive, got {side_mm}")
    h = side_mm / 2.0
    r = diameter_mm / 2.0
    raw = [
        ((-h, -h, 0), (h, h, 0)), ((-h, h, 0), (h, -h, 0)),   # XY
        ((0, -h, -h), (0, h, h)), ((0, -h, h), (0, h, -h)),   # YZ
        ((-h, 0, -h), (h, 0, h)), ((h, 0, -h), (-h, 0, h)),   # XZ
    ]
    c = np.asarray(center, dtype=float)
    segs = [Segment(tuple(c + a), tuple(c + b), r) for a, b in raw]
    return _transform(segs, rotation_matrix(axis, orientation_deg), c)


def build_base(spec):
    """Union of the X-crosses of every order (the pre-fold base structure)."""
    sides = spec.side_lengths()
    segs = []
    for o in spec.orders:
        segs.extend(xcross_struts(sides[o.index], o.orientation_deg,
                                  spec.orientation_axis, o.diameter_mm))
    return StrutModel(spec.cell_size_mm, tuple(segs), spec)


def _canonical(seg, decimals=None):
    a, b = seg.endpoint_a, seg.endpoint_b
    return (a, b) if a <= b else (b, a)


def _segment_key_array(segments):
    """(m, 7) array of canonically ordered endpoints plus radius."""
    rows = []
    for s in segments:
        a, b = _canonical(s)
        rows.append((*a, *b, s.radius_mm))
    return np.array(rows, dtype=float).reshape(-1, 7)


def _match_mask(keys, row, tol):
    """Rows of ``keys`` matching ``row`` in either endpoint order."""
    a, b, r = row[:3], row[3:6], row[6]
    same_r = np.abs(keys[:, 6] - r) <= 1e-12 * max(1.0, abs(r))
    fwd = (np.abs(keys[:, :3] - a).max(axis=1) <= tol) & (np.abs(keys[:, 3:6] - b).max(axis=1) <= tol)
    rev = (np.abs(keys[:, :3] - b).max(axis=1) <= tol) & (np.abs(keys[:, 3:6] - a).max(axis=1) <= tol)
    return same_r & (fwd | rev)


def dedup_segments(segments, tol_mm=DEDUP_TOL):
    """Collapse segments whose endpoint pairs agree within ``tol_mm``.

    Matching ignores endpoint order; radii must be equal. The result is
    sorted lexicographically by canonical endpoints, then radius.
    """
    if tol_mm < 0:
        raise ValueError("tolerance must be non-negative")
    segments = list(segments)
    if not segments:
        return []
    keys = _segment_key_array(segments)
    kept = []
    kept_keys = np.zeros((0, 7))
    for seg, key in zip(segments, keys):
        if len(kept) and _match_mask(kept_keys, key, tol_mm).any():
            continue
        kept.append(seg)
        kept_keys = np.vstack([kept_keys, key])
    # snap near-zero noise so ordering is stable across platforms
    order = sorted(range(len(kept)),
                   key=lambda i: tuple(np.round(kept_keys[i], 9) + 0.0))
    out = []
    for i in order:
        a, b = _canonical(kept[i])
        out.append(Segment(a, b, kept[i].radius_mm))
    return out


def _segment_set_equal(s1, s2, tol=DEDUP_TOL):
    k1, k2 = _segment_key_array(s1), _segment_key_array(s2)
    if len(dedup_segments(s1, tol)) != len(dedup_segments(s2, tol)):
        return False
    return (all(_match_mask(k2, row, tol).any() for row in k1)
            and all(_match_mask(k1, row, tol).any() for row in k2))


def fourfold(model, axis):
    """Union of the model rotated by 0, 90, 180 and 270 degrees about ``axis``."""
    segs = []
    for k in range(4):
        segs.extend(_transform(model.segments, rotation_matrix(axis, 90 * k), (0.0, 0.0, 0.0)))
    return replace(model, segments=tuple(dedup_segments(segs)))


def clip_segment(seg, half):
    """Portion of a segment inside the box ``[-half, half]**3`` or None (Liang-Barsky)."""
    a = np.asarray(seg.endpoint_a)
    d = np.asarray(seg.endpoint_b) - a
    t0, t1 = 0.0, 1.0
    for k in range(3):
        if abs(d[k]) < 1e-15:
            if abs(a[k]) > half + 1e-12:
                return None
            continue
        ta = (-half - a[k]) / d[k]
        tb = (half - a[k]) / d[k]
        lo, hi = min(ta, tb), max(ta, tb)
        t0, t1 = max(t0, lo), min(t1, hi)
        if t0 >= t1:
            return None
    p, q = a + t0 * d, a + t1 * d
    if np.linalg.norm(q - p) <= DEDUP_TOL:
        return None
    # endpoints landing on the box are snapped onto it exactly
    p = np.where(np.abs(np.abs(p) - half) < 1e-12, np.sign(p) * half, p)
    q = np.where(np.abs(np.abs(q) - half) < 1e-12, np.sign(q) * half, q)
    return Segment(tuple(p), tuple(q), seg.radius_mm)


def t4fas_fold(model):
    """Fold about Y, X, then Z, and trim strut axes to the unit cell box.

    The three sequential four-fold unions reach all 24 proper rotations of
    the cube, so the result is invariant under 90 degree turns about every
    principal axis.
    """
    m = model
    for axis in ("Y", "X", "Z"):
        m = fourfold(m, axis)
    half = model.cell_size_mm / 2.0
    clipped = [c for c in (clip_segment(s, half) for s in m.segments) if c is not None]
    return replace(m, segments=tuple(dedup_segments(clipped)))


def build_full(spec):
    """Folded, trimmed unit cell of a design."""
    return t4fas_fold(build_base(spec))


def is_cubic_invariant(model, tol=DEDUP_TOL):
    for axis in AXES:
        rotated = _transform(model.segments, rotation_matrix(axis, 90), (0.0, 0.0, 0.0))
        if not _segment_set_equal(model.segments, rotated, tol):
            return False
    return True


def design_name(indices, angles):
    """Catalog label, e.g. ``XNFS:1:45``, ``XNFS:0-1:0-30`` or ``XNFS:0-15-30``."""
    angles = [f"{a:g}" for a in angles]
    if len(indices) == 3:
        return "XNFS:" + "-".join(angles)
    return "XNFS:" + "-".join(str(i) for i in indices) + ":" + "-".join(angles)


def make_spec(indices, angles, diameter=DEFAULT_DIAMETER, cell_size=DEFAULT_CELL_SIZE,
              spacing=DEFAULT_SPACING, axis="Z", name=None):
    orders = tuple(NestingOrderSpec(i, float(t), float(diameter)) for i, t in zip(indices, angles))
    return NestedLatticeSpec(cell_size, (spacing, spacing), orders, axis,
                             name or design_name(indices, angles))


def catalog(family):
    """Named designs of a family: ``'mono'`` (9), ``'bi'`` (4), ``'tri'`` (16) or ``'all'`` (29)."""
    family = family.lower()
    if family == "mono":
        specs = [make_spec([0], [0])]
        for i in (1, 2):
            specs += [make_spec([i], [t]) for t in CATALOG_ANGLES]
        return specs
    if family == "bi":
        return [make_spec([0, 1], [0, t]) for t in CATALOG_ANGLES]
    if family == "tri":
        return [make_spec([0, 1, 2], [0, t1, t2])
                for t1, t2 in itertools.product(CATALOG_ANGLES, repeat=2)]
    if family == "all":
        return catalog("mono") + catalog("bi") + catalog("tri")
    raise ValueError(f"unknown catalog family {family!r}")


def find_design(name):
    for spec in catalog("all"):
        if spec.name == name:
            return spec
    raise KeyError(f"no catalog design named {name!r}")
