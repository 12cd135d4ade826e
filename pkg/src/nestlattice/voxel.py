"""Signed distance field, voxelization, density metrics and surface meshes."""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from skimage import measure

from .errors import EmptyModel, InvalidSpec, MinFeatureWarning

DEFAULT_RESOLUTION = 64
MIN_VOXELS_PER_DIAMETER = 3.0


@numba.njit(cache=True, fastmath=False)
def _capsule_union(points, a, b, r):
    m = a.shape[0]
    out = np.empty(points.shape[0])
    for p in range(points.shape[0]):
        px, py, pz = points[p, 0], points[p, 1], points[p, 2]
        best = np.inf
        for s in range(m):
            dx, dy, dz = b[s, 0] - a[s, 0], b[s, 1] - a[s, 1], b[s, 2] - a[s, 2]
            wx, wy, wz = px - a[s, 0], py - a[s, 1], pz - a[s, 2]
            dd = dx * dx + dy * dy + dz * dz
            t = (wx * dx + wy * dy + wz * dz) / dd
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            ex, ey, ez = wx - t * dx, wy - t * dy, wz - t * dz
            d = math.sqrt(ex * ex + ey * ey + ez * ez) - r[s]
            if d < best:
                best = d
        out[p] = best
    return out


def _box_sdf(points, half):
    q = np.abs(points) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(q.max(axis=-1), 0.0)
    return outside + inside


def strut_sdf(model, points):
    """Union of capsules only (no trimming by the cell box)."""
    pts = np.asarray(points, dtype=float)
    shape = pts.shape[:-1]
    pts = np.ascontiguousarray(pts.reshape(-1, 3))
    if len(model) == 0:
        return np.full(shape, np.inf)
    a, b, r = model.as_arrays()
    return _capsule_union(pts, a, b, r).reshape(shape)


def sdf(model, p):
    """Signed distance to the strut solid trimmed by the cell box (negative inside).

    ``p`` may be a single point or an array of points with a trailing axis of 3.
    """
    pts = np.asarray(p, dtype=float)
    d = strut_sdf(model, pts)
    return np.maximum(d, _box_sdf(pts, model.cell_size_mm / 2.0))


@dataclass(frozen=True)
class VoxelGrid:
    """Solid/void occupancy of the unit cell sampled at voxel centers.

    ``occupancy[i, j, k]`` refers to the voxel whose center is at
    ``((i + 1/2) / n - 1/2) * L0`` along x (and likewise j for y, k for z).
    """

    resolution: int
    cell_size_mm: float
    occupancy: np.ndarray

    def __post_init__(self):
        n = self.resolution
        if n < 2:
            raise InvalidSpec("grid resolution must be >= 2")
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.shape != (n, n, n):
            raise InvalidSpec(f"occupancy must have shape {(n, n, n)}, got {occ.shape}")
        object.__setattr__(self, "occupancy", occ)

    @property
    def pitch(self):
        return self.cell_size_mm / self.resolution

    @property
    def solid_count(self):
        return int(self.occupancy.sum())

    @classmethod
    def filled(cls, n, cell_size_mm, value=True):
        return cls(n, cell_size_mm, np.full((n, n, n), value, dtype=bool))


def voxel_centers(n, L0):
    return ((np.arange(n) + 0.5) / n - 0.5) * L0


def _lattice_points3(xs, ys, zs):
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    return np.stack([X, Y, Z], axis=-1)


def _lattice_points(coords):
    return _lattice_points3(coords, coords, coords)


def voxelize(model, resolution=DEFAULT_RESOLUTION):
    n = int(resolution)
    if n < 2:
        raise InvalidSpec("grid resolution must be >= 2")
    L0 = model.cell_size_mm
    if len(model):
        _, _, r = model.as_arrays()
        span = 2.0 * r.min() / (L0 / n)
        if span < MIN_VOXELS_PER_DIAMETER:
            warnings.warn(f"thinnest strut spans only {span:.2f} voxels at n={n}",
                          MinFeatureWarning, stacklevel=2)
    c = voxel_centers(n, L0)
    occ = np.empty((n, n, n), dtype=bool)
    # z-slabs of about a million points keep memory flat at fine resolutions
    step = max(1, (1 << 20) // (n * n))
    for k0 in range(0, n, step):
        occ[:, :, k0:k0 + step] = sdf(model, _lattice_points3(c, c, c[k0:k0 + step])) < 0.0
    return VoxelGrid(n, L0, occ)


def relative_density(grid):
    """Solid volume fraction of the cell."""
    return grid.solid_count / grid.resolution ** 3


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    watertight: bool = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise InvalidSpec("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    def __len__(self):
        return len(self.triangles)

    def triangle_areas(self):
        p = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def area(self):
        return float(np.sum(self.triangle_areas()))

    def signed_volume(self):
        p = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)


def _weld(verts, faces, tol):
    """Merge vertices closer than ``tol`` and drop triangles that collapse."""
    keys = np.round(verts / tol).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    faces = inverse.ravel()[faces]
    verts = verts[first]
    ok = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    faces = faces[ok]
    p = verts[faces]
    area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    faces = faces[area > tol * tol]
    # compact away vertices no longer referenced
    used, faces = np.unique(faces, return_inverse=True)
    return verts[used], faces.reshape(-1, 3)


def _closed(faces):
    """True when every undirected edge is shared by exactly two triangles."""
    if len(faces) == 0:
        return False
    edges = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return bool((counts == 2).all())


def surface_mesh(model, resolution=DEFAULT_RESOLUTION, capped=False):
    """Triangulated strut surface by marching cubes on a corner lattice.

    With ``capped=False`` the field is sampled on the ``(n+1)**3`` corner
    lattice spanning exactly the cell, so the disks where struts leave the
    box are not triangulated. ``capped=True`` pads the lattice by one layer
    and trims with the box, giving a closed solid suitable for printing.
    """
    n = int(resolution)
    if n < 8:
        raise InvalidSpec("surface meshing needs resolution >= 8")
    if len(model) == 0:
        raise EmptyModel("model has no struts")
    L0 = model.cell_size_mm
    h = L0 / n
    if capped:
        coords = -L0 / 2 + h * np.arange(-1, n + 2)
        field = sdf(model, _lattice_points(coords))
    else:
        coords = -L0 / 2 + h * np.arange(n + 1)
        field = strut_sdf(model, _lattice_points(coords))
    if not (field.min() < 0.0 < field.max()):
        raise EmptyModel("no surface crossing inside the cell")
    verts, faces, _, _ = measure.marching_cubes(field, level=0.0, spacing=(h, h, h),
                                                gradient_direction="descent")
    verts = verts + coords[0]
    # field zeros on lattice nodes (the box faces) yield coincident vertices
    verts, faces = _weld(verts, faces, 1e-7 * h)
    return TriMesh(verts, faces, _closed(faces))


def surface_area_density(model, resolution=DEFAULT_RESOLUTION, grid=None):
    """Strut surface area per unit solid volume, in 1/mm."""
    if len(model) == 0:
        raise EmptyModel("model has no struts")
    area = surface_mesh(model, resolution).area()
    grid = grid if grid is not None else voxelize(model, resolution)
    rho = relative_density(grid)
    if rho == 0:
        raise EmptyModel("no solid voxels at this resolution")
    return area / (rho * model.cell_size_mm ** 3)


def geometric_metrics(model, resolution=DEFAULT_RESOLUTION, grid=None):
    """Relative density, surface area and both area densities of a model."""
    if len(model) == 0:
        raise EmptyModel("model has no struts")
    grid = grid if grid is not None else voxelize(model, resolution)
    rho = relative_density(grid)
    try:
        area = surface_mesh(model, resolution).area()
    except EmptyModel:
        if rho == 0:
            raise
        area = 0.0  # solid fills the cell; only box cut faces remain
    V = model.cell_size_mm ** 3
    return {
        "rho_bar": rho,
        "surface_area_mm2": area,
        "s_bar": area / (rho * V) if rho > 0 else math.inf,
        "s_bar_cell": area / V,
    }


# ---- file formats -------------------------------------------------------

_STL_DTYPE = np.dtype([("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])


def export_stl(mesh, path, header=b"nestlattice binary STL"):
    """Write a little-endian binary STL; normals come from the triangle winding."""
    if len(mesh) == 0:
        raise EmptyModel("cannot export an empty mesh")
    p = mesh.vertices[mesh.triangles]
    nrm = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    length = np.linalg.norm(nrm, axis=1, keepdims=True)
    nrm = np.divide(nrm, length, out=np.zeros_like(nrm), where=length > 0)
    rec = np.zeros(len(mesh), dtype=_STL_DTYPE)
    rec["normal"] = nrm
    rec["v"] = p
    with open(path, "wb") as fh:
        fh.write(header[:80].ljust(80, b"\0"))
        fh.write(struct.pack("<I", len(rec)))
        fh.write(rec.tobytes())


def read_stl(path):
    """Read a binary STL back as (normals, triangle vertices) float32 arrays."""
    with open(path, "rb") as fh:
        fh.read(80)
        (count,) = struct.unpack("<I", fh.read(4))
        rec = np.frombuffer(fh.read(count * _STL_DTYPE.itemsize), dtype=_STL_DTYPE)
    return rec["normal"].copy(), rec["v"].copy()


def export_obj(mesh, path, precision=9):
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write("v " + " ".join(f"{x:.{precision}g}" for x in v) + "\n")
        for t in mesh.triangles:
            fh.write("f " + " ".join(str(i + 1) for i in t) + "\n")


def read_obj(path):
    verts, tris = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                tris.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    return TriMesh(np.array(verts), np.array(tris, dtype=np.int64))


def write_grid(grid, path):
    """Flat binary dump: int64 n, float64 L0, then n**3 bytes with x varying fastest."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qd", grid.resolution, grid.cell_size_mm))
        fh.write(grid.occupancy.astype(np.uint8).ravel(order="F").tobytes())


def read_grid(path):
    with open(path, "rb") as fh:
        n, L0 = struct.unpack("<qd", fh.read(16))
        body = np.frombuffer(fh.read(n ** 3), dtype=np.uint8)
    if body.size != n ** 3:
        raise InvalidSpec(f"grid file truncated: expected {n ** 3} bytes, got {body.size}")
    return VoxelGrid(int(n), float(L0), body.reshape((n, n, n), order="F").astype(bool))
