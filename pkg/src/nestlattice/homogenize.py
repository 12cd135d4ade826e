"""Effective stiffness of a voxel grid by six prescribed-strain solves.

Each voxel is a trilinear hexahedron. Void voxels carry a soft ersatz
material so the system stays nonsingular for disconnected clusters. The
default boundary conditions prescribe only the named displacement
components on each face (uniform normal strain, or the far-face/near-face
shear pattern); a periodic variant is available with ``bc="periodic"``.

Units are mm and GPa throughout, so nodal forces come out in kN/1e3
(never exposed).
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidSpec, NoSolid, NotConverged

log = logging.getLogger(__name__)

VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (2, 0), (0, 1))
BC_FAMILIES = ("kinematic", "periodic")
DEFAULT_STRAIN = 1e-3
DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class MaterialSpec:
    youngs_modulus_gpa: float = 193.0
    poisson_ratio: float = 0.28
    void_contrast: float = 1e-6

    def __post_init__(self):
        if not self.youngs_modulus_gpa > 0:
            raise InvalidSpec("Young's modulus must be positive")
        if not -1.0 < self.poisson_ratio < 0.5:
            raise InvalidSpec("Poisson ratio must lie in (-1, 0.5)")
        if not 0 < self.void_contrast <= 1e-3:
            raise InvalidSpec("void contrast must lie in (0, 1e-3]")


@dataclass(frozen=True)
class LoadCase:
    """Unit macroscopic strain in one Voigt slot (1..6 = 11, 22, 33, 23, 31, 12)."""

    case_index: int
    strain_magnitude: float = DEFAULT_STRAIN

    def __post_init__(self):
        if self.case_index not in range(1, 7):
            raise InvalidSpec("load case index must be in 1..6")
        if not self.strain_magnitude > 0:
            raise InvalidSpec("strain magnitude must be positive")

    @property
    def pair(self):
        return VOIGT_PAIRS[self.case_index - 1]

    def macro_strain(self):
        """Tensorial strain with engineering shear split evenly over (i, j) and (j, i)."""
        i, j = self.pair
        eps = np.zeros((3, 3))
        if i == j:
            eps[i, i] = self.strain_magnitude
        else:
            eps[i, j] = eps[j, i] = self.strain_magnitude / 2.0
        return eps


@dataclass(frozen=True)
class DisplacementField:
    values: np.ndarray
    converged_residual: float
    iterations: int = 0
    load_case: LoadCase | None = None
    bc: str = "kinematic"


@dataclass(frozen=True)
class StiffnessMatrix:
    """Effective 6x6 stiffness in GPa, Voigt order (11, 22, 33, 23, 31, 12)."""

    c: np.ndarray
    asymmetry: float = 0.0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.shape != (6, 6):
            raise InvalidSpec("stiffness matrix must be 6x6")
        object.__setattr__(self, "c", c)


def lame_parameters(mat):
    E, nu = mat.youngs_modulus_gpa, mat.poisson_ratio
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    return lam, mu


def isotropic_matrix(lam, mu):
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] = lam + 2 * mu
    D[np.arange(3, 6), np.arange(3, 6)] = mu
    return D


# local node a sits at offset (a & 1, (a >> 1) & 1, (a >> 2) & 1)
NODE_OFFSETS = np.array([[a & 1, (a >> 1) & 1, (a >> 2) & 1] for a in range(8)])


def _shape_gradients(xi):
    """Gradients of the 8 trilinear shape functions on the unit cube at ``xi`` in [0, 1]^3."""
    g = np.empty((8, 3))
    for a, (ox, oy, oz) in enumerate(NODE_OFFSETS):
        fx = xi[0] if ox else 1 - xi[0]
        fy = xi[1] if oy else 1 - xi[1]
        fz = xi[2] if oz else 1 - xi[2]
        sx, sy, sz = (1 if ox else -1), (1 if oy else -1), (1 if oz else -1)
        g[a] = (sx * fy * fz, fx * sy * fz, fx * fy * sz)
    return g


def strain_displacement(xi, h=1.0):
    """6x24 engineering-strain operator at local point ``xi`` of a cube of side ``h``."""
    g = _shape_gradients(xi) / h
    B = np.zeros((6, 24))
    for a in range(8):
        gx, gy, gz = g[a]
        c = 3 * a
        B[0, c] = gx
        B[1, c + 1] = gy
        B[2, c + 2] = gz
        B[3, c + 1], B[3, c + 2] = gz, gy
        B[4, c], B[4, c + 2] = gz, gx
        B[5, c], B[5, c + 1] = gy, gx
    return B


def hex_element_stiffness(lam, mu, h=1.0):
    """24x24 stiffness of a cubic trilinear element, 2x2x2 Gauss quadrature."""
    if not h > 0:
        raise InvalidSpec("voxel pitch must be positive")
    D = isotropic_matrix(lam, mu)
    gp = 0.5 + np.array([-1.0, 1.0]) / (2.0 * np.sqrt(3.0))
    K = np.zeros((24, 24))
    for xi in itertools.product(gp, repeat=3):
        B = strain_displacement(np.array(xi), 1.0)
        K += B.T @ D @ B / 8.0
    K = 0.5 * (K + K.T)
    # dimensional scaling: B ~ 1/h, volume ~ h^3
    return K * h


# ---- grid bookkeeping ---------------------------------------------------

def _node_ids(n, periodic=False):
    m = n if periodic else n + 1
    i = np.arange(n + 1) % m
    I, J, K = np.meshgrid(i, i, i, indexing="ij")
    return I + m * (J + m * K)  # x varies fastest


def element_nodes(n, periodic=False):
    """(n**3, 8) global node ids of each element, elements ordered x-fastest."""
    ids = _node_ids(n, periodic)
    cols = []
    for ox, oy, oz in NODE_OFFSETS:
        cols.append(ids[ox:ox + n, oy:oy + n, oz:oz + n].ravel(order="F"))
    return np.stack(cols, axis=1)


def element_dofs(n, periodic=False):
    en = element_nodes(n, periodic)
    return (3 * en[:, :, None] + np.arange(3)).reshape(len(en), 24)


def element_weights(grid, mat):
    w = np.where(grid.occupancy, 1.0, mat.void_contrast)
    return w.ravel(order="F")


def assemble_stiffness(grid, mat, periodic=False):
    """Global stiffness as a 3x3-block BSR matrix.

    Every element shares one reference matrix, so assembly loops over the
    64 local node pairs and accumulates whole-grid slices into the 27
    neighbour blocks of each node instead of building per-element triplets.
    """
    n = grid.resolution
    lam, mu = lame_parameters(mat)
    Ke = hex_element_stiffness(lam, mu, grid.pitch)
    # index order [k, j, i] so C-order flattening puts x fastest
    w = element_weights(grid, mat).reshape((n, n, n))
    m = n if periodic else n + 1
    data = np.zeros((m, m, m, 27, 3, 3))
    for a, b in itertools.product(range(8), repeat=2):
        oa, ob = NODE_OFFSETS[a], NODE_OFFSETS[b]
        dx, dy, dz = ob - oa
        slot = (dz + 1) * 9 + (dy + 1) * 3 + (dx + 1)
        kab = Ke[3 * a:3 * a + 3, 3 * b:3 * b + 3]
        if periodic:
            wa = np.roll(w, shift=(oa[2], oa[1], oa[0]), axis=(0, 1, 2))
            data[:, :, :, slot] += wa[..., None, None] * kab
        else:
            data[oa[2]:oa[2] + n, oa[1]:oa[1] + n, oa[0]:oa[0] + n, slot] += w[..., None, None] * kab

    offs = np.array([(dx, dy, dz) for dz in (-1, 0, 1) for dy in (-1, 0, 1) for dx in (-1, 0, 1)])
    kk, jj, ii = np.meshgrid(np.arange(m), np.arange(m), np.arange(m), indexing="ij")
    ci = ii.ravel()[:, None] + offs[:, 0]
    cj = jj.ravel()[:, None] + offs[:, 1]
    ck = kk.ravel()[:, None] + offs[:, 2]
    if periodic:
        valid = np.ones(ci.shape, dtype=bool)
        ci, cj, ck = ci % m, cj % m, ck % m
    else:
        valid = (ci >= 0) & (ci < m) & (cj >= 0) & (cj < m) & (ck >= 0) & (ck < m)
    cols = (ci + m * (cj + m * ck))[valid].astype(np.int32)
    data = data.reshape(m ** 3, 27, 3, 3)
    data = data[valid] if not valid.all() else data.reshape(-1, 3, 3)
    indptr = np.concatenate([[0], np.cumsum(valid.sum(axis=1))])
    K = sp.bsr_matrix((data, cols, indptr), shape=(3 * m ** 3, 3 * m ** 3))
    if periodic:
        K.sort_indices()
    return K


def node_coordinates(n, L0):
    """(N, 3) coordinates of the (n+1)**3 corner nodes, origin at the cell corner."""
    x = np.arange(n + 1) * (L0 / n)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    return np.stack([X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")], axis=1)


def load_case_constraints(case, grid):
    """Constrained DOF indices and their prescribed values for one load case.

    Normal case k: on the faces normal to each axis the face-normal
    component is fixed, equal to ``eps * x_k`` for axis k and zero otherwise.
    Shear case (i, j): component i is ``gamma/2 * x_j`` on the two faces
    normal to j, component j is ``gamma/2 * x_i`` on the faces normal to i,
    and the remaining axis keeps zero normal displacement on its faces.
    Every other component is traction-free.
    """
    n, L0 = grid.resolution, grid.cell_size_mm
    x = node_coordinates(n, L0)
    on_face = [(np.isclose(x[:, a], 0.0) | np.isclose(x[:, a], L0)) for a in range(3)]
    i, j = case.pair
    g = case.strain_magnitude
    dofs, vals = [], []
    if i == j:
        for a in range(3):
            nodes = np.flatnonzero(on_face[a])
            dofs.append(3 * nodes + a)
            vals.append(g * x[nodes, a] if a == i else np.zeros(len(nodes)))
    else:
        k = 3 - i - j
        for comp, face, coef in ((i, j, g / 2), (j, i, g / 2), (k, k, 0.0)):
            nodes = np.flatnonzero(on_face[face])
            dofs.append(3 * nodes + comp)
            vals.append(coef * x[nodes, face])
    dofs = np.concatenate(dofs)
    vals = np.concatenate(vals)
    order = np.argsort(dofs, kind="stable")
    return dofs[order], vals[order]


def rigid_body_modes(coords):
    """(3N, 6) translations and infinitesimal rotations at the given nodes."""
    N = len(coords)
    B = np.zeros((3 * N, 6))
    c = coords - coords.mean(axis=0)
    for a in range(3):
        B[a::3, a] = 1.0
    B[0::3, 3], B[1::3, 3] = -c[:, 1], c[:, 0]
    B[1::3, 4], B[2::3, 4] = -c[:, 2], c[:, 1]
    B[0::3, 5], B[2::3, 5] = c[:, 2], -c[:, 0]
    return B


def _apply_dirichlet(K, fixed):
    """Zero fixed rows/columns of a BSR matrix and keep its diagonal there."""
    mask = np.ones(K.shape[0])
    mask[fixed] = 0.0
    nb = K.indptr.size - 1
    brow = np.repeat(np.arange(nb), np.diff(K.indptr))
    bcol = K.indices
    rm = mask.reshape(-1, 3)[brow]
    cm = mask.reshape(-1, 3)[bcol]
    diag = K.diagonal()
    data = K.data.copy()
    data *= rm[:, :, None]
    data *= cm[:, None, :]
    is_diag = brow == bcol
    fixed_diag = np.where(mask == 0, diag, 0.0).reshape(-1, 3)
    data[is_diag] += fixed_diag[brow[is_diag]][:, :, None] * np.eye(3)
    Kd = sp.bsr_matrix((data, K.indices.copy(), K.indptr.copy()), shape=K.shape)
    return Kd, diag


class _Preconditioners:
    """Preconditioner for the current Dirichlet-modified operator.

    Only the most recent AMG hierarchy is kept: the three normal load cases
    share one constraint pattern, each shear case has its own. The
    hierarchy is stored in single precision to halve memory traffic; the
    Krylov iteration itself stays in double.
    """

    def __init__(self, kind, coords):
        self.kind = kind
        self.coords = coords
        self.key = None
        self.op = None

    def get(self, key, A):
        if key == self.key:
            return self.op
        self.key, self.op = None, None
        if self.kind == "amg":
            import pyamg
            # setup draws a random start vector for its spectral-radius
            # estimate from the global generator; pin it so runs repeat
            state = np.random.get_state()
            np.random.seed(0)
            try:
                ml = pyamg.smoothed_aggregation_solver(
                    A.astype(np.float32).tocsr(),
                    B=rigid_body_modes(self.coords).astype(np.float32),
                    max_coarse=500,
                    presmoother=("gauss_seidel", {"sweep": "forward"}),
                    postsmoother=("gauss_seidel", {"sweep": "backward"}))
            finally:
                np.random.set_state(state)
            M = ml.aspreconditioner(cycle="V")
            op = spla.LinearOperator(
                A.shape, dtype=np.float64,
                matvec=lambda r: M(r.astype(np.float32)).astype(np.float64))
        elif self.kind == "jacobi":
            d = A.diagonal()
            op = spla.LinearOperator(A.shape, dtype=np.float64, matvec=lambda r: r / d)
        else:
            raise InvalidSpec(f"unknown preconditioner {self.kind!r}")
        self.key, self.op = key, op
        return op


def _pcg(A, b, M, tol, max_iters):
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), 0.0, 0
    count = [0]

    def cb(_):
        count[0] += 1

    x = None
    # CG tracks a recursively updated residual that can drift just above the
    # true one; restart from the current iterate until the true one meets tol
    for _ in range(4):
        x, _ = spla.cg(A, b, x0=x, rtol=tol, atol=0.0, maxiter=max_iters - count[0], M=M,
                       callback=cb)
        res = np.linalg.norm(b - A @ x) / bnorm
        if res <= tol or count[0] >= max_iters:
            break
    return x, res, count[0]


class VoxelProblem:
    """Assembled operator and boundary data shared by the six load cases of one grid."""

    def __init__(self, grid, mat, bc="kinematic", preconditioner="amg"):
        if bc not in BC_FAMILIES:
            raise InvalidSpec(f"unknown boundary-condition family {bc!r}")
        if grid.solid_count == 0:
            raise NoSolid("grid has no solid voxels")
        self.grid, self.mat, self.bc = grid, mat, bc
        n = grid.resolution
        self.periodic = bc == "periodic"
        self.K = assemble_stiffness(grid, mat, periodic=self.periodic)
        m = n if self.periodic else n + 1
        x = np.arange(m) * grid.pitch
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        coords = np.stack([X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")], axis=1)
        self.precond = _Preconditioners(preconditioner, coords)
        self._dirichlet = {}

    def _system(self, key, fixed):
        # one operator at a time keeps memory bounded on fine grids
        if key not in self._dirichlet:
            self._dirichlet.clear()
            self._dirichlet[key] = _apply_dirichlet(self.K, fixed)
        return self._dirichlet[key]

    def solve(self, case, tol=DEFAULT_TOL, max_iters=None):
        n = self.grid.resolution
        if max_iters is None:
            max_iters = 10 * n ** 3
        if self.periodic:
            return self._solve_periodic(case, tol, max_iters)
        fixed, vals = load_case_constraints(case, self.grid)
        key = "normal" if case.case_index <= 3 else f"shear{case.case_index}"
        A, diag = self._system(key, fixed)
        u0 = np.zeros(self.K.shape[0])
        u0[fixed] = vals
        b = -(self.K @ u0)
        b[fixed] = diag[fixed] * vals
        M = self.precond.get(key, A)
        u, res, its = _pcg(A, b, M, tol, max_iters)
        log.debug("case %d: %d iterations, residual %.2e", case.case_index, its, res)
        if not res <= tol:
            raise NotConverged(res, its)
        u[fixed] = vals
        return DisplacementField(u.reshape(-1, 3), res, its, case, self.bc)

    def _solve_periodic(self, case, tol, max_iters):
        grid = self.grid
        n, h = grid.resolution, grid.pitch
        eps = case.macro_strain()
        # affine part per element is identical up to a rigid translation
        u_ref = (NODE_OFFSETS * h) @ eps.T
        lam, mu = lame_parameters(self.mat)
        fe = -hex_element_stiffness(lam, mu, h) @ u_ref.ravel()
        w = element_weights(grid, self.mat)
        edof = element_dofs(n, periodic=True)
        b = np.bincount(edof.ravel(), weights=(w[:, None] * fe).ravel(),
                        minlength=self.K.shape[0])
        fixed = np.arange(3)
        A, diag = self._system("periodic", fixed)
        b[fixed] = 0.0
        M = self.precond.get("periodic", A)
        ut, res, its = _pcg(A, b, M, tol, max_iters)
        if not res <= tol:
            raise NotConverged(res, its)
        # total displacement on the full (n+1)^3 node lattice
        x = node_coordinates(n, grid.cell_size_mm)
        per = _node_ids(n, periodic=True).ravel(order="F")
        u = x @ eps.T + ut.reshape(-1, 3)[per]
        return DisplacementField(u, res, its, case, self.bc)


def solve_case(grid, mat, case, tol=DEFAULT_TOL, max_iters=None, bc="kinematic",
               preconditioner="amg"):
    """Displacement field of one prescribed-strain load case."""
    return VoxelProblem(grid, mat, bc, preconditioner).solve(case, tol, max_iters)


def average_stress(grid, mat, field):
    """Volume-averaged stress (Voigt, GPa) over the whole cell, ersatz voxels included."""
    n = grid.resolution
    lam, mu = lame_parameters(mat)
    D = isotropic_matrix(lam, mu)
    Bc = strain_displacement(np.full(3, 0.5), grid.pitch)
    u = np.asarray(field.values).ravel()
    w = element_weights(grid, mat)
    edof = element_dofs(n)
    # element-mean strain of a trilinear hex equals its center value
    s = np.zeros(24)
    for start in range(0, len(edof), 1 << 16):
        blk = slice(start, start + (1 << 16))
        s += w[blk] @ u[edof[blk]]
    return D @ (Bc @ s) / n ** 3


def homogenize(grid, mat, strain_magnitude=DEFAULT_STRAIN, tol=DEFAULT_TOL, bc="kinematic",
               max_iters=None, preconditioner="amg"):
    """Effective 6x6 stiffness from six unit-strain solves.

    Column j is the averaged stress of load case j divided by the applied
    strain. The raw asymmetry ``max|C - C^T| / C11`` is recorded before the
    matrix is symmetrized.
    """
    problem = VoxelProblem(grid, mat, bc, preconditioner)
    C = np.zeros((6, 6))
    iterations, residuals = [], []
    for j in range(1, 7):
        case = LoadCase(j, strain_magnitude)
        fld = problem.solve(case, tol, max_iters)
        C[:, j - 1] = average_stress(grid, mat, fld) / strain_magnitude
        iterations.append(fld.iterations)
        residuals.append(fld.converged_residual)
    asym = float(np.abs(C - C.T).max() / C[0, 0])
    meta = {
        "resolution": grid.resolution,
        "tol": tol,
        "iterations": iterations,
        "residuals": residuals,
        "asymmetry": asym,
        "bc_family": bc,
        "strain_magnitude": strain_magnitude,
        "preconditioner": preconditioner,
        "material": {"youngs_modulus_gpa": mat.youngs_modulus_gpa,
                     "poisson_ratio": mat.poisson_ratio,
                     "void_contrast": mat.void_contrast},
    }
    return StiffnessMatrix(0.5 * (C + C.T), asym, meta)
