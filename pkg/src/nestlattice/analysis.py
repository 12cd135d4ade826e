"""Cubic elastic constants, anisotropy measures and trend fits."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DegenerateInput, NonPositiveData, SingularFit
from .voxel import TriMesh


class AnisotropyClass(str, enum.Enum):
    TCD = "TCD"
    NEO_ISOTROPIC = "NeoIsotropic"
    PERFECTLY_ISOTROPIC = "PerfectlyIsotropic"
    SD = "SD"


@dataclass(frozen=True)
class CubicConstants:
    c11: float
    c12: float
    c44: float
    deviation: float = 0.0


@dataclass(frozen=True)
class FitResult:
    coefficients: dict
    r_squared: float
    model: str = ""

    def __getitem__(self, key):
        return self.coefficients[key]


def cubic_template(c11, c12, c44):
    C = np.zeros((6, 6))
    C[:3, :3] = c12
    C[range(3), range(3)] = c11
    C[range(3, 6), range(3, 6)] = c44
    return C


def cubic_project(c):
    """Average a 6x6 stiffness onto the cubic template.

    ``deviation`` is the largest entry-wise departure from the template,
    relative to the projected ``c11``.
    """
    C = np.asarray(getattr(c, "c", c), dtype=float)
    c11 = float(np.mean([C[0, 0], C[1, 1], C[2, 2]]))
    c12 = float(np.mean([C[0, 1], C[0, 2], C[1, 2]]))
    c44 = float(np.mean([C[3, 3], C[4, 4], C[5, 5]]))
    if not c11 > abs(c12):
        raise DegenerateInput(f"need c11 > |c12|, got c11={c11:.4g}, c12={c12:.4g}")
    dev = float(np.abs(C - cubic_template(c11, c12, c44)).max() / c11)
    return CubicConstants(c11, c12, c44, dev)


def modulus_axis(cc):
    """Young's modulus along a cube axis from the expanded cubic expression.

    The polynomial is evaluated in exact rational arithmetic: near
    ``c12 -> c11`` the float version cancels catastrophically.
    """
    c11, c12 = cc.c11, cc.c12
    if not c11 > abs(c12):
        raise DegenerateInput("need c11 > |c12|")
    a, b = Fraction(c11), Fraction(c12)
    return float((a ** 3 + 2 * b ** 3 - 3 * a * b ** 2) / (a ** 2 - b ** 2))


def modulus_axis_factored(cc):
    c11, c12 = cc.c11, cc.c12
    if not c11 > abs(c12):
        raise DegenerateInput("need c11 > |c12|")
    return (c11 - c12) * (c11 + 2 * c12) / (c11 + c12)


def zener(cc):
    if cc.c11 == cc.c12:
        raise DegenerateInput("Zener ratio undefined for c11 == c12")
    return cc.c44 / ((cc.c11 - cc.c12) / 2.0)


def normalized_modulus(e, e_s):
    if not e_s > 0:
        raise DegenerateInput("base modulus must be positive")
    return e / e_s


def classify(z):
    """Anisotropy class of a Zener ratio.

    The isotropic band is open, (0.950, 1.050); the neo-isotropic bands
    [0.900, 0.950] and [1.050, 1.100] are closed and take the shared
    endpoints.
    """
    if not z > 0:
        raise DegenerateInput("Zener ratio must be positive")
    if 0.950 < z < 1.050:
        return AnisotropyClass.PERFECTLY_ISOTROPIC
    if 0.900 <= z <= 1.100:
        return AnisotropyClass.NEO_ISOTROPIC
    return AnisotropyClass.TCD if z < 0.900 else AnisotropyClass.SD


def compliance(cc):
    """Cubic compliances ``(s11, s12, s44)``."""
    c11, c12, c44 = cc.c11, cc.c12, cc.c44
    det = (c11 - c12) * (c11 + 2 * c12)
    if det == 0 or c44 == 0:
        raise DegenerateInput("cubic stiffness is singular")
    return (c11 + c12) / det, -c12 / det, 1.0 / c44


def stiffness_from_compliance(s):
    s11, s12, s44 = s
    S = cubic_template(s11, s12, s44)
    C = np.linalg.inv(S)
    return CubicConstants(C[0, 0], C[0, 1], C[3, 3])


def directional_modulus(s, n):
    """Young's modulus along unit direction(s) ``n`` for cubic compliances ``s``.

    ``n`` may be a single 3-vector or an array with a trailing axis of 3.
    """
    s11, s12, s44 = s
    n = np.asarray(n, dtype=float)
    norm = np.linalg.norm(n, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-9):
        raise DegenerateInput("direction must be a unit vector")
    a, b, c = n[..., 0] ** 2, n[..., 1] ** 2, n[..., 2] ** 2
    inv = s11 - 2.0 * (s11 - s12 - s44 / 2.0) * (a * b + b * c + c * a)
    if np.any(inv <= 0):
        raise DegenerateInput("directional compliance is not positive")
    e = 1.0 / inv
    return float(e) if np.ndim(e) == 0 else e


def icosphere(subdivisions=0):
    """Unit icosphere with ``20 * 4**subdivisions`` outward-wound triangles."""
    if subdivisions < 0:
        raise ValueError("subdivisions must be >= 0")
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(verts), np.array(faces, dtype=np.int64)


def ymsurface_mesh(cc, e_s, subdivisions=3):
    """Directional Young's modulus surface, radius ``E(n) / e_s`` along each vertex direction."""
    dirs, faces = icosphere(subdivisions)
    radii = directional_modulus(compliance(cc), dirs) / e_s
    return TriMesh(dirs * np.asarray(radii)[:, None], faces, watertight=True)


def _r_squared(y, yhat):
    y = np.asarray(y, float)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - yhat) ** 2))
    if ss_tot == 0.0:
        # constant data: every exact fit explains it fully
        return 1.0 if ss_res <= 1e-24 else 0.0
    return 1.0 - ss_res / ss_tot


def fit_polynomial(xs, ys, degree):
    """Least-squares polynomial of degree 2 (a, b, c) or 3 (p, q, r, s), highest power first."""
    names = {2: ("a", "b", "c"), 3: ("p", "q", "r", "s")}
    if degree not in names:
        raise ValueError("degree must be 2 or 3")
    x = np.asarray(xs, float)
    y = np.asarray(ys, float)
    if len(x) != len(y) or len(x) < degree + 1:
        raise SingularFit(f"need at least {degree + 1} points")
    V = np.vander(x, degree + 1)
    if np.linalg.matrix_rank(V) < degree + 1:
        raise SingularFit("Vandermonde system is rank deficient")
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    r2 = _r_squared(y, V @ coef)
    return FitResult(dict(zip(names[degree], map(float, coef))), r2, f"poly{degree}")


def fit_power_law(rho_bars, e_bars):
    """Fit ``E/E_s = c * rho**n`` by linear least squares in log-log space."""
    x = np.asarray(rho_bars, float)
    y = np.asarray(e_bars, float)
    if len(x) != len(y) or len(x) < 2:
        raise NonPositiveData("need at least two paired points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise NonPositiveData("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise SingularFit("all densities are equal")
    A = np.column_stack([lx, np.ones_like(lx)])
    (n, logc), *_ = np.linalg.lstsq(A, ly, rcond=None)
    r2 = _r_squared(ly, A @ np.array([n, logc]))
    return FitResult({"c": float(math.exp(logc)), "n": float(n)}, r2, "power")


def spacing_abscissa(indices, spacing_mm, cell_size_mm):
    """Normalized spacing ``i * alpha / L0`` used as the abscissa of nesting-order trends."""
    return [i * spacing_mm / cell_size_mm for i in indices]


@dataclass
class AnisotropyReport:
    design_name: str
    cubic: CubicConstants
    e_gpa: float
    e_bar: float
    zener: float
    anisotropy_class: AnisotropyClass
    rho_bar: float
    s_bar: float
    s_bar_cell: float = float("nan")
    resolution: int = 0
    bc_family: str = "kinematic"
    material: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    CSV_COLUMNS = ("name", "n", "rho_bar", "s_bar", "c11", "c12", "c44", "e_gpa", "e_bar",
                   "zener", "class", "bc_family", "s_bar_cell")

    def csv_row(self):
        return [self.design_name, self.resolution, self.rho_bar, self.s_bar, self.cubic.c11,
                self.cubic.c12, self.cubic.c44, self.e_gpa, self.e_bar, self.zener,
                self.anisotropy_class.value, self.bc_family, self.s_bar_cell]

    def to_dict(self):
        return {
            "name": self.design_name,
            "n": self.resolution,
            "rho_bar": self.rho_bar,
            "s_bar": self.s_bar,
            "s_bar_cell": self.s_bar_cell,
            "c11": self.cubic.c11,
            "c12": self.cubic.c12,
            "c44": self.cubic.c44,
            "cubic_deviation": self.cubic.deviation,
            "e_gpa": self.e_gpa,
            "e_bar": self.e_bar,
            "zener": self.zener,
            "class": self.anisotropy_class.value,
            "bc_family": self.bc_family,
            "material": self.material,
            "metadata": self.metadata,
        }


def analyze(stiffness, e_s, name="", rho_bar=float("nan"), s_bar=float("nan"), **extra):
    """Build an :class:`AnisotropyReport` from a stiffness matrix."""
    cc = cubic_project(stiffness)
    e = modulus_axis(cc)
    z = zener(cc)
    meta = dict(getattr(stiffness, "metadata", {}) or {})
    return AnisotropyReport(
        design_name=name, cubic=cc, e_gpa=e, e_bar=normalized_modulus(e, e_s), zener=z,
        anisotropy_class=classify(z), rho_bar=rho_bar, s_bar=s_bar,
        resolution=meta.get("resolution", 0), bc_family=meta.get("bc_family", "kinematic"),
        material=meta.get("material", {}), metadata=meta, **extra)
