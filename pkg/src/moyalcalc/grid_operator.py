"""Dense matrices on a truncated position lattice (tensored with spinors).

Operator lattice nodes are r = -R + (k + 1/2) h, k = 0..m-1, with m even
so that no node sits at the origin.  In this picture x = U(f) acts by

    (U(f) xi)(r) = h^d sum_{r'} f(r - r') e^{(i/2)(r - r', theta r)} xi(r'),

which satisfies U(f) U(g) = U(f *_theta g) and U(f)* = U(f^theta).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import make_interp_spline

from .core_algebra import QElement, SymbolGrid, ThetaMatrix
from .errors import ValidationError

DUMP_MAGIC = b"MQOP"
_HEADER = struct.Struct("<4sIIII4xd")  # magic, version, d, m, N, pad, R -> 32 bytes

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class OperatorGrid:
    d: int
    m: int
    R: float

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"grid dimension must be positive, got {self.d}")
        if self.m < 2 or self.m % 2:
            raise ValidationError(f"points per axis must be even (half-offset lattice), got m={self.m}")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ValidationError(f"halfwidth must be positive, got R={self.R}")

    @classmethod
    def from_spacing(cls, d: int, m: int, h: float) -> OperatorGrid:
        return cls(d, m, m * h / 2.0)

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.m

    @property
    def offset(self) -> float:
        return self.h / 2.0

    @property
    def size(self) -> int:
        return self.m**self.d

    def axis(self) -> np.ndarray:
        return -self.R + (np.arange(self.m) + 0.5) * self.h

    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*([self.axis()] * self.d), indexing="ij"), -1).reshape(-1, self.d)

    def indices(self) -> np.ndarray:
        return np.stack(
            np.meshgrid(*([np.arange(self.m)] * self.d), indexing="ij"), -1
        ).reshape(-1, self.d)

    def difference_grid(self) -> SymbolGrid:
        """Symbol grid on which every difference r - r' is a node."""
        return SymbolGrid.from_spacing(self.d, 2 * self.m - 1, self.h)


@dataclass(frozen=True, eq=False)
class GridOperator:
    """Operator on C^N (x) l2(lattice); spin index is the slow one."""

    grid: OperatorGrid
    spin: int
    data: np.ndarray
    diagonal: bool = False
    hermitian: bool = False
    unitary: bool = False

    def __post_init__(self):
        dim = self.spin * self.grid.size
        want = (dim,) if self.diagonal else (dim, dim)
        if self.data.shape != want:
            raise ValidationError(f"operator data has shape {self.data.shape}, expected {want}")
        self.data.setflags(write=False)
        if self.hermitian and self.hermitian_defect() > 1e-10:
            raise ValidationError(f"operator flagged hermitian has defect {self.hermitian_defect():.3g}")
        if self.unitary and self.unitary_defect() > 1e-10:
            raise ValidationError(f"operator flagged unitary has defect {self.unitary_defect():.3g}")

    @property
    def dim(self) -> int:
        return self.spin * self.grid.size

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.data) if self.diagonal else self.data

    def norm(self) -> float:
        if self.diagonal:
            return float(np.abs(self.data).max())
        return float(np.linalg.norm(self.data, 2))

    def hermitian_defect(self) -> float:
        if self.diagonal:
            scale = np.abs(self.data).max() or 1.0
            return float(np.abs(self.data.imag).max() / scale)
        A = self.data
        scale = np.linalg.norm(A, 2) or 1.0
        return float(np.linalg.norm(A - A.conj().T, 2) / scale)

    def unitary_defect(self) -> float:
        if self.diagonal:
            return float(np.abs(np.abs(self.data) - 1.0).max())
        A = self.data
        return float(np.linalg.norm(A.conj().T @ A - np.eye(A.shape[0]), 2))

    def dagger(self) -> GridOperator:
        return GridOperator(self.grid, self.spin, self.data.conj() if self.diagonal else self.data.conj().T, self.diagonal)

    def __matmul__(self, other: GridOperator) -> GridOperator:
        if other.grid != self.grid or other.spin != self.spin:
            raise ValidationError("operators act on different spaces")
        if self.diagonal and other.diagonal:
            return GridOperator(self.grid, self.spin, self.data * other.data, True)
        if self.diagonal:
            return GridOperator(self.grid, self.spin, self.data[:, None] * other.data)
        if other.diagonal:
            return GridOperator(self.grid, self.spin, self.data * other.data[None, :])
        return GridOperator(self.grid, self.spin, self.data @ other.data)

    def dump(self, path) -> None:
        """Binary dump: 32-byte header then row-major complex128 pairs."""
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(DUMP_MAGIC, 1, self.grid.d, self.grid.m, self.spin, float(self.grid.R)))
            fh.write(np.ascontiguousarray(self.matrix, dtype="<c16").tobytes())


def load_dump(path) -> GridOperator:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, _, d, m, N, R = _HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC:
        raise ValidationError(f"{path}: not an operator dump")
    grid = OperatorGrid(d, m, R)
    dim = N * grid.size
    A = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(dim, dim).copy()
    return GridOperator(grid, N, A)


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------


def _difference_table(x: QElement, grid: OperatorGrid, interpolate: bool) -> np.ndarray:
    """f sampled at the (2m-1)^d lattice of differences k h_op, |k_i| < m."""
    sg = x.grid
    d, m = grid.d, grid.m
    ratio = grid.h / sg.h
    j = round(ratio)
    ks = np.arange(-(m - 1), m)
    if j >= 1 and abs(ratio - j) <= 1e-12 * ratio:
        idx = ks * j + sg.center
        ok = (idx >= 0) & (idx < sg.n)
        table = np.zeros((2 * m - 1,) * d, dtype=complex)
        sub = x.symbol.samples[np.ix_(*([idx[ok]] * d))]
        table[np.ix_(*([np.flatnonzero(ok)] * d))] = sub
        return table
    if not interpolate:
        raise ValidationError(
            f"operator spacing {grid.h:g} is not an integer multiple of symbol spacing {sg.h:g}; "
            "enable interpolation"
        )
    src = sg.axis()
    dst = ks * grid.h
    inside = (dst >= src[0]) & (dst <= src[-1])
    out = x.symbol.samples
    for k in range(d):
        spl = make_interp_spline(src, np.moveaxis(out, k, 0), k=3)
        vals = np.where(inside.reshape((-1,) + (1,) * (d - 1)), spl(np.clip(dst, src[0], src[-1])), 0.0)
        out = np.moveaxis(vals, 0, k)
    return out


def twisted_kernel(table: np.ndarray, theta: np.ndarray, grid: OperatorGrid, weight: float) -> np.ndarray:
    """A[r, r'] = weight * table[r - r'] * e^{(i/2)(r - r', theta r)}, assembled row slab by row slab."""
    d, m = grid.d, grid.m
    idx = grid.indices()
    r = grid.points()
    N = grid.size
    A = np.empty((N, N), dtype=complex)
    slab = m ** (d - 1)
    for s in range(m):
        rows = slice(s * slab, (s + 1) * slab)
        di = idx[rows, None, :] - idx[None, :, :] + (m - 1)
        vals = table[tuple(di[..., k] for k in range(d))]
        a = r[rows, None, :] - r[None, :, :]
        ph = np.einsum("pqk,pk->pq", a, r[rows] @ theta.T)
        A[rows] = weight * vals * np.exp(0.5j * ph)
    return A


def quantize(x: QElement, grid: OperatorGrid, interpolate: bool = False) -> GridOperator:
    """Matrix of U(f) on the operator lattice, quadrature weight h_op^d."""
    if x.d != grid.d:
        raise ValidationError("element and grid dimensions differ")
    table = _difference_table(x, grid, interpolate)
    A = twisted_kernel(table, x.theta.entries, grid, grid.h**grid.d)
    return GridOperator(grid, 1, A)


def weyl_unitary(grid: OperatorGrid, theta: ThetaMatrix, shift) -> GridOperator:
    """Lattice U(t) for t = shift * h: (U(t) xi)(r) = e^{(i/2)(t, theta r)} xi(r - t), zero padded."""
    k = np.asarray(shift, dtype=int)
    if k.shape != (grid.d,):
        raise ValidationError(f"shift must have length {grid.d}")
    idx = grid.indices()
    src = idx - k
    ok = np.all((src >= 0) & (src < grid.m), axis=1)
    flat = np.ravel_multi_index(tuple(src[ok].T), (grid.m,) * grid.d)
    t = k * grid.h
    A = np.zeros((grid.size, grid.size), dtype=complex)
    A[np.flatnonzero(ok), flat] = np.exp(0.5j * (grid.points()[ok] @ theta.entries.T) @ t)
    return GridOperator(grid, 1, A)


def multiplier(g: Callable[[np.ndarray], np.ndarray], grid: OperatorGrid) -> GridOperator:
    """Diagonal M_g; g receives the (m^d, d) array of nodes."""
    pts = grid.points()
    vals = np.asarray(g(pts), dtype=complex).reshape(-1)
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise ValidationError(f"multiplier is not finite at node {pts[k].tolist()}")
    return GridOperator(grid, 1, vals, diagonal=True)


def gamma_matrices(d: int) -> list[np.ndarray]:
    """Hermitian generators of the Clifford algebra, size 2^(d//2)."""
    if d < 2:
        raise ValidationError(f"need d >= 2, got {d}")
    if d == 2:
        return [PAULI[0], PAULI[1]]
    if d == 3:
        return list(PAULI)
    inner = gamma_matrices(d - 2)
    eye = np.eye(inner[0].shape[0])
    return [np.kron(g, PAULI[0]) for g in inner] + [np.kron(eye, PAULI[1]), np.kron(eye, PAULI[2])]


def _unit_directions(grid: OperatorGrid) -> np.ndarray:
    r = grid.points()
    norm = np.linalg.norm(r, axis=1)
    if np.any(norm == 0):
        raise ValidationError("operator grid contains the origin; sgn(D) is undefined there")
    return r / norm[:, None]


def dirac_sign(grid: OperatorGrid, d: int | None = None) -> GridOperator:
    """F = sum_j gamma_j (x) diag(r_j / |r|)."""
    if d is not None and d != grid.d:
        raise ValidationError(f"requested d={d} but grid is {grid.d}-dimensional")
    u = _unit_directions(grid)
    gam = gamma_matrices(grid.d)
    F = sum(np.kron(g, np.diag(u[:, j])) for j, g in enumerate(gam))
    return GridOperator(grid, gam[0].shape[0], F)


def bessel_power(grid: OperatorGrid, alpha: float) -> GridOperator:
    """J^alpha = diag((1 + |r|^2)^(alpha/2))."""
    r2 = np.sum(grid.points() ** 2, axis=1)
    return GridOperator(grid, 1, (1.0 + r2) ** (alpha / 2.0) + 0j, diagonal=True)


def _jvec(grid: OperatorGrid) -> np.ndarray:
    return np.sqrt(1.0 + np.sum(grid.points() ** 2, axis=1))


def quantized_differential(x: QElement, grid: OperatorGrid, A: GridOperator | None = None) -> GridOperator:
    """dbar x = i [F, 1 (x) A] = i sum_j gamma_j (x) [E_j, A], E_j = diag(r_j/|r|)."""
    A = quantize(x, grid) if A is None else A
    u = _unit_directions(grid)
    gam = gamma_matrices(grid.d)
    a = A.matrix
    out = 0
    for j, g in enumerate(gam):
        C = u[:, j, None] * a - a * u[None, :, j]
        out = out + np.kron(g, 1j * C)
    return GridOperator(grid, gam[0].shape[0], out)


def quantized_differential_blocks(x: QElement, grid: OperatorGrid, A: GridOperator | None = None):
    """For d = 2: dbar x = [[0, i[E*, A]], [i[E, A], 0]] with E = diag((r_1 + i r_2)/|r|).

    Returns the lower block i[E, A] and the upper block i[E*, A].
    """
    if grid.d != 2:
        raise ValidationError("block form of dbar x is specific to d = 2")
    A = quantize(x, grid) if A is None else A
    u = _unit_directions(grid)
    e = u[:, 0] + 1j * u[:, 1]
    a = A.matrix
    lower = 1j * (e[:, None] * a - a * e[None, :])
    ec = e.conj()
    upper = 1j * (ec[:, None] * a - a * ec[None, :])
    return lower, upper


def commutator_operator(
    x: QElement, alpha: float, beta: float, grid: OperatorGrid, k: int = 0, A: GridOperator | None = None
) -> GridOperator:
    """[J^alpha, delta^k(A)] J^{-beta} with delta(T) = [J, T]."""
    A = quantize(x, grid) if A is None else A
    j = _jvec(grid)
    ja = j**alpha
    w = (ja[:, None] - ja[None, :]) * (j[:, None] - j[None, :]) ** k * (j**-beta)[None, :]
    return GridOperator(grid, 1, w * A.matrix)


def delta(T: GridOperator) -> GridOperator:
    """delta(T) = [J, T]."""
    j = _jvec(T.grid)
    return GridOperator(T.grid, 1, (j[:, None] - j[None, :]) * T.matrix)


def L_operator(T: GridOperator) -> GridOperator:
    """L(T) = J^{-1} [J^2, T]."""
    j = _jvec(T.grid)
    return GridOperator(T.grid, 1, ((j**2)[:, None] - (j**2)[None, :]) / j[:, None] * T.matrix)


def kron_identity(N: int, A: GridOperator) -> GridOperator:
    return GridOperator(A.grid, N, np.kron(np.eye(N), A.matrix))


def commutator(X: GridOperator, Y: GridOperator) -> GridOperator:
    return GridOperator(X.grid, X.spin, (X @ Y).matrix - (Y @ X).matrix)

