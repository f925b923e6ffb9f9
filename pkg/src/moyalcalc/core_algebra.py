"""Symbol-level algebra of the quantum Euclidean space R^d_theta.

An element x = U(f) is stored through its symbol f sampled on an
origin-centred uniform grid.  Products become twisted convolutions,
the adjoint becomes f -> conj(f(-s)), and the trace reads off f(0).
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.special import eval_hermite

from .errors import CapabilityError, SupportWarning, ValidationError

TWO_PI = 2.0 * math.pi
_SYMPLECTIC = np.array([[0.0, -1.0], [1.0, 0.0]])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# theta
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CanonicalForm:
    O: np.ndarray
    d1: int
    hbars: tuple[float, ...]

    def blocks(self) -> np.ndarray:
        d = self.O.shape[0]
        B = np.zeros((d, d))
        for i, hb in enumerate(self.hbars):
            k = self.d1 + 2 * i
            B[k : k + 2, k : k + 2] = hb * _SYMPLECTIC
        return B


@dataclass(frozen=True, eq=False)
class ThetaMatrix:
    """Antisymmetric deformation matrix, [x_j, x_k] = i theta_jk."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValidationError(f"theta must be square, got shape {e.shape}")
        if e.shape[0] < 2:
            raise ValidationError("theta dimension must be at least 2")
        if not np.all(np.isfinite(e)):
            raise ValidationError("theta has non-finite entries")
        if not np.array_equal(e, -e.T):
            j, k = np.argwhere(e != -e.T)[0]
            raise ValidationError(
                f"theta is not antisymmetric: entries[{j}][{k}]={e[j, k]:g} "
                f"but entries[{k}][{j}]={e[k, j]:g}"
            )
        object.__setattr__(self, "entries", _frozen(e))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def zero(cls, d: int) -> ThetaMatrix:
        return cls(np.zeros((d, d)))

    @classmethod
    def standard(cls, hbar: float = 1.0) -> ThetaMatrix:
        """hbar * [[0, -1], [1, 0]]."""
        return cls(hbar * _SYMPLECTIC)

    @classmethod
    def parse(cls, spec) -> ThetaMatrix:
        """Accept 'standard2', 'zeroD', 'standard2:HBAR' or a nested list."""
        if isinstance(spec, ThetaMatrix):
            return spec
        if isinstance(spec, str):
            name, _, arg = spec.partition(":")
            if name == "standard2":
                return cls.standard(float(arg) if arg else 1.0)
            if name.startswith("zero"):
                try:
                    return cls.zero(int(name[4:] or 2))
                except ValueError:
                    pass
            raise ValidationError(f"unknown theta spec {spec!r}")
        return cls(np.asarray(spec, dtype=float))

    def scaled(self, c: float) -> ThetaMatrix:
        return ThetaMatrix(c * self.entries)

    @property
    def canonical(self) -> CanonicalForm:
        cf = self.__dict__.get("_canonical")
        if cf is None:
            cf = CanonicalForm(*theta_canonical_form(self))
            object.__setattr__(self, "_canonical", cf)
        return cf

    @property
    def is_zero(self) -> bool:
        return not np.any(self.entries)

    def __repr__(self):
        return f"ThetaMatrix({self.entries.tolist()!r})"


def theta_canonical_form(theta: ThetaMatrix | np.ndarray):
    """Return (O, d1, hbars) with O.T @ theta @ O block diagonal.

    The first d1 rows/columns are zero; block i is hbars[i] * [[0,-1],[1,0]].
    """
    if not isinstance(theta, ThetaMatrix):
        theta = ThetaMatrix(theta)
    th = theta.entries
    d = th.shape[0]
    scale = np.abs(th).max()
    if scale == 0.0:
        return np.eye(d), d, ()
    tol = 1e-13 * scale * d

    T, Z = scipy.linalg.schur(th, output="real")
    kernel, planes = [], []
    k = 0
    while k < d:
        if k + 1 < d and abs(T[k + 1, k]) > tol:
            hb = 0.5 * (abs(T[k + 1, k]) + abs(T[k, k + 1]))
            planes.append((hb, Z[:, k : k + 2]))
            k += 2
        else:
            kernel.append(Z[:, k])
            k += 1

    # Deterministic basis inside each plane: start from the standard basis
    # vector with the largest projection, then v = theta u / hbar.
    planes.sort(key=lambda p: -p[0])
    cols, hbars = [], []
    for hb, P in planes:
        proj = P @ P.T
        j = int(np.argmax(np.einsum("ij,ij->j", proj, proj) - 1e-12 * np.arange(d)))
        u = proj[:, j] / np.linalg.norm(proj[:, j])
        v = th @ u
        hb = float(np.linalg.norm(v))
        cols += [u, v / hb]
        hbars.append(hb)
    if kernel:
        K = np.column_stack(kernel)
        Q, _ = np.linalg.qr(K)
        for i in range(Q.shape[1]):
            if Q[np.argmax(np.abs(Q[:, i])), i] < 0:
                Q[:, i] = -Q[:, i]
        cols = list(Q.T) + cols
    O = np.column_stack(cols)
    if hbars and np.allclose(O, np.eye(d), atol=1e-14):
        O = np.eye(d)
    return O, len(kernel), tuple(hbars)


# ---------------------------------------------------------------------------
# grids and symbols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolGrid:
    """Origin-centred grid with n (odd) nodes per axis on [-R, R)^d."""

    d: int
    n: int
    R: float

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"grid dimension must be positive, got {self.d}")
        if self.n < 1 or self.n % 2 == 0:
            raise ValidationError(f"points per axis must be odd so 0 is a node, got n={self.n}")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ValidationError(f"halfwidth must be positive, got R={self.R}")

    @classmethod
    def from_spacing(cls, d: int, n: int, h: float) -> SymbolGrid:
        return cls(d, n, n * h / 2.0)

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.n

    @property
    def center(self) -> int:
        return (self.n - 1) // 2

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def axis(self) -> np.ndarray:
        return (np.arange(self.n) - self.center) * self.h

    def coords(self) -> list[np.ndarray]:
        """Open-mesh coordinate arrays, broadcastable to `shape`."""
        ax = self.axis()
        out = []
        for k in range(self.d):
            s = [1] * self.d
            s[k] = self.n
            out.append(ax.reshape(s))
        return out

    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*([self.axis()] * self.d), indexing="ij"), -1).reshape(-1, self.d)

    def scaled(self, c: float) -> SymbolGrid:
        return SymbolGrid(self.d, self.n, self.R * c)


@dataclass(frozen=True)
class Family:
    name: str
    params: tuple = ()

    def as_dict(self) -> dict:
        return dict(self.params)


def _norm_params(params: Mapping | None) -> tuple:
    out = []
    for k, v in sorted((params or {}).items()):
        if isinstance(v, (list, np.ndarray)):
            v = tuple(np.asarray(v).tolist())
        out.append((k, v))
    return tuple(out)


def _per_axis(v, d: int) -> np.ndarray:
    a = np.atleast_1d(np.asarray(v, dtype=float))
    return np.broadcast_to(a, (d,)) if a.size == 1 else a


def family_values(name: str, params: Mapping, coords: Sequence[np.ndarray]):
    """Closed-form family evaluated at broadcastable coordinate arrays."""
    d = len(coords)
    p = dict(params)
    amp = complex(p.get("amplitude", 1.0))
    if name == "gaussian":
        sig = _per_axis(p.get("sigma", 1.0), d)
        q = sum((c / s) ** 2 for c, s in zip(coords, sig))
        return amp * np.exp(-0.5 * q)
    if name == "hermite-gaussian":
        sig = _per_axis(p.get("sigma", 1.0), d)
        orders = list(p.get("orders", [2] + [0] * (d - 1)))
        if len(orders) != d:
            raise ValidationError(f"hermite-gaussian needs {d} orders, got {orders}")
        val = amp * np.exp(-0.5 * sum((c / s) ** 2 for c, s in zip(coords, sig)))
        for c, s, k in zip(coords, sig, orders):
            val = val * eval_hermite(int(k), c / s)
        return val
    if name == "bump":
        a = float(p.get("radius", 3.0))
        q = sum(c * c for c in coords) / (a * a)
        inside = q < 1.0
        qs = np.where(inside, q, 0.0)
        return amp * np.where(inside, np.exp(1.0 - 1.0 / (1.0 - qs)), 0.0)
    raise ValidationError(f"unknown symbol family {name!r}")


FAMILIES = ("gaussian", "hermite-gaussian", "bump", "file")


@dataclass(frozen=True, eq=False)
class Symbol:
    grid: SymbolGrid
    samples: np.ndarray
    family: Family | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.size != self.grid.n**self.grid.d:
            raise ValidationError(
                f"symbol has {s.size} samples, grid needs {self.grid.n ** self.grid.d}"
            )
        object.__setattr__(self, "samples", _frozen(s.reshape(self.grid.shape)))

    @classmethod
    def from_family(cls, name: str, grid: SymbolGrid, **params) -> Symbol:
        vals = family_values(name, params, grid.coords())
        vals = np.broadcast_to(vals, grid.shape)
        return cls(grid, vals, Family(name, _norm_params(params)))

    @classmethod
    def from_function(cls, grid: SymbolGrid, fn: Callable[..., np.ndarray]) -> Symbol:
        return cls(grid, np.broadcast_to(fn(*grid.coords()), grid.shape))

    @classmethod
    def delta(cls, grid: SymbolGrid) -> Symbol:
        """Lattice identity for the twisted product: 1/h^d at the origin."""
        s = np.zeros(grid.shape, dtype=complex)
        s[(grid.center,) * grid.d] = grid.h ** (-grid.d)
        return cls(grid, s)

    def with_samples(self, samples) -> Symbol:
        return Symbol(self.grid, samples)

    def evaluate(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        """Closed-form values at arbitrary nodes; needs a family tag."""
        if self.family is None or self.family.name == "file":
            raise CapabilityError("closed-form evaluation needs a built-in family tag")
        return family_values(self.family.name, self.family.as_dict(), coords)

    def resample(self, grid: SymbolGrid) -> Symbol:
        if self.family is None or self.family.name == "file":
            raise CapabilityError("resampling needs a built-in family tag")
        return Symbol.from_family(self.family.name, grid, **self.family.as_dict())

    def __add__(self, other: Symbol) -> Symbol:
        _same_grid(self, other)
        return Symbol(self.grid, self.samples + other.samples)

    def __sub__(self, other: Symbol) -> Symbol:
        _same_grid(self, other)
        return Symbol(self.grid, self.samples - other.samples)

    def __mul__(self, c) -> Symbol:
        return Symbol(self.grid, self.samples * c)

    __rmul__ = __mul__

    def l2(self) -> float:
        """(h^d sum |f|^2)^(1/2)."""
        return math.sqrt(self.grid.h**self.grid.d * float(np.sum(np.abs(self.samples) ** 2)))

    def integral(self) -> complex:
        return complex(self.grid.h**self.grid.d * self.samples.sum())

    def outer_mass(self) -> float:
        """max |f| outside [-R/2, R/2]^d relative to max |f|."""
        peak = np.abs(self.samples).max()
        if peak == 0:
            return 0.0
        outside = np.zeros(self.grid.shape, dtype=bool)
        for c in self.grid.coords():
            outside |= np.abs(c) > self.grid.R / 2
        return float(np.abs(self.samples[outside]).max(initial=0.0) / peak)


def _same_grid(f: Symbol, g: Symbol):
    if f.grid != g.grid:
        raise ValidationError(f"symbols live on different grids: {f.grid} vs {g.grid}")


def write_symbol(path, sym: Symbol) -> None:
    g = sym.grid
    flat = sym.samples.reshape(-1)
    with open(path, "w") as fh:
        fh.write(f"{g.d} {g.n} {float(g.R)!r}\n")
        fh.writelines(f"{float(z.real)!r} {float(z.imag)!r}\n" for z in flat)


def read_symbol(path) -> Symbol:
    path = Path(path)
    lines = path.read_text().split("\n")
    try:
        d, n, R = lines[0].split()
        d, n, R = int(d), int(n), float(R)
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"{path}: header must be 'd n R'") from exc
    grid = SymbolGrid(d, n, R)
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n**d:
        raise ValidationError(f"{path}: header announces {n ** d} samples, file has {len(body)}")
    try:
        vals = np.array([[float(v) for v in ln.split()] for ln in body])
    except ValueError as exc:
        raise ValidationError(f"{path}: sample lines must be 're im'") from exc
    if vals.shape != (n**d, 2):
        raise ValidationError(f"{path}: sample lines must have exactly two columns")
    return Symbol(grid, vals[:, 0] + 1j * vals[:, 1], Family("file", (("path", str(path)),)))


@dataclass(frozen=True, eq=False)
class QElement:
    """x = U(f) over a fixed theta."""

    theta: ThetaMatrix
    symbol: Symbol

    def __post_init__(self):
        if self.theta.d != self.symbol.grid.d:
            raise ValidationError(
                f"theta is {self.theta.d}-dimensional but the symbol grid is {self.symbol.grid.d}-dimensional"
            )

    @property
    def d(self) -> int:
        return self.theta.d

    @property
    def grid(self) -> SymbolGrid:
        return self.symbol.grid

    def with_symbol(self, sym: Symbol) -> QElement:
        return QElement(self.theta, sym)

    def adjoint(self) -> QElement:
        return QElement(self.theta, theta_involution(self.symbol))

    def __matmul__(self, other: QElement) -> QElement:
        return QElement(self.theta, twisted_convolve(self.symbol, other.symbol, self.theta))

    def __add__(self, other: QElement) -> QElement:
        return QElement(self.theta, self.symbol + other.symbol)

    def __sub__(self, other: QElement) -> QElement:
        return QElement(self.theta, self.symbol - other.symbol)

    def __mul__(self, c) -> QElement:
        return QElement(self.theta, self.symbol * c)

    __rmul__ = __mul__

    def is_selfadjoint(self, tol: float = 0.0) -> bool:
        f = self.symbol.samples
        return bool(np.abs(f - theta_involution(self.symbol).samples).max() <= tol * np.abs(f).max())


# ---------------------------------------------------------------------------
# products, involution, trace
# ---------------------------------------------------------------------------


def _shift_slices(offset: Sequence[int], n: int):
    """Slices so that out[dst] pairs with in[src] for src = dst - offset."""
    dst, src = [], []
    for o in offset:
        if o >= 0:
            dst.append(slice(o, n))
            src.append(slice(0, n - o))
        else:
            dst.append(slice(0, n + o))
            src.append(slice(-o, n))
    return tuple(dst), tuple(src)


def twisted_convolve(f: Symbol, g: Symbol, theta: ThetaMatrix, prune: float = 1e-18) -> Symbol:
    """(f *_theta g)(s) = h^d sum_t e^{(i/2)(s, theta t)} f(s - t) g(t).

    Shift-and-add over the support of the sparser factor; values below
    `prune` times the peak are skipped.  Both factors are extended by zero.
    """
    _same_grid(f, g)
    grid = f.grid
    if theta.d != grid.d:
        raise ValidationError("theta and symbol dimensions differ")
    for name, s in (("f", f), ("g", g)):
        if s.outer_mass() > 1e-12:
            warnings.warn(
                f"{name} is not negligible outside the inner half-box; the product is truncated",
                SupportWarning,
                stacklevel=2,
            )
    n, d, h = grid.n, grid.d, grid.h
    th = theta.entries
    fa, ga = f.samples, g.samples

    def support(a):
        mag = np.abs(a)
        return np.argwhere(mag > prune * mag.max()) if mag.max() > 0 else np.empty((0, d), int)

    sf, sg = support(fa), support(ga)
    ax = grid.axis()
    out = np.zeros(grid.shape, dtype=complex)
    if len(sg) <= len(sf):
        # sum over t in supp g: phase e^{(i/2)(s, theta t)} = prod_k e^{(i/2) s_k (theta t)_k}
        idx, fixed, moving, sgn = sg, ga, fa, 1.0
    else:
        # sum over a in supp f: phase e^{(i/2)(a, theta s)} = prod_k e^{-(i/2) s_k (theta a)_k}
        idx, fixed, moving, sgn = sf, fa, ga, -1.0
    c = grid.center
    for node in idx:
        t = (node - c) * h
        w = th @ t
        phase = np.ones((1,) * d, dtype=complex)
        for k in range(d):
            if w[k] != 0.0:
                s = [1] * d
                s[k] = n
                phase = phase * np.exp(0.5j * sgn * w[k] * ax).reshape(s)
        dst, src = _shift_slices(node - c, n)
        if phase.size == 1:
            out[dst] += fixed[tuple(node)] * moving[src]
        else:
            out[dst] += fixed[tuple(node)] * moving[src] * np.broadcast_to(phase, grid.shape)[dst]
    return Symbol(grid, out * h**d)


def theta_involution(f: Symbol) -> Symbol:
    """f^theta(s) = conj(f(-s))."""
    return Symbol(f.grid, np.conj(f.samples[(slice(None, None, -1),) * f.grid.d]))


def trace(x: QElement) -> complex:
    """tau_theta(U(f)) = (2 pi)^d f(0)."""
    g = x.grid
    return complex(TWO_PI**g.d * x.symbol.samples[(g.center,) * g.d])


def trace_product(x: QElement, y: QElement) -> complex:
    """tau_theta(x y) via (f *_theta g)(0) = h^d sum_a f(a) g(-a)."""
    _same_grid(x.symbol, y.symbol)
    g = x.grid
    flipped = y.symbol.samples[(slice(None, None, -1),) * g.d]
    return complex(TWO_PI**g.d * g.h**g.d * np.sum(x.symbol.samples * flipped))


# ---------------------------------------------------------------------------
# calculus
# ---------------------------------------------------------------------------


def derivative(x: QElement, alpha: Sequence[int]) -> QElement:
    """partial^alpha U(f) = U(t^alpha f)."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != x.d or any(a < 0 for a in alpha):
        raise ValidationError(f"multi-index {alpha} invalid for d={x.d}")
    mono = np.ones((1,) * x.d)
    for c, a in zip(x.grid.coords(), alpha):
        if a:
            mono = mono * c**a
    return x.with_symbol(Symbol(x.grid, x.symbol.samples * mono))


def l2_norm(x: QElement) -> float:
    """||U(f)||_2 = (2 pi)^{d/2} ||f||_2."""
    return TWO_PI ** (x.d / 2) * x.symbol.l2()


LP_PATHS = "p = 2 (any theta); theta = 0 (any d); d = 2 with det(theta) != 0"


def lp_norm(x: QElement, p: float, *, pad: int = 2, K: int = 64) -> float:
    """Noncommutative L_p norm with respect to tau_theta.

    Implemented paths: p = 2 always (Plancherel); theta = 0 via the
    position-space function (2 pi)^{d/2} f-check; d = 2 nondegenerate via
    the oscillator matrix picture with cutoff K.
    """
    p = float(p)
    if not (p >= 1.0):
        raise ValidationError(f"p must lie in [1, inf], got {p}")
    if p == 2.0:
        return l2_norm(x)
    if x.theta.is_zero:
        return _commutative_lp(x, p, pad)
    if x.d == 2:
        from .matrix_rep import OscillatorRep, adapted, lp_norm_rep, represent

        rep = OscillatorRep.from_theta(x.theta, K)
        return lp_norm_rep(represent(adapted(x, rep), rep), p)
    raise CapabilityError(f"no L_p path for p={p}, d={x.d}, degenerate theta; supported: {LP_PATHS}")


def position_profile(x: QElement, pad: int = 2) -> tuple[np.ndarray, float]:
    """F(r) = h^d sum_t f(t) e^{i(t, r)} on the dual lattice; returns (F, dr)."""
    g = x.grid
    N = g.n * pad
    a = np.zeros((N,) * g.d, dtype=complex)
    a[(slice(0, g.n),) * g.d] = x.symbol.samples
    # node t_k = (k - c) h; shifting the origin costs a phase on the dual side
    F = np.fft.ifftn(a) * N**g.d * g.h**g.d
    dr = TWO_PI / (N * g.h)
    r = np.fft.fftfreq(N, d=1.0 / N) * dr
    phase = np.exp(-1j * g.center * g.h * r)
    for k in range(g.d):
        s = [1] * g.d
        s[k] = N
        F = F * phase.reshape(s)
    return F, dr


def _commutative_lp(x: QElement, p: float, pad: int) -> float:
    F, dr = position_profile(x, pad)
    if math.isinf(p):
        return float(np.abs(F).max())
    return float((dr**x.d * np.sum(np.abs(F) ** p)) ** (1.0 / p))


def multi_indices(d: int, m: int) -> list[tuple[int, ...]]:
    out = set()
    for combo in itertools.combinations_with_replacement(range(d), m):
        a = [0] * d
        for j in combo:
            a[j] += 1
        out.add(tuple(a))
    return sorted(out, reverse=True)


def sobolev_seminorm(x: QElement, m: int, p: float) -> float:
    """Sum over |alpha| = m of ||partial^alpha x||_p."""
    return sum(lp_norm(derivative(x, a), p) for a in multi_indices(x.d, m))


def translate(x: QElement, t: Sequence[float]) -> QElement:
    """T_t U(f) = U(e^{i(t, .)} f)."""
    t = np.asarray(t, dtype=float)
    if t.shape != (x.d,):
        raise ValidationError(f"translation vector must have length {x.d}")
    ph = sum(tk * c for tk, c in zip(t, x.grid.coords()))
    return x.with_symbol(Symbol(x.grid, x.symbol.samples * np.exp(1j * ph)))


def dilate(x: QElement, lam: float) -> QElement:
    """Psi_lambda: U_theta(s) -> U_{lambda^2 theta}(s / lambda).

    The new symbol is lambda^d f(lambda s) on the grid of halfwidth R/lambda,
    which reuses the sample array exactly.
    """
    lam = float(lam)
    if not (lam > 0 and math.isfinite(lam)):
        raise ValidationError(f"dilation factor must be positive, got {lam}")
    grid = x.grid.scaled(1.0 / lam)
    return QElement(x.theta.scaled(lam * lam), Symbol(grid, lam**x.d * x.symbol.samples))


# ---------------------------------------------------------------------------
# mollifiers
# ---------------------------------------------------------------------------


def unit_gaussian(grid: SymbolGrid, sigma: float = 1.0) -> Symbol:
    """Gaussian with unit integral."""
    amp = (TWO_PI * sigma * sigma) ** (-grid.d / 2)
    return Symbol.from_family("gaussian", grid, sigma=sigma, amplitude=amp)


def mollifier(psi: Symbol, eps: float, grid: SymbolGrid | None = None, tol: float = 1e-8) -> Symbol:
    """psi_eps(t) = eps^{-d} psi(t / eps).

    Without `grid` the result lives on psi's grid scaled by eps, which
    reuses the samples exactly.  With `grid` the family is re-evaluated there.
    """
    eps = float(eps)
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    mass = psi.integral()
    if abs(mass - 1.0) > tol:
        raise ValidationError(f"mollifier integral is {mass:.12g}, expected 1 within {tol:g}")
    d = psi.grid.d
    if grid is None:
        return Symbol(psi.grid.scaled(eps), psi.samples * eps**-d)
    vals = psi.evaluate([c / eps for c in grid.coords()]) * eps**-d
    out = Symbol(grid, np.broadcast_to(vals, grid.shape))
    mass = out.integral()
    if abs(mass - 1.0) > tol:
        raise ValidationError(
            f"grid spacing {grid.h:g} does not resolve eps={eps:g}: integral {mass:.12g}"
        )
    return out


def fourier_multiplier(psi: Symbol, grid: SymbolGrid) -> np.ndarray:
    """m(t) = integral psi(s) e^{-i(s, t)} ds at the nodes of `grid`.

    Direct quadrature, applied axis by axis.  With the unitary transform
    this is (2 pi)^{d/2} psi-hat(t).
    """
    if psi.grid.d != grid.d:
        raise ValidationError("dimension mismatch between psi and target grid")
    E = np.exp(-1j * np.outer(grid.axis(), psi.grid.axis())) * psi.grid.h
    out = psi.samples
    for k in range(grid.d):
        out = np.moveaxis(np.tensordot(E, out, axes=([1], [k])), 0, k)
    return out


def convolve_function(psi: Symbol, x: QElement) -> QElement:
    """psi * x = integral psi(s) T_{-s}(x) ds, i.e. U(m f) with m = fourier_multiplier."""
    m = fourier_multiplier(psi, x.grid)
    return x.with_symbol(Symbol(x.grid, m * x.symbol.samples))


def left_mollify(psi_eps: Symbol, x: QElement) -> QElement:
    """U(psi_eps) x."""
    return x.with_symbol(twisted_convolve(psi_eps, x.symbol, x.theta))
