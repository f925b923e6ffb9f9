"""Oscillator-basis matrix picture of L_infinity(R^2_theta), det theta != 0.

With theta in canonical form hbar [[0,-1],[1,0]], the Weyl unitaries are
realised on L2(R) as

    U(t) = exp(i t_1 x + hbar t_2 d/dx),
    (U(t) xi)(x) = e^{i hbar t_1 t_2 / 2} e^{i t_1 x} xi(x + hbar t_2),

which obey U(t) U(s) = e^{(i/2)(t, theta s)} U(t + s).  The basis is the
Hermite functions at oscillator length sqrt(hbar), and tau_theta equals
2 pi hbar times the operator trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermite

from .core_algebra import TWO_PI, QElement, ThetaMatrix
from .errors import CapabilityError, NumericalError, ValidationError

TAIL_ROWS = 10
TAIL_TOL = 1e-6


def hermite_functions(K: int, y: np.ndarray) -> np.ndarray:
    """phi_n(y), n < K, orthonormal Hermite functions; shape (len(y), K)."""
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape + (K,))
    out[..., 0] = math.pi**-0.25 * np.exp(-0.5 * y * y)
    if K > 1:
        out[..., 1] = math.sqrt(2.0) * y * out[..., 0]
    for n in range(1, K - 1):
        out[..., n + 1] = math.sqrt(2.0 / (n + 1)) * y * out[..., n] - math.sqrt(n / (n + 1)) * out[..., n - 1]
    return out


@dataclass(frozen=True, eq=False)
class OscillatorRep:
    hbar: float
    K: int
    quad: int
    orientation: float = 1.0  # +1 for theta = hbar J, -1 for theta = -hbar J

    def __post_init__(self):
        if self.K < 1:
            raise ValidationError(f"cutoff K must be at least 1, got {self.K}")
        if not self.hbar > 0:
            raise ValidationError(f"hbar must be positive, got {self.hbar}")
        u, w = roots_hermite(self.quad)
        object.__setattr__(self, "_nodes", u)
        object.__setattr__(self, "_weights", np.exp(np.log(w) + u * u))

    @classmethod
    def from_theta(cls, theta: ThetaMatrix, K: int = 64, quad: int | None = None) -> OscillatorRep:
        if theta.d != 2:
            raise CapabilityError(f"matrix picture needs d = 2, got d = {theta.d}")
        cf = theta.canonical
        if cf.d1 != 0:
            raise CapabilityError("matrix picture needs det(theta) != 0")
        orient = float(np.sign(np.linalg.det(cf.O)))
        return cls(cf.hbars[0], K, default_quad(K) if quad is None else quad, orient)

    @property
    def scale(self) -> float:
        """tau_theta(T) = scale * tr(T); equals (2 pi)^{d/2} |det theta|^{1/2}."""
        return TWO_PI * self.hbar

    @property
    def max_spacing(self) -> float:
        """Coarsest symbol lattice whose Riemann sum does not alias into the first K states.

        States below K live in phase-space radius sqrt(2 K hbar); the lattice
        must resolve plane waves of that frequency.
        """
        return 0.9 * math.pi / math.sqrt(2 * self.K * self.hbar)

    def check_degree(self) -> None:
        # Q-point Gauss-Hermite is exact for polynomial degree 2Q - 1 >= 2K + 2
        if 2 * self.quad - 1 < 2 * self.K + 2:
            raise CapabilityError(f"{self.quad} quadrature nodes cannot integrate degree {2 * self.K + 2}")

    def _factors(self, t1, t2):
        """(Phi at u - b/2, Phi at u + b/2, plane wave) for canonical (t1, t2)."""
        hb = self.hbar
        u = self._nodes
        b = math.sqrt(hb) * t2
        return (
            hermite_functions(self.K, u - b / 2),
            hermite_functions(self.K, u + b / 2),
            np.exp(1j * math.sqrt(hb) * t1 * u),
        )


def default_quad(K: int) -> int:
    return 2 * K + 64


def displacement_element(t, rep: OscillatorRep, m: int, n: int) -> complex:
    """<phi_m, U(t) phi_n>.

    Substituting y = x / sqrt(hbar) and centring the Gaussian weight at the
    midpoint of the shift, the commutator phase cancels and

        <phi_m, U(t) phi_n> = int phi_m(u - b/2) phi_n(u + b/2) e^{i w u} du,

    with b = sqrt(hbar) t_2 and w = sqrt(hbar) t_1.
    """
    rep.check_degree()
    if not (0 <= m < rep.K and 0 <= n < rep.K):
        raise ValidationError(f"indices ({m}, {n}) outside the cutoff K={rep.K}")
    t1, t2 = float(t[0]), rep.orientation * float(t[1])
    P, M, wave = rep._factors(t1, t2)
    return complex(np.sum(rep._weights * P[:, m] * M[:, n] * wave))


def displacement_matrix(t, rep: OscillatorRep) -> np.ndarray:
    """All K x K elements <phi_m, U(t) phi_n> in one quadrature sweep."""
    rep.check_degree()
    P, M, wave = rep._factors(float(t[0]), rep.orientation * float(t[1]))
    return (P * (rep._weights * wave)[:, None]).T @ M


@dataclass(frozen=True, eq=False)
class RepMatrix:
    rep: OscillatorRep
    entries: np.ndarray

    def __post_init__(self):
        K = self.rep.K
        if self.entries.shape != (K, K):
            raise ValidationError(f"entries must be {K}x{K}, got {self.entries.shape}")

    def __matmul__(self, other: RepMatrix) -> RepMatrix:
        return RepMatrix(self.rep, self.entries @ other.entries)

    def adjoint(self) -> RepMatrix:
        return RepMatrix(self.rep, self.entries.conj().T)

    def trace(self) -> complex:
        return complex(self.rep.scale * np.trace(self.entries))

    def tail_mass(self, rows: int = TAIL_ROWS) -> float:
        """Frobenius mass in the last `rows` rows/columns, relative to the whole."""
        E = self.entries
        total = np.linalg.norm(E)
        if total == 0:
            return 0.0
        k = max(E.shape[0] - rows, 0)
        mask = np.zeros(E.shape, dtype=bool)
        mask[k:, :] = True
        mask[:, k:] = True
        return float(np.linalg.norm(E[mask]) / total)


def represent(x: QElement, rep: OscillatorRep) -> RepMatrix:
    """M_mn = h^2 sum_t f(t) <phi_m, U(t) phi_n>, one quadrature sweep per t_2 column."""
    if x.d != 2:
        raise CapabilityError(f"matrix picture needs d = 2, got d = {x.d}")
    cf = x.theta.canonical
    if cf.d1 != 0:
        raise CapabilityError("matrix picture needs det(theta) != 0")
    if abs(cf.hbars[0] - rep.hbar) > 1e-12 * rep.hbar:
        raise ValidationError(f"representation hbar {rep.hbar} does not match theta ({cf.hbars[0]})")
    rep.check_degree()
    g = x.grid
    ax = g.axis()
    f = x.symbol.samples
    # plane-wave sum over t_1 for every quadrature node: g[q, j2]
    wave = np.exp(1j * math.sqrt(rep.hbar) * np.outer(rep._nodes, ax))
    G = wave @ f
    keep = np.flatnonzero(np.abs(f).max(axis=0) > 0)
    M = np.zeros((rep.K, rep.K), dtype=complex)
    for j2 in keep:
        P, Mm, _ = rep._factors(0.0, rep.orientation * ax[j2])
        M += (P * (rep._weights * G[:, j2])[:, None]).T @ Mm
    return RepMatrix(rep, M * g.h**2)


def adapted(x: QElement, rep: OscillatorRep) -> QElement:
    """Resample a family-tagged symbol onto a lattice fine enough for `rep`; others pass through."""
    g = x.grid
    if g.h <= rep.max_spacing:
        return x
    from .core_algebra import SymbolGrid

    n = math.ceil(2 * g.R / rep.max_spacing)
    try:
        return x.with_symbol(x.symbol.resample(SymbolGrid(g.d, n + 1 - n % 2, g.R)))
    except CapabilityError:
        return x


def projection(n: int, rep: OscillatorRep) -> RepMatrix:
    """Projection onto the first n oscillator states."""
    if not 0 <= n <= rep.K:
        raise ValidationError(f"projection rank {n} outside [0, K={rep.K}]")
    E = np.zeros((rep.K, rep.K), dtype=complex)
    E[np.arange(n), np.arange(n)] = 1.0
    return RepMatrix(rep, E)


def lp_norm_rep(M: RepMatrix, p: float, tail_tol: float | None = TAIL_TOL) -> float:
    """scale^{1/p} times the Schatten-p norm of the entries (operator norm at p = inf)."""
    p = float(p)
    if not p >= 1:
        raise ValidationError(f"p must lie in [1, inf], got {p}")
    if tail_tol is not None:
        tm = M.tail_mass()
        if tm > tail_tol:
            raise NumericalError(
                f"relative tail mass {tm:.3g} exceeds {tail_tol:g}; raise K={M.rep.K} for this element"
            )
    s = np.linalg.svd(M.entries, compute_uv=False)
    if math.isinf(p):
        return float(s[0]) if s.size else 0.0
    return float(M.rep.scale ** (1.0 / p) * np.sum(s**p) ** (1.0 / p))


def laguerre_element(t, hbar: float, m: int, n: int) -> complex:
    """Closed-form displacement matrix element, an independent cross-check.

    U(t) = D(alpha) with alpha = sqrt(hbar/2) (i t_1 - t_2) in this convention.
    """
    from scipy.special import eval_genlaguerre, gammaln

    alpha = math.sqrt(hbar / 2.0) * (1j * t[0] - t[1])
    a2 = abs(alpha) ** 2
    if m >= n:
        c = math.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
        return complex(c * alpha ** (m - n) * math.exp(-a2 / 2) * eval_genlaguerre(n, m - n, a2))
    c = math.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
    return complex(c * (-np.conj(alpha)) ** (n - m) * math.exp(-a2 / 2) * eval_genlaguerre(m, n - m, a2))
