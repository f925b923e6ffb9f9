"""Singular-value analytics: profiles, weak quasinorms, decay fits, Dixmier averages."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError

POWER_LAW_RESIDUAL = 0.05


@dataclass(frozen=True, eq=False)
class SingularProfile:
    mu: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1:
            raise ValidationError("singular profile must be one-dimensional")
        if mu.size and (mu.min() < 0 or np.any(np.diff(mu) > 0)):
            raise ValidationError("singular profile must be nonnegative and nonincreasing")
        mu = mu.copy()
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    def __len__(self):
        return self.mu.size

    @classmethod
    def from_values(cls, values, source: dict | None = None) -> SingularProfile:
        """Sort arbitrary nonnegative values into a profile."""
        v = np.abs(np.asarray(values, dtype=float))
        return cls(np.sort(v)[::-1], source or {})


def _as_matrix(A) -> tuple[np.ndarray, dict]:
    from .grid_operator import GridOperator
    from .matrix_rep import RepMatrix

    if isinstance(A, GridOperator):
        g = A.grid
        return A.matrix, {"kind": "grid", "d": g.d, "m": g.m, "R": g.R, "spin": A.spin}
    if isinstance(A, RepMatrix):
        return A.entries, {"kind": "rep", "K": A.rep.K, "hbar": A.rep.hbar}
    return np.asarray(A), {"kind": "matrix"}


def svdvals(a: np.ndarray, provenance: dict | None = None) -> np.ndarray:
    try:
        s = scipy.linalg.svd(a, compute_uv=False, check_finite=True, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        try:
            s = scipy.linalg.svd(a, compute_uv=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"SVD did not converge for {provenance or {'shape': a.shape}}") from exc
    return np.sort(s)[::-1]


def singular_values(A, source: dict | None = None) -> SingularProfile:
    """Full singular spectrum, nonincreasing."""
    a, prov = _as_matrix(A)
    if source:
        prov = {**prov, **source}
    if a.ndim == 1:
        return SingularProfile.from_values(a, prov)
    if a.size == 0:
        return SingularProfile(np.zeros(0), prov)
    return SingularProfile(svdvals(a, prov), prov)


def qd_singular_values(x, grid, source: dict | None = None) -> SingularProfile:
    """Singular values of dbar x for d = 2 from its two off-diagonal blocks.

    The spectrum of [[0, B], [C, 0]] is the union of the spectra of B and C;
    for self-adjoint x the two blocks share singular values, so one SVD suffices.
    """
    from .grid_operator import quantize, quantized_differential, quantized_differential_blocks

    prov = {"kind": "dbar", "d": grid.d, "m": grid.m, "R": grid.R, **(source or {})}
    if grid.d != 2:
        return singular_values(quantized_differential(x, grid), prov)
    A = quantize(x, grid)
    lower, upper = quantized_differential_blocks(x, grid, A)
    if x.is_selfadjoint(1e-14):
        del upper
        s = svdvals(lower, prov)
        mu = np.repeat(s, 2)
    else:
        mu = np.concatenate([svdvals(lower, prov), svdvals(upper, prov)])
    return SingularProfile.from_values(mu, prov)


class WeakNorm(NamedTuple):
    value: float
    index: int


def weak_quasinorm(prof: SingularProfile, p: float) -> WeakNorm:
    """sup_k (k+1)^{1/p} mu_k and the index attaining it."""
    if not p > 0:
        raise ValidationError(f"p must be positive, got {p}")
    if len(prof) == 0:
        raise ValidationError("weak quasinorm of an empty profile")
    w = (np.arange(len(prof)) + 1.0) ** (1.0 / p) * prof.mu
    k = int(np.argmax(w))
    return WeakNorm(float(w[k]), k)


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    window: tuple[int, int]
    residual: float
    power_law: bool = True

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def default_window(n: int) -> tuple[int, int]:
    """Skip the first 20 values and the last 20 percent."""
    return 20, int(math.floor(0.8 * n))


def decay_exponent(prof: SingularProfile, window: tuple[int, int] | None = None) -> DecayFit:
    """Least-squares slope of log mu_k against log(k+1) for k in [lo, hi)."""
    lo, hi = default_window(len(prof)) if window is None else (int(window[0]), int(window[1]))
    hi = min(hi, len(prof))
    if lo < 0 or hi - lo < 10:
        raise ValidationError(f"decay window [{lo}, {hi}) must hold at least 10 values")
    mu = prof.mu[lo:hi]
    if np.any(mu <= 0):
        raise ValidationError(f"zero singular values inside window [{lo}, {hi}); shrink the window")
    x = np.log(np.arange(lo, hi) + 1.0)
    y = np.log(mu)
    slope, icpt = np.polyfit(x, y, 1)
    res = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return DecayFit(float(slope), float(icpt), (lo, hi), res, res <= POWER_LAW_RESIDUAL)


@dataclass(frozen=True)
class DixmierEstimate:
    n: np.ndarray
    F: np.ndarray
    limit: float
    slope: float
    residual: float


def dixmier_estimate(
    prof: SingularProfile, d: int, n_range: tuple[int, int] | None = None, points: int = 24
) -> DixmierEstimate:
    """F(n) = sum_{j<=n} mu_j^d / log(2+n) at geometric n, extrapolated by F = c + a/log n."""
    L = len(prof)
    if L < 100:
        raise ValidationError(f"Dixmier estimate needs at least 100 singular values, got {L}")
    lo, hi = (max(10, int(math.sqrt(L))), L - 1) if n_range is None else (int(n_range[0]), min(int(n_range[1]), L - 1))
    if lo < 2 or hi <= lo:
        raise ValidationError(f"bad Dixmier range [{lo}, {hi}]")
    n = np.unique(np.round(np.geomspace(lo, hi, points)).astype(int))
    csum = np.cumsum(prof.mu.astype(float) ** d)
    F = csum[n] / np.log(2.0 + n)
    X = np.column_stack([np.ones(n.size), 1.0 / np.log(n)])
    coef, *_ = np.linalg.lstsq(X, F, rcond=None)
    res = float(np.sqrt(np.mean((X @ coef - F) ** 2)))
    return DixmierEstimate(n, F, float(coef[0]), float(coef[1]), res)


def schatten_norm(A, p: float) -> float:
    """l_p norm of the singular values (operator norm at p = inf)."""
    mu = A.mu if isinstance(A, SingularProfile) else singular_values(A).mu
    p = float(p)
    if p < 1:
        warnings.warn(f"p={p} < 1 gives a quasinorm", stacklevel=2)
    if mu.size == 0:
        return 0.0
    if math.isinf(p):
        return float(mu[0])
    top = mu[0]
    if top == 0:
        return 0.0
    return float(top * np.sum((mu / top) ** p) ** (1.0 / p))


def write_profile_csv(prof: SingularProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "mu"])
        for k, v in enumerate(prof.mu):
            w.writerow([k, repr(float(v))])


def read_profile_csv(path) -> SingularProfile:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return SingularProfile(np.array([float(r["mu"]) for r in rows]))


def write_fit_json(fit: DecayFit, path) -> None:
    with open(path, "w") as fh:
        json.dump(asdict(fit), fh, indent=2)
