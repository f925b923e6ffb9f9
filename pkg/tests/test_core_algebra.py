import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import gaussian, random_symbol, rel
from moyalcalc.core_algebra import (
    QElement,
    Symbol,
    SymbolGrid,
    ThetaMatrix,
    convolve_function,
    derivative,
    dilate,
    l2_norm,
    left_mollify,
    lp_norm,
    mollifier,
    read_symbol,
    sobolev_seminorm,
    theta_canonical_form,
    theta_involution,
    trace,
    trace_product,
    translate,
    twisted_convolve,
    unit_gaussian,
    write_symbol,
)
from moyalcalc.errors import CapabilityError, SupportWarning, ValidationError
from moyalcalc.matrix_rep import OscillatorRep, projection


def antisym(d, seed):
    a = np.random.default_rng(seed).standard_normal((d, d))
    return a - a.T


# --- theta ------------------------------------------------------------------


def test_theta_rejects_non_antisymmetric():
    with pytest.raises(ValidationError, match="antisymmetric"):
        ThetaMatrix([[0.0, 1.0], [2.0, 0.0]])


def test_theta_rejects_nonfinite_and_nonsquare():
    with pytest.raises(ValidationError):
        ThetaMatrix([[0.0, np.nan], [-np.nan, 0.0]])
    with pytest.raises(ValidationError):
        ThetaMatrix([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])


def test_theta_parse_specs():
    assert np.array_equal(ThetaMatrix.parse("standard2").entries, [[0, -1], [1, 0]])
    assert np.array_equal(ThetaMatrix.parse("standard2:2.5").entries, [[0, -2.5], [2.5, 0]])
    assert ThetaMatrix.parse("zero3").is_zero and ThetaMatrix.parse("zero3").d == 3
    with pytest.raises(ValidationError):
        ThetaMatrix.parse("banana")


def test_canonical_zero():
    O, d1, hbars = theta_canonical_form(ThetaMatrix.zero(2))
    assert d1 == 2 and list(hbars) == []


def test_canonical_standard_is_identity():
    O, d1, hbars = theta_canonical_form(ThetaMatrix.standard())
    assert d1 == 0 and np.allclose(hbars, [1.0]) and np.allclose(O, np.eye(2), atol=1e-14)


def test_canonical_random_4x4_reconstructs():
    th = ThetaMatrix(antisym(4, 7))
    cf = th.canonical
    recon = cf.O.T @ th.entries @ cf.O
    assert np.linalg.norm(recon - cf.blocks()) <= 1e-12 * np.linalg.norm(th.entries)
    # hbar^2 are the doubled eigenvalues of theta^T theta
    ev = np.sort(np.linalg.eigvalsh(th.entries.T @ th.entries))[::-1]
    assert np.allclose(np.asarray(cf.hbars) ** 2, ev[::2], rtol=1e-12)


@given(d=st.integers(2, 7), seed=st.integers(0, 2**32 - 1), rank_drop=st.integers(0, 2))
def test_canonical_form_property(d, seed, rank_drop):
    a = antisym(d, seed)
    if rank_drop and d > 2:
        # force a kernel by projecting out random directions
        q, _ = np.linalg.qr(np.random.default_rng(seed + 1).standard_normal((d, d)))
        P = q[:, : d - rank_drop]
        a = P @ (P.T @ a @ P) @ P.T
        a = (a - a.T) / 2
    th = ThetaMatrix(a)
    cf = th.canonical
    assert (d - cf.d1) % 2 == 0
    assert np.allclose(cf.O.T @ cf.O, np.eye(d), atol=1e-12)
    scale = max(np.linalg.norm(a), 1e-300)
    assert np.linalg.norm(cf.O.T @ a @ cf.O - cf.blocks()) <= 1e-10 * scale
    assert all(h > 0 for h in cf.hbars)


# --- grids and symbols --------------------------------------------------------


def test_grid_contains_origin_and_rejects_even():
    g = SymbolGrid(2, 9, 4.5)
    assert g.axis()[g.center] == 0.0 and g.h == 1.0
    assert np.all(g.axis() >= -g.R) and np.all(g.axis() < g.R)
    with pytest.raises(ValidationError, match="odd"):
        SymbolGrid(2, 10, 5.0)


def test_family_samples_match_closed_form(small_grid):
    s = Symbol.from_family("hermite-gaussian", small_grid, orders=[1, 2], sigma=1.3)
    t1, t2 = small_grid.coords()
    u, v = t1 / 1.3, t2 / 1.3
    ref = np.exp(-(u**2 + v**2) / 2) * (2 * u) * (4 * v**2 - 2)
    assert np.abs(s.samples - ref).max() <= 1e-14 * np.abs(ref).max()


def test_symbol_size_validation(small_grid):
    with pytest.raises(ValidationError):
        Symbol(small_grid, np.zeros(10))


def test_symbol_file_roundtrip(tmp_path, small_grid):
    s = random_symbol(np.random.default_rng(0), small_grid)
    write_symbol(tmp_path / "s.dat", s)
    back = read_symbol(tmp_path / "s.dat")
    assert back.grid == small_grid and np.array_equal(back.samples, s.samples)


def test_symbol_file_bad_header(tmp_path):
    p = tmp_path / "bad.dat"
    p.write_text("2 3 1.5\n1 0\n")
    with pytest.raises(ValidationError, match="announces 9"):
        read_symbol(p)


# --- twisted convolution ------------------------------------------------------


def test_commutative_gaussian_convolution_at_origin():
    g = SymbolGrid(2, 121, 15.0)
    f = Symbol.from_family("gaussian", g)
    out = twisted_convolve(f, f, ThetaMatrix.zero(2))
    assert out.samples[g.center, g.center].real == pytest.approx(math.pi, rel=1e-12)


def test_delta_is_identity(std, small_grid):
    f = Symbol.from_family("gaussian", small_grid, sigma=0.5)
    e = Symbol.delta(small_grid)
    assert np.allclose(twisted_convolve(f, e, std).samples, f.samples, rtol=0, atol=1e-15)
    assert np.allclose(twisted_convolve(e, f, std).samples, f.samples, rtol=0, atol=1e-15)


def test_mismatched_grids_rejected(std):
    a = Symbol.from_family("gaussian", SymbolGrid(2, 21, 5.0))
    b = Symbol.from_family("gaussian", SymbolGrid(2, 23, 5.0))
    with pytest.raises(ValidationError):
        twisted_convolve(a, b, std)


def test_support_warning():
    g = SymbolGrid(2, 21, 3.0)
    f = Symbol.from_family("gaussian", g, sigma=2.0)
    with pytest.warns(SupportWarning):
        twisted_convolve(f, f, ThetaMatrix.standard())


def test_associativity_inner_box(std):
    g = SymbolGrid(2, 121, 20.0)
    f = translate(gaussian(std, g, sigma=0.7), [0.5, -0.3]).symbol
    h = gaussian(std, g, sigma=0.9).symbol
    k = Symbol.from_family("hermite-gaussian", g, orders=[1, 1], sigma=0.8)
    left = twisted_convolve(twisted_convolve(f, h, std), k, std)
    right = twisted_convolve(f, twisted_convolve(h, k, std), std)
    assert rel(left.samples, right.samples) <= 1e-8


@given(seed=st.integers(0, 2**32 - 1), hbar=st.floats(-3, 3))
def test_involution_antihomomorphism(seed, hbar):
    g = SymbolGrid(2, 11, 3.0)
    rng = np.random.default_rng(seed)
    th = ThetaMatrix.standard(hbar)
    f, h = random_symbol(rng, g), random_symbol(rng, g)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupportWarning)
        lhs = theta_involution(twisted_convolve(f, h, th))
        rhs = twisted_convolve(theta_involution(h), theta_involution(f), th)
    assert np.abs(lhs.samples - rhs.samples).max() <= 1e-13 * np.abs(lhs.samples).max()


@given(seed=st.integers(0, 2**32 - 1), hbar=st.floats(-3, 3))
def test_trace_property(seed, hbar):
    g = SymbolGrid(2, 15, 4.0)
    rng = np.random.default_rng(seed)
    th = ThetaMatrix.standard(hbar)
    f, h = random_symbol(rng, g, radius=1.9), random_symbol(rng, g, radius=1.9)
    a = trace(QElement(th, twisted_convolve(f, h, th)))
    b = trace(QElement(th, twisted_convolve(h, f, th)))
    assert abs(a - b) <= 1e-8 * max(abs(a), 1.0)
    assert abs(a - trace_product(QElement(th, f), QElement(th, h))) <= 1e-10 * max(abs(a), 1.0)


@given(seed=st.integers(0, 2**32 - 1), hbar=st.floats(-3, 3))
def test_plancherel(seed, hbar):
    g = SymbolGrid(2, 15, 4.0)
    th = ThetaMatrix.standard(hbar)
    x = QElement(th, random_symbol(np.random.default_rng(seed), g, radius=1.9))
    lhs = l2_norm(x) ** 2
    rhs = trace(x.adjoint() @ x)
    assert abs(lhs - rhs) <= 1e-8 * lhs


# --- involution, trace, derivatives, norms ----------------------------------------


def test_involution_examples(small_grid):
    f = Symbol.from_family("gaussian", small_grid)
    assert np.array_equal(theta_involution(f).samples, f.samples)
    t1, t2 = small_grid.coords()
    z = Symbol(small_grid, np.exp(1j * t1) * np.exp(-(t1**2 + t2**2)))
    assert np.allclose(theta_involution(z).samples, z.samples, atol=1e-15)
    w = random_symbol(np.random.default_rng(3), small_grid)
    assert np.array_equal(theta_involution(theta_involution(w)).samples, w.samples)


def test_trace_examples(std, small_grid):
    assert trace(gaussian(std, small_grid)) == pytest.approx(4 * math.pi**2, rel=1e-15)
    assert trace(QElement(std, Symbol(small_grid, np.zeros(small_grid.shape)))) == 0


def test_derivative_examples(std, small_grid):
    x = gaussian(std, small_grid)
    assert np.array_equal(derivative(x, (0, 0)).symbol.samples, x.symbol.samples)
    d1 = derivative(x, (1, 0))
    t1, t2 = small_grid.coords()
    assert np.allclose(d1.symbol.samples, t1 * np.exp(-(t1**2 + t2**2) / 2), atol=1e-16)
    assert trace(d1) == 0
    a = derivative(x, (1, 1)).symbol.samples
    b = derivative(derivative(x, (0, 1)), (1, 0)).symbol.samples
    c = derivative(derivative(x, (1, 0)), (0, 1)).symbol.samples
    assert np.array_equal(a, derivative(x, (1, 1)).symbol.samples)
    assert np.abs(b - c).max() <= 1e-16 * np.abs(b).max()
    with pytest.raises(ValidationError):
        derivative(x, (1,))


def test_l2_norm_examples(std):
    g = SymbolGrid(2, 81, 10.0)
    x = gaussian(std, g)
    assert l2_norm(x) == pytest.approx(2 * math.pi**1.5, rel=1e-12)
    assert l2_norm(x * 2.0) == pytest.approx(2 * l2_norm(x), rel=1e-15)
    assert l2_norm(x * 0.0) == 0.0


def test_lp_norm_p2_consistency_all_paths():
    g = SymbolGrid(2, 81, 10.0)
    for th in (ThetaMatrix.zero(2), ThetaMatrix.standard()):
        x = QElement(th, Symbol.from_family("gaussian", g))
        assert lp_norm(x, 2) == pytest.approx(l2_norm(x), rel=1e-12)


def test_lp_norm_commutative_gaussian():
    # theta = 0: x is multiplication by F(r) = (2 pi) e^{-|r|^2/2}, ||F||_p^p = (2pi)^p (2 pi / p)
    g = SymbolGrid(2, 81, 12.0)
    x = QElement(ThetaMatrix.zero(2), Symbol.from_family("gaussian", g))
    for p in (1.0, 3.0):
        exact = 2 * math.pi * (2 * math.pi / p) ** (1 / p)
        assert lp_norm(x, p) == pytest.approx(exact, rel=1e-6)
    assert lp_norm(x, math.inf) == pytest.approx(2 * math.pi, rel=1e-9)


def test_lp_norm_rank_one_projection():
    # the rank-1 projection of the oscillator picture is U(f) with f = (2 pi hbar)^{-1} e^{-hbar|t|^2/4}
    th = ThetaMatrix.standard()
    g = SymbolGrid(2, 161, 20.0)
    f = Symbol.from_function(g, lambda a, b: np.exp(-(a * a + b * b) / 4) / (2 * math.pi))
    x = QElement(th, f)
    rep = OscillatorRep.from_theta(th, 64)
    from moyalcalc.matrix_rep import represent

    assert np.abs(represent(x, rep).entries - projection(1, rep).entries).max() < 1e-10
    for p in (1.0, 1.5, 3.0, math.inf):
        assert lp_norm(x, p) == pytest.approx((2 * math.pi) ** (1 / p), rel=1e-8)


def test_lp_norm_monotone_in_p(std):
    g = SymbolGrid(2, 81, 10.0)
    # c_theta = (2 pi hbar)^{1/p - 1/q}: ||x||_q <= c^{-1} ||x||_p for p < q
    for fam, kw in (("gaussian", {}), ("hermite-gaussian", {"orders": [1, 0]}), ("gaussian", {"sigma": 2.0})):
        x = QElement(std, Symbol.from_family(fam, g, **kw))
        ps = [1.0, 1.5, 2.0, 3.0, math.inf]
        norms = [lp_norm(x, p) for p in ps]
        for (p, a), (q, b) in zip(zip(ps, norms), zip(ps[1:], norms[1:])):
            c = (2 * math.pi) ** (1 / p - (0 if math.isinf(q) else 1 / q))
            assert c * b <= a * (1 + 1e-9)


def test_lp_norm_capability_error():
    g = SymbolGrid(4, 5, 2.5)
    th = ThetaMatrix(antisym(4, 1))
    x = QElement(th, Symbol.from_family("gaussian", g))
    with pytest.raises(CapabilityError, match="supported"):
        lp_norm(x, 3)
    with pytest.raises(ValidationError):
        lp_norm(x, 0.5)


def test_sobolev_seminorm_examples(std):
    g = SymbolGrid(2, 81, 10.0)
    x = gaussian(std, g)
    assert sobolev_seminorm(x, 0, 2) == pytest.approx(lp_norm(x, 2), rel=1e-14)
    assert sobolev_seminorm(x, 1, 2) == pytest.approx(2 * 2 * math.pi * math.sqrt(math.pi / 2), rel=1e-12)


# --- translations and dilations ------------------------------------------------


@given(t1=st.floats(-5, 5), t2=st.floats(-5, 5))
def test_translation_is_l2_isometry(t1, t2):
    g = SymbolGrid(2, 41, 10.0)
    x = gaussian(ThetaMatrix.standard(), g)
    assert l2_norm(translate(x, [t1, t2])) == pytest.approx(l2_norm(x), rel=1e-14)


def test_translation_identity_and_convergence(std):
    g = SymbolGrid(2, 61, 10.0)
    x = gaussian(std, g)
    assert np.array_equal(translate(x, [0.0, 0.0]).symbol.samples, x.symbol.samples)
    errs = [l2_norm(translate(x, [2.0**-k, 0.0]) - x) / l2_norm(x) for k in range(8)]
    assert all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] < 1e-2


def test_translation_invariance_commutative_lp():
    g = SymbolGrid(2, 41, 10.0)
    x = QElement(ThetaMatrix.zero(2), Symbol.from_family("gaussian", g))
    dr = 2 * math.pi / (2 * g.n * g.h)  # dual lattice of the padded transform
    y = translate(x, [3 * dr, -5 * dr])
    assert lp_norm(y, 3) == pytest.approx(lp_norm(x, 3), rel=1e-12)


@pytest.mark.parametrize("lam", [0.5, 2.0, 3.0])
def test_dilation_laws_p2(std, lam):
    g = SymbolGrid(2, 61, 10.0)
    x = gaussian(std, g)
    y = dilate(x, lam)
    assert np.allclose(y.theta.entries, lam**2 * std.entries)
    assert l2_norm(y) == pytest.approx(lam * l2_norm(x), rel=1e-10)
    assert sobolev_seminorm(y, 1, 2) == pytest.approx(sobolev_seminorm(x, 1, 2), rel=1e-10)


def test_dilation_validation(std, small_grid):
    x = gaussian(std, small_grid)
    assert np.array_equal(dilate(x, 1.0).symbol.samples, x.symbol.samples)
    with pytest.raises(ValidationError):
        dilate(x, 0.0)


# --- mollifiers -------------------------------------------------------------------


def psi_base():
    return unit_gaussian(SymbolGrid.from_spacing(2, 41, 1 / 1.1))


def test_mollifier_unit_integral():
    psi = psi_base()
    assert np.array_equal(mollifier(psi, 1.0).samples, psi.samples)
    for eps in (1.0, 0.3, 0.01):
        assert abs(mollifier(psi, eps).integral() - 1) <= 1e-8
    with pytest.raises(ValidationError, match="integral"):
        mollifier(psi * 2.0, 0.5)


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_mollifier_tail_mass(eps):
    pe = mollifier(psi_base(), eps)
    r2 = sum(c * c for c in pe.grid.coords())
    tail = pe.grid.h**2 * np.abs(pe.samples[r2 > eps]).sum()
    assert tail <= eps**2


def test_mollifier_on_grid_rejects_coarse_grid():
    with pytest.raises(ValidationError, match="resolve"):
        mollifier(psi_base(), 0.05, grid=SymbolGrid(2, 21, 10.0))


def test_convolution_commutes_with_derivative(std):
    g = SymbolGrid(2, 61, 10.0)
    x = gaussian(std, g)
    pe = mollifier(psi_base(), 0.3)
    a = convolve_function(pe, derivative(x, (1, 1))).symbol.samples
    b = derivative(convolve_function(pe, x), (1, 1)).symbol.samples
    assert np.abs(a - b).max() <= 1e-15 * np.abs(a).max()


def test_concentrated_convolution_scales_symbol(std):
    # a very narrow psi has flat transform, so psi * x is (integral psi) x near the origin
    g = SymbolGrid(2, 61, 10.0)
    x = gaussian(std, g)
    pe = mollifier(psi_base(), 1e-4)
    y = convolve_function(pe, x)
    assert np.abs(y.symbol.samples - x.symbol.samples).max() <= 1e-6


def test_convolution_converges(std):
    g = SymbolGrid(2, 81, 10.0)
    x = gaussian(std, g)
    errs = [l2_norm(convolve_function(mollifier(psi_base(), 2.0**-k), x) - x) for k in range(7)]
    assert all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] / l2_norm(x) < 1e-3


def test_left_mollify_commutative_is_ordinary_mollification():
    th = ThetaMatrix.zero(2)
    g = SymbolGrid.from_spacing(2, 241, 0.1)
    x = QElement(th, Symbol.from_family("gaussian", g, sigma=0.7))
    pe = mollifier(unit_gaussian(g, 0.5), 1.0, grid=g)
    y = left_mollify(pe, x)
    # Gaussian (x) Gaussian: variances add, heights multiply by the convolution constant
    t1, t2 = g.coords()
    s2 = 0.7**2 + 0.5**2
    ref = 0.7**2 / s2 * np.exp(-(t1**2 + t2**2) / (2 * s2))
    assert np.abs(y.symbol.samples - ref).max() <= 1e-10


def test_left_mollify_converges_and_cancellation_constant(std):
    eps_list = [2.0**-k for k in range(4)]
    errs, d1 = [], []
    for e in eps_list:
        h = min(0.25, e / 1.1)
        n = int(math.ceil(30 / h)) | 1
        g = SymbolGrid.from_spacing(2, n, h)
        x = QElement(std, Symbol.from_family("gaussian", g))
        errs.append(l2_norm(left_mollify(mollifier(psi_base(), e, grid=g), x) - x))
        d1.append(l2_norm(derivative(QElement(std, mollifier(psi_base(), e)), (1, 0))))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert max(d1) / min(d1) - 1 < 1e-12
    assert d1[0] <= l2_norm(QElement(std, psi_base())) * 2 * math.pi  # crude L2 bound
