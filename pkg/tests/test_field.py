import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vvl.field import (
    DOMAIN_MEASURE,
    ConsistencyError,
    DimensionError,
    GridSpec,
    MeanViolationError,
    SpectralField,
    VelocityField,
    biot_savart,
    curl,
    dealias,
    derivative,
    inner_product_l2,
    invert_laplacian,
    l2_norm,
    laplacian,
    spectral_divergence_max,
    to_physical,
    to_spectral,
)


def naive_dft(values):
    n = values.shape[0]
    x = np.arange(n) * 2 * np.pi / n
    k = np.fft.fftfreq(n, 1.0 / n)
    out = np.zeros((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            s = 0.0
            for i in range(n):
                for j in range(n):
                    s += values[i, j] * np.exp(-1j * (k[a] * x[i] + k[b] * x[j]))
            out[a, b] = s / n**2
    return out


def naive_idft(coeffs):
    n = coeffs.shape[0]
    x = np.arange(n) * 2 * np.pi / n
    k = np.fft.fftfreq(n, 1.0 / n)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            phase = np.exp(1j * (k[:, None] * x[i] + k[None, :] * x[j]))
            out[i, j] = np.real(np.sum(coeffs * phase))
    return out


def random_zero_mean(grid, seed, nyquist=True):
    rng = np.random.default_rng(seed)
    f = SpectralField.from_values(grid, rng.standard_normal((grid.n, grid.n)))
    c = f.coeffs.copy()
    c[0, 0] = 0.0
    if not nyquist:
        c[grid.n // 2, :] = 0.0
        c[:, grid.n // 2] = 0.0
    return SpectralField.from_coeffs(grid, c)


def coords(n):
    return GridSpec(n).coordinates()


class TestGridSpec:
    def test_basic_properties(self):
        g = GridSpec(16)
        assert g.h * g.n == pytest.approx(2 * np.pi)
        assert g.domain_measure == pytest.approx(4 * np.pi**2)

    @pytest.mark.parametrize("n", [7, 6, 0, -8])
    def test_rejects_invalid_sizes(self, n):
        with pytest.raises(ValueError):
            GridSpec(n)


class TestTransforms:
    def test_sine_mode(self):
        x, _ = coords(16)
        f = to_spectral(np.sin(x))
        assert f.coeffs[1, 0] == pytest.approx(-0.5j, abs=1e-14)
        assert f.coeffs[-1, 0] == pytest.approx(0.5j, abs=1e-14)
        others = np.abs(f.coeffs).copy()
        others[1, 0] = others[-1, 0] = 0
        assert others.max() < 1e-14
        assert np.max(np.abs(to_physical(f.coeffs) - np.sin(x))) < 1e-12

    def test_constant(self):
        f = to_spectral(np.ones((8, 8)))
        assert f.coeffs[0, 0] == pytest.approx(1.0)
        assert np.abs(f.coeffs).sum() == pytest.approx(1.0)

    def test_matches_naive_dft(self):
        v = np.random.default_rng(0).standard_normal((8, 8))
        assert np.max(np.abs(to_spectral(v).coeffs - naive_dft(v))) < 1e-12

    def test_inverse_matches_naive_sum(self):
        c = to_spectral(np.random.default_rng(1).standard_normal((8, 8))).coeffs
        assert np.max(np.abs(to_physical(c) - naive_idft(c))) < 1e-12

    def test_cosine_from_coeffs(self):
        c = np.zeros((8, 8), dtype=complex)
        c[1, 0] = c[-1, 0] = 0.5
        x, _ = coords(8)
        assert np.max(np.abs(to_physical(c) - np.cos(x))) < 1e-14
        assert np.all(to_physical(np.zeros((8, 8), dtype=complex)) == 0)

    def test_symmetry_violation(self):
        c = np.zeros((8, 8), dtype=complex)
        c[1, 0] = 1.0
        with pytest.raises(ConsistencyError):
            to_physical(c)

    @pytest.mark.parametrize("shape", [(8, 6), (7, 7)])
    def test_bad_shapes(self, shape):
        with pytest.raises(DimensionError):
            to_spectral(np.zeros(shape))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([8, 16, 32]))
    def test_roundtrip(self, seed, n):
        v = np.random.default_rng(seed).standard_normal((n, n)) * 10
        assert np.max(np.abs(to_physical(to_spectral(v).coeffs) - v)) < 1e-12

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_parseval(self, seed):
        f = to_spectral(np.random.default_rng(seed).standard_normal((16, 16)))
        lhs = inner_product_l2(f, f)
        rhs = DOMAIN_MEASURE * np.sum(np.abs(f.coeffs) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-10)


class TestDerivatives:
    def test_dx_sin(self):
        x, _ = coords(16)
        d = derivative(to_spectral(np.sin(x)), "x", 1)
        assert np.max(np.abs(d.values - np.cos(x))) < 1e-12

    def test_dy_constant(self):
        d = derivative(to_spectral(np.full((8, 8), 3.0)), "y", 1)
        assert np.max(np.abs(d.values)) < 1e-14

    def test_laplacian_eigenfunction(self):
        x, y = coords(16)
        f = to_spectral(np.sin(x) * np.sin(y))
        lap = derivative(f, "x", 2) + derivative(f, "y", 2)
        assert np.max(np.abs(lap.values + 2 * f.values)) < 1e-12
        assert np.max(np.abs(laplacian(f).values + 2 * f.values)) < 1e-12

    def test_nyquist_zeroed_for_odd_orders(self):
        c = np.zeros((8, 8), dtype=complex)
        c[4, 0] = 1.0
        f = SpectralField.from_coeffs(GridSpec(8), c)
        assert np.max(np.abs(derivative(f, "x", 1).values)) == 0
        assert np.max(np.abs(derivative(f, "x", 2).values)) > 0

    def test_order_limit(self):
        with pytest.raises(ValueError):
            derivative(SpectralField.zeros(GridSpec(8)), "x", 5)

    def test_commutes_with_dealias(self):
        f = random_zero_mean(GridSpec(24), 3)
        for axis in "xy":
            a = dealias(derivative(f, axis, 1))
            b = derivative(dealias(f), axis, 1)
            assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-13


class TestInverseLaplacian:
    def test_sine(self):
        x, _ = coords(16)
        psi = invert_laplacian(to_spectral(np.sin(x)))
        assert np.max(np.abs(psi.values + np.sin(x))) < 1e-12

    def test_product_mode(self):
        x, y = coords(16)
        psi = invert_laplacian(to_spectral(-2 * np.sin(x) * np.sin(y)))
        assert np.max(np.abs(psi.values - np.sin(x) * np.sin(y))) < 1e-12

    def test_mean_violation_carries_mean(self):
        with pytest.raises(MeanViolationError) as exc:
            invert_laplacian(to_spectral(np.ones((8, 8))))
        assert exc.value.mean == pytest.approx(1.0)

    def test_laplacian_recovers_input(self):
        f = random_zero_mean(GridSpec(32), 5)
        back = laplacian(invert_laplacian(f))
        assert np.max(np.abs(back.values - f.values)) < 1e-10
        assert abs(invert_laplacian(f).mean) < 1e-15


class TestBiotSavart:
    def test_single_mode(self):
        x, _ = coords(16)
        u = biot_savart(to_spectral(np.sin(x)))
        assert np.max(np.abs(u.u_x.values)) < 1e-14
        assert np.max(np.abs(u.u_y.values + np.cos(x))) < 1e-12

    def test_zero(self):
        u = biot_savart(SpectralField.zeros(GridSpec(8)))
        assert u.max_speed() == 0

    def test_mean_violation(self):
        with pytest.raises(MeanViolationError):
            biot_savart(to_spectral(np.ones((8, 8))))

    @pytest.mark.parametrize("seed", range(100))
    def test_random_fields(self, seed):
        # Nyquist lines carry no derivative information, so curl recovery is only
        # possible for fields without them
        w = random_zero_mean(GridSpec(32), seed, nyquist=False)
        u = biot_savart(w)
        assert np.max(np.abs(curl(u).values - w.values)) < 1e-10
        assert spectral_divergence_max(u) < 1e-10
        assert abs(u.u_x.mean) < 1e-15 and abs(u.u_y.mean) < 1e-15


class TestDealias:
    def test_high_mode_removed(self):
        c = np.zeros((16, 16), dtype=complex)
        c[7, 0] = c[-7, 0] = 1.0
        assert np.max(np.abs(dealias(SpectralField.from_coeffs(GridSpec(16), c)).coeffs)) < 1e-15

    def test_low_mode_kept(self):
        c = np.zeros((16, 16), dtype=complex)
        c[1, 1] = c[-1, -1] = 1.0
        f = SpectralField.from_coeffs(GridSpec(16), c)
        assert np.max(np.abs(dealias(f).coeffs - f.coeffs)) < 1e-15

    @pytest.mark.parametrize("seed", range(5))
    def test_does_not_increase_norm(self, seed):
        f = random_zero_mean(GridSpec(16), seed)
        assert l2_norm(dealias(f)) <= l2_norm(f)


class TestInnerProduct:
    def test_closed_forms(self):
        x, _ = coords(16)
        s, c = to_spectral(np.sin(x)), to_spectral(np.cos(x))
        assert inner_product_l2(s, s) == pytest.approx(2 * np.pi**2, abs=1e-10)
        assert abs(inner_product_l2(s, c)) < 1e-12
        one = to_spectral(np.ones((16, 16)))
        assert inner_product_l2(one, one) == pytest.approx(4 * np.pi**2)

    def test_symmetric_and_bilinear(self):
        g = GridSpec(16)
        f, h, k = (random_zero_mean(g, s) for s in (1, 2, 3))
        assert inner_product_l2(f, h) == pytest.approx(inner_product_l2(h, f))
        assert inner_product_l2(2.0 * f + k, h) == pytest.approx(
            2 * inner_product_l2(f, h) + inner_product_l2(k, h))

    def test_velocity_pairs(self):
        x, _ = coords(16)
        v = VelocityField.from_values(GridSpec(16), np.sin(x), np.cos(x))
        assert inner_product_l2(v, v) == pytest.approx(4 * np.pi**2)

    def test_grid_mismatch(self):
        with pytest.raises(DimensionError):
            inner_product_l2(SpectralField.zeros(GridSpec(8)), SpectralField.zeros(GridSpec(16)))
