import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laurentlab import symbol as sym
from laurentlab.errors import DomainError

TWO_PI = 2.0 * math.pi


def fa_direct(a, t):
    # independent evaluation of the Cauchy-kernel symbol
    e = np.exp(1j * np.asarray(t))
    return -(np.conj(e) - a) / (e - a)


def fa_deriv_abs(a, t, h=1e-6):
    # |f'| by central differences on the direct evaluator
    d = (fa_direct(a, np.asarray(t) + h) - fa_direct(a, np.asarray(t) - h)) / (2 * h)
    return np.abs(d)


class TestConstructors:
    def test_constant_single_mode(self):
        f = sym.constant_symbol(2.0 - 1.0j)
        assert f.coeffs == {(0,): 2.0 - 1.0j}
        assert f.bandwidth == 0

    def test_harmonic_single_mode(self):
        f = sym.harmonic_symbol(1)
        assert f.coeffs == {(1,): 1.0 + 0j}
        f.validate()

    def test_fourier_coeffs_constant(self):
        f = sym.fourier_coeffs(lambda t: np.full_like(t, 3.0, dtype=complex),
                               d=1, grid=32, bandwidth=4)
        assert set(f.coeffs) == {(0,)}
        assert f.coeffs[(0,)] == pytest.approx(3.0)

    def test_fourier_coeffs_harmonic(self):
        f = sym.fourier_coeffs(lambda t: np.exp(1j * t), d=1, grid=32, bandwidth=4)
        assert set(f.coeffs) == {(1,)}
        assert f.coeffs[(1,)] == pytest.approx(1.0)

    def test_fourier_coeffs_ggt_weight(self):
        # coefficients of i f_a conj(f_a)' are a^{-|m|} off zero, zero at m = 0
        a = 2.0

        def ev(t):
            ct = np.cos(t)
            return (2.0 * (a * ct - 1.0) / (a * a - 2.0 * a * ct + 1.0)).astype(complex)

        f = sym.fourier_coeffs(ev, d=1, grid=256, bandwidth=30, tail_tol=1e-11)
        for m in range(1, 20):
            assert f.coeffs[(m,)] == pytest.approx(2.0 ** (-m), abs=1e-10)
            assert f.coeffs[(-m,)] == pytest.approx(2.0 ** (-m), abs=1e-10)
        assert (0,) not in f.coeffs

    def test_fourier_coeffs_grid_guard(self):
        with pytest.raises(DomainError):
            sym.fourier_coeffs(lambda t: np.exp(1j * t), d=1, grid=8, bandwidth=4)

    def test_ggt_symbol_values(self):
        f = sym.ggt_symbol(2.0)
        assert f(np.array([0.0]))[0] == pytest.approx(-1.0)
        assert f(np.array([math.pi]))[0] == pytest.approx(-1.0)
        v = f(np.array([math.pi / 2]))[0]
        assert abs(abs(v) - 1.0) < 1e-12
        assert v == pytest.approx(fa_direct(2.0, math.pi / 2))
        f.validate()

    def test_ggt_symbol_domain(self):
        with pytest.raises(DomainError):
            sym.ggt_symbol(1.0)
        with pytest.raises(DomainError):
            sym.range_arc(0.5)

    def test_ggt_weight_matches_velocity(self):
        # closed-form weight symbol equals i f_a conj(f_a)' coefficientwise
        a = 2.0
        f = sym.ggt_symbol(a)
        g = sym.ggt_weight_symbol(a)
        vel = sym.derived_symbols(f).velocity[0]
        for m in range(-12, 13):
            got = vel.coeffs.get((m,), 0.0)
            want = g.coeffs.get((m,), 0.0)
            assert got == pytest.approx(want, abs=1e-9)


class TestDerived:
    def test_constant_derivatives_vanish(self):
        d = sym.derived_symbols(sym.constant_symbol(2.0))
        assert d.partials[0].coeffs == {}
        assert d.velocity[0].coeffs == {}
        assert d.speed_sq.coeffs == {}

    def test_harmonic_velocity_is_one(self):
        d = sym.derived_symbols(sym.harmonic_symbol(1))
        assert d.velocity[0].coeffs == {(0,): pytest.approx(1.0)}
        assert d.speed_sq.coeffs == {(0,): pytest.approx(1.0)}

    def test_speed_sq_at_pi(self):
        # |f_2'(pi)|^2 = 4/9; oracle is numeric differentiation of the
        # closed form, cross-checked against 2|a cos t - 1|/(a^2 - 2a cos t + 1)
        a = 2.0
        oracle = fa_deriv_abs(a, math.pi) ** 2
        assert oracle == pytest.approx(4.0 / 9.0, abs=1e-9)
        analytic = (2 * abs(a * math.cos(math.pi) - 1)
                    / (a * a - 2 * a * math.cos(math.pi) + 1)) ** 2
        assert analytic == pytest.approx(4.0 / 9.0, abs=1e-15)
        d = sym.derived_symbols(sym.ggt_symbol(a))
        val = d.speed_sq(np.array([math.pi]))[0]
        assert val.real == pytest.approx(4.0 / 9.0, abs=1e-9)
        assert abs(val.imag) < 1e-10

    def test_velocity_real_on_grid(self):
        f = sym.ggt_symbol(2.0)
        vel = sym.derived_symbols(f).velocity[0]
        t = np.linspace(0.0, TWO_PI, 257)
        assert np.max(np.abs(vel.coefficient_sum(t).imag)) < 1e-10

    def test_weighted_gradient(self):
        f = sym.harmonic_symbol(1)
        g = sym.constant_symbol(2.0)
        d = sym.derived_symbols(f, weights=[g])
        # 2 * d/dt e^{it} = 2i e^{it}
        assert d.weighted.coeffs == {(1,): pytest.approx(2.0j)}


class TestCriticalSet:
    def test_harmonic_empty(self):
        rep = sym.critical_set(sym.harmonic_symbol(1), grid=128, tol=1e-8)
        assert rep.critical_points == []

    def test_constant_full_grid(self):
        rep = sym.critical_set(sym.constant_symbol(1.0), grid=32, tol=1e-8)
        assert len(rep.critical_points) == 32

    def test_ggt_critical_pair(self):
        # gradient of f_a vanishes where cos t = 1/a, i.e. t = +/- pi/3 at a = 2
        grid = 1024
        tol = 0.02
        rep = sym.critical_set(sym.ggt_symbol(2.0), grid=grid, tol=tol)
        assert rep.critical_points, "no critical points detected"
        # |grad f| grows away from a critical point with slope
        # 2 a sin(t_a) / (a^2 - 1) ~ 1.15, so the flagged window has
        # radius about tol / slope
        targets = {math.pi / 3, TWO_PI - math.pi / 3}
        for p in rep.critical_points:
            assert min(abs(p - t) for t in targets) < tol
        hit = {t for t in targets
               if any(abs(p - t) < 2 * rep.grid_step for p in rep.critical_points)}
        assert hit == targets
        assert rep.critical_values == sorted(rep.critical_values)


class TestRangeArc:
    def test_arc_for_a2(self):
        low, high = sym.range_arc(2.0)
        # oracle: direct evaluation at +/- arccos(1/2)
        t_a = math.acos(0.5)
        want_low = np.angle(fa_direct(2.0, -t_a)) % TWO_PI
        want_high = np.angle(fa_direct(2.0, t_a)) % TWO_PI
        assert low == pytest.approx(want_low, abs=1e-12)
        assert high == pytest.approx(want_high, abs=1e-12)
        assert low == pytest.approx(2 * math.pi / 3, abs=1e-12)
        assert high == pytest.approx(4 * math.pi / 3, abs=1e-12)

    def test_widths_shrink(self):
        widths = []
        for a in (5.0, 10.0, 20.0):
            low, high = sym.range_arc(a)
            widths.append(high - low)
            assert high - low == pytest.approx(4 * math.asin(1 / a), abs=1e-12)
            t_a = math.acos(1 / a)
            assert abs(abs(fa_direct(a, t_a)) - 1.0) < 1e-12
        assert widths[0] > widths[1] > widths[2]


class TestInvariants:
    def test_parseval(self):
        f = sym.ggt_symbol(2.0)
        t = np.arange(512) * (TWO_PI / 512)
        grid_mean = np.mean(np.abs(f(t)) ** 2)
        coeff_sum = sum(abs(c) ** 2 for c in f.coeffs.values())
        assert coeff_sum == pytest.approx(grid_mean, abs=1e-8)

    def test_unimodular_product_is_one(self):
        f = sym.ggt_symbol(2.0)
        prod = sym.multiply_symbols(f, sym.conj_symbol(f))
        assert prod.coeffs.get((0,), 0.0) == pytest.approx(1.0, abs=1e-8)
        others = [abs(c) for idx, c in prod.coeffs.items() if idx != (0,)]
        assert max(others, default=0.0) < 1e-8

    def test_roundtrip_through_evaluator(self):
        f = sym.ggt_symbol(2.0, bandwidth=24)
        rebuilt = sym.fourier_coeffs(lambda t: f.coefficient_sum(t), d=1,
                                     grid=256, bandwidth=30, tail_tol=1e-14)
        for idx, c in f.coeffs.items():
            assert rebuilt.coeffs[idx] == pytest.approx(c, abs=1e-10)

    def test_save_load_roundtrip(self, tmp_path):
        f = sym.ggt_symbol(2.0)
        path = tmp_path / "symbol.txt"
        sym.save_symbol(f, path)
        g = sym.load_symbol(path)
        assert g.dim == f.dim
        assert g.unimodular == f.unimodular
        assert set(g.coeffs) == set(f.coeffs)
        for idx, c in f.coeffs.items():
            assert g.coeffs[idx] == c  # exact at 17 significant digits


coeff_strategy = st.dictionaries(
    st.integers(min_value=-4, max_value=4),
    st.complex_numbers(max_magnitude=5.0, allow_nan=False, allow_infinity=False),
    min_size=1, max_size=6,
)


class TestProperties:
    @given(coeff_strategy)
    @settings(max_examples=40, deadline=None)
    def test_parseval_random(self, coeffs):
        f = sym.Symbol(dim=1, coeffs={(k,): v for k, v in coeffs.items()})
        t = np.arange(64) * (TWO_PI / 64)
        grid_mean = np.mean(np.abs(f.coefficient_sum(t)) ** 2)
        coeff_sum = sum(abs(c) ** 2 for c in f.coeffs.values())
        assert coeff_sum == pytest.approx(grid_mean, abs=1e-8 * (1 + coeff_sum))

    @given(coeff_strategy, coeff_strategy)
    @settings(max_examples=40, deadline=None)
    def test_product_matches_pointwise(self, ca, cb):
        f = sym.Symbol(dim=1, coeffs={(k,): v for k, v in ca.items()})
        g = sym.Symbol(dim=1, coeffs={(k,): v for k, v in cb.items()})
        prod = sym.multiply_symbols(f, g, tail_tol=0.0)
        t = np.arange(64) * (TWO_PI / 64)
        lhs = prod.coefficient_sum(t)
        rhs = f.coefficient_sum(t) * g.coefficient_sum(t)
        scale = 1 + np.max(np.abs(rhs))
        assert np.max(np.abs(lhs - rhs)) < 1e-9 * scale
