import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmcorr import linop
from qmcorr import quadrature as q
from qmcorr.correlate import observable_correlation, state_correlation, value_correlation
from qmcorr.errors import DimensionError, TruncationError, ValidationError
from qmcorr.quantum import State, is_sharp
from qmcorr.scheme import measured_povm


@pytest.fixture(scope="module")
def m16():
    return q.build_quadrature_model(16, 1.0, bins=2)


@pytest.fixture(scope="module")
def sig16():
    return State.pure(q.coherent(16, 1.0))


class TestStates:
    def test_commutator_defect_confined_to_top_level(self):
        off, top = q.commutator_defect(32)
        assert off <= 1e-12 and top == pytest.approx(32, abs=1e-9)

    def test_vacuum_moments(self):
        qq, pp = q.quadratures(32)
        v = q.vacuum(32)
        assert np.vdot(v, pp @ v).real == pytest.approx(0, abs=1e-14)
        assert np.vdot(v, pp @ pp @ v).real == pytest.approx(0.5, abs=1e-12)
        assert np.vdot(v, qq @ qq @ v).real == pytest.approx(0.5, abs=1e-12)

    def test_coherent_moments(self):
        qq, pp = q.quadratures(48)
        v = q.coherent(48, 1.0)
        assert np.linalg.norm(v) == pytest.approx(1)
        mean = np.vdot(v, qq @ v).real
        assert mean == pytest.approx(np.sqrt(2), abs=1e-10)
        assert np.vdot(v, qq @ qq @ v).real - mean**2 == pytest.approx(0.5, abs=1e-10)

    @pytest.mark.parametrize("r", [0.25, 0.5, 0.8])
    def test_squeezed_variance(self, r):
        _, pp = q.quadratures(64)
        v = q.squeezed_vacuum(64, r)
        assert np.vdot(v, pp @ pp @ v).real == pytest.approx(np.exp(-2 * r) / 2, rel=1e-6)


class TestBuild:
    def test_minimum_truncation(self):
        with pytest.raises(TruncationError):
            q.build_quadrature_model(8, 1.0)

    def test_zero_coupling(self):
        with pytest.raises(ValidationError):
            q.build_quadrature_model(16, 0.0)

    def test_probe_normalised(self):
        with pytest.raises(ValidationError):
            q.build_quadrature_model(16, 1.0, probe=np.ones(16))

    def test_probe_dimension(self):
        with pytest.raises(DimensionError):
            q.build_quadrature_model(16, 1.0, probe=q.vacuum(8))

    def test_bins(self):
        with pytest.raises(ValidationError):
            q.build_quadrature_model(16, 1.0, bins=1)

    def test_dense_limit(self):
        with pytest.raises(DimensionError):
            q.build_quadrature_model(40, 1.0).scheme

    def test_probe_centered(self):
        m = q.build_quadrature_model(32, 1.0)
        assert np.vdot(m.probe, m.bp @ m.probe).real == pytest.approx(0, abs=1e-14)


class TestReadingScale:
    def test_finest(self, m16):
        sc = m16.reading_scale(bins=16)
        assert len(sc) == 16
        assert np.allclose(sc.values, m16.pointer_values / m16.lam)

    @pytest.mark.parametrize("bins", [2, 3, 4, 8])
    def test_equal_probability(self, bins):
        m = q.build_quadrature_model(64, 2.0)
        sig = q.coherent(64, 1.0)
        sc = m.reading_scale(sig, bins)
        assert len(sc) == bins
        dist = m.pointer_distribution(sig)
        mass = np.array([dist[sorted(c.pointer_indices)].sum() for c in sc.cells])
        assert np.all(np.abs(mass - 1 / bins) <= 0.1)
        assert np.all(np.diff(sc.values) > 0)

    def test_values_scaled_by_coupling(self):
        a = q.build_quadrature_model(32, 1.0).reading_scale(bins=32)
        b = q.build_quadrature_model(32, 2.0).reading_scale(bins=32)
        assert np.allclose(a.values, 2 * b.values)


class TestStructuredVersusDense:
    def test_povm(self, m16, sig16):
        sc = m16.reading_scale(sig16)
        dense = measured_povm(m16.scheme, sc)
        for a, b in zip(dense.matrices, m16.effects(sc)):
            assert linop.fro(a - b) <= 1e-10

    def test_correlations(self, m16, sig16):
        sc = m16.reading_scale(sig16)
        assert q.observable_correlation(m16, sig16, sc).rho == pytest.approx(
            observable_correlation(m16.scheme, sig16, sc).rho, abs=1e-10)
        for i in range(2):
            assert q.quadrature_value_correlation(m16, sig16, sc, i, check_truncation=False).rho == pytest.approx(
                value_correlation(m16.scheme, sig16, sc, i=i).rho, abs=1e-10)
            assert q.quadrature_state_correlation(m16, sig16, sc, i).rho == pytest.approx(
                state_correlation(m16.scheme, sig16, sc, i=i).rho, abs=1e-6)

    def test_pointer_distribution(self, m16, sig16):
        from qmcorr.scheme import measure

        rec = measure(m16.scheme, sig16, m16.reading_scale(bins=16))
        assert np.allclose(rec.weights, m16.pointer_distribution(sig16), atol=1e-10)

    def test_effects_unsharp(self, m16, sig16):
        assert not is_sharp(measured_povm(m16.scheme, m16.reading_scale(sig16)), tol=1e-6)


class TestConvolution:
    @pytest.mark.parametrize("bins", [2, 4, 8])
    def test_binned_scales(self, bins):
        m = q.build_quadrature_model(64, 2.0)
        sig = q.coherent(64, 1.0)
        sc = m.reading_scale(sig, bins)
        p = m.signal_weights(sig)
        mask = p > 1e-6
        gap = np.abs(q.convolution_effects(m, sc) - m.cell_response(sc))[:, mask]
        assert gap.max() <= 1e-2

    def test_effects_sum_to_one(self):
        m = q.build_quadrature_model(32, 1.0)
        sc = m.reading_scale(bins=4)
        assert np.allclose(q.convolution_effects(m, sc, np.array([-1.0, 0.0, 1.5])).sum(axis=0), 1, atol=1e-8)


class TestVariance:
    def test_lambda_two(self):
        vd = q.variance_decomposition(q.build_quadrature_model(64, 2.0), q.coherent(64, 1.0))
        assert vd.var_E == pytest.approx(0.625, rel=0.05)
        assert vd.var_aq == pytest.approx(0.5, rel=0.05)
        assert vd.noise == pytest.approx(0.125, rel=1e-10)
        assert vd.relative_residual <= 0.05

    def test_squeezed_noise_shrinks(self):
        sig = q.coherent(64, 1.0)
        vac = q.variance_decomposition(q.build_quadrature_model(64, 2.0), sig)
        r = 0.5
        sq = q.variance_decomposition(q.build_quadrature_model(64, 2.0, probe=q.squeezed_vacuum(64, r)), sig)
        assert sq.noise == pytest.approx(vac.noise * np.exp(-2 * r), rel=1e-3)
        assert sq.var_E < vac.var_E

    def test_large_coupling_noise_term(self):
        m = q.build_quadrature_model(64, 8.0)
        vd = q.variance_decomposition(m, q.coherent(64, 1.0), check_truncation=False)
        assert vd.noise == pytest.approx(1 / 128, rel=1e-10)

    def test_large_coupling_truncation_guard(self):
        with pytest.raises(TruncationError):
            q.variance_decomposition(q.build_quadrature_model(64, 8.0), q.coherent(64, 1.0))

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_convergence(self, lam):
        a = q.variance_decomposition(q.build_quadrature_model(32, lam), q.coherent(32, 1.0), check_truncation=False)
        b = q.variance_decomposition(q.build_quadrature_model(64, lam), q.coherent(64, 1.0), check_truncation=False)
        assert abs(a.var_E - b.var_E) / b.var_E < 0.01


class TestObservableCorrelation:
    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_ratio(self, lam):
        m = q.build_quadrature_model(64, lam)
        rho = q.observable_correlation(m, q.coherent(64, 1.0)).rho
        assert rho == pytest.approx(lam**2 / (lam**2 + 1), rel=0.05)
        assert rho < 1 - 1e-3

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.2, 2.0), st.floats(-1.0, 1.0))
    def test_strictly_below_one(self, lam, alpha):
        m = q.build_quadrature_model(48, lam)
        rho = q.observable_correlation(m, q.coherent(48, alpha)).rho
        assert 0 < rho < 1 - 1e-3


class TestValueCorrelation:
    def test_chain(self, m16, sig16):
        sc = m16.reading_scale(sig16)
        for i in range(2):
            c = q.value_chain(m16, sig16, sc, i)
            assert c.eps1 == pytest.approx(c.mean_E, abs=1e-12)
            assert c.eps2 == pytest.approx(c.mean_E, abs=1e-12)
            assert c.eps12 == pytest.approx(c.mean_E2, abs=1e-12)
            assert c.var_pointer == pytest.approx(c.mean_E - c.mean_E**2, abs=1e-12)
            assert c.var_E_operator == pytest.approx(c.mean_E2 - c.mean_E**2, abs=1e-12)

    def test_degenerate_cell(self):
        m = q.build_quadrature_model(32, 1.0)
        sc = m.reading_scale(bins=32)
        with pytest.raises(ValidationError):
            q.quadrature_value_correlation(m, q.coherent(32, 1.0), sc, 0)

    def test_state_correlation_below_one(self):
        m = q.build_quadrature_model(64, 2.0)
        sig = q.coherent(64, 1.0)
        assert q.quadrature_state_correlation(m, sig, m.reading_scale(sig, 2), 0).rho < 1 - 1e-3


class TestSweep:
    def test_rows_and_csv(self):
        rows = q.quadrature_correlation_sweep(48, [0.5, 1.0], q.coherent(48, 1.0))
        assert [r.lam for r in rows] == [0.5, 1.0]
        out = io.StringIO()
        q.write_sweep_csv(rows, out)
        lines = out.getvalue().split("\n")
        assert lines[0] == ",".join(q.SWEEP_COLUMNS)
        assert len(lines) == 4 and lines[-1] == ""
        assert lines[1].startswith("0.5,")

    def test_empty(self):
        with pytest.raises(ValidationError):
            q.quadrature_correlation_sweep(32, [], q.coherent(32, 1.0))

    def test_deterministic(self):
        a, b = io.StringIO(), io.StringIO()
        q.write_sweep_csv(q.quadrature_correlation_sweep(32, [1.0], q.coherent(32, 1.0)), a)
        q.write_sweep_csv(q.quadrature_correlation_sweep(32, [1.0], q.coherent(32, 1.0)), b)
        assert a.getvalue() == b.getvalue()

    def test_fmt(self):
        assert q.fmt(1 / 3) == "0.333333333333"
        assert q.fmt(2.0) == "2"
