import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmcorr import linop
from qmcorr.correlate import observable_correlation
from qmcorr.models import (
    P0,
    P1,
    PLUS,
    build_cnot,
    build_controlled_rotation,
    build_kicked_cnot,
    build_shift_model,
    build_unsharp_cnot,
    shift_scale,
)
from qmcorr.quadrature import build_quadrature_model, coherent
from qmcorr.quantum import State, is_sharp
from qmcorr.scheme import ReadingScale, measure
from qmcorr.transformer import (
    StateTransformer,
    Verdict,
    check_first_kind,
    check_repeat_composition,
    check_repeatable,
    verdict,
)
from helpers import random_scheme

seeds = st.integers(min_value=0, max_value=2**32 - 1)
PLUS_T = linop.projector(PLUS)


def fixtures():
    return {
        "cnot": StateTransformer(build_cnot()),
        "crot": StateTransformer(build_controlled_rotation(np.pi / 2)),
        "crot_small": StateTransformer(build_controlled_rotation(0.4)),
        "kicked": StateTransformer(build_kicked_cnot()),
        "unsharp": StateTransformer(build_unsharp_cnot()),
        "shift3": StateTransformer(build_shift_model(3, [0, 1, 2]), shift_scale(build_shift_model(3, [0, 1, 2]))),
    }


class TestVerdict:
    def test_bands(self):
        assert verdict(1e-9, 1e-8) is Verdict.TRUE
        assert verdict(5e-8, 1e-8) is Verdict.INCONCLUSIVE
        assert verdict(2e-7, 1e-8) is Verdict.FALSE

    def test_truthiness(self):
        assert Verdict.TRUE and not Verdict.FALSE and not Verdict.INCONCLUSIVE


class TestApply:
    def test_cnot_cell_zero(self):
        assert np.allclose(StateTransformer(build_cnot()).apply(0, PLUS_T), 0.5 * P0, atol=1e-12)

    def test_zero_probability_cell(self):
        assert np.allclose(StateTransformer(build_cnot()).apply(1, P0), 0, atol=1e-14)

    def test_sum_is_final_object_state(self):
        st_ = StateTransformer(build_controlled_rotation(np.pi / 2))
        total = sum(st_.apply(i, PLUS_T) for i in range(len(st_)))
        assert np.allclose(total, st_.apply_total(PLUS_T), atol=1e-12)

    def test_equals_weighted_component(self):
        s = build_controlled_rotation(np.pi / 2)
        rec = measure(s, PLUS_T)
        st_ = StateTransformer(s)
        for i, c in enumerate(rec.components):
            assert np.allclose(st_.apply(i, PLUS_T), c.weight * c.object, atol=1e-12)

    @settings(max_examples=40)
    @given(seeds, st.integers(1, 3), st.integers(1, 3), st.booleans(), st.booleans())
    def test_instrument_reproduces_povm(self, seed, ds, da, sharp, channel):
        rng = np.random.default_rng(seed)
        st_ = StateTransformer(random_scheme(rng, ds, da, sharp, channel))
        t = linop.random_density(ds, rng)
        total = 0.0
        for i, e in enumerate(st_.povm.matrices):
            out = st_.apply(i, t)
            assert abs(np.trace(out).real - np.trace(t @ e).real) <= 1e-10
            assert np.linalg.eigvalsh((out + linop.dagger(out)) / 2).min() >= -1e-10
            total += np.trace(out).real
        assert abs(total - 1) <= 1e-10

    @settings(max_examples=40)
    @given(seeds, st.integers(1, 3), st.integers(2, 3), st.booleans())
    def test_measure_property_under_merging(self, seed, ds, da, sharp):
        rng = np.random.default_rng(seed)
        s = random_scheme(rng, ds, da, sharp)
        fine = StateTransformer(s)
        coarse = StateTransformer(s, fine.scale.merged(0, 1))
        t = linop.random_density(ds, rng)
        lhs = np.trace(coarse.apply(0, t)).real
        assert abs(lhs - np.trace(fine.apply(0, t) + fine.apply(1, t)).real) <= 1e-12

    @settings(max_examples=30)
    @given(seeds, st.integers(1, 3), st.integers(1, 3), st.booleans(), st.booleans())
    def test_kraus_form_matches(self, seed, ds, da, sharp, channel):
        rng = np.random.default_rng(seed)
        st_ = StateTransformer(random_scheme(rng, ds, da, sharp, channel))
        t = linop.random_density(ds, rng)
        for i in range(len(st_)):
            ks = st_.kraus(i)
            via_kraus = sum(k @ t @ linop.dagger(k) for k in ks)
            assert linop.fro(via_kraus - st_.apply(i, t)) <= 1e-10


class TestFirstKind:
    def test_cnot(self):
        assert check_first_kind(fixtures()["cnot"]).verdict is Verdict.TRUE

    @pytest.mark.parametrize("theta", [0.3, 1.0, np.pi / 2, 2.5, np.pi])
    def test_controlled_rotation_any_angle(self, theta):
        assert check_first_kind(StateTransformer(build_controlled_rotation(theta))).verdict is Verdict.TRUE

    def test_kicked_is_not_first_kind(self):
        r = check_first_kind(fixtures()["kicked"])
        assert r.verdict is Verdict.FALSE and r.worst > 0.1


class TestRepeatable:
    def test_cnot(self):
        assert check_repeatable(fixtures()["cnot"]).verdict is Verdict.TRUE

    def test_controlled_rotation(self):
        r = check_repeatable(fixtures()["crot"], [State.pure(PLUS)])
        assert r.verdict is Verdict.FALSE
        assert r.min_repeat_probability == pytest.approx(0.5, abs=1e-10)

    def test_quadrature_model(self):
        m = build_quadrature_model(16, 1.0, bins=2)
        sig = State.pure(coherent(16, 1.0))
        r = check_repeatable(StateTransformer(m.scheme, m.reading_scale(sig)), [sig])
        assert r.verdict is Verdict.FALSE
        assert r.min_repeat_probability < 1 - 1e-3


class TestComposition:
    def test_cnot(self):
        assert check_repeat_composition(fixtures()["cnot"]).verdict is Verdict.TRUE

    def test_controlled_rotation_eighth(self):
        st_ = fixtures()["crot"]
        once = st_.apply(1, PLUS_T)
        assert np.trace(once).real == pytest.approx(0.25, abs=1e-12)
        assert np.trace(st_.apply(1, once)).real == pytest.approx(0.125, abs=1e-12)
        assert check_repeat_composition(st_, [State.pure(PLUS)]).verdict is Verdict.FALSE

    @pytest.mark.parametrize("name", ["cnot", "crot", "crot_small", "kicked", "unsharp", "shift3"])
    def test_agrees_with_repeatable(self, name):
        st_ = fixtures()[name]
        assert bool(check_repeat_composition(st_)) == bool(check_repeatable(st_))

    @pytest.mark.parametrize("name", ["cnot", "crot", "crot_small", "kicked", "unsharp", "shift3"])
    def test_repeatable_implies_first_kind(self, name):
        st_ = fixtures()[name]
        if check_repeatable(st_):
            assert check_first_kind(st_)

    @pytest.mark.parametrize("name", ["cnot", "crot", "crot_small", "kicked", "unsharp", "shift3"])
    def test_repeatable_implies_strong_observable_correlation(self, name):
        st_ = fixtures()[name]
        if check_repeatable(st_):
            for t in [State.pure(PLUS)] if st_.scheme.dim_s == 2 else [State.pure(np.ones(3) / np.sqrt(3))]:
                assert observable_correlation(st_.scheme, t, st_.scale).rho == pytest.approx(1, abs=1e-9)

    @pytest.mark.parametrize("name", ["cnot", "crot", "crot_small", "kicked", "unsharp", "shift3"])
    def test_repeatable_implies_sharp_effects(self, name):
        st_ = fixtures()[name]
        if check_repeatable(st_):
            assert is_sharp(st_.povm, tol=1e-9)


@settings(max_examples=30)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_eigen_form_controls_probability_form(seed, ds, da):
    rng = np.random.default_rng(seed)
    st_ = StateTransformer(random_scheme(rng, ds, da, sharp=True))
    t = linop.random_density(ds, rng)
    for i, e in enumerate(st_.povm.matrices):
        out = st_.apply(i, t)
        w = np.trace(out).real
        if w <= 1e-9:
            continue
        ts = out / w
        eig = linop.fro(e @ ts - ts)
        assert abs(np.trace(ts @ e).real - 1) <= eig * ds + 1e-12


def test_unsharp_fixture_is_first_kind_but_not_repeatable():
    st_ = fixtures()["unsharp"]
    assert check_first_kind(st_)
    assert not check_repeatable(st_)


def test_default_scale_is_finest():
    st_ = StateTransformer(build_cnot())
    assert st_.scale == ReadingScale.finest(build_cnot())
    assert np.allclose(st_.povm.matrices[1], P1, atol=1e-12)
