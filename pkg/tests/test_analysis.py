import numpy as np
import pytest

from cmspin.analysis import (
    ConvergenceRow,
    ConvergenceTable,
    ErrorReport,
    convergence_study,
    error_norm,
    error_norm_sweep,
    error_norm_weighted,
    error_term,
    error_term_tail_form,
    fit_gronwall_rate,
    map_ordered,
    regular_horizon,
    residual_RN,
    tail_coefficients,
    tail_envelope,
    weak_residual,
)
from cmspin.cli import default_test_functions
from cmspin.data import GreatCircle, Tilted
from cmspin.dynamics import FlowParams, integrate
from cmspin.spectral import TrigPoly, convolve, dn_operator, interpolate_trig, sobolev_norm

from conftest import random_pol


def two_modes(n, j, k, seed=0):
    rng = np.random.default_rng(seed)
    c = np.zeros((2 * n + 1, 3), dtype=complex)
    for m in (j, k):
        v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        c[n + m], c[n - m] = v, v.conj()
    return TrigPoly(c)


class TestErrorTerm:
    def test_constant(self):
        assert error_term(TrigPoly.constant([0, 0, 1.0], 4)).max_abs() == 0

    def test_constant_plus_one_mode(self):
        P = TrigPoly.constant([0.3, 0, 0.1], 4) + two_modes(4, 3, 3) * 0.5
        assert error_term(P.as_trigpoly(4)).max_abs() < 1e-15

    def test_n5_two_modes(self):
        P = two_modes(2, 1, 2)
        E = error_term(P)
        assert E.max_abs() > 1e-3
        tail = np.abs(E.indices) > 2
        assert np.any(np.abs(E.coeffs[tail]) > 0)
        assert E.allclose(error_term_tail_form(P), 1e-12)

    def test_definition_via_nodes(self):
        # I_N(S x D_N S) is the interpolant of the nodewise cross product
        P = random_pol(6, 1)
        from cmspin.spectral import sample

        v = sample(P).values
        w = sample(dn_operator(P)).values
        lhs = interpolate_trig(np.cross(v, w))
        prod = convolve(P, dn_operator(P), "cross")
        assert (lhs - prod).allclose(error_term(P), 1e-12)

    def test_rejects_high_degree(self):
        with pytest.raises(ValueError):
            error_term(random_pol(4, 0), N=5)

    def test_weighted_norm(self):
        for seed in range(4):
            P = random_pol(10, seed)
            a, b = error_norm_weighted(P, eps=0.1), error_norm(error_term(P), 0.1)
            assert a == pytest.approx(b, rel=1e-12)


class TestTails:
    def test_single_real_mode(self):
        t = tail_coefficients(two_modes(5, 4, 4))
        assert np.max(np.abs(t.full)) < 1e-15 and np.max(np.abs(t.reduced)) < 1e-15

    def test_equal_weight_cancels(self):
        # j = (n+k)/2 pairs a mode with itself; the skew weight vanishes
        n = 4
        c = np.zeros((9, 3), dtype=complex)
        c[n + 3] = [1, 2j, 0]
        t = tail_coefficients(TrigPoly(c))
        assert np.allclose(t.full[1], 0) and np.allclose(t.reduced[1], 0)

    def test_forms_and_envelope(self):
        P = random_pol(4, 3)
        t = tail_coefficients(P)
        assert t.form_gap <= 1e-12
        assert t.symmetry_gap <= 1e-12
        C = convolve(dn_operator(P), P, "cross")
        assert np.allclose(t.full, [C.coeff(4 + k) for k in range(1, 5)], atol=1e-13)
        env = tail_envelope(P)
        assert np.all(np.linalg.norm(t.full, axis=1) <= env * (1 + 1e-12) + 1e-13)
        # the looser envelope quoted for the proof also holds
        h2 = sobolev_norm(P, 0.5) ** 2
        assert np.all(np.linalg.norm(t.full, axis=1) <= 2 * h2 * np.sqrt(np.sum(np.abs(P.coeffs) ** 2)) + 1e-12)


class TestSweep:
    def test_constant_and_stationary(self):
        for fam in (GreatCircle(0), GreatCircle(2)):
            reps = error_norm_sweep(fam, [9, 17], T=0.05, dt=0.01, record_every=1)
            assert all(r.sup_error < 1e-14 for r in reps)

    def test_report_checks(self):
        with pytest.raises(ValueError):
            ErrorReport(5, 0.1, -1.0, np.zeros(1), np.zeros(1), np.zeros(1))

    def test_short_trend_and_threads(self):
        a = error_norm_sweep(Tilted(), [17, 33], T=0.1, dt=0.01, record_every=5)
        b = error_norm_sweep(Tilted(), [17, 33], T=0.1, dt=0.01, record_every=5, threads=2)
        assert a[0].sup_error > a[1].sup_error
        assert [r.sup_error for r in a] == [r.sup_error for r in b]
        assert a[0].as_row()["log_N"] == pytest.approx(np.log(17))


class TestResidual:
    def test_constant(self):
        r = residual_RN(TrigPoly.constant([0, 1.0, 0], 5))
        assert r.norm == 0

    def test_great_circle(self):
        P = interpolate_trig(GreatCircle(3).sample(11))
        r = residual_RN(P)
        assert r.aliasing_part < 1e-14 and r.norm < 1e-13

    def test_flow_identity(self):
        r = residual_RN(random_pol(8, 2))
        assert r.flow_gap < 1e-12

    def test_scaling(self):
        vals = [N * residual_RN(interpolate_trig(Tilted().sample(N))).norm for N in (33, 65, 129)]
        assert max(vals) / min(vals) <= 1.25


class TestWeak:
    def test_needs_snapshots(self):
        tr = integrate(Tilted().sample(9), FlowParams(dt=0.01, t_end=0.01))
        with pytest.raises(ValueError):
            weak_residual(tr, default_test_functions())

    def test_constant_phi(self):
        tr = integrate(Tilted().sample(17), FlowParams(dt=1e-3, t_end=0.05, record_every=5))
        rep = weak_residual(tr, [TrigPoly.constant([1.0, 0.0, 0.0]), TrigPoly.constant([0, 0, 1.0])])
        assert np.max(rep.gaps) < 1e-9

    def test_stationary(self):
        tr = integrate(GreatCircle(2).sample(17), FlowParams(dt=1e-3, t_end=0.05, record_every=5))
        assert np.max(weak_residual(tr, default_test_functions()).gaps) <= 1e-9

    def test_trend(self):
        p = FlowParams(dt=1e-3, t_end=0.05, record_every=5)
        sup = [
            weak_residual(integrate(Tilted().sample(N), p), default_test_functions()).sup_per_test().max()
            for N in (33, 129)
        ]
        assert sup[1] < sup[0]


class TestConvergence:
    def test_stationary_exact(self):
        t = convergence_study(GreatCircle(1), [9, 17], T=0.05, N_ref=41, dt=0.01, n_records=5)
        assert t.exact and t.slope is None
        assert "exact" in t.to_csv() and t.to_dict()["exact"]

    def test_rejects_small_reference(self):
        with pytest.raises(ValueError):
            convergence_study(Tilted(), [33, 65], N_ref=129)

    def test_two_rows(self):
        t = convergence_study(Tilted(), [33, 65], T=0.5, N_ref=257, dt=1e-3, n_records=10)
        assert t.rows[0].error / t.rows[1].error >= 1.6
        assert t.slope > 0.6

    def test_table_needs_rows(self):
        with pytest.raises(ValueError):
            ConvergenceTable((ConvergenceRow(33, 0.1),), 1.0, "ref", 1.0)


class TestHelpers:
    def test_gronwall_recovers_rate(self):
        t = np.linspace(0, 1, 21)
        y0, G = 2.0, 0.3
        y = y0 / (1 - G * t * y0)
        assert fit_gronwall_rate(t, y) == pytest.approx(G, rel=1e-12)
        assert fit_gronwall_rate(t, np.full_like(t, 3.0)) == 0.0

    def test_horizon(self):
        tr = integrate(Tilted().sample(17), FlowParams(dt=0.01, t_end=0.2, record_every=5))
        assert regular_horizon(tr) == pytest.approx(0.2)
        assert regular_horizon(tr, growth=1.0 + 1e-9) < 0.2

    def test_map_ordered(self):
        assert map_ordered(lambda x: x * x, [3, 1, 2], threads=3) == [9, 1, 4]
