from fractions import Fraction

import numpy as np
import pytest

from cmspin.lattice import (
    BesselPower,
    DiffMinus,
    DiffPlus,
    HalfwavePower,
    LatticeField,
    LatticeGeometry,
    Laplacian,
    SpinConfiguration,
    Translate,
    check_odd,
    discrete_norm,
    folded_frequencies,
    halfwave_matrix,
    halfwave_N,
    hamiltonian,
    inner,
    multiplier_apply,
    spectrum_exact,
    spectrum_folded,
    spectrum_N,
)

from conftest import direct_halfwave, random_spins


def great_circle(N, m=1):
    th = LatticeGeometry(N).nodes
    return np.stack([np.cos(m * th), np.sin(m * th), np.zeros(N)], axis=1)


class TestTypes:
    @pytest.mark.parametrize("N", [2, 4, 1, 0, -3])
    def test_rejects_even_or_small(self, N):
        with pytest.raises(ValueError):
            check_odd(N)

    def test_geometry(self):
        g = LatticeGeometry(5)
        assert g.n == 2
        assert g.h == pytest.approx(2 * np.pi / 5)
        assert np.allclose(np.abs(g.points), 1.0)

    def test_field_is_read_only(self):
        F = LatticeField(np.ones((5, 3)))
        with pytest.raises(ValueError):
            F.values[0, 0] = 2.0

    def test_field_shape_checked(self):
        with pytest.raises(ValueError):
            LatticeField(np.ones((4, 3)))

    def test_spin_unit_norm(self):
        with pytest.raises(ValueError):
            SpinConfiguration(2 * np.ones((5, 3)))
        S = SpinConfiguration.normalized(2 * np.ones((5, 3)))
        assert np.allclose(np.linalg.norm(S.values, axis=1), 1.0)


class TestSpectrum:
    def test_zero_mode(self):
        assert spectrum_N(5)[0] == 0

    def test_n5_values(self):
        assert spectrum_exact(5) == [Fraction(0), Fraction(4, 5), Fraction(6, 5), Fraction(6, 5), Fraction(4, 5)]
        assert np.allclose(spectrum_N(5), [0, 0.8, 1.2, 1.2, 0.8], atol=1e-15)

    def test_n7_dense_eigensolver(self):
        ev = np.linalg.eigvalsh(halfwave_matrix(7))
        assert np.max(np.abs(ev - np.sort(spectrum_N(7)))) <= 1e-10

    def test_folded_listing(self):
        k = np.arange(-4, 5)
        assert np.allclose(spectrum_folded(9), np.abs(k) * (1 - np.abs(k) / 9))
        # DFT slot j carries frequency folded_frequencies(9)[j]
        f = folded_frequencies(9)
        assert np.allclose(spectrum_N(9), np.abs(f) * (1 - np.abs(f) / 9))

    def test_rejects_even(self):
        with pytest.raises(ValueError):
            spectrum_N(6)


class TestHalfwave:
    def test_constant_is_killed(self):
        F = LatticeField(np.tile([0.3, -1.0, 2.0], (7, 1)))
        assert np.max(np.abs(halfwave_N(F).values)) < 1e-14

    def test_great_circle_eigenvector(self):
        v = great_circle(5)
        assert np.allclose(halfwave_N(v).values, 0.8 * v, atol=1e-14)

    def test_matches_pair_sum(self, rng):
        v = rng.standard_normal((9, 3))
        assert np.max(np.abs(halfwave_N(v).values - direct_halfwave(v))) <= 1e-11

    def test_matrix_oracle(self, rng):
        v = rng.standard_normal((11, 2))
        assert np.allclose(halfwave_matrix(11) @ v, halfwave_N(v).values, atol=1e-12)


class TestMultipliers:
    def test_power_one_is_halfwave(self, rng):
        v = rng.standard_normal((13, 3))
        assert np.allclose(multiplier_apply(v, HalfwavePower(1.0)).values, halfwave_N(v).values, atol=1e-12)

    def test_power_zero_is_identity(self, rng):
        v = rng.standard_normal((13, 3))
        assert np.allclose(multiplier_apply(v, HalfwavePower(0.0)).values, v, atol=1e-13)

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            HalfwavePower(-0.5)

    def test_half_powers_compose(self, rng):
        v = rng.standard_normal((15, 3))
        h = multiplier_apply(multiplier_apply(v, HalfwavePower(0.5)), HalfwavePower(0.5))
        assert np.allclose(h.values, halfwave_N(v).values, atol=1e-12)

    def test_bessel_power(self, rng):
        v = rng.standard_normal((9, 1))
        L = halfwave_matrix(9)
        B = np.eye(9) + L @ L
        assert np.allclose(multiplier_apply(v, BesselPower(2.0)).values, B @ v, atol=1e-12)

    def test_diff_plus_n3(self):
        h = 2 * np.pi / 3
        v = np.array([[0.0], [1.0], [0.0]])
        out = multiplier_apply(v, DiffPlus()).values[:, 0]
        assert np.allclose(out, [1 / h, -1 / h, 0.0], atol=1e-13)

    def test_stencils(self, rng):
        N = 11
        h = 2 * np.pi / N
        v = rng.standard_normal((N, 3))
        up, down = np.roll(v, -1, axis=0), np.roll(v, 1, axis=0)
        assert np.allclose(multiplier_apply(v, DiffPlus()).values, (up - v) / h, atol=1e-12)
        assert np.allclose(multiplier_apply(v, DiffMinus()).values, (down - v) / h, atol=1e-12)
        assert np.allclose(multiplier_apply(v, Laplacian()).values, (up + down - 2 * v) / h**2, atol=1e-11)
        assert np.allclose(multiplier_apply(v, Translate(2)).values, np.roll(v, -2, axis=0), atol=1e-12)

    def test_laplacian_mode_one(self):
        N = 5
        th = LatticeGeometry(N).nodes
        v = np.cos(th)[:, None]
        m = np.sinc(1 / N) ** 2
        assert m == pytest.approx(0.87515, abs=2e-5)
        h = 2 * np.pi / N
        stencil = (np.roll(v, -1) + np.roll(v, 1) - 2 * v) / h**2
        out = multiplier_apply(v, Laplacian()).values
        assert np.max(np.abs(out + m * v)) <= 1e-12
        assert np.max(np.abs(out - stencil)) <= 1e-12

    def test_real_in_real_out(self, rng):
        out = multiplier_apply(rng.standard_normal((7, 3)), DiffPlus())
        assert out.is_real


class TestEnergy:
    @staticmethod
    def pair_sum(v):
        N = v.shape[0]
        z = np.exp(2j * np.pi * np.arange(N) / N)
        tot = 0.0
        for k in range(N):
            for l in range(N):
                if k != l:
                    tot += np.sum((v[k] - v[l]) ** 2) / abs(z[k] - z[l]) ** 2
        return tot / N

    def test_constant(self):
        assert hamiltonian(np.tile([0, 0, 1.0], (9, 1))) == pytest.approx(0, abs=1e-14)

    def test_n3_example(self):
        S = np.array([[0, 0, 1.0], [0, 0, 1.0], [0, 0, -1.0]])
        assert self.pair_sum(S) == pytest.approx(16 / 9, rel=1e-14)
        assert hamiltonian(S) == pytest.approx(16 / 9, rel=1e-12)

    def test_n7_random(self):
        S = random_spins(7, 3).values
        assert hamiltonian(S) == pytest.approx(self.pair_sum(S), rel=1e-11)

    def test_inner_weight(self):
        v = np.ones((5, 3))
        assert inner(v, v) == pytest.approx(3.0)


class TestNorms:
    def test_constant_unit(self):
        v = np.tile([0.0, 1.0, 0.0], (7, 1))
        for kind in ("L2", "Hhalf", "H52"):
            assert discrete_norm(v, kind) == pytest.approx(1.0, abs=1e-13)

    def test_hhalf_great_circle(self):
        assert discrete_norm(great_circle(5), "Hhalf") ** 2 == pytest.approx(1.8, abs=1e-13)

    def test_h52_mode_two(self):
        N = 5
        th = LatticeGeometry(N).nodes
        v = np.exp(2j * th)[:, None]
        m = abs(2 * np.sinc(2 * 2 / (2 * N)))  # |2 sinc(2 pi / 5)| in unnormalized sinc
        expect = 1 + m**4 * 1.2
        assert discrete_norm(v, "H52") ** 2 == pytest.approx(expect, rel=1e-12)
        # stencil composition: D_+^2 applied by shifts, then the half power
        h = 2 * np.pi / N
        d1 = (np.roll(v, -1, axis=0) - v) / h
        d2 = (np.roll(d1, -1, axis=0) - d1) / h
        w = multiplier_apply(d2, HalfwavePower(0.5)).values
        assert 1 + np.mean(np.abs(w) ** 2) == pytest.approx(expect, rel=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            discrete_norm(np.ones((5, 3)), "H1")


class TestBackends:
    SCRIPT = (
        "import numpy as np, cmspin.lattice as L;"
        "from cmspin.data import Tilted;"
        "from cmspin.dynamics import FlowParams, integrate;"
        "tr = integrate(Tilted().sample(17), FlowParams(dt=0.01, t_end=0.1));"
        "print(L.DFT_BACKEND, repr(float(tr.states[-1].sum())))"
    )

    def run(self, backend):
        import os
        import subprocess
        import sys

        env = dict(os.environ, CMSPIN_DFT=backend)
        return subprocess.run([sys.executable, "-c", self.SCRIPT], env=env, capture_output=True, text=True)

    def test_direct_matches_fft(self):
        a, b = self.run("numpy"), self.run("direct")
        assert a.returncode == 0 and b.returncode == 0, b.stderr
        name_a, va = a.stdout.split()
        name_b, vb = b.stdout.split()
        assert (name_a, name_b) == ("numpy", "direct")
        assert abs(float(va) - float(vb)) < 1e-12

    def test_unknown_backend(self):
        r = self.run("fftw")
        assert r.returncode != 0 and "CMSPIN_DFT" in r.stderr
