import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aspire.belief import ParticleBelief
from aspire.info import (CensoredMixture, MIParams, build_censored_mixture, conditional_entropy,
                         entropy_mc, entropy_sp, entropy_taylor0, entropy_taylor2,
                         gaussian_entropy_h0, mixture_entropy, mutual_information, sigma_points)
from aspire.sensing import MeasurementNoise, h
from aspire.world import Pose2D

NOISE = MeasurementNoise(np.diag([0.5, 0.05]))
H0 = gaussian_entropy_h0(2, NOISE.Sigma)
ROBOT = Pose2D(10, 10, 0)


def h0_oracle(diag):
    m = len(diag)
    mpmath.mp.dps = 30
    det = mpmath.fprod([mpmath.mpf(d) for d in diag])
    return float(mpmath.mpf(m) / 2 * (mpmath.log(2 * mpmath.pi) + 1) + mpmath.log(det) / 2)


def mix(weights, means, empty=None, noise=NOISE):
    w = np.asarray(weights, float)
    empty = 1.0 - w.sum() if empty is None else empty
    return CensoredMixture(w, np.asarray(means, float).reshape(len(w), 2), noise, empty)


def random_mixture(r, n, noise=NOISE, empty=0.0):
    means = np.c_[r.uniform(1, 6, n), r.uniform(-math.pi / 4, math.pi / 4, n)]
    w = r.random(n) + 0.05
    return mix(w / w.sum() * (1 - empty), means, empty, noise)


def random_pd(r, m=2):
    A = r.normal(size=(m, m))
    return A @ A.T + 0.05 * np.eye(m)


class TestH0:
    def test_unit_normalisation(self):
        assert gaussian_entropy_h0(1, [[1 / (2 * math.pi * math.e)]]) == pytest.approx(0, abs=1e-14)

    @pytest.mark.parametrize("diag", [(0.5, 0.05), (0.1, 0.01)])
    def test_against_high_precision(self, diag):
        assert gaussian_entropy_h0(2, np.diag(diag)) == pytest.approx(h0_oracle(diag), abs=1e-13)

    def test_listed_values(self):
        assert h0_oracle((0.5, 0.05)) == pytest.approx(0.993437, abs=1e-6)
        # ln(2 pi) + 1 + ln(0.001) / 2; negative because |Sigma| is small
        assert h0_oracle((0.1, 0.01)) == pytest.approx(-0.616001, abs=1e-6)

    def test_non_pd(self):
        with pytest.raises(ValueError):
            gaussian_entropy_h0(2, np.diag([1.0, -1.0]))


class TestSigmaPoints:
    def test_scalar(self):
        s = sigma_points([0.0], [[1.0]], 2.0)
        assert np.sort(s.points.ravel()) == pytest.approx([-math.sqrt(3), 0, math.sqrt(3)])
        assert s.weights == pytest.approx([2 / 3, 1 / 6, 1 / 6])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-1.9, 5.0), st.integers(1, 4))
    def test_moments(self, seed, lam, m):
        r = np.random.default_rng(seed)
        if lam + m <= 0.05:
            return
        mu, S = r.normal(size=m), random_pd(r, m)
        s = sigma_points(mu, S, lam)
        assert s.weights.sum() == pytest.approx(1)
        mean = s.weights @ s.points
        d = s.points - mean
        assert mean == pytest.approx(mu, abs=1e-10)
        assert (d.T * s.weights) @ d == pytest.approx(S, abs=1e-9)

    def test_diagonal_on_axes(self):
        s = sigma_points([1.0, 2.0], np.diag([4.0, 0.25]), 1.0)
        off = s.points[1:] - [1.0, 2.0]
        assert np.all(np.sum(np.abs(off) > 1e-15, axis=1) == 1)

    def test_bad_lambda(self):
        with pytest.raises(ValueError):
            sigma_points([0, 0], np.eye(2), -2.0)


class TestMixtureConstruction:
    def belief(self, pts, w=None):
        return ParticleBelief.create(ROBOT, np.c_[np.asarray(pts, float), np.zeros(len(pts))], w)

    def test_all_out(self, open_map):
        from aspire.world import SensorFootprint
        m = build_censored_mixture(self.belief([[10, 30], [30, 10]]), ROBOT, SensorFootprint(),
                                   open_map, NOISE)
        assert m.empty_mass == 1 and m.n_components == 0

    def test_all_in(self, open_map):
        from aspire.world import SensorFootprint
        m = build_censored_mixture(self.belief([[13, 10], [14, 10.5], [12, 9.5]]), ROBOT,
                                   SensorFootprint(), open_map, NOISE)
        assert m.n_components == 3 and m.weights == pytest.approx([1 / 3] * 3)
        assert m.empty_mass == pytest.approx(0, abs=1e-12)

    def test_split(self, open_map):
        from aspire.world import SensorFootprint
        fp = SensorFootprint()
        b = self.belief([[10, 30], [13, 10]], [0.2, 0.8])
        m = build_censored_mixture(b, ROBOT, fp, open_map, NOISE)
        assert m.empty_mass == pytest.approx(0.2) and m.weights == pytest.approx([0.8])
        assert m.means[0] == pytest.approx(h(ROBOT, Pose2D(13, 10)))

    def test_conditional_entropy(self, open_map):
        from aspire.world import SensorFootprint
        fp = SensorFootprint()
        ce = lambda b: conditional_entropy(b, ROBOT, fp, open_map, NOISE)  # noqa: E731
        assert ce(self.belief([[10, 30]])) == 0
        assert ce(self.belief([[13, 10], [14, 10]])) == pytest.approx(H0, abs=1e-12)
        b = self.belief([[10, 30], [13, 10]], [0.3, 0.7])
        assert ce(b) == pytest.approx(0.695406, abs=1e-6)


class TestEntropySP:
    def test_empty(self):
        assert entropy_sp(mix([], np.empty((0, 2)), 1.0)) == 0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-1.95, 10.0))
    def test_single_gaussian_identity(self, seed, lam):
        r = np.random.default_rng(seed)
        noise = MeasurementNoise(random_pd(r))
        m = mix([1.0], r.normal(size=2), 0.0, noise)
        assert entropy_sp(m, lam) == pytest.approx(gaussian_entropy_h0(2, noise.Sigma), abs=1e-9)

    def test_atom_and_component(self, rng):
        m = mix([0.7], [[3.0, 0.1]], 0.3)
        expected = -0.3 * math.log(0.3) - 0.7 * (math.log(0.7) - H0)
        assert entropy_sp(m) == pytest.approx(expected, abs=1e-12)
        est, se = entropy_mc(m, 100_000, rng)
        assert abs(est - expected) < 3 * se + 1e-12

    def test_lambda_none_is_one(self, rng):
        m = random_mixture(rng, 8)
        assert entropy_sp(m) == entropy_sp(m, 1.0)


class TestEntropyMC:
    def test_empty(self, rng):
        assert entropy_mc(mix([], np.empty((0, 2)), 1.0), 100, rng) == (0, 0)

    def test_single(self, rng):
        est, se = entropy_mc(mix([1.0], [[4.0, 0.0]]), 50_000, rng)
        assert abs(est - H0) < 3 * se

    def test_separated_pair(self, rng):
        sep = 10 * math.sqrt(0.5)
        est, se = entropy_mc(mix([0.5, 0.5], [[2.0, 0.0], [2.0 + sep, 0.0]]), 50_000, rng)
        assert abs(est - (H0 + math.log(2))) < 3 * se

    def test_bad_samples(self, rng):
        with pytest.raises(ValueError):
            entropy_mc(mix([1.0], [[1.0, 0.0]]), 0, rng)


class TestTaylor:
    def test_single_component(self):
        m = mix([1.0], [[3.0, 0.2]])
        closed = math.log(2 * math.pi) + 0.5 * math.log(0.5 * 0.05)
        assert entropy_taylor0(m) == pytest.approx(closed, abs=1e-12)
        assert H0 - entropy_taylor0(m) == pytest.approx(1.0, abs=1e-12)
        # the curvature term restores the missing m/2 exactly for one Gaussian
        assert entropy_taylor2(m) == pytest.approx(H0, abs=1e-12)

    def test_empty(self):
        m = mix([], np.empty((0, 2)), 1.0)
        assert entropy_taylor0(m) == 0 and entropy_taylor2(m) == 0

    def test_taylor2_beats_taylor0(self):
        wins = 0
        for seed in range(100):
            r = np.random.default_rng(seed)
            m = random_mixture(r, 10)
            ref, _ = entropy_mc(m, 20_000, r)
            wins += abs(entropy_taylor2(m) - ref) < abs(entropy_taylor0(m) - ref)
        assert wins >= 80


class TestOrderingAndBounds:
    @staticmethod
    @pytest.fixture(scope="class")
    def instances():
        out = []
        for seed in range(100):
            r = np.random.default_rng(1000 + seed)
            m = random_mixture(r, int(r.integers(2, 51)), empty=float(r.uniform(0, 0.5)))
            out.append((m, *entropy_mc(m, 20_000, r)))
        return out

    def test_median_error_ordering(self, instances):
        err = {f.__name__: np.median([abs(f(m) - ref) / ref for m, ref, _ in instances])
               for f in (entropy_sp, entropy_taylor2, entropy_taylor0)}
        assert err["entropy_sp"] < err["entropy_taylor2"] < err["entropy_taylor0"]

    def test_continuous_part_bounds(self, instances):
        for m, _, _ in instances[:30]:
            c = m.continuous_part()
            est, se = entropy_mc(c, 20_000, np.random.default_rng(7))
            hw = -np.sum(c.weights * np.log(c.weights))
            assert H0 - 3 * se <= est <= H0 + hw + 3 * se


class TestMutualInformation:
    def belief(self, pts, w=None):
        pts = np.asarray(pts, float)
        return ParticleBelief.create(ROBOT, np.c_[pts, np.zeros(len(pts))], w)

    def test_all_out_of_fov(self, task):
        assert mutual_information(self.belief([[10, 40], [40, 40]]), (0, 0), task, "sp") == 0

    def test_single_particle_zero(self, task):
        assert mutual_information(self.belief([[14, 10]]), (0, 0), task, "sp") == pytest.approx(0, abs=1e-12)

    @pytest.mark.parametrize("est", ["sp", "mc"])
    def test_two_separated_is_ln2(self, task, est, rng):
        b = self.belief([[11.7, 10.9], [16, 9]])  # ~6 sigma apart in (range, bearing)
        mi = mutual_information(b, (0, 0), task, est, MIParams(mc_samples=50_000), rng)
        assert mi == pytest.approx(math.log(2), abs=0.01)

    def test_mc_nonnegative(self, task):
        for seed in range(30):
            r = np.random.default_rng(seed)
            n = int(r.integers(1, 40))
            b = self.belief(np.c_[r.uniform(9, 17, n), r.uniform(5, 15, n)], r.random(n) + 0.01)
            m = build_censored_mixture(b, ROBOT, task.footprint, task.omap, task.noise)
            if m.n_components == 0:
                continue
            est, se = entropy_mc(m, 5_000, r)
            assert est - H0 * m.detect_mass >= -3 * se

    def test_simplify_close_to_full(self, task):
        devs = []
        for seed in range(30):
            r = np.random.default_rng(seed)
            b = self.belief(np.c_[r.normal(14, 1.5, 300), r.normal(10, 1.5, 300)])
            full = mutual_information(b, (0, 0), task, "sp")
            simp = mutual_information(b, (0, 0), task, "sp_simplify", MIParams(cell_size=0.5))
            if full > 1e-3:
                devs.append(abs(simp - full) / full)
        assert len(devs) > 20 and max(devs) < 0.10

    def test_mixture_entropy_dispatch(self, rng):
        m = random_mixture(rng, 5)
        assert mixture_entropy(m, "sp+simplify") == entropy_sp(m)
        with pytest.raises(ValueError):
            mixture_entropy(m, "mc")
        with pytest.raises(ValueError):
            mixture_entropy(m, "nope")
