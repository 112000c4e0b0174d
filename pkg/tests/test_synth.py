import cmath
import math

import numpy as np
import pytest

import sparse_isac as si

C = si.SPEED_OF_LIGHT


def make_params(n=64, m=8):
    return si.OfdmParams(
        n_subcarriers=n, n_symbols=m, subcarrier_spacing_hz=120e3, carrier_freq_hz=24e9
    )


def eval_two_term_model(targets_with_phase, params, m, n):
    """Independent per-RE evaluation of the received-sample model."""
    total = 0j
    for amp, phase, dist, vel in targets_with_phase:
        tau = 2 * dist / C
        fd = 2 * vel * params.carrier_freq_hz / C
        total += (
            amp
            * cmath.exp(1j * phase)
            * cmath.exp(2j * math.pi * fd * m * params.symbol_dur_s)
            * cmath.exp(-2j * math.pi * n * params.subcarrier_spacing_hz * tau)
        )
    return total


class TestSynthesize:
    def test_degenerate_target_gives_ones(self):
        # zero delay cannot happen (distance > 0), so use a tiny distance and
        # compare against the directly evaluated phasor instead of literal 1
        params = make_params()
        alloc = si.make_allocation(params, "random", n_active=16, seed=0)
        t = si.Target(distance_m=1e-9, amplitude=1.0, phase_rad=0.0)
        grid = si.synthesize(si.Scene(targets=(t,), noise_variance_w=0.0), alloc, params, seed=0)
        mask = alloc.mask()
        assert np.allclose(grid.samples[mask], 1.0, atol=1e-9)

    def test_unit_modulus_on_active_cells(self):
        params = make_params()
        alloc = si.make_allocation(params, "random", n_active=20, seed=1)
        t = si.Target(distance_m=137.0, velocity_mps=7.0, amplitude=0.8)
        grid = si.synthesize(si.Scene(targets=(t,), noise_variance_w=0.0), alloc, params, seed=3)
        mask = alloc.mask()
        assert np.allclose(np.abs(grid.samples[mask]), 0.8, atol=1e-12)

    def test_zero_support_off_mask_exact(self):
        params = make_params()
        alloc = si.make_allocation(params, "random", n_active=12, seed=2)
        t = si.Target(distance_m=90.0, amplitude=1.0)
        grid = si.synthesize(si.Scene(targets=(t,), snr_db=0.0), alloc, params, seed=4)
        assert np.all(grid.samples[~alloc.mask()] == 0.0)

    def test_matches_direct_model_evaluation(self):
        params = make_params(n=16, m=3)
        alloc = si.make_allocation(params, "full")
        specs = [(1.0, 0.4, 120.0, 5.0), (0.7, 2.1, 260.0, -3.0)]
        targets = tuple(
            si.Target(distance_m=d, velocity_mps=v, amplitude=a, phase_rad=p)
            for a, p, d, v in specs
        )
        grid = si.synthesize(
            si.Scene(targets=targets, noise_variance_w=0.0), alloc, params, seed=0
        )
        for m in range(3):
            for n in range(16):
                expect = eval_two_term_model(specs, params, m, n)
                assert grid.samples[m, n] == pytest.approx(expect, rel=1e-12)

    def test_opposite_phases_cancel(self):
        # two equal-amplitude targets half a delay-phase cycle apart at n=1
        params = make_params(n=16, m=1)
        alloc = si.make_allocation(params, "full")
        d1 = 100.0
        # delta tau = 1/(2 df) at subcarrier 1 -> opposite phase
        d2 = d1 + C / (4 * params.subcarrier_spacing_hz)
        specs = [(1.0, 0.0, d1, 0.0), (1.0, 0.0, d2, 0.0)]
        targets = tuple(
            si.Target(distance_m=d, velocity_mps=v, amplitude=a, phase_rad=p)
            for a, p, d, v in specs
        )
        grid = si.synthesize(
            si.Scene(targets=targets, noise_variance_w=0.0), alloc, params, seed=0
        )
        expect = eval_two_term_model(specs, params, 0, 1)
        assert abs(expect) < 1e-9  # destructive by construction
        assert grid.samples[0, 1] == pytest.approx(expect, abs=1e-9)

    def test_linearity_noise_added_once(self):
        params = make_params()
        alloc = si.make_allocation(params, "random", n_active=24, seed=5)
        t1 = si.Target(distance_m=80.0, amplitude=1.0, phase_rad=0.5)
        t2 = si.Target(distance_m=150.0, amplitude=0.6, phase_rad=1.5)
        quiet = dict(alloc=alloc, params=params, seed=7)
        g1 = si.synthesize(si.Scene(targets=(t1,), noise_variance_w=0.0), **quiet)
        g2 = si.synthesize(si.Scene(targets=(t2,), noise_variance_w=0.0), **quiet)
        g12 = si.synthesize(si.Scene(targets=(t1, t2), noise_variance_w=0.0), **quiet)
        assert np.allclose(g12.samples, g1.samples + g2.samples, atol=1e-12)
        noisy = si.synthesize(si.Scene(targets=(t1, t2), snr_db=0.0), **quiet)
        noise = noisy.samples - g12.samples
        rebuilt = g1.samples + g2.samples + noise
        assert np.allclose(noisy.samples, rebuilt, atol=1e-12)

    def test_deterministic_per_seed(self):
        params = make_params()
        alloc = si.make_allocation(params, "random", n_active=16, seed=0)
        t = si.Target(distance_m=100.0, amplitude=1.0)  # random phase
        scene = si.Scene(targets=(t,), snr_db=-5.0)
        a = si.synthesize(scene, alloc, params, seed=11)
        b = si.synthesize(scene, alloc, params, seed=11)
        c = si.synthesize(scene, alloc, params, seed=12)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_delay_alias_warning(self):
        params = make_params()
        alloc = si.make_allocation(params, "full")
        far = C / (2 * params.subcarrier_spacing_hz) * 1.5  # beyond unambiguous span
        t = si.Target(distance_m=far, amplitude=1.0)
        with pytest.warns(UserWarning, match="alias"):
            si.synthesize(si.Scene(targets=(t,), noise_variance_w=0.0), alloc, params, seed=0)

    def test_doppler_alias_warning(self):
        params = make_params()
        alloc = si.make_allocation(params, "full")
        v_alias = 0.5 / params.symbol_dur_s * C / (2 * params.carrier_freq_hz) * 1.5
        t = si.Target(distance_m=100.0, velocity_mps=v_alias, amplitude=1.0)
        with pytest.warns(UserWarning, match="alias"):
            si.synthesize(si.Scene(targets=(t,), noise_variance_w=0.0), alloc, params, seed=0)

    def test_csv_dump_active_cells_only(self, tmp_path):
        params = make_params(n=8, m=2)
        alloc = si.make_allocation(params, "custom", indices=[0, 3, 7])
        t = si.Target(distance_m=50.0, amplitude=1.0, phase_rad=0.1)
        grid = si.synthesize(si.Scene(targets=(t,), noise_variance_w=0.0), alloc, params, seed=0)
        path = tmp_path / "grid.csv"
        grid.dump_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "m,n,re,im"
        assert len(lines) == 1 + 2 * 3


class TestNoiseCalibration:
    def test_noiseless_sentinel(self):
        params = make_params()
        alloc = si.make_allocation(params, "full")
        t = si.Target(distance_m=100.0, amplitude=1.0)
        scene = si.Scene(targets=(t,), noise_variance_w=0.0)
        grid = si.synthesize(scene, alloc, params, seed=0)
        assert si.measure_snr(grid, scene) == math.inf

    @pytest.mark.parametrize("snr_db", [-10.0, 0.0])
    def test_requested_snr_calibrated(self, snr_db):
        # >= 1e5 resource elements for the law-of-large-numbers check
        params = si.OfdmParams(512, 256, 120e3, 24e9)
        alloc = si.make_allocation(params, "full")
        t = si.Target(distance_m=100.0, amplitude=1.0)
        scene = si.Scene(targets=(t,), snr_db=snr_db)
        grid = si.synthesize(scene, alloc, params, seed=99)
        assert si.measure_snr(grid, scene) == pytest.approx(snr_db, abs=0.2)
        # empirical noise power agrees with the injected variance
        quiet = si.Scene(targets=(t,), noise_variance_w=0.0)
        twin = si.synthesize(quiet, alloc, params, seed=grid.seed_ss)
        emp = float(np.mean(np.abs(grid.samples - twin.samples) ** 2))
        assert 10 * math.log10(emp / grid.noise_variance) == pytest.approx(0.0, abs=0.2)

    def test_noise_variance_and_whiteness(self):
        params = make_params(n=8, m=2)
        alloc = si.make_allocation(params, "full")
        t = si.Target(distance_m=77.0, amplitude=1.0, phase_rad=0.0)
        scene = si.Scene(targets=(t,), noise_variance_w=2.0)
        quiet = si.Scene(targets=(t,), noise_variance_w=0.0)
        trials = 3000
        noises = np.empty((trials, 16), dtype=complex)
        for i, s in enumerate(np.random.SeedSequence(5).spawn(trials)):
            g = si.synthesize(scene, alloc, params, seed=s)
            q = si.synthesize(quiet, alloc, params, seed=s)
            noises[i] = (g.samples - q.samples).ravel()
        var = np.mean(np.abs(noises) ** 2, axis=0)
        # per-RE variance within 3 sigma of the spec (relative std ~ 1/sqrt(trials))
        assert np.all(np.abs(var - 2.0) < 3 * 2.0 / math.sqrt(trials))
        # cross-RE covariance shrinks toward zero
        cross = np.mean(noises[:, 0] * np.conj(noises[:, 1]))
        assert abs(cross) < 3 * 2.0 / math.sqrt(trials)

    def test_real_imag_split(self):
        params = si.OfdmParams(256, 64, 120e3, 24e9)
        alloc = si.make_allocation(params, "full")
        t = si.Target(distance_m=77.0, amplitude=1.0, phase_rad=0.0)
        scene = si.Scene(targets=(t,), noise_variance_w=4.0)
        g = si.synthesize(scene, alloc, params, seed=8)
        q = si.synthesize(si.Scene(targets=(t,), noise_variance_w=0.0), alloc, params, seed=8)
        noise = (g.samples - q.samples).ravel()
        assert np.var(noise.real) == pytest.approx(2.0, rel=0.05)
        assert np.var(noise.imag) == pytest.approx(2.0, rel=0.05)
