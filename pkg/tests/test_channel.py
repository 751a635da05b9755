import cmath
import math

import numpy as np
import pytest

from beamtrain.array_model import ArrayConfig, WeightVector, dft_codebook
from beamtrain.channel import (
    TOY_BEAM_ANGLES_DEG,
    TOY_LOS_PAIR,
    TOY_NLOS_PAIR,
    ChannelConfig,
    ChannelRealization,
    LinkBudget,
    Ray,
    add_noise,
    derive_seed,
    draw_cluster_loss,
    end_to_end_gain,
    pair_gain_table,
    sample_channel,
    toy_channel,
    toy_codebooks,
)


def brute_force_gain(tx_w, rx_w, ch, tx_cfg, rx_cfg):
    """Ray-by-ray oracle with explicit python loops."""
    taps = [0j] * ch.num_taps
    for ray in ch.rays:
        tx = sum(
            w * cmath.exp(2j * math.pi * n * tx_cfg.spacing * math.cos(math.radians(ray.aod_deg)))
            for n, w in enumerate(tx_w.weights)
        )
        rx = sum(
            w * cmath.exp(2j * math.pi * n * rx_cfg.spacing * math.cos(math.radians(ray.aoa_deg)))
            for n, w in enumerate(rx_w.weights)
        )
        taps[ray.tap] += ray.gain * tx * rx
    return np.array(taps)


class TestToyChannel:
    def test_bounds(self):
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                toy_channel(bad)

    def test_structure(self):
        ch = toy_channel(0.5)
        assert len(ch.rays) == 2
        los, nlos = ch.rays
        assert los.gain == 1.0 and los.tap == 0
        assert nlos.gain == 0.5
        assert los.aod_deg == TOY_BEAM_ANGLES_DEG[TOY_LOS_PAIR[0]]
        assert nlos.aoa_deg == TOY_BEAM_ANGLES_DEG[TOY_NLOS_PAIR[1]]

    def test_exhaustive_search_finds_los_pair(self):
        tx_cb, rx_cb = toy_codebooks()
        table = pair_gain_table(tx_cb, rx_cb, toy_channel(0.5))
        power = np.sum(np.abs(table) ** 2, axis=0)
        assert power.shape == (4, 4)
        best = np.unravel_index(np.argmax(power), power.shape)
        assert tuple(best) == TOY_LOS_PAIR

    def test_vanishing_nlos_leaves_one_path(self):
        tx_cb, rx_cb = toy_codebooks()
        table = pair_gain_table(tx_cb, rx_cb, toy_channel(1e-9))
        power = np.sum(np.abs(table) ** 2, axis=0)
        strong = power > 1e-12
        assert strong.sum() == 1
        assert strong[TOY_LOS_PAIR]

    def test_composite_receive_trace_matches_half_a_one_structure(self):
        # transmit sweep into an all-beams receiver observes 0.5*[a 1 0 0]
        from beamtrain.array_model import superpose_beams

        a = 0.5
        tx_cb, rx_cb = toy_codebooks()
        ch = toy_channel(a)
        composite = superpose_beams(list(rx_cb.vectors), [1, 1, 1, 1])
        norm = math.sqrt(4 * 4)
        observed = []
        for p in range(4):
            taps = end_to_end_gain(tx_cb.vectors[p], composite, ch, tx_cb.cfg, rx_cb.cfg)
            observed.append(taps[0] / norm)
        expected = [0.5 * a, 0.5, 0.0, 0.0]
        assert np.allclose(observed, expected, atol=1e-9)

    def test_excess_tap(self):
        ch = toy_channel(0.3, nlos_excess_tap=2)
        assert ch.num_taps == 3
        assert ch.rays[1].tap == 2


class TestSampleChannel:
    def test_deterministic_under_seed(self):
        cfg = ChannelConfig()
        a = sample_channel(cfg, 1234)
        b = sample_channel(cfg, 1234)
        assert a == b
        c = sample_channel(cfg, 1235)
        assert a != c

    def test_ray_counts_and_los_flag(self):
        cfg = ChannelConfig(num_clusters=4, rays_per_cluster=3, los=True)
        ch = sample_channel(cfg, 7)
        assert len(ch.rays) == 1 + 12
        assert ch.los_present
        nlos = sample_channel(ChannelConfig(los=False), 7)
        assert len(nlos.rays) == 12
        assert not nlos.los_present

    def test_no_ray_beats_los_reference(self):
        cfg = ChannelConfig(los=False)
        ref = cfg.los_amplitude()
        for seed in range(50):
            ch = sample_channel(cfg, seed)
            for ray in ch.rays:
                assert abs(ray.gain) <= ref

    def test_angles_folded_into_range(self):
        cfg = ChannelConfig(num_clusters=8, rays_per_cluster=3)
        for seed in range(30):
            for ray in sample_channel(cfg, seed).rays:
                assert 0.0 <= ray.aod_deg <= 180.0
                assert 0.0 <= ray.aoa_deg <= 180.0

    def test_cluster_loss_truncated_mean_matches_analytic(self):
        # oracle: mean of a Gaussian truncated above at c is
        # mu - sigma * phi(alpha) / Phi(alpha) with alpha = (c - mu) / sigma
        cfg = ChannelConfig()
        mu, sigma, cap = -10.0, 4.0, -2.0
        alpha = (cap - mu) / sigma
        phi = math.exp(-0.5 * alpha * alpha) / math.sqrt(2 * math.pi)
        big_phi = 0.5 * (1 + math.erf(alpha / math.sqrt(2)))
        analytic = mu - sigma * phi / big_phi
        rng = np.random.default_rng(99)
        draws = [draw_cluster_loss(cfg, rng) for _ in range(10_000)]
        assert max(draws) <= cap
        assert np.mean(draws) == pytest.approx(analytic, abs=0.5)

    def test_truncation_never_violated(self):
        cfg = ChannelConfig()
        rng = np.random.default_rng(12345)
        cap = cfg.cluster_loss_truncation_db
        for _ in range(1_000_000):
            if draw_cluster_loss(cfg, rng) > cap:
                pytest.fail("cluster loss above the truncation cap")

    def test_tap_range(self):
        cfg = ChannelConfig(max_excess_tap=4, intra_cluster_tap_spread=2, los=False)
        for seed in range(40):
            for ray in sample_channel(cfg, seed).rays:
                assert 0 <= ray.tap <= 6


class TestEndToEndGain:
    def test_toy_los_pair_untouched_by_nlos_ray(self):
        tx_cb, rx_cb = toy_codebooks()
        ch = toy_channel(0.5)
        taps = end_to_end_gain(
            tx_cb.vectors[TOY_LOS_PAIR[0]], rx_cb.vectors[TOY_LOS_PAIR[1]], ch,
            tx_cb.cfg, rx_cb.cfg,
        )
        # aligned ray: both unit-norm array factors peak at sqrt(4)
        assert abs(taps[0]) == pytest.approx(4.0, abs=1e-9)
        only_nlos = ChannelRealization(rays=(ch.rays[1],))
        leak = end_to_end_gain(
            tx_cb.vectors[TOY_LOS_PAIR[0]], rx_cb.vectors[TOY_LOS_PAIR[1]], only_nlos,
            tx_cb.cfg, rx_cb.cfg,
        )
        assert abs(leak[0]) < 1e-12

    def test_zero_weights_zero_gain(self):
        ch = toy_channel(0.5)
        w = WeightVector(np.zeros(4) + 0j)
        rx = WeightVector(np.ones(4) + 0j)
        assert np.all(end_to_end_gain(w, rx, ch) == 0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(31)
        tx_cfg, rx_cfg = ArrayConfig(8), ArrayConfig(4)
        rays = tuple(
            Ray(
                aod_deg=float(rng.uniform(0, 180)),
                aoa_deg=float(rng.uniform(0, 180)),
                gain=complex(rng.standard_normal(), rng.standard_normal()),
                tap=int(rng.integers(0, 4)),
            )
            for _ in range(9)
        )
        ch = ChannelRealization(rays=rays)
        tx_w = WeightVector(rng.standard_normal(8) + 1j * rng.standard_normal(8))
        rx_w = WeightVector(rng.standard_normal(4) + 1j * rng.standard_normal(4))
        got = end_to_end_gain(tx_w, rx_w, ch, tx_cfg, rx_cfg)
        want = brute_force_gain(tx_w, rx_w, ch, tx_cfg, rx_cfg)
        assert np.allclose(got, want, atol=1e-9)

    def test_reciprocity(self):
        rng = np.random.default_rng(17)
        cfg = ArrayConfig(8)
        rays = tuple(
            Ray(
                aod_deg=float(rng.uniform(0, 180)),
                aoa_deg=float(rng.uniform(0, 180)),
                gain=complex(rng.standard_normal(), rng.standard_normal()),
                tap=int(rng.integers(0, 3)),
            )
            for _ in range(6)
        )
        swapped = tuple(
            Ray(aod_deg=r.aoa_deg, aoa_deg=r.aod_deg, gain=r.gain, tap=r.tap)
            for r in rays
        )
        tx_w = WeightVector(rng.standard_normal(8) + 1j * rng.standard_normal(8))
        rx_w = WeightVector(rng.standard_normal(8) + 1j * rng.standard_normal(8))
        forward = end_to_end_gain(tx_w, rx_w, ChannelRealization(rays=rays), cfg, cfg)
        reverse = end_to_end_gain(rx_w, tx_w, ChannelRealization(rays=swapped), cfg, cfg)
        assert np.allclose(forward, reverse, atol=1e-12)

    def test_empty_channel(self):
        ch = ChannelRealization(rays=())
        out = end_to_end_gain(
            WeightVector(np.ones(2) + 0j), WeightVector(np.ones(2) + 0j), ch
        )
        assert out.shape == (1,)
        assert np.all(out == 0)


class TestPairGainTable:
    def test_matches_per_pair_calls(self):
        cfg = ChannelConfig(num_clusters=2, los=True)
        ch = sample_channel(cfg, 5)
        cb = dft_codebook(ArrayConfig(4))
        table = pair_gain_table(cb, cb, ch)
        for p in range(4):
            for q in range(4):
                direct = end_to_end_gain(cb.vectors[p], cb.vectors[q], ch, cb.cfg, cb.cfg)
                assert np.allclose(table[:, p, q], direct, atol=1e-10)


class TestPathLoss:
    def test_doubling_distance_costs_six_db(self):
        near = ChannelConfig(distance_m=3.0)
        far = ChannelConfig(distance_m=6.0)
        drop = 20 * math.log10(near.los_amplitude() / far.los_amplitude())
        assert drop == pytest.approx(6.02059991, abs=1e-6)

    def test_exponent_scaling(self):
        cfg = ChannelConfig(distance_m=10.0, path_loss_exponent=3.0)
        ref = ChannelConfig(distance_m=1.0, path_loss_exponent=3.0)
        drop = 20 * math.log10(ref.los_amplitude() / cfg.los_amplitude())
        assert drop == pytest.approx(30.0, abs=1e-9)


class TestLinkBudget:
    def test_default_noise_power(self):
        budget = LinkBudget()
        assert budget.noise_power_dbm == pytest.approx(-68.99, abs=0.01)

    def test_override(self):
        budget = LinkBudget(noise_override_dbm=-math.inf)
        assert budget.noise_to_signal == 0.0


class TestAddNoise:
    def test_zero_noise_is_identity(self):
        budget = LinkBudget(noise_override_dbm=-math.inf)
        samples = np.array([1 + 2j, -3j, 0.5])
        out = add_noise(samples, budget, seed=1)
        assert np.array_equal(out, samples)

    def test_noise_power_within_one_percent(self):
        budget = LinkBudget(tx_power_dbm=0.0, noise_override_dbm=-10.0)
        samples = np.zeros(1_000_000, dtype=complex)
        out = add_noise(samples, budget, seed=2)
        measured = np.mean(np.abs(out) ** 2)
        assert measured == pytest.approx(0.1, rel=0.01)

    def test_deterministic(self):
        budget = LinkBudget()
        samples = np.ones(64, dtype=complex)
        assert np.array_equal(add_noise(samples, budget, 9), add_noise(samples, budget, 9))


class TestDeriveSeed:
    def test_deterministic_and_distinct(self):
        seeds = [derive_seed(42, i) for i in range(1000)]
        assert seeds == [derive_seed(42, i) for i in range(1000)]
        assert len(set(seeds)) == 1000

    def test_in_64_bit_range(self):
        for master in (0, 1, 2**63, 2**64 - 1):
            for index in (0, 1, 999):
                s = derive_seed(master, index)
                assert 0 <= s < 2**64


class TestRayValidation:
    def test_negative_tap_rejected(self):
        with pytest.raises(ValueError):
            Ray(aod_deg=10.0, aoa_deg=20.0, gain=1.0, tap=-1)
