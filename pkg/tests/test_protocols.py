import math

import numpy as np
import pytest

from beamtrain.array_model import ArrayConfig, dft_codebook
from beamtrain.channel import (
    TOY_LOS_PAIR,
    ChannelConfig,
    ChannelRealization,
    LinkBudget,
    derive_seed,
    end_to_end_gain,
    pair_gain_table,
    sample_channel,
    toy_channel,
    toy_codebooks,
)
from beamtrain.packets import PER_BEAM_BITS_80211AD, PER_BEAM_BITS_BEAM_CODING
from beamtrain.protocols import (
    ProtocolConfig,
    Scheme,
    run,
    run_exhaustive_beamcoding,
    run_exhaustive_inpacket,
    run_exhaustive_pbp,
    run_feedback_beamcoding,
    run_feedback_inpacket,
    run_multilevel_pbp,
    sector_beams,
    sector_trap_channel,
)


def toy_config(scheme, **kwargs):
    tx_cb, rx_cb = toy_codebooks()
    return ProtocolConfig(tx_codebook=tx_cb, rx_codebook=rx_cb, scheme=scheme, **kwargs)


def pair_power_db(cb, pair, ch):
    taps = end_to_end_gain(cb.vectors[pair[0]], cb.vectors[pair[1]], ch, cb.cfg, cb.cfg)
    return 10 * math.log10(float(np.sum(np.abs(taps) ** 2)))


class TestToyScenario:
    def test_exhaustive_beamcoding_exact_correlations(self):
        out = run_exhaustive_beamcoding(toy_config(Scheme.EXHAUSTIVE_BEAMCODING), toy_channel(0.5), 0)
        r = out.correlation.r
        assert abs(r[1, 2] - 2.0) < 1e-9
        assert abs(r[0, 3] - 1.0) < 1e-9
        mask = np.ones((4, 4), dtype=bool)
        mask[1, 2] = mask[0, 3] = False
        assert np.abs(r[mask]).max() < 1e-9
        assert out.best_pair == TOY_LOS_PAIR
        assert out.packets_sent == 4
        assert out.success

    def test_correlation_argmax_for_any_attenuation(self):
        cfg = toy_config(Scheme.EXHAUSTIVE_BEAMCODING)
        for a in (0.05, 0.3, 0.62, 0.9, 0.99):
            out = run_exhaustive_beamcoding(cfg, toy_channel(a), 0)
            assert out.best_pair == TOY_LOS_PAIR
            assert abs(abs(out.correlation.r[0, 3]) - 2 * a) < 1e-9

    def test_exhaustive_pbp(self):
        out = run_exhaustive_pbp(toy_config(Scheme.EXHAUSTIVE_PBP), toy_channel(0.5), 0)
        assert out.best_pair == TOY_LOS_PAIR
        assert out.packets_sent == 16
        assert out.training_bits == 16 * PER_BEAM_BITS_80211AD

    def test_exhaustive_inpacket(self):
        out = run_exhaustive_inpacket(toy_config(Scheme.EXHAUSTIVE_INPACKET), toy_channel(0.5), 0)
        assert out.best_pair == TOY_LOS_PAIR
        assert out.packets_sent == 4

    def test_inpacket_table_matches_pbp_table(self):
        ch = toy_channel(0.37)
        pbp = run_exhaustive_pbp(toy_config(Scheme.EXHAUSTIVE_PBP), ch, 0)
        inp = run_exhaustive_inpacket(toy_config(Scheme.EXHAUSTIVE_INPACKET), ch, 0)
        assert np.allclose(pbp.pair_power, inp.pair_power, atol=1e-12)

    def test_feedback_inpacket_two_packets(self):
        out = run_feedback_inpacket(toy_config(Scheme.FEEDBACK_INPACKET), toy_channel(0.5), 0)
        assert out.best_pair == TOY_LOS_PAIR
        assert out.packets_sent == 2
        assert out.feedback_messages == 1
        assert out.feedback_bits == 512

    def test_feedback_cost_configurable_and_outside_training_bits(self):
        cfg = toy_config(Scheme.FEEDBACK_BEAMCODING, feedback_bits=256)
        out = run_feedback_beamcoding(cfg, toy_channel(0.5), 0)
        assert out.feedback_bits == 256
        assert out.training_bits == (4 + 4) * PER_BEAM_BITS_BEAM_CODING

    def test_feedback_stage1_observation_structure(self):
        # transmit sweep into the all-beams composite: amplitudes 0.5*[a 1 0 0]
        a = 0.5
        out = run_feedback_inpacket(toy_config(Scheme.FEEDBACK_INPACKET), toy_channel(a), 0)
        stage1 = np.sqrt(out.power_traces[0])
        expected = np.array([0.5 * a, 0.5, 0.0, 0.0])
        assert np.allclose(stage1, expected, atol=1e-9)

    def test_feedback_beamcoding_two_packets(self):
        out = run_feedback_beamcoding(toy_config(Scheme.FEEDBACK_BEAMCODING), toy_channel(0.5), 0)
        assert out.best_pair == TOY_LOS_PAIR
        assert out.packets_sent == 2

    def test_single_beam_codebooks(self):
        tx_cb, rx_cb = toy_codebooks()
        cfg = ProtocolConfig(
            tx_codebook=tx_cb.subset([TOY_LOS_PAIR[0]]),
            rx_codebook=rx_cb.subset([TOY_LOS_PAIR[1]]),
            scheme=Scheme.EXHAUSTIVE_PBP,
        )
        out = run_exhaustive_pbp(cfg, toy_channel(0.5), 0)
        assert out.packets_sent == 1
        assert out.best_pair == (0, 0)

    def test_single_coded_beam_is_plain_channel_estimation(self):
        # one coded beam means a one-chip code: a single CE field per packet
        tx_cb, rx_cb = toy_codebooks()
        cfg = ProtocolConfig(
            tx_codebook=tx_cb.subset([TOY_LOS_PAIR[0]]),
            rx_codebook=rx_cb,
            scheme=Scheme.EXHAUSTIVE_BEAMCODING,
        )
        out = run_exhaustive_beamcoding(cfg, toy_channel(0.5), 0)
        assert out.best_pair == (0, TOY_LOS_PAIR[1])
        assert out.training_bits == 4 * PER_BEAM_BITS_BEAM_CODING
        assert abs(out.correlation.r[0, TOY_LOS_PAIR[1]] - 1.0) < 1e-9


class TestPacketAndBitCounts:
    def test_counts_exact(self):
        ch = toy_channel(0.5)
        p = q = 4
        assert run(toy_config(Scheme.EXHAUSTIVE_PBP), ch, 0).packets_sent == p * q
        assert run(toy_config(Scheme.EXHAUSTIVE_INPACKET), ch, 0).packets_sent == q
        assert run(toy_config(Scheme.FEEDBACK_INPACKET), ch, 0).packets_sent == 2
        assert run(toy_config(Scheme.EXHAUSTIVE_BEAMCODING), ch, 0).packets_sent == q
        assert run(toy_config(Scheme.FEEDBACK_BEAMCODING), ch, 0).packets_sent == 2
        ml = run(toy_config(Scheme.MULTILEVEL_PBP, num_sectors=2), ch, 0)
        assert ml.packets_sent == 2 * 2 + 2 * 2

    def test_training_bits_ordered(self):
        ch = toy_channel(0.5)
        coded = run(toy_config(Scheme.EXHAUSTIVE_BEAMCODING), ch, 0)
        swept = run(toy_config(Scheme.EXHAUSTIVE_INPACKET), ch, 0)
        assert coded.training_bits < swept.training_bits
        assert coded.training_bits == 4 * 4 * PER_BEAM_BITS_BEAM_CODING
        assert swept.training_bits == 4 * 4 * PER_BEAM_BITS_80211AD


class TestFailurePath:
    def test_zero_channel_fails_every_scheme(self):
        empty = ChannelRealization(rays=())
        for scheme in Scheme:
            cfg = toy_config(scheme)
            out = run(cfg, empty, 0)
            assert not out.success
            assert out.best_pair is None
            assert out.snr_db == -math.inf

    def test_noise_only_channel_rarely_detects(self):
        empty = ChannelRealization(rays=())
        budget = LinkBudget()
        cfg = toy_config(Scheme.EXHAUSTIVE_BEAMCODING, noise=budget)
        outcomes = [run(cfg, empty, seed) for seed in range(100)]
        assert all(not o.success for o in outcomes)


class TestNoise:
    def test_noiseless_runs_reproducible(self):
        cfg = toy_config(Scheme.EXHAUSTIVE_BEAMCODING)
        a = run(cfg, toy_channel(0.5), 3)
        b = run(cfg, toy_channel(0.5), 3)
        assert np.array_equal(a.correlation.r, b.correlation.r)

    def test_noisy_runs_seed_dependent_but_reproducible(self):
        budget = LinkBudget(noise_override_dbm=5.0)
        cfg = toy_config(Scheme.EXHAUSTIVE_BEAMCODING, noise=budget)
        a1 = run(cfg, toy_channel(0.5), 3)
        a2 = run(cfg, toy_channel(0.5), 3)
        b = run(cfg, toy_channel(0.5), 4)
        assert np.array_equal(a1.correlation.r, a2.correlation.r)
        assert not np.array_equal(a1.correlation.r, b.correlation.r)

    def test_monotone_degradation_with_noise_power(self):
        # success probability of finding the true pair never rises with noise
        ch = toy_channel(0.8)
        runs = 10_000
        accuracy = []
        for noise_dbm in (-4.0, 2.0, 8.0):
            budget = LinkBudget(tx_power_dbm=10.0, noise_override_dbm=noise_dbm)
            cfg = toy_config(Scheme.EXHAUSTIVE_BEAMCODING, noise=budget, ce_chips=1)
            hits = sum(
                run(cfg, ch, seed).best_pair == TOY_LOS_PAIR for seed in range(runs)
            )
            accuracy.append(hits / runs)
        assert accuracy[0] >= accuracy[1] - 0.01
        assert accuracy[1] >= accuracy[2] - 0.01
        assert accuracy[0] > accuracy[2]

    def test_near_tie_becomes_coin_flip_under_noise(self):
        # with the two path gains nearly equal, stage-1 transmit selection is
        # noise limited and splits about evenly
        ch = toy_channel(0.999)
        budget = LinkBudget(tx_power_dbm=10.0, noise_override_dbm=6.0)
        cfg = toy_config(Scheme.FEEDBACK_INPACKET, noise=budget, ce_chips=1)
        picks = [run(cfg, ch, seed).best_pair for seed in range(2000)]
        tx_choices = [p[0] for p in picks if p is not None]
        frac_beam1 = np.mean([t == TOY_LOS_PAIR[0] for t in tx_choices])
        assert 0.38 < frac_beam1 < 0.62

    def test_snr_reporting_uses_clean_steering(self):
        tx_cb, rx_cb = toy_codebooks()
        budget = LinkBudget()
        cfg = toy_config(Scheme.EXHAUSTIVE_BEAMCODING, snr_budget=budget)
        out = run(cfg, toy_channel(0.5), 0)
        expected = pair_power_db(tx_cb, out.best_pair, toy_channel(0.5)) - (
            budget.noise_power_dbm - budget.tx_power_dbm
        )
        assert out.snr_db == pytest.approx(expected, abs=1e-9)


class TestMultilevel:
    def test_matches_exhaustive_when_los_inside_winning_sector(self):
        ch = toy_channel(0.5)
        ml = run_multilevel_pbp(toy_config(Scheme.MULTILEVEL_PBP, num_sectors=2), ch, 0)
        ex = run_exhaustive_pbp(toy_config(Scheme.EXHAUSTIVE_PBP), ch, 0)
        assert ml.best_pair == ex.best_pair

    def test_single_sector_degenerates_to_exhaustive(self):
        ch = toy_channel(0.5)
        ml = run_multilevel_pbp(toy_config(Scheme.MULTILEVEL_PBP, num_sectors=1), ch, 0)
        ex = run_exhaustive_pbp(toy_config(Scheme.EXHAUSTIVE_PBP), ch, 0)
        assert ml.best_pair == ex.best_pair
        assert ml.packets_sent == 1 + 16

    def test_sector_beams_partition(self):
        cb = dft_codebook(ArrayConfig(16))
        beams, groups = sector_beams(cb, 4)
        assert len(beams) == 4
        assert sorted(i for g in groups for i in g) == list(range(16))
        for w in beams:
            assert w.energy() == pytest.approx(1.0, abs=1e-12)

    def test_sixteen_beam_packet_count(self):
        cb = dft_codebook(ArrayConfig(16))
        cfg = ProtocolConfig(tx_codebook=cb, rx_codebook=cb, scheme=Scheme.MULTILEVEL_PBP)
        ch = sample_channel(ChannelConfig(), derive_seed(1, 1))
        out = run_multilevel_pbp(cfg, ch, 0)
        assert out.packets_sent == 4 * 4 + 4 * 4

    def test_trap_channel_defeats_multilevel_only(self):
        cb = dft_codebook(ArrayConfig(16))
        ch = sector_trap_channel(cb, cb)
        cfg = lambda s: ProtocolConfig(tx_codebook=cb, rx_codebook=cb, scheme=s)
        ex = run_exhaustive_pbp(cfg(Scheme.EXHAUSTIVE_PBP), ch, 0)
        ml = run_multilevel_pbp(cfg(Scheme.MULTILEVEL_PBP), ch, 0)
        coded = run_exhaustive_beamcoding(cfg(Scheme.EXHAUSTIVE_BEAMCODING), ch, 0)
        assert coded.best_pair == ex.best_pair
        gap = pair_power_db(cb, ex.best_pair, ch) - pair_power_db(cb, ml.best_pair, ch)
        assert gap >= 3.0


class TestNoiselessEquivalence:
    def test_exhaustive_schemes_agree_over_random_channels(self):
        cb = dft_codebook(ArrayConfig(16))
        cfgs = [
            ProtocolConfig(tx_codebook=cb, rx_codebook=cb, scheme=s)
            for s in (
                Scheme.EXHAUSTIVE_PBP,
                Scheme.EXHAUSTIVE_INPACKET,
                Scheme.EXHAUSTIVE_BEAMCODING,
            )
        ]
        ch_cfg = ChannelConfig()
        for i in range(50):
            ch = sample_channel(ch_cfg, derive_seed(7, i))
            pairs = {run(c, ch, i).best_pair for c in cfgs}
            assert len(pairs) == 1

    def test_argmax_matches_true_gain_table(self):
        cb = dft_codebook(ArrayConfig(16))
        cfg = ProtocolConfig(tx_codebook=cb, rx_codebook=cb, scheme=Scheme.EXHAUSTIVE_PBP)
        for i in range(20):
            ch = sample_channel(ChannelConfig(), derive_seed(100, i))
            out = run(cfg, ch, i)
            table = np.sum(np.abs(pair_gain_table(cb, cb, ch)) ** 2, axis=0)
            assert out.best_pair == tuple(np.unravel_index(np.argmax(table), table.shape))


class TestFeedbackAgainstExhaustive:
    def test_stage_two_is_conditionally_optimal(self):
        # feedback training loses only through its composite-receive first
        # stage: whenever it picks the same transmit beam as exhaustive coded
        # training, the final pair matches too
        cb = dft_codebook(ArrayConfig(16))
        fb = ProtocolConfig(tx_codebook=cb, rx_codebook=cb, scheme=Scheme.FEEDBACK_BEAMCODING)
        ex = ProtocolConfig(tx_codebook=cb, rx_codebook=cb, scheme=Scheme.EXHAUSTIVE_BEAMCODING)
        agree = 0
        for i in range(150):
            ch = sample_channel(ChannelConfig(los=True), derive_seed(31337, i))
            a, b = run(fb, ch, i), run(ex, ch, i)
            if a.best_pair[0] == b.best_pair[0]:
                assert a.best_pair == b.best_pair
                agree += 1
        # with a dominant path the composite stage rarely misleads
        assert agree >= 0.9 * 150


class TestTransforms:
    def test_quantized_training_still_finds_toy_pair(self):
        cfg = toy_config(Scheme.EXHAUSTIVE_BEAMCODING, quantize_bits=2)
        out = run(cfg, toy_channel(0.5), 0)
        assert out.best_pair == TOY_LOS_PAIR

    def test_projection_keeps_selection_on_clear_channels(self):
        cb = dft_codebook(ArrayConfig(16))
        plain = ProtocolConfig(tx_codebook=cb, rx_codebook=cb, scheme=Scheme.EXHAUSTIVE_PBP)
        coded = ProtocolConfig(
            tx_codebook=cb,
            rx_codebook=cb,
            scheme=Scheme.EXHAUSTIVE_BEAMCODING,
            quantize_bits=3,
        )
        agree = 0
        for i in range(60):
            ch = sample_channel(ChannelConfig(los=False), derive_seed(3000, i))
            agree += run(plain, ch, i).best_pair == run(coded, ch, i).best_pair
        assert agree >= 57

    def test_non_orthogonal_coded_group_warns(self):
        from beamtrain.array_model import codebook_from_cosines, steering_vector

        cfg = ArrayConfig(16)
        cb = codebook_from_cosines(cfg, [0.30, 0.31, -0.2, -0.5])
        with pytest.warns(UserWarning, match="non-orthogonal"):
            ProtocolConfig(tx_codebook=cb, rx_codebook=cb, scheme=Scheme.EXHAUSTIVE_BEAMCODING)


class TestDispatcher:
    def test_run_routes_every_scheme(self):
        ch = toy_channel(0.5)
        for scheme in Scheme:
            out = run(toy_config(scheme, num_sectors=2), ch, 0)
            assert out.scheme == scheme
            assert out.best_pair == TOY_LOS_PAIR

    def test_concurrent_runs_match_serial(self):
        # runs are pure functions of (config, channel, seed), so a thread
        # pool must reproduce the serial results exactly
        from concurrent.futures import ThreadPoolExecutor

        cb = dft_codebook(ArrayConfig(16))
        cfg = ProtocolConfig(
            tx_codebook=cb,
            rx_codebook=cb,
            scheme=Scheme.EXHAUSTIVE_BEAMCODING,
            noise=LinkBudget(),
        )
        channels = [sample_channel(ChannelConfig(), derive_seed(8, i)) for i in range(12)]
        serial = [run(cfg, ch, i) for i, ch in enumerate(channels)]
        with ThreadPoolExecutor(max_workers=4) as pool:
            parallel = list(pool.map(lambda t: run(cfg, t[1], t[0]), enumerate(channels)))
        for a, b in zip(serial, parallel):
            assert a.best_pair == b.best_pair
            assert np.array_equal(a.correlation.r, b.correlation.r)
            assert a.snr_db == b.snr_db
