import numpy as np
import pytest

from coofdm.channel import (
    AmplifierParams,
    FiberParams,
    LinkConfig,
    dispersion_transfer,
    propagate_link,
    set_launch_power,
)
from coofdm.coding import ROLE_DATA, ROLE_NULL, ROLE_PILOT, SymbolGrid, qpsk_map
from coofdm.core import DualPolWaveform, RandomSource, gaussian_noise, prbs_generate
from coofdm.ofdm import (
    OfdmParams,
    extract_data,
    frame_layout,
    insert_pilots_and_training,
    make_data_grid,
    ofdm_demodulate,
    ofdm_modulate,
    training_row_mask,
)
from coofdm.rxdsp import (
    ChannelEstimate,
    EqualizerConfig,
    apply_channel_estimate,
    cd_compensate,
    cpe_apply,
    cpe_correct,
    cpe_correct_pair,
    cpe_estimate,
    dispersion_memory_samples,
    estimate_channel,
)

AMP = AmplifierParams()
LINEAR_FIBER = FiberParams.from_engineering(gamma_nl=0.0)


def band_wave(n=8192, seed=3, fs=64e9):
    """Noise occupying the inner half band, so the spectrum vanishes smoothly
    at the Nyquist edge (realistic for the OFDM signals the equalizer sees)."""
    rng = RandomSource(seed)

    def pol():
        spec = gaussian_noise(rng, n, 1.0)
        spec[np.abs(np.fft.fftfreq(n)) > 0.25] = 0
        return np.fft.ifft(spec)

    return DualPolWaveform(pol(), pol(), fs)


def rel_err(a: DualPolWaveform, b: DualPolWaveform) -> float:
    num = np.linalg.norm(a.x - b.x) ** 2 + np.linalg.norm(a.y - b.y) ** 2
    den = np.linalg.norm(b.x) ** 2 + np.linalg.norm(b.y) ** 2
    return float(np.sqrt(num / den))


class TestEqualizerConfig:
    def test_defaults(self):
        eq = EqualizerConfig()
        assert eq.block_size == 16384
        assert eq.overlap == 4096
        assert eq.residual_cd_fraction is None

    def test_block_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            EqualizerConfig(block_size=12000, overlap=1024)

    def test_overlap_must_fit_in_block(self):
        with pytest.raises(ValueError):
            EqualizerConfig(block_size=1024, overlap=1024)

    def test_overlap_must_be_even(self):
        with pytest.raises(ValueError):
            EqualizerConfig(block_size=1024, overlap=255)


class TestDispersionMemory:
    def test_hand_value(self):
        # 2*pi * 2e-26 * 2.8e6 * 52e9 * 64e9 = 1170.6 -> 1171
        assert dispersion_memory_samples(2e-26, 2.8e6, 52e9, 64e9) == 1171

    def test_default_overlap_covers_full_link(self):
        fiber = FiberParams.from_engineering()
        mem = dispersion_memory_samples(fiber.beta2, 35 * 80e3, 52e9, 64e9)
        assert mem <= EqualizerConfig().overlap


class TestCdCompensate:
    def link(self, pre=0.0, spans=2):
        return LinkConfig(LINEAR_FIBER, AMP, n_spans=spans, pre_edc_fraction=pre,
                          launch_power_dbm=-10.0, ase_enabled=False)

    def test_zero_length_is_identity(self):
        w = band_wave()
        out = cd_compensate(w, self.link(), EqualizerConfig(1024, 256, residual_cd_fraction=0.0))
        assert np.array_equal(out.x, w.x) and np.array_equal(out.y, w.y)

    def test_full_pre_edc_means_identity(self):
        w = band_wave()
        out = cd_compensate(w, self.link(pre=1.0), EqualizerConfig(1024, 256))
        assert np.array_equal(out.x, w.x)

    # the 1e-8 contracts assume a strictly band-limited signal, so the
    # guard taper applies; see cd_compensate docstring
    BW = 32e9  # inner half of the 64 GSa/s band, matching band_wave

    def test_inverts_linear_link(self):
        w = set_launch_power(band_wave(), -10.0)
        rx = propagate_link(w, self.link(), RandomSource(0))
        out = cd_compensate(rx, self.link(), EqualizerConfig(2048, 512),
                            occupied_bandwidth=self.BW, guard_taper=True)
        assert rel_err(out, w) < 1e-8

    def test_inverts_linear_link_with_partial_pre_edc(self):
        w = set_launch_power(band_wave(seed=5), -10.0)
        link = self.link(pre=0.5)
        rx = propagate_link(w, link, RandomSource(0))
        out = cd_compensate(rx, link, EqualizerConfig(2048, 512),
                            occupied_bandwidth=self.BW, guard_taper=True)
        assert rel_err(out, w) < 1e-8

    def test_block_size_invariance(self):
        w = band_wave(seed=7)
        link = self.link()
        a = cd_compensate(w, link, EqualizerConfig(4096, 1024),
                          occupied_bandwidth=self.BW, guard_taper=True)
        b = cd_compensate(w, link, EqualizerConfig(1024, 512),
                          occupied_bandwidth=self.BW, guard_taper=True)
        assert rel_err(a, b) < 1e-8

    def test_matches_single_transform(self):
        w = band_wave(seed=9)
        link = self.link()
        out = cd_compensate(w, link, EqualizerConfig(2048, 512),
                            occupied_bandwidth=self.BW, guard_taper=True)
        h = dispersion_transfer(w.n_samples, w.sample_rate,
                                -LINEAR_FIBER.beta2 * link.total_length)
        exact = DualPolWaveform(np.fft.ifft(np.fft.fft(w.x) * h),
                                np.fft.ifft(np.fft.fft(w.y) * h), w.sample_rate)
        assert rel_err(out, exact) < 1e-8

    def test_length_not_multiple_of_step(self):
        w = band_wave(n=5000, seed=11)
        link = self.link()
        out = cd_compensate(w, link, EqualizerConfig(1024, 512),
                            occupied_bandwidth=self.BW, guard_taper=True)
        h = dispersion_transfer(w.n_samples, w.sample_rate,
                                -LINEAR_FIBER.beta2 * link.total_length)
        exact = DualPolWaveform(np.fft.ifft(np.fft.fft(w.x) * h),
                                np.fft.ifft(np.fft.fft(w.y) * h), w.sample_rate)
        assert out.n_samples == 5000
        assert rel_err(out, exact) < 1e-8

    def test_short_overlap_warns(self):
        w = band_wave()
        with pytest.warns(UserWarning, match="dispersion memory"):
            cd_compensate(w, self.link(spans=20), EqualizerConfig(512, 16))


def grid_pair(n_rows=4, seed=0, n_sub=16):
    """Small synthetic grid: bins 1..12 data, 13..14 pilots, rest null."""
    role = np.zeros(n_sub, dtype=np.uint8)
    role[1:13] = ROLE_DATA
    role[13:15] = ROLE_PILOT
    rng = np.random.default_rng(seed)
    sym = np.zeros((n_rows, n_sub), dtype=np.complex128)
    active = role != ROLE_NULL
    sym[:, active] = qpsk_map(rng.integers(0, 2, size=2 * n_rows * int(active.sum()))
                              ).reshape(n_rows, -1)
    return SymbolGrid(sym, role, 12), role


class TestEstimateChannel:
    def test_identity_channel(self):
        g, _ = grid_pair()
        est = estimate_channel(g, g, g, g)
        assert np.allclose(est.taps_x, 1.0)
        assert np.allclose(est.taps_y, 1.0)
        assert est.staleness == 0

    def test_global_scalar(self):
        g, role = grid_pair()
        c = 0.7 - 0.2j
        rx = g.with_symbols(g.symbols * c)
        est = estimate_channel(rx, rx, g, g)
        active = role != ROLE_NULL
        assert np.allclose(est.taps_x[active], c)
        assert np.allclose(est.taps_x[~active], 1.0)

    def test_per_bin_response_recovered(self):
        g, role = grid_pair(n_rows=3, seed=2)
        taps = np.exp(1j * np.linspace(-1, 1, role.size)) * np.linspace(0.5, 1.5, role.size)
        rx = g.with_symbols(g.symbols * taps[None, :])
        est = estimate_channel(rx, rx, g, g)
        active = role != ROLE_NULL
        assert np.allclose(est.taps_x[active], taps[active])

    def test_zero_reference_on_active_bin_rejected(self):
        g, role = grid_pair()
        bad = g.symbols.copy()
        bad[0, 3] = 0  # data bin
        bad_grid = g.with_symbols(bad)
        with pytest.raises(ValueError):
            estimate_channel(g, g, bad_grid, bad_grid)

    def test_two_training_rows_halve_tap_variance(self):
        # empirical averaging check on one data bin
        g1, _ = grid_pair(n_rows=1, seed=4)
        g2, _ = grid_pair(n_rows=2, seed=4)
        rng = RandomSource(99)
        taps1, taps2 = [], []
        for _ in range(400):
            n1 = gaussian_noise(rng, g1.symbols.size, 1e-2).reshape(g1.symbols.shape)
            n2 = gaussian_noise(rng, g2.symbols.size, 1e-2).reshape(g2.symbols.shape)
            rx1 = g1.with_symbols(np.where(g1.symbols != 0, g1.symbols + n1, 0))
            rx2 = g2.with_symbols(np.where(g2.symbols != 0, g2.symbols + n2, 0))
            taps1.append(estimate_channel(rx1, rx1, g1, g1).taps_x[5])
            taps2.append(estimate_channel(rx2, rx2, g2, g2).taps_x[5])
        v1 = np.var(np.asarray(taps1))
        v2 = np.var(np.asarray(taps2))
        assert v2 / v1 == pytest.approx(0.5, abs=0.15)

    def test_apply_divides_and_keeps_nulls(self):
        g, role = grid_pair()
        taps = np.full(role.size, 2.0, dtype=np.complex128)
        out = apply_channel_estimate(g, taps)
        active = role != ROLE_NULL
        assert np.allclose(out.symbols[:, active], g.symbols[:, active] / 2.0)
        assert np.all(out.symbols[:, ~active] == 0)

    def test_taps_must_be_finite(self):
        with pytest.raises(ValueError):
            ChannelEstimate(np.array([1.0, np.inf]), np.array([1.0, 1.0]))


PILOTS = np.array([1 + 1j, -1 + 1j], dtype=np.complex128) / np.sqrt(2)


def piloted_grid(phis, seed=0):
    g, role = grid_pair(n_rows=len(phis), seed=seed)
    sym = g.symbols.copy()
    sym[:, 13:15] = PILOTS[None, :]
    g = g.with_symbols(sym * np.exp(1j * np.asarray(phis))[:, None])
    return g


class TestCpeCorrect:
    def test_constant_rotation_estimated(self):
        g = piloted_grid([0.3] * 5)
        phi = cpe_estimate(g, PILOTS)
        assert np.max(np.abs(phi - 0.3)) < 1e-3

    def test_zero_phase_is_identity(self):
        g = piloted_grid([0.0] * 4)
        out = cpe_correct(g, PILOTS)
        assert np.allclose(out.symbols, g.symbols)

    def test_rotation_removed(self):
        phis = [0.3, -0.2, 0.05, 0.4]
        g0 = piloted_grid([0.0] * 4, seed=1)
        g = piloted_grid(phis, seed=1)
        out = cpe_correct(g, PILOTS)
        assert np.allclose(out.symbols, g0.symbols, atol=1e-12)

    def test_magnitudes_never_change(self):
        g = piloted_grid([0.7, 1.2, -0.4], seed=2)
        out = cpe_correct(g, PILOTS)
        assert np.allclose(np.abs(out.symbols), np.abs(g.symbols))

    def test_unwrapping_tracks_slow_drift_past_pi(self):
        truth = np.linspace(0.0, 3 * np.pi, 13)  # steps < pi
        g = piloted_grid(truth)
        phi = cpe_estimate(g, PILOTS)
        assert np.max(np.abs(phi - truth)) < 1e-9
        assert phi[-1] > np.pi  # genuinely unwrapped, not folded

    def test_zero_pilot_energy_rejected(self):
        g, _ = grid_pair()
        sym = g.symbols.copy()
        sym[:, 13:15] = 0
        with pytest.raises(ValueError):
            cpe_estimate(g.with_symbols(sym), PILOTS)

    def test_pilot_count_mismatch_rejected(self):
        g = piloted_grid([0.0])
        with pytest.raises(ValueError):
            cpe_estimate(g, PILOTS[:1])

    def test_independent_pair_default(self):
        gx = piloted_grid([0.3, 0.1], seed=3)
        gy = piloted_grid([-0.5, 0.2], seed=4)
        ox, oy = cpe_correct_pair(gx, gy, PILOTS, PILOTS)
        assert np.allclose(ox.symbols, piloted_grid([0.0, 0.0], seed=3).symbols, atol=1e-12)
        assert np.allclose(oy.symbols, piloted_grid([0.0, 0.0], seed=4).symbols, atol=1e-12)

    def test_tied_pair_assumes_opposite_rotations(self):
        gx = piloted_grid([0.25, 0.6], seed=5)
        gy = piloted_grid([-0.25, -0.6], seed=6)
        ox, oy = cpe_correct_pair(gx, gy, PILOTS, PILOTS, tied=True)
        assert np.allclose(ox.symbols, piloted_grid([0.0, 0.0], seed=5).symbols, atol=1e-12)
        assert np.allclose(oy.symbols, piloted_grid([0.0, 0.0], seed=6).symbols, atol=1e-12)

    def test_noisy_pilots_still_remove_constant_rotation(self):
        rng = RandomSource(7)
        g = piloted_grid([0.1] * 40, seed=8)
        noise = gaussian_noise(rng, g.symbols.size, 4e-4).reshape(g.symbols.shape)
        noisy = g.with_symbols(np.where(g.symbols != 0, g.symbols + noise, 0))
        phi = cpe_estimate(noisy, PILOTS)
        assert abs(float(np.mean(phi)) - 0.1) < 0.02


class TestLinearChainIdentity:
    PARAMS = OfdmParams(fft_size=64, n_data=24, n_pilots=4, cp_fraction=0.25,
                        sample_rate=8e9, training_period=10, n_training=2)

    def build_tx(self, seed):
        p = self.PARAMS
        layout = frame_layout(p)
        n_payload = 16
        data = qpsk_map(prbs_generate(seed, 2 * n_payload * p.n_data)).reshape(n_payload, p.n_data)
        grid = make_data_grid(data, p)
        rng = np.random.default_rng(seed + 100)
        training = np.zeros((p.n_training, p.fft_size), dtype=np.complex128)
        occ = layout.occupied_bins
        training[:, occ] = qpsk_map(rng.integers(0, 2, size=2 * p.n_training * occ.size)
                                    ).reshape(p.n_training, occ.size)
        pilots = qpsk_map(rng.integers(0, 2, size=2 * p.n_pilots))
        full = insert_pilots_and_training(grid, p, pilots, training)
        # insertion writes the pilot tones on training rows too
        known = training.copy()
        known[:, layout.pilot_bins] = pilots
        return full, known, pilots, layout

    def test_round_trip_through_linear_link(self):
        p = self.PARAMS
        gx, train_x, pilots_x, layout = self.build_tx(1)
        gy, train_y, pilots_y, _ = self.build_tx(2)

        wave = set_launch_power(ofdm_modulate(gx, gy, p), -10.0)
        link = LinkConfig(LINEAR_FIBER, AMP, n_spans=2, pre_edc_fraction=0.5,
                          launch_power_dbm=-10.0, ase_enabled=False)
        rx = propagate_link(wave, link, RandomSource(0))
        rx = cd_compensate(rx, link, EqualizerConfig(1024, 512))
        rg_x, rg_y = ofdm_demodulate(rx, p)

        mask = training_row_mask(rg_x.n_symbols, p)
        known_x = SymbolGrid(train_x, layout.role, p.n_data)
        known_y = SymbolGrid(train_y, layout.role, p.n_data)
        # every block repeats the same training rows; estimate from the first
        rx_tr_x = rg_x.with_symbols(rg_x.symbols[mask][: p.n_training])
        rx_tr_y = rg_y.with_symbols(rg_y.symbols[mask][: p.n_training])
        est = estimate_channel(rx_tr_x, rx_tr_y, known_x, known_y)

        eq_x = apply_channel_estimate(rg_x.with_symbols(rg_x.symbols[~mask]), est.taps_x)
        eq_y = apply_channel_estimate(rg_y.with_symbols(rg_y.symbols[~mask]), est.taps_y)
        eq_x, eq_y = cpe_correct_pair(eq_x, eq_y, pilots_x, pilots_y)

        tx_x, _, _, _ = self.build_tx(1)
        tx_payload_x = tx_x.with_symbols(tx_x.symbols[~training_row_mask(tx_x.n_symbols, p)])
        err = np.max(np.abs(extract_data(eq_x, p) - extract_data(tx_payload_x, p)))
        assert err < 1e-6

        tx_y, _, _, _ = self.build_tx(2)
        tx_payload_y = tx_y.with_symbols(tx_y.symbols[~training_row_mask(tx_y.n_symbols, p)])
        err_y = np.max(np.abs(extract_data(eq_y, p) - extract_data(tx_payload_y, p)))
        assert err_y < 1e-6
