"""System-level acceptance gate: one test per criterion.

Each test records a single `criterion N: PASS/FAIL` line; the conftest hook
replays them in the terminal summary once the run is over. Criterion 10 is
the full-length reproduction and runs only under `-m nightly`; criterion 9
runs nine complete link simulations and dominates the runtime of the default
selection.
"""

from dataclasses import replace
from math import erfc, sqrt

import numpy as np
import pytest

from coofdm.channel import (
    AmplifierParams,
    FiberParams,
    LinkConfig,
    StepControl,
    dispersion_transfer,
    propagate_link,
    propagate_span,
    set_launch_power,
)
from coofdm.coding import (
    get_scheme,
    lpc_alphabet,
    lut_decode,
    ml_detect,
    qpsk_constellation,
    qpsk_map,
)
from coofdm.core import DualPolWaveform, RandomSource, prbs_generate
from coofdm.harness import default_config, run_point, scaled_config
from coofdm.metrics import count_ber
from coofdm.ofdm import (
    extract_data,
    make_data_grid,
    net_bit_rate,
    ofdm_demodulate,
    ofdm_modulate,
)
from coofdm.perturbation import (
    LinkProfile,
    anti_correlation_check,
    eta,
    first_order_distortion,
)
from coofdm.rxdsp import EqualizerConfig, cd_compensate

FIBER = FiberParams.from_engineering()
AMP = AmplifierParams()

# Launch-power optimum of lpc-pcts on the scaled preset, measured over seeds
# 1-3 at 262144 bits/point as the Q argmax among powers where every seed
# counts >= 100 errors (below +6 dBm the error counts are single digits and
# the estimate is binomial noise). The ordering test runs 3 dB above it.
SCALED_OPTIMUM_DBM = 6.0
ORDERING_TEST_DBM = SCALED_OPTIMUM_DBM + 3.0


# stdout of passing tests is captured, so the verdicts are also collected
# here for the conftest terminal-summary hook to replay.
VERDICTS: list[str] = []


def _criterion(n: int, desc: str, ok: bool, detail: str = ""):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {desc}"
    if detail:
        line += f" [{detail}]"
    VERDICTS.append(line)
    print(line)
    assert ok, line


def _twin_ofdm_frame(cfg, n_symbols: int, seed: int):
    """Unit-power conjugate-twin payload grids for the scaled OFDM layout."""
    params = cfg.ofdm_params()
    scheme = get_scheme("lpc-pcts")
    bits = prbs_generate(seed, scheme.bits_per_symbol(params.n_data) * n_symbols)
    dx, dy = scheme.encode(bits.bits, params.n_data)
    return make_data_grid(dx, params), make_data_grid(dy, params), params


def test_criterion_01_back_to_back_bijection():
    cfg = replace(scaled_config(), n_spans=0, ase=False, n_symbols=98,
                  launch_dbm=(0.0,), seeds=(1,))
    results = {}
    for name in ("lpc-pcts", "pctw-16qam", "pcsc", "pdm-4qam"):
        rec = run_point(cfg, name, 0.0, 1)
        assert rec.n_bits >= 100_000
        results[name] = rec.n_errors
    ok = all(v == 0 for v in results.values())
    _criterion(1, "back-to-back BER is exactly 0 for all four schemes", ok,
               f"errors per scheme: {results}")


def test_criterion_02_linear_superposition_gain():
    # gamma = 0 via n2 = 0; ASE on vs off isolates the noise error vector
    cfg = scaled_config()
    gx, gy, params = _twin_ofdm_frame(cfg, n_symbols=32, seed=3)
    wave = set_launch_power(ofdm_modulate(gx, gy, params), -2.0)
    fiber0 = FiberParams.from_engineering(n2_m2_per_w=0.0)
    eq = EqualizerConfig(block_size=4096, overlap=1024)

    def receive(ase: bool):
        link = LinkConfig(fiber=fiber0, amp=AMP, n_spans=4,
                          pre_edc_fraction=0.5, ase_enabled=ase)
        out = propagate_link(wave, link, RandomSource(11).spawn(1)[0])
        comp = cd_compensate(out, link, eq,
                             occupied_bandwidth=cfg.occupied_bandwidth())
        rx_x, rx_y = ofdm_demodulate(comp, params)
        return extract_data(rx_x, params), extract_data(rx_y, params)

    bx, by = receive(ase=True)
    rx0, ry0 = receive(ase=False)
    ex, ey = bx - rx0, by - ry0
    e_sup = (ex + np.conj(ey)) / 2
    single = (np.mean(np.abs(ex) ** 2) + np.mean(np.abs(ey) ** 2)) / 2
    ratio = float(np.mean(np.abs(e_sup) ** 2) / single)
    ok = abs(ratio - 0.50) <= 0.05
    _criterion(2, "coherent superposition halves the ASE error variance", ok,
               f"variance ratio {ratio:.4f}, expected 0.50 +/- 0.05")


def test_criterion_03_cw_manakov_phase():
    fiber = FiberParams.from_engineering(alpha_db_per_km=0.0,
                                         dispersion_ps_nm_km=0.0)
    px, py = 6e-3, 4e-3  # W, unequal on purpose: the cross term must count
    n = 64
    wave = DualPolWaveform(
        np.full(n, sqrt(px), dtype=complex),
        np.full(n, sqrt(py), dtype=complex),
        sample_rate=64e9,
    )
    phases = []
    for max_step in (1000.0, 250.0):
        out = propagate_span(wave, fiber, StepControl(max_phase_rad=0.05,
                                                      max_step=max_step))
        phases.append((
            float(np.angle(np.mean(out.x / wave.x))),
            float(np.angle(np.mean(out.y / wave.y))),
        ))
    expected = (8 / 9) * fiber.gamma_nl * (px + py) * fiber.span_length
    converged = max(abs(phases[0][i] - phases[1][i]) for i in range(2)) < 1e-9
    err = max(abs(p - expected) for p in phases[1])
    ok = converged and err < 1e-6
    _criterion(3, "CW nonlinear phase equals (8/9)*gamma*P*L", ok,
               f"analytic {expected:.6f} rad, worst error {err:.2e} rad")


def _spectral_frame(n=64, occupied=52, seed=7, p_total=10 ** (-6 / 10) * 1e-3):
    """Conjugate-twin random frame on a cyclic n-bin spectrum at p_total W."""
    rng = np.random.default_rng(seed)
    half = occupied // 2
    occ = np.r_[np.arange(1, half + 1), np.arange(n - half, n)]
    qpsk = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
    a = qpsk[rng.integers(0, 4, occ.size)]
    b = qpsk[rng.integers(0, 4, occ.size)]
    vx = np.zeros(n, dtype=complex)
    vx[occ] = (a + 0.5 * b) / np.sqrt(2.5)
    vy = np.conj(vx)
    ex, ey = np.fft.ifft(vx), np.fft.ifft(vy)
    s = sqrt(p_total / np.mean(np.abs(ex) ** 2 + np.abs(ey) ** 2))
    return vx * s, vy * s


def test_criterion_04_oracle_matches_split_step():
    fs = 8e9
    vx, vy = _spectral_frame()
    w_in = DualPolWaveform(np.fft.ifft(vx), np.fft.ifft(vy), fs)
    step = StepControl(max_phase_rad=1e-4, max_step=50.0)
    lk = LinkConfig(fiber=FIBER, amp=AMP, n_spans=2, pre_edc_fraction=0.5,
                    ase_enabled=False, step=step)
    lk0 = replace(lk, fiber=FiberParams.from_engineering(gamma_nl=0.0))
    rng = RandomSource(1)
    out_nl = propagate_link(w_in, lk, rng)
    out_lin = propagate_link(w_in, lk0, rng)
    # both runs saw the same net linear transfer, so the residual-CD filter
    # applied to the spectral difference references the transmitter plane
    residual = (1 - lk.pre_edc_fraction) * FIBER.beta2 * lk.total_length
    h = dispersion_transfer(vx.size, fs, -residual)
    d_ref_x = (np.fft.fft(out_nl.x) - np.fft.fft(out_lin.x)) * h
    d_ref_y = (np.fft.fft(out_nl.y) - np.fft.fft(out_lin.y)) * h

    prof = LinkProfile.from_link(lk, dz=20.0)
    d = first_order_distortion(vx, vy, fs, prof, FIBER)
    err = np.linalg.norm(np.r_[d_ref_x - d.delta_x, d_ref_y - d.delta_y])
    ref = np.linalg.norm(np.r_[d_ref_x, d_ref_y])
    rel = float(err / ref)
    ok = rel < 0.05
    _criterion(4, "first-order model matches split-step minus linear", ok,
               f"relative L2 error {rel:.4f} at -6 dBm over 2 spans")


def test_criterion_05_twin_anti_correlation():
    fs = 8e9
    vx, vy = _spectral_frame()

    def figures(pre: float):
        lk = LinkConfig(fiber=FIBER, amp=AMP, n_spans=2,
                        pre_edc_fraction=pre, ase_enabled=False)
        prof = LinkProfile.from_link(lk, dz=50.0)
        d = first_order_distortion(vx, vy, fs, prof, FIBER)
        return anti_correlation_check(d.delta_x, d.delta_y)

    corr, residual = figures(pre=0.5)
    _, residual_nopre = figures(pre=0.0)
    ok = corr.real > 0.8 and residual < 0.2 and residual_nopre < 1.0
    _criterion(5, "twin distortions anti-correlate under 50% pre-EDC", ok,
               f"corr {corr.real:.3f}, residual {residual:.3f}, "
               f"no-pre residual {residual_nopre:.3f}")


def test_criterion_06_kernel_symmetry():
    w_edge = 2 * np.pi * 6e9
    w = np.linspace(-w_edge, w_edge, 21)

    def im_ratio(fiber, gain_db, pre):
        lk = LinkConfig(fiber=fiber, amp=AmplifierParams(gain_db=gain_db),
                        n_spans=2, pre_edc_fraction=pre, ase_enabled=False)
        grid = eta(w[:, None], w[None, :], LinkProfile.from_link(lk, dz=50.0))
        return np.abs(grid.imag) / np.abs(grid)

    lossless = FiberParams.from_engineering(alpha_db_per_km=0.0)
    sym = float(np.max(im_ratio(lossless, gain_db=0.0, pre=0.5)))
    asym = float(np.max(im_ratio(FIBER, gain_db=16.0, pre=0.0)))
    ok = sym < 0.05 and asym > 0.05
    _criterion(6, "kernel is real for a symmetric map and not otherwise", ok,
               f"max |Im|/|eta|: symmetric {sym:.2e}, asymmetric {asym:.3f}")


def test_criterion_07_constellation_geometry():
    ratios = (0.25, 1 / 3, 0.5, 2 / 3, 0.75)
    d = {r: lpc_alphabet(r).min_distance() / lpc_alphabet(r).scale
         for r in ratios}
    best = max(d, key=d.get)
    ok = best == 0.5
    _criterion(7, "pair-amplitude ratio 1/2 maximizes minimum distance", ok,
               "normalized d_min " + ", ".join(f"{r:.2f}: {v:.4f}"
                                               for r, v in d.items()))


def test_criterion_08_net_rate():
    rate = net_bit_rate(default_config().ofdm_params())
    rel = abs(rate - 200e9) / 200e9
    ok = rel < 0.05
    _criterion(8, "default system carries about 200 Gb/s net", ok,
               f"{rate / 1e9:.1f} Gb/s, {100 * rel:.1f}% from 200")


def test_criterion_09_scaled_link_ordering():
    cfg = replace(scaled_config(), n_symbols=256)
    seeds = (1, 2, 3)
    schemes = ("lpc-pcts", "pcsc", "pctw-16qam")
    q = {s: [run_point(cfg, s, ORDERING_TEST_DBM, seed).q_db for seed in seeds]
         for s in schemes}
    table = "; ".join(
        f"{s}: " + "/".join(f"{v:.2f}" for v in q[s]) for s in schemes)
    ok = all(q["lpc-pcts"][i] > q["pcsc"][i]
             and q["lpc-pcts"][i] > q["pctw-16qam"][i]
             for i in range(len(seeds)))
    _criterion(9, "lpc-pcts leads both baselines at optimum + 3 dB", ok,
               f"Q(dB) per seed at {ORDERING_TEST_DBM:+.1f} dBm: {table}")


@pytest.mark.nightly
def test_criterion_10_full_length_gain():
    seeds = (1, 2)

    def dq(pre: float) -> float:
        cfg = replace(default_config(), pre_edc_fraction=pre)
        q = {s: np.mean([run_point(cfg, s, 3.0, seed).q_db for seed in seeds])
             for s in ("lpc-pcts", "pcsc")}
        return float(q["lpc-pcts"] - q["pcsc"])

    dq_pre, dq_nopre = dq(0.5), dq(0.0)
    ok = abs(dq_pre - 2.3) <= 0.7 and abs(dq_nopre - 1.7) <= 0.7
    _criterion(10, "2800 km gain over pcsc at +3 dBm", ok,
               f"dQ with pre-EDC {dq_pre:.2f} dB (want 2.3 +/- 0.7), "
               f"without {dq_nopre:.2f} dB (want 1.7 +/- 0.7)")


def test_criterion_11_awgn_qpsk_calibration():
    rng = np.random.default_rng(5)
    const = qpsk_constellation()
    n_sym = 300_000
    worst = 0.0
    details = []
    for snr_db in (6.0, 8.0, 10.0):
        snr = 10 ** (snr_db / 10)
        bits = rng.integers(0, 2, 2 * n_sym).astype(np.uint8)
        s = qpsk_map(bits) / const.scale
        noise = sqrt(1 / (2 * snr)) * (rng.standard_normal(n_sym)
                                       + 1j * rng.standard_normal(n_sym))
        rx_bits = lut_decode(ml_detect((s + noise) * const.scale, const), const)
        _, ber = count_ber(bits, rx_bits)
        p = 0.5 * erfc(sqrt(snr / 2))
        sigma = sqrt(p * (1 - p) / (2 * n_sym))
        pull = abs(ber - p) / sigma
        worst = max(worst, pull)
        details.append(f"{snr_db:g} dB: ber {ber:.2e} vs {p:.2e} ({pull:.2f} sigma)")
    ok = worst <= 3.0
    _criterion(11, "QPSK BER matches the analytic curve within 3 sigma", ok,
               "; ".join(details))
