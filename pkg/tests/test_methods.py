import numpy as np
import pytest

from .common import corr, make_trace, relative_error, sine, times
from rppgbench.exceptions import (
    IncompatibleInput,
    RankDeficient,
    RequiresPixelData,
    TraceTooShort,
    WindowLongerThanTrace,
)
from rppgbench.hr import hr_fft
from rppgbench.methods import METHODS, run_method
from rppgbench.methods.chrom import chrom
from rppgbench.methods.common import sliding_windows, spectral_peak_fraction
from rppgbench.methods.green import green
from rppgbench.methods.ica import ica, ica_components
from rppgbench.methods.lgi import lgi, lgi_residual
from rppgbench.methods.pbv import pbv
from rppgbench.methods.pca import pca, principal_components
from rppgbench.methods.pos import pos
from rppgbench.methods.ssr import ssr
from rppgbench.metrics import snr
from rppgbench.preprocess import bandpass, zscore
from rppgbench.settings import ComponentSelection, MethodConfig, MethodId
from rppgbench.signals import FrameSequence, RgbTrace
from rppgbench.synth import SynthSpec, generate_frames, generate_trace

FS = 30.0
BASE = np.array([170.0, 120.0, 100.0])
CENTER = slice(60, -60)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def orthogonal_to(v):
    return unit(np.cross(v, [1.0, 0.0, 0.0]))


def hr_values(bvp, window_s=10.0):
    return hr_fft(bvp, window_s).values


def synth_trace(**kwargs):
    kwargs.setdefault("sensor_noise_std", 0.1)
    trace, truth, _ = generate_trace(SynthSpec(**kwargs))
    return trace, truth


def constant_trace(n=600):
    return RgbTrace(np.tile(BASE, (n, 1)), FS)


def mixture_trace():
    """Three non-Gaussian sources mixed into the color channels."""
    rng = np.random.default_rng(5)
    n = 600
    sources = np.vstack(
        [
            sine(1.2),
            np.sign(np.sin(2 * np.pi * 0.45 * times() + 0.3)),
            rng.uniform(-1, 1, n),
        ]
    )
    mixing = np.array([[1.0, 0.5, 0.3], [0.6, 1.0, 0.2], [0.4, 0.3, 1.0]])
    samples = 100 + 5 * (mixing @ sources).T
    return RgbTrace(samples, FS), sources


# GREEN


def test_green_follows_green_channel():
    pulse = sine(1.2)
    trace = make_trace(np.full(600, 100.0), 100 + 0.5 * pulse, np.full(600, 100.0))
    bvp = green(trace)
    assert bvp.method_tag == "GREEN"
    assert len(bvp) == 600
    assert corr(bvp.samples, bandpass(pulse, FS)) > 0.99


def test_green_constant_trace():
    assert np.allclose(green(constant_trace()).samples, 0, atol=1e-9)


def test_green_ignores_red_and_blue():
    pulse = sine(1.2)
    trace = make_trace(100 + 5 * pulse, np.full(600, 100.0), 100 - 5 * pulse)
    assert np.allclose(green(trace).samples, 0, atol=1e-9)


# ICA


def test_ica_recovers_pulse_from_mixture():
    trace, sources = mixture_trace()
    components = ica_components(trace)
    assert components.shape == (3, 600)
    assert max(abs(corr(c, sources[0])) for c in components) > 0.95


def test_ica_channel_permutation():
    trace, _ = mixture_trace()
    permuted = RgbTrace(trace.samples[:, [2, 0, 1]], FS)
    a = ica_components(trace)
    b = ica_components(permuted)
    for component in a:
        assert max(abs(corr(component, other)) for other in b) > 0.99


def test_ica_rank_deficient():
    rng = np.random.default_rng(6)
    x = 100 + 5 * rng.normal(size=600)
    trace = make_trace(x, x, 100 + 5 * rng.normal(size=600))
    with pytest.raises(RankDeficient):
        ica(trace)


@pytest.mark.parametrize("method", [ica, pca])
def test_noise_free_synthetic_trace_is_rank_one(method):
    trace, _ = synth_trace(sensor_noise_std=0.0)
    with pytest.raises(RankDeficient):
        method(trace)
    trace, _ = synth_trace(sensor_noise_std=0.1)
    cfg = MethodConfig(component_selection=ComponentSelection.MAX_SPECTRAL_PEAK)
    assert np.all(np.abs(hr_values(method(trace, cfg)) - 72) <= 1)


def test_ica_component_selection():
    trace, truth = synth_trace(hr_bpm=84.0)
    cfg = MethodConfig(component_selection=ComponentSelection.MAX_SPECTRAL_PEAK)
    bvp = ica(trace, cfg)
    assert bvp.method_tag == "ICA"
    assert np.all(np.abs(hr_values(bvp) - 84) <= 1)
    # the fixed second component still yields a valid signal
    assert len(ica(trace)) == len(trace)


def test_ica_default_takes_second_component():
    trace, _ = mixture_trace()
    second = ica_components(trace)[1]
    bvp = ica(trace)
    assert abs(corr(bvp.samples, bandpass(second, FS))) == pytest.approx(1.0, abs=1e-9)
    fixed = ica(trace, MethodConfig(component_selection=ComponentSelection.FIXED_SECOND))
    np.testing.assert_array_equal(bvp.samples, fixed.samples)


# PCA


def test_pca_first_component_is_common_pulse():
    rng = np.random.default_rng(7)
    pulse = sine(1.2)
    x = 100 + 2 * pulse[:, None] + 0.1 * rng.normal(size=(600, 3))
    _, components, _ = principal_components(zscore(x))
    assert abs(corr(components[0], pulse)) > 0.95


def test_pca_rotation_preserves_spectrum():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(500, 3)) * [3.0, 2.0, 1.0]
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    a, _, _ = principal_components(x)
    b, _, _ = principal_components(x @ q)
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


def test_pca_selected_peak_matches_pulse():
    trace, _ = synth_trace(hr_bpm=72.0)
    bvp = pca(trace)
    assert bvp.method_tag == "PCA"
    assert np.all(np.abs(hr_values(bvp) - 72) <= 1)


# CHROM and POS


def drift_trace(hr_bpm=72.0):
    return synth_trace(hr_bpm=hr_bpm, illumination_drift=(0.025, 2.2))


def test_chrom_survives_illumination_flicker():
    trace, _ = drift_trace()
    assert np.all(np.abs(hr_values(chrom(trace)) - 72) <= 1)
    assert np.mean(np.abs(hr_values(green(trace)) - 72)) > 5


def test_pos_survives_illumination_flicker():
    trace, _ = drift_trace()
    assert np.all(np.abs(hr_values(pos(trace)) - 72) <= 1)


# Flicker at 2.2 Hz sits inside the pulse band, so band-pass filtering alone
# cannot remove it; heart rates stay below 100 bpm to keep it off the pulse.
FLICKER_HZ = 2.2


def test_chrominance_methods_beat_green_under_flicker():
    wins = 0
    for seed in range(20):
        hr_bpm = 60.0 + 2.0 * seed
        trace, _ = synth_trace(
            hr_bpm=hr_bpm, illumination_drift=(5 * 0.005, FLICKER_HZ), seed=seed
        )
        errors = {
            method: np.mean(np.abs(hr_values(method(trace)) - hr_bpm))
            for method in (green, chrom, pos)
        }
        if max(errors[chrom], errors[pos]) <= errors[green]:
            wins += 1
    assert wins > 10


@pytest.mark.parametrize("method", [green, ica, pca, chrom, pbv, pos, lgi])
def test_pulse_free_trace_has_negative_snr(method):
    values = []
    for seed in range(5):
        trace, _ = synth_trace(pulse_amplitude=0.0, sensor_noise_std=1.0, seed=seed)
        values.append(snr(method(trace), 72.0))
    assert np.mean(values) < 0


@pytest.mark.parametrize("method", [chrom, pos])
def test_constant_trace_gives_zero(method):
    assert np.allclose(method(constant_trace()).samples, 0, atol=1e-9)


@pytest.mark.parametrize("method", [chrom, pos, pbv])
@pytest.mark.parametrize("gain", [0.5, 2.0])
def test_gain_invariance(method, gain):
    trace, _ = synth_trace(hr_bpm=90.0)
    reference = method(trace).samples
    scaled = method(trace.scaled(gain)).samples
    assert relative_error(scaled, reference) < 1e-6
    assert corr(scaled, reference) == pytest.approx(1.0, abs=1e-6)


def test_pos_identical_channels():
    x = 100 + 5 * sine(1.2)
    assert np.allclose(pos(make_trace(x, x, x)).samples, 0, atol=1e-12)


def test_pos_clean_pulse():
    trace, _ = generate_trace(SynthSpec(hr_bpm=72.0))[:2]
    bvp = pos(trace)
    assert bvp.method_tag == "POS"
    assert np.all(np.abs(hr_values(bvp) - 72) <= 1)


def test_window_longer_than_trace():
    trace = RgbTrace(np.tile(BASE, (20, 1)), FS)
    with pytest.raises(WindowLongerThanTrace):
        chrom(trace)
    with pytest.raises(WindowLongerThanTrace):
        pos(trace)


def test_sliding_windows_cover_tail():
    assert list(sliding_windows(10, 4, 2)) == [(0, 4), (2, 6), (4, 8), (6, 10)]
    assert list(sliding_windows(11, 4, 2))[-1] == (7, 11)


# PBV


def test_pbv_rejects_orthogonal_motion():
    sig = unit((0.33, 0.78, 0.53))
    pulse = sine(1.2)
    motion = sine(1.9)
    normalized = 1 + 0.005 * pulse[:, None] * sig + 0.02 * motion[:, None] * orthogonal_to(sig)
    bvp = pbv(RgbTrace(BASE * normalized, FS))
    reference = bandpass(pulse, FS)
    assert corr(bvp.samples[CENTER], reference[CENTER]) > 0.95
    assert abs(corr(bvp.samples[CENTER], bandpass(motion, FS)[CENTER])) < 0.1


def test_pbv_constant_trace():
    assert np.allclose(pbv(constant_trace()).samples, 0, atol=1e-9)


def test_pbv_signature_scale():
    trace, _ = synth_trace(hr_bpm=80.0)
    a = pbv(trace, MethodConfig(pbv_signature=(0.33, 0.78, 0.53)))
    b = pbv(trace, MethodConfig(pbv_signature=(3.3, 7.8, 5.3)))
    assert corr(a.samples, b.samples) == pytest.approx(1.0, abs=1e-9)


# SSR


def test_ssr_recovers_pulse():
    spec = SynthSpec(hr_bpm=72.0, pulse_amplitude=0.02, sensor_noise_std=1.0)
    frames, truth, _ = generate_frames(spec, 16, 16)
    bvp = ssr(frames)
    assert bvp.method_tag == "SSR"
    assert abs(corr(bvp.samples, bandpass(truth.samples, FS))) > 0.9
    assert np.all(np.abs(hr_values(bvp) - 72) <= 1)


def test_ssr_static_frames():
    rng = np.random.default_rng(9)
    image = rng.uniform(50, 200, (8, 8, 3))
    frames = FrameSequence(np.broadcast_to(image, (60, 8, 8, 3)), FS)
    bvp = ssr(frames)
    assert np.sqrt(np.mean(bvp.samples**2)) < 1e-6 * 255


def test_ssr_needs_frames():
    trace, _ = synth_trace()
    with pytest.raises(RequiresPixelData):
        ssr(trace)
    with pytest.raises(IncompatibleInput):
        run_method(MethodId.SSR, trace)


# LGI


def test_lgi_removes_dominant_illumination():
    pulse = sine(1.2)
    illumination = sine(1.9)
    v = orthogonal_to(BASE)
    samples = BASE * (1 + 0.1 * illumination[:, None]) + 2 * pulse[:, None] * v
    bvp = lgi(RgbTrace(samples, FS))
    reference = bandpass(pulse, FS)
    assert abs(corr(bvp.samples[CENTER], reference[CENTER])) > 0.95
    assert abs(corr(bvp.samples[CENTER], bandpass(illumination, FS)[CENTER])) < 0.1


def test_lgi_annihilates_single_direction():
    samples = BASE * (1 + 0.1 * sine(1.9)[:, None])
    residual = lgi_residual(RgbTrace(samples, FS))
    assert np.sqrt(np.mean(residual**2)) < 1e-9 * np.sqrt(np.mean(samples**2))


# dispatch


def test_run_method_dispatch():
    trace, _ = synth_trace()
    assert np.array_equal(run_method(MethodId.GREEN, trace).samples, green(trace).samples)
    assert run_method("pos", trace).method_tag == "POS"
    for method_id, spec in METHODS.items():
        if spec.needs_frames:
            continue
        cfg = MethodConfig(component_selection=ComponentSelection.MAX_SPECTRAL_PEAK)
        assert run_method(method_id, trace, cfg).method_tag == method_id.name


def test_run_method_reduces_frames():
    spec = SynthSpec(hr_bpm=72.0, sensor_noise_std=1.0, duration_s=12.0)
    frames, _, _ = generate_frames(spec, 8, 8)
    bvp = run_method(MethodId.POS, frames)
    assert len(bvp) == len(frames)
    assert np.all(np.abs(hr_values(bvp) - 72) <= 1)


def test_spectral_peak_fraction():
    rng = np.random.default_rng(10)
    tone = spectral_peak_fraction(sine(1.2), FS, (0.66, 3.0))
    noise = spectral_peak_fraction(rng.normal(size=600), FS, (0.66, 3.0))
    assert tone > 5 * noise
    assert spectral_peak_fraction(np.zeros(600), FS, (0.66, 3.0)) == 0.0


@pytest.mark.parametrize(
    "method, shortest_s",
    [(ica, 5.0), (pca, 2.0), (pbv, 2.0), (lgi, 2.0)],
)
def test_decomposition_methods_need_minimum_duration(method, shortest_s):
    rng = np.random.default_rng(5)

    def noisy_trace(seconds):
        n = int(round(seconds * FS))
        return RgbTrace(120 + rng.normal(0, 2, (n, 3)), FS)

    with pytest.raises(TraceTooShort):
        method(noisy_trace(1.0))
    with pytest.raises(TraceTooShort):
        method(noisy_trace(shortest_s - 0.5))
    assert len(method(noisy_trace(shortest_s))) == int(round(shortest_s * FS))
