"""Clip-level audio descriptors used by the emotion classifier."""

from __future__ import annotations

import numpy as np

from . import kernels
from .midi import key_correlations

FRAME = 1024
HOP = 512
ROLLOFF = 0.85
LOW_BAND_HZ = 500.0
HIGH_BAND_HZ = 2000.0
CHROMA_MIN_HZ = 32.0
CHROMA_MAX_HZ = 5000.0
TEMPO_RANGE_BPM = (40.0, 240.0)

FEATURE_NAMES = (
    "rms_mean", "rms_std",
    "centroid_mean", "centroid_std",
    "rolloff_mean", "rolloff_std",
    "zcr_mean", "zcr_std",
    "flux_mean", "flux_std",
    "low_band_share",
    "tempo_bpm",
    *(f"chroma_{n}" for n in ("C", "Cs", "D", "Ds", "E", "F", "Fs", "G", "Gs", "A", "As", "B")),
    "mode_margin",
)
N_FEATURES = len(FEATURE_NAMES)
CHROMA_SLICE = slice(12, 24)


def _hann(n):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_signal(x, frame=FRAME, hop=HOP):
    n_frames = 1 + (x.size - frame) // hop
    idx = np.arange(frame)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def _safe_ratio(num, den):
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


_k = np.arange(-4, 5)
_TEMPO_SMOOTHING = np.exp(-0.5 * _k ** 2) / np.exp(-0.5 * _k ** 2).sum()


def estimate_tempo(onset_env, frame_rate, bpm_range=TEMPO_RANGE_BPM):
    """Tempo in BPM from the autocorrelation of an onset-strength envelope.

    The envelope is first smoothed with a one-frame Gaussian so beat periods
    that fall between integer lags still correlate.  The autocorrelation is
    weighted by a log-normal preference centred on 120 BPM (one octave wide)
    to damp double/half tempo picks.  Returns 0 when the envelope carries no
    periodic structure.
    """
    env = np.convolve(onset_env, _TEMPO_SMOOTHING, mode="same")
    env = env - env.mean()
    if env.size < 3 or not np.any(env):
        return 0.0
    ac = np.correlate(env, env, mode="full")[env.size - 1:]
    lo = max(1, int(np.floor(60.0 * frame_rate / bpm_range[1])))
    hi = min(env.size - 2, int(np.ceil(60.0 * frame_rate / bpm_range[0])))
    if hi <= lo:
        return 0.0
    lags = np.arange(lo, hi + 1)
    bpm = 60.0 * frame_rate / lags
    score = ac[lags] * np.exp(-0.5 * np.log2(bpm / 120.0) ** 2)
    i = int(np.argmax(score))
    if score[i] <= 0:
        return 0.0
    lag = float(lags[i])
    if 0 < i < lags.size - 1:
        a, b, c = score[i - 1], score[i], score[i + 1]
        denom = a - 2 * b + c
        if denom < 0:
            lag += 0.5 * (a - c) / denom
    return 60.0 * frame_rate / lag


def chroma_from_power(power, freqs):
    """Fold a power spectrum (frames x bins) onto 12 pitch classes, sum to 1."""
    band = (freqs >= CHROMA_MIN_HZ) & (freqs <= CHROMA_MAX_HZ)
    pcs = np.round(12.0 * np.log2(freqs[band] / 440.0) + 69.0).astype(int) % 12
    chroma = np.bincount(pcs, weights=power[:, band].sum(axis=0), minlength=12)
    total = chroma.sum()
    return chroma / total if total > 0 else np.full(12, 1.0 / 12.0)


def mode_margin(chroma):
    """Best major-key correlation minus best minor-key correlation."""
    corr = key_correlations(chroma)
    return float(corr[0].max() - corr[1].max())


def extract_features(clip):
    """Return the 25-entry descriptor vector for ``clip`` (see FEATURE_NAMES).

    Frames are 1024 samples with hop 512 under a periodic Hann window.
    Frames with no energy give 0 for centroid and rolloff; a silent clip
    yields a uniform chroma and zero tempo.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    if x.size < FRAME:
        raise ValueError(f"clip too short: {x.size} samples, need at least {FRAME}")
    sr = clip.sample_rate_hz
    frames = frame_signal(x)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    mag = np.abs(np.fft.rfft(frames * _hann(FRAME), axis=1))
    power = mag ** 2
    freqs = np.fft.rfftfreq(FRAME, 1.0 / sr)

    mag_sum = mag.sum(axis=1)
    centroid = _safe_ratio(mag @ freqs, mag_sum)
    cum = np.cumsum(mag, axis=1)
    rolloff_bin = np.argmax(cum >= ROLLOFF * mag_sum[:, None], axis=1)
    rolloff = np.where(mag_sum > 0, freqs[rolloff_bin], 0.0)
    zcr = kernels.zero_crossing_rate(x, FRAME, HOP)

    rise = np.maximum(np.diff(mag, axis=0), 0.0)
    flux = np.concatenate([[0.0], np.sqrt((rise ** 2).sum(axis=1))])
    onset_env = np.concatenate([[0.0], rise.sum(axis=1)])
    tempo = estimate_tempo(onset_env, sr / HOP)

    band_power = power.sum(axis=0)
    low = band_power[freqs < LOW_BAND_HZ].sum()
    high = band_power[freqs > HIGH_BAND_HZ].sum()
    low_share = low / (low + high) if low + high > 0 else 0.5

    chroma = chroma_from_power(power, freqs)
    return np.array([
        rms.mean(), rms.std(),
        centroid.mean(), centroid.std(),
        rolloff.mean(), rolloff.std(),
        zcr.mean(), zcr.std(),
        flux.mean(), flux.std(),
        low_share,
        tempo,
        *chroma,
        mode_margin(chroma),
    ])
