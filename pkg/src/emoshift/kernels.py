"""Hot inner loops: oscillator bank, ADSR envelope, framewise zero crossings,
linear resampling.

Every kernel exists twice, as a numba-compiled loop (``*_numba``) and as a
vectorised numpy routine (``*_numpy``).  The unsuffixed names are bound to
whichever backend :mod:`emoshift._accel` selected at import time.  The two
paths agree to floating point round-off, not bit for bit, so determinism is
guaranteed per backend.
"""

import math

import numpy as np

from ._accel import BACKEND, njit


# --- ADSR envelope ---------------------------------------------------------

@njit
def adsr_envelope_numba(n_on, attack_n, decay_n, sustain, release_n):
    out = np.empty(n_on + release_n, dtype=np.float64)
    level = 0.0
    for i in range(n_on):
        if i < attack_n:
            level = (i + 1.0) / attack_n
        elif i < attack_n + decay_n:
            level = 1.0 - (1.0 - sustain) * (i - attack_n + 1.0) / decay_n
        else:
            level = sustain
        out[i] = level
    for j in range(release_n):
        out[n_on + j] = level * (1.0 - (j + 1.0) / release_n)
    return out


def adsr_envelope_numpy(n_on, attack_n, decay_n, sustain, release_n):
    i = np.arange(n_on, dtype=np.float64)
    env = np.full(n_on, float(sustain))
    if attack_n > 0:
        mask = i < attack_n
        env[mask] = (i[mask] + 1.0) / attack_n
    if decay_n > 0:
        mask = (i >= attack_n) & (i < attack_n + decay_n)
        env[mask] = 1.0 - (1.0 - sustain) * (i[mask] - attack_n + 1.0) / decay_n
    level = env[-1] if n_on > 0 else 0.0
    j = np.arange(release_n, dtype=np.float64)
    tail = level * (1.0 - (j + 1.0) / release_n) if release_n > 0 else j
    return np.concatenate([env, tail])


# --- oscillator bank -------------------------------------------------------

@njit
def add_partials_numba(out, start, envelope, omegas, amps):
    """out[start + i] += envelope[i] * sum_k amps[k] * sin(omegas[k] * i)."""
    n = envelope.shape[0]
    n_partials = omegas.shape[0]
    for i in range(n):
        acc = 0.0
        for k in range(n_partials):
            acc += amps[k] * math.sin(omegas[k] * i)
        out[start + i] += envelope[i] * acc


def add_partials_numpy(out, start, envelope, omegas, amps):
    n = envelope.shape[0]
    if n == 0 or omegas.shape[0] == 0:
        return
    phase = np.outer(omegas, np.arange(n, dtype=np.float64))
    out[start:start + n] += envelope * (amps @ np.sin(phase))


# --- framewise zero crossings ---------------------------------------------

@njit
def zero_crossing_rate_numba(x, frame, hop):
    n_frames = 1 + (x.shape[0] - frame) // hop
    out = np.empty(n_frames, dtype=np.float64)
    for f in range(n_frames):
        base = f * hop
        count = 0
        for i in range(base + 1, base + frame):
            if (x[i - 1] >= 0.0) != (x[i] >= 0.0):
                count += 1
        out[f] = count / (frame - 1.0)
    return out


def zero_crossing_rate_numpy(x, frame, hop):
    n_frames = 1 + (x.shape[0] - frame) // hop
    idx = np.arange(frame)[None, :] + hop * np.arange(n_frames)[:, None]
    signs = x[idx] >= 0.0
    return np.count_nonzero(signs[:, 1:] != signs[:, :-1], axis=1) / (frame - 1.0)


# --- linear resampling -----------------------------------------------------

@njit
def linear_resample_numba(x, n_out, step):
    out = np.empty(n_out, dtype=np.float64)
    last = x.shape[0] - 1
    for i in range(n_out):
        pos = i * step
        j = int(pos)
        if j >= last:
            out[i] = x[last]
        else:
            frac = pos - j
            out[i] = x[j] + (x[j + 1] - x[j]) * frac
    return out


def linear_resample_numpy(x, n_out, step):
    pos = np.arange(n_out, dtype=np.float64) * step
    return np.interp(pos, np.arange(x.shape[0], dtype=np.float64), x)


if BACKEND == "numba":
    adsr_envelope = adsr_envelope_numba
    add_partials = add_partials_numba
    zero_crossing_rate = zero_crossing_rate_numba
    linear_resample = linear_resample_numba
else:
    adsr_envelope = adsr_envelope_numpy
    add_partials = add_partials_numpy
    zero_crossing_rate = zero_crossing_rate_numpy
    linear_resample = linear_resample_numpy
