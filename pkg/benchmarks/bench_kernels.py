"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both implementations are imported directly, so the env flag does not matter
here.  The first numba call (compilation) is excluded from the timings.
"""

import argparse
import math
import timeit

import numpy as np

from emoshift import kernels
from emoshift._accel import BACKEND, HAVE_NUMBA


def _cases(rng):
    sr = 16000
    n = sr * 8
    out = np.zeros(n)
    env = kernels.adsr_envelope_numpy(sr, 80, 1600, 0.7, 1600)
    omegas = 2 * math.pi * 220.0 * np.arange(1, 9) / sr
    amps = 1.0 / np.arange(1, 9)
    signal = rng.normal(size=n)
    return {
        "adsr_envelope": lambda impl: impl(sr, 80, 1600, 0.7, 1600),
        "add_partials": lambda impl: impl(out, 1000, env, omegas, amps),
        "zero_crossing_rate": lambda impl: impl(signal, 2048, 512),
        "linear_resample": lambda impl: impl(signal, int(n * 22050 / sr), sr / 22050),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=50)
    args = parser.parse_args(argv)
    print(f"default backend: {BACKEND}")
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, call in _cases(rng).items():
        np_fn = getattr(kernels, f"{name}_numpy")
        t_np = min(timeit.repeat(lambda: call(np_fn), number=1, repeat=args.repeat)) * 1e3
        if HAVE_NUMBA:
            nb_fn = getattr(kernels, f"{name}_numba")
            call(nb_fn)  # compile
            t_nb = min(timeit.repeat(lambda: call(nb_fn), number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<20} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<20} {t_np:>10.3f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
