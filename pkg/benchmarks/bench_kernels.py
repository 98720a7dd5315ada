"""Compare the compiled kernels with the pure-Python fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat N]``

Prints per-call timings of each kernel under both backends, then the time
of one full key-rate evaluation run in a subprocess with each backend
forced through ``DECOYFK_PURE_PYTHON``.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from decoyfk import _fallback

try:
    from decoyfk import _kernels as _compiled
except ImportError:
    _compiled = None

END_TO_END = """
import timeit
from decoyfk.channel_model import ChannelParams, expected_tallies
from decoyfk.decoy_estimator import PulseEnsemble
from decoyfk.key_rate import key_rate
ens = PulseEnsemble(0.37, 0.126, 0.65, 0.25, 1e10)
t = expected_tallies(ens, ChannelParams(distance=100))
n = 200
print(timeit.timeit(lambda: key_rate(t, ens, 1e-10), number=n) / n)
"""


def _cases(rng, size):
    chis = 10.0 ** rng.uniform(-3, 12, size)
    thetas = [(e, nx, nz) for e, nx, nz in zip(rng.uniform(0.01, 0.2, size), 10.0 ** rng.uniform(2, 9, size),
                                                10.0 ** rng.uniform(2, 9, size))]
    deltas = rng.uniform(-0.9, 5.0, size)
    return chis, thetas, deltas


def _per_call(func, args, repeat):
    def loop():
        for a in args:
            func(*a)
    return min(timeit.repeat(loop, number=1, repeat=repeat)) / len(args)


def kernel_timings(module, repeat, size=2000, seed=1):
    chis, thetas, deltas = _cases(np.random.default_rng(seed), size)
    beta = 23.719
    log2_eps = np.log2(1e-10)
    return {
        "invert_exact": _per_call(module.invert_exact, [(float(c), beta) for c in chis], repeat),
        "sampling_theta": _per_call(module.sampling_theta, [(e, nx, nz, log2_eps) for e, nx, nz in thetas],
                                    repeat),
        "g2": _per_call(module.g2, [(float(d),) for d in deltas], repeat),
    }


def end_to_end(pure: bool) -> float:
    env = dict(os.environ)
    if pure:
        env["DECOYFK_PURE_PYTHON"] = "1"
    else:
        env.pop("DECOYFK_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = [("python", _fallback)] + ([("compiled", _compiled)] if _compiled else [])
    results = {name: kernel_timings(mod, args.repeat) for name, mod in backends}
    print(f"{'kernel':<16}" + "".join(f"{name + ' (us)':>16}" for name, _ in backends) + f"{'speedup':>10}")
    for kernel in results["python"]:
        cells = [results[name][kernel] * 1e6 for name, _ in backends]
        speed = f"{cells[0] / cells[1]:>9.1f}x" if len(cells) > 1 else ""
        print(f"{kernel:<16}" + "".join(f"{c:>16.2f}" for c in cells) + speed)
    pure = end_to_end(True) * 1e6
    line = f"{'key_rate':<16}{pure:>16.1f}"
    if _compiled:
        fast = end_to_end(False) * 1e6
        line += f"{fast:>16.1f}{pure / fast:>9.1f}x"
    print(line)


if __name__ == "__main__":
    main()
