"""Compiled vs numpy kernels on Tiny-scale BP workloads.

    python3 benchmarks/bench_kernels.py [--frames N] [--repeats R]

Prints ms per call for each kernel and backend and the speedup of the
compiled core over the fallback. Exits non-zero if the two disagree.
"""

import argparse
import sys
import timeit

import numpy as np

from uradec import kernels
from uradec.amp import AmpConfig, detect_frame
from uradec.bp import BpConfig, slot_beliefs, sic_decode
from uradec.presets import build_code, dataset_dictionaries
from uradec.sim import FrameConfig, frame_rng, generate_frame


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=50)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)
    if kernels.compiled is None:
        print("compiled kernels not built; nothing to compare")
        return 1
    fc = FrameConfig()
    H, gen = build_code(64, 12, 8, seed=0)
    dicts = dataset_dictionaries(64, 12, 24, 0)
    amp = AmpConfig().resolved(fc)
    Ss = [detect_frame(generate_frame(fc, H, gen, frame_rng(0, i), dictionaries=dicts), amp)
          for i in range(args.frames)]
    g = H.tanner
    rng = np.random.default_rng(0)
    v2c = rng.random((g.n_edges, 64))
    v2c /= v2c.sum(1, keepdims=True)
    lam = slot_beliefs(Ss[0])

    cases = {
        "check_phase direct": lambda k: k.check_phase(v2c, g.check_ptr, g.perm, g.invperm, False),
        "check_phase wht": lambda k: k.check_phase(v2c, g.check_ptr, g.perm, g.invperm, True),
        "var_phase": lambda k: k.var_phase(lam, v2c, g.var_ptr, g.var_edges, 1e-30),
    }
    print(f"{'kernel':28s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    ok = True
    for name, fn in cases.items():
        t = {}
        for label, k in (("python", kernels.python), ("cython", kernels.compiled)):
            n = 20
            t[label] = min(timeit.repeat(lambda: fn(k), number=n, repeat=args.repeats)) / n * 1e3
        a, b = fn(kernels.python), fn(kernels.compiled)
        a, b = (a, b) if isinstance(a, tuple) else ((a,), (b,))
        ok &= all(np.allclose(x, y, atol=1e-12) for x, y in zip(a, b))
        print(f"{name:28s} {t['python']:10.4f} {t['cython']:10.4f} {t['python'] / t['cython']:8.1f}x")

    for backend in ("direct", "wht"):
        t = {}
        grids = {}
        for label in ("python", "cython"):
            cfg = BpConfig(backend=backend, kernels=label)
            grids[label] = [sic_decode(S, H, 2, cfg) for S in Ss]
            t[label] = min(timeit.repeat(lambda: [sic_decode(S, H, 2, cfg) for S in Ss],
                                         number=1, repeat=args.repeats)) / len(Ss) * 1e3
        ok &= all(np.array_equal(x, y) for x, y in zip(grids["python"], grids["cython"]))
        name = f"SIC-BP decode ({backend})"
        print(f"{name:28s} {t['python']:10.4f} {t['cython']:10.4f} {t['python'] / t['cython']:8.1f}x")
    print("outputs agree" if ok else "OUTPUT MISMATCH between backends")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
