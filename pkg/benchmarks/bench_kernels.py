"""Compare the numba kernels with the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]

Both implementations are imported from ``wrnn.kernels`` directly, so the
WRNN_DISABLE_NUMBA flag does not matter here.  Each case is run once to warm
up (JIT compile / BLAS init), then timed ``--repeat`` times; the best time is
reported.
"""

import argparse
import time

import numpy as np

from wrnn import kernels
from wrnn.lstm import LstmParams


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(quick):
    rng = np.random.Generator(np.random.PCG64(0))
    out = []

    for n in ((64, 128) if quick else (64, 128, 256)):
        A, B = rng.normal(size=(n, n)), rng.normal(size=(n, n))
        out.append((f"matmul {n}x{n}", lambda A=A, B=B: kernels.matmul_nb(A, B),
                    lambda A=A, B=B: kernels.matmul_np(A, B)))

    # one minibatch of the small preset (SL 150, dim 50, hidden 64)
    B, T, D, H = (32, 50, 50, 64) if quick else (128, 150, 50, 64)
    p = LstmParams.init(H, D, rng)
    W, b = p.stacked()
    WT = np.ascontiguousarray(W.T)
    X = rng.normal(size=(B, T, D))
    h0 = np.zeros((B, H))
    s0 = np.zeros((B, H))
    fw = kernels.lstm_forward_np(X, WT, b, h0, s0, False, False)
    dH = rng.normal(size=fw[0].shape)
    out.append((f"lstm forward B={B} T={T}",
                lambda: kernels.lstm_forward_nb(X, WT, b, h0, s0, False, False),
                lambda: kernels.lstm_forward_np(X, WT, b, h0, s0, False, False)))
    out.append((f"lstm backward B={B} T={T}",
                lambda: kernels.lstm_backward_nb(dH, h0, X, W, h0, s0, *fw, False, False),
                lambda: kernels.lstm_backward_np(dH, h0, X, W, h0, s0, *fw, False, False)))

    V, dim, n = 5000, 50, (20_000 if quick else 100_000)
    W_in = rng.uniform(-0.01, 0.01, size=(V, dim))
    centers = rng.integers(2, V, size=n)
    contexts = rng.integers(2, V, size=n)
    negs = rng.integers(2, V, size=(n, 5))

    def sgns(fn):
        return lambda: fn(W_in.copy(), np.zeros((V, dim)), centers, contexts, negs, 0.025, 0, float(n))

    out.append((f"skip-gram {n} pairs x 5 neg", sgns(kernels.sgns_chunk_nb), sgns(kernels.sgns_chunk_np)))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args(argv)
    print(f"{'case':<34} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for name, nb, npf in cases(args.quick):
        t_nb = best_time(nb, args.repeat)
        t_np = best_time(npf, args.repeat)
        print(f"{name:<34} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
