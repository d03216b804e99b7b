"""Times the compiled kernels against their interpreted twins.

Both variants live in csasr.kernels regardless of the active backend, so
one process can measure the pair on identical inputs.  When the package was
imported with CSASR_PURE_NUMPY set, the compiled column degenerates to a
second interpreted run; the footer says which backend was active.

    python3 benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import time

import numpy as np

from csasr import kernels


def ctc_inputs(rng, frames, num_units, num_labels):
    logits = rng.normal(size=(frames, num_units + 1))
    logp = logits - np.logaddexp.reduce(logits, axis=1, keepdims=True)
    z = rng.integers(1, num_units + 1, size=num_labels)
    aug = np.zeros(2 * num_labels + 1, dtype=np.int64)
    aug[1::2] = z
    return logp, aug


def timed(func, args, repeat):
    # one untimed call first: compilation for the jitted side, cache
    # warming for the interpreted one
    func(*args)
    t0 = time.perf_counter()
    for _ in range(repeat):
        func(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--frames", type=int, default=120)
    ap.add_argument("--units", type=int, default=40)
    ap.add_argument("--labels", type=int, default=30)
    ap.add_argument("--seq-len", type=int, default=400,
                    help="word count per side of the alignment case")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    logp, aug = ctc_inputs(rng, args.frames, args.units, args.labels)
    ref = rng.integers(0, 50, size=args.seq_len).astype(np.int64)
    hyp = rng.integers(0, 50, size=args.seq_len).astype(np.int64)

    cases = [
        ("ctc_forward_backward", kernels.ctc_forward_backward,
         kernels._ctc_forward_backward, (logp, aug)),
        ("levenshtein_counts", kernels.levenshtein_counts,
         kernels._levenshtein_counts, (ref, hyp)),
    ]

    print(f"{'kernel':<24} {'compiled':>12} {'interpreted':>12} {'speedup':>9}")
    for name, fast, slow, inputs in cases:
        ll_f = fast(*inputs)
        ll_s = slow(*inputs)
        if name == "ctc_forward_backward":
            assert abs(ll_f[0] - ll_s[0]) < 1e-10, "backends disagree"
        else:
            assert ll_f == ll_s, "backends disagree"
        t_fast = timed(fast, inputs, args.repeat)
        t_slow = timed(slow, inputs, args.repeat)
        print(f"{name:<24} {t_fast * 1e3:>9.3f} ms {t_slow * 1e3:>9.3f} ms "
              f"{t_slow / t_fast:>8.1f}x")
    print(f"active backend: {kernels.BACKEND} "
          f"(CSASR_PURE_NUMPY=1 forces the interpreted path)")


if __name__ == "__main__":
    main()
