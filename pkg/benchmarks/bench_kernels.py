"""Compare the numba kernels against their numpy twins.

Times each hot kernel on representative shapes, then one training epoch with
each backend swapped in. JIT compilation is warmed up before timing.

    python benchmarks/bench_kernels.py [--repeats 20] [--json out.json]
"""

import argparse
import json
import statistics
import time

import numpy as np

from rulegrad import kernels
from rulegrad.data import SyntheticSpec, generate_synthetic
from rulegrad.losses import LossWeights
from rulegrad.train import TrainConfig, Trainer

NAMES = ("lse3", "log_softmax_rows", "softplus", "adam_update")


def timed(fn, repeats):
    fn()  # warm-up, includes JIT compile for numba
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return statistics.median(out)


def kernel_cases(rng):
    a = rng.normal(size=(128, 25))
    b = rng.normal(size=(128, 25))
    logits = rng.normal(scale=10, size=(256, 20))
    p = rng.normal(size=(32, 1024))
    g = rng.normal(size=p.shape)
    m, v = np.zeros_like(p), np.zeros_like(p)
    return {
        "lse3 128x25": lambda impl: impl.lse3(a, b),
        "log_softmax_rows 256x20": lambda impl: impl.log_softmax_rows(logits),
        "softplus 128x25": lambda impl: impl.softplus(a),
        "adam_update 32x1024": lambda impl: impl.adam_update(p, g, m, v, 1e-3, .9, .999, 1e-8,
                                                              1e-5, 1),
    }


def epoch_case(impl, repeats):
    for name in NAMES:
        setattr(kernels, name, getattr(impl, name))
    ds = generate_synthetic(SyntheticSpec())
    cfg = TrainConfig(weights=LossWeights(lambda_hyp=0.1, lambda_attr=0.1, lambda_q=1.0,
                                          lambda_trans=1.0), transductive=True)
    tr = Trainer(ds, cfg)
    return timed(tr.run_epoch, repeats)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args()
    if kernels.numba_impl is None:
        print("numba is not installed; only the numpy path is timed")
    impls = {"numpy": kernels.numpy_impl}
    if kernels.numba_impl is not None:
        impls["numba"] = kernels.numba_impl
    saved = {n: getattr(kernels, n) for n in NAMES}
    rng = np.random.default_rng(0)
    rows = []
    try:
        for label, fn in kernel_cases(rng).items():
            t = {k: timed(lambda: fn(impl), args.repeats) for k, impl in impls.items()}
            rows.append({"case": label, **t})
        t = {k: epoch_case(impl, max(1, args.repeats // 10)) for k, impl in impls.items()}
        rows.append({"case": "train epoch (transductive, all rules)", **t})
    finally:
        for n, f in saved.items():
            setattr(kernels, n, f)
    print(f"{'case':40s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for r in rows:
        nb = r.get("numba")
        sp = f"{r['numpy'] / nb:8.2f}" if nb else f"{'-':>8s}"
        nbs = f"{1e3 * nb:10.3f}" if nb else f"{'-':>10s}"
        print(f"{r['case']:40s} {1e3 * r['numpy']:10.3f} {nbs} {sp}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
