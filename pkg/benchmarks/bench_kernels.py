"""Time every hot kernel on both backends at the sizes the experiments use.

    python benchmarks/bench_kernels.py [--repeat 200]
"""

import argparse
import timeit

import numpy as np

from ltrstack import kernels


def cases(rng):
    ws = [rng.normal(size=(10, 32)), rng.normal(size=(32, 32)), rng.normal(size=(32, 1))]
    bs = [rng.normal(size=w.shape[1]) for w in ws]
    x20, x60 = rng.normal(size=(20, 10)), rng.normal(size=(60, 10))
    s60 = rng.normal(size=60)
    p60 = rng.normal(size=(60, 16))
    d60 = rng.normal(size=(60, 60))
    a = np.triu(rng.normal(size=(60, 60)), 1)
    g60 = a - a.T
    u, feats = rng.normal(size=20), rng.uniform(size=(20, 8))
    params = [w.copy() for w in ws] + [b.copy() for b in bs]
    grads = [rng.normal(size=p.shape) for p in params]
    ms = [np.zeros_like(p) for p in params]
    vs = [np.zeros_like(p) for p in params]

    def fwd(k, x):
        return lambda: k.mlp_forward(ws, bs, x, False)

    def bwd(k):
        acts = k.mlp_forward(ws, bs, x20, False)
        up = np.ones((20, 1))
        return lambda: k.mlp_backward(ws, acts, up, False)

    def sm(k):
        w = k.masked_softmax(d60)
        return lambda: k.masked_softmax_backward(w, d60)

    return {
        "mlp_forward N=20": lambda k: fwd(k, x20),
        "mlp_forward N=60": lambda k: fwd(k, x60),
        "mlp_backward N=20": bwd,
        "superiority N=60": lambda k: (lambda: k.superiority(s60, p60)),
        "masked_softmax N=60": lambda k: (lambda: k.masked_softmax(d60)),
        "masked_softmax_backward N=60": sm,
        "gbt_scores N=60": lambda k: (lambda: k.gbt_scores(g60)),
        "context_discount N=20": lambda k: (lambda: k.context_discount(u, feats, 10.0, 0.3)),
        "adam_update 1.4k params": lambda k: (lambda: k.adam_update(params, grads, ms, vs, 1e-3, 0.9, 0.999,
                                                                    0.5, 0.5, 1e-8)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    backends = kernels.available_backends()
    names = sorted(backends)
    print(f"{'kernel':32s}" + "".join(f"{n + ' us':>14s}" for n in names) + ("      speedup" if len(names) > 1 else ""))
    for label, make in cases(np.random.default_rng(0)).items():
        row = []
        for n in names:
            fn = make(backends[n])
            fn()
            best = min(timeit.repeat(fn, number=args.repeat, repeat=5)) / args.repeat
            row.append(best * 1e6)
        line = f"{label:32s}" + "".join(f"{t:14.2f}" for t in row)
        if len(row) > 1:
            line += f"{row[names.index('python')] / row[names.index('cython')]:12.2f}x"
        print(line)


if __name__ == "__main__":
    main()
