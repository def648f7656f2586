"""Benchmark the compiled series kernel against the NumPy fallback.

The truncated series behind count-response selection probabilities is the
hot inner loop of a profile fit (every Newton step re-evaluates it for all
censored rows).  This script times both backends on that kernel directly
and on a full log-likelihood + score + Hessian evaluation, and verifies
they agree.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from selmod import families as F
from selmod import likelihood as L
from selmod import mechanisms as M
from selmod._kernels import FAM_CODES, G0_CODES, H_CODES, HAVE_COMPILED, pure
from selmod.modelspec import ModelSpec
from selmod.simulate import SimConfig, simulate

if HAVE_COMPILED:
    from selmod._kernels import _series as compiled
else:
    compiled = None


def timeit(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_series(n, kmean):
    rng = np.random.default_rng(0)
    mu = rng.uniform(0.5, 2.0, n) * kmean / 1.2
    tau = rng.normal(0.0, 0.5, n)
    K = np.maximum((mu + 10 * np.sqrt(mu) + 20).astype(np.int64), 1)
    args = (mu, tau, K, FAM_CODES["poisson"], 0.0,
            G0_CODES["stdnormal"], H_CODES["standardized"], -0.4)

    t_pure = timeit(lambda: pure.count_series_batch(*args))
    row = f"series kernel  n={n:>6}  K~{int(K.mean()):>3}   pure {t_pure * 1e3:8.2f} ms"
    if compiled is not None:
        out_c = compiled.count_series_batch(*args)
        out_p = pure.count_series_batch(*args)
        assert np.allclose(out_c, out_p, rtol=1e-10, atol=1e-13)
        t_comp = timeit(lambda: compiled.count_series_batch(*args))
        row += f"   compiled {t_comp * 1e3:8.2f} ms   speedup {t_pure / t_comp:5.1f}x"
    print(row)


def bench_likelihood(n):
    spec = ModelSpec(family="poisson", mechanism="gumbel-std")
    cfg = SimConfig(n=n, family=F.poisson(), mechanism=M.mechanism("gumbel-std"),
                    beta_true=[0.8, 0.4], gamma_true=[0.3, -0.5],
                    alpha_true=-0.5, seed=1)
    data = simulate(cfg)
    params = L.ParamVector(-0.5, np.array([0.8, 0.4]), np.array([0.3, -0.5]))

    import selmod._kernels as K

    saved = K.count_series_batch
    results = {}
    for name, mod in [("pure", pure)] + ([("compiled", compiled)] if compiled else []):
        import selmod.normalizer as norm

        norm.count_series_batch = mod.count_series_batch
        results[name] = L.evaluate(data, spec, params, order=2).loglik
        t = timeit(lambda: L.evaluate(data, spec, params, order=2))
        print(f"loglik+score+hessian  n={n:>6}   {name:8s} {t * 1e3:8.2f} ms")
        norm.count_series_batch = saved
    if len(results) == 2:
        assert abs(results["pure"] - results["compiled"]) < 1e-9


if __name__ == "__main__":
    print(f"compiled extension available: {HAVE_COMPILED}")
    for n, kmean in [(1_000, 10), (10_000, 10), (10_000, 60)]:
        bench_series(n, kmean)
    for n in (2_000, 20_000):
        bench_likelihood(n)
