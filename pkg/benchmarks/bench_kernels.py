"""Time the compiled and numpy kernel backends on realistic batch sizes.

    python3 benchmarks/bench_kernels.py [--repeat 50]

Each kernel is checked for identical output across backends before timing.
"""

import argparse
import timeit

import numpy as np

from coevolab import kernels
from coevolab.domains.catalog import generate_synthetic_users, load_catalog
from coevolab.domains.wellbeing import UserContext, init_host_batch


def cases(rng):
    n, S, l = 250, 5, 100
    own, other = rng.integers(0, 101, n).astype(float), rng.integers(0, 101, n).astype(float)
    opponents = rng.integers(0, n, size=(n, S))
    bits = (rng.random((n, l)) < 0.5).astype(np.uint8)
    mask_u, value_u = rng.random((n, l)), rng.random((n, l))

    catalog = load_catalog()
    ctx = UserContext(generate_synthetic_users(2, 0, catalog)[0], catalog)
    plans = init_host_batch(catalog, 500, rng)
    phi_args = (plans.food_ids, plans.grams, plans.ex_ids, plans.minutes, catalog.food_pg, catalog.food_cat,
                ctx.food_like, ctx.ex_like, ctx.targets, float(ctx.user.session_minutes), catalog.n_categories)
    return {
        "competition_psi (n=250, S=5)": (kernels.competition_psi, (own, other, opponents, True)),
        "biased_mutate (250 x 100 bits)": (kernels.biased_mutate, (bits, mask_u, value_u, 0.005, 0.5)),
        "phi_components (500 plans)": (kernels.phi_components, phi_args),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    backends = kernels.available_backends()
    table = cases(np.random.default_rng(0))
    print(f"{'kernel':34s}" + "".join(f"{b:>14s}" for b in backends) + "   speed-up")
    for label, (fn, fargs) in table.items():
        outs, times = {}, {}
        for b in backends:
            kernels.set_backend(b)
            outs[b] = fn(*fargs)
            times[b] = min(timeit.repeat(lambda: fn(*fargs), number=args.repeat, repeat=3)) / args.repeat
        ref = outs[backends[0]]
        assert all(np.array_equal(ref, o) for o in outs.values()), f"backends disagree on {label}"
        ratio = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:34s}" + "".join(f"{times[b] * 1e6:12.1f}us" for b in backends) + f"   {ratio:7.1f}x")
    kernels.set_backend("cython" if "cython" in backends else "python")


if __name__ == "__main__":
    main()
