"""High-path Monte Carlo reference values frozen into the module tests.

Run: ``WISHART_LIBOR_THREADS=4 python tests/oracles/mc_reference.py``. Each line
prints ``name: (mean, std_error)`` at 2,000,000 paths with the default seed.
"""

import numpy as np

from wishart_libor import (
    CapletSpec,
    CapSpec,
    McConfig,
    SwaptionSpec,
    TenorCurve,
    fit_term_structure,
    forward_swap_rate,
    mc_price,
)
from wishart_libor.oracle import mc_laplace
from wishart_libor.verify import benchmark_jump_ou, benchmark_wishart

N_PATHS = 2_000_000


def main():
    model = benchmark_wishart()
    curve = TenorCurve.flat(1.0 / 3.0, 12, 0.05)
    fam = fit_term_structure(model, curve)
    cfg = McConfig(n_paths=N_PATHS, dt=1.0 / 24.0, chunk_size=50_000)
    out = {
        "atm_caplet_2y": mc_price(CapletSpec(6, curve.forward_libor(6)), model, fam, cfg),
        "cap_3y": mc_price(CapSpec(1, 8, forward_swap_rate(curve, 1, 9)), model, fam, cfg),
        "receiver_1y2y": mc_price(SwaptionSpec(3, 9, forward_swap_rate(curve, 3, 9)), model, fam, cfg),
        "payer_1y2y": mc_price(SwaptionSpec(3, 9, forward_swap_rate(curve, 3, 9), "payer"), model, fam, cfg),
    }
    out["laplace_wishart_t05"] = mc_laplace(model, 0.5, [0.2 * np.eye(2)], cfg)[0]
    out["laplace_wishart_t1"] = mc_laplace(model, 1.0, [0.1 * np.eye(2)], cfg)[0]
    out["laplace_jump_t1"] = mc_laplace(benchmark_jump_ou(), 1.0, [0.05 * np.eye(2)], cfg)[0]
    for name, est in out.items():
        print(f"    {name!r}: ({est.mean!r}, {est.std_error!r}),")


if __name__ == "__main__":
    main()
