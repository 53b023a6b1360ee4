"""Laplace transform of the pure-jump matrix OU model against compound-Poisson simulation.

Run: ``python demos/05_jump_model.py``
"""

import numpy as np

from wishart_libor import McConfig, laplace, simulate_jump_ou
from wishart_libor.oracle import mc_laplace
from wishart_libor.verify import benchmark_jump_ou

model = benchmark_jump_ou()
print("jump intensity:", model.lam, " jump law degrees of freedom:", model.jump_law.n)

cfg = McConfig(n_paths=100_000)
for t, scale in [(0.5, 0.05), (1.0, 0.05), (1.0, 0.2), (2.0, 0.1)]:
    u = scale * np.eye(2)
    est = mc_laplace(model, t, [u], cfg)[0]
    value = laplace(model, t, u)
    print(f"t={t:3.1f} u={scale:4.2f} I: transform {value:.6f}  Monte Carlo {est.mean:.6f}"
          f" +/- {est.std_error:.1e}  (z = {est.z_score(value):+.2f})")

paths = simulate_jump_ou(model, 10.0, McConfig(n_paths=20_000), times=[10.0])
print("mean jump count over 10y: %.4f (intensity x horizon = %.1f)" % (paths.jump_counts.mean(), model.lam * 10))
