"""Price ATM swaptions from coupon-bond cumulants and compare with simulation.

Run: ``python demos/03_swaptions.py``
"""

import numpy as np

from wishart_libor import McConfig, SwaptionSpec, atm_swaption_surface, fit_term_structure, forward_swap_rate, mc_price
from wishart_libor.swaptions import _MomentEngine, swaption_breakdown
from wishart_libor.verify import benchmark_curve, benchmark_wishart

model = benchmark_wishart()
curve = benchmark_curve()
family = fit_term_structure(model, curve)

# A 1y x 2y receiver: exercise at T_3, coupons at T_4..T_9.
rate = forward_swap_rate(curve, 3, 9)
spec = SwaptionSpec(3, 9, rate)

# The coupon bond's moments are exact (computed at 50 digits); its cumulants
# shrink by orders of magnitude, so a short Edgeworth series is enough.
engine = _MomentEngine(model, family, spec)
print("cumulants of CB(T_3) under P_T3:", np.array2string(np.array(engine.cumulants(7, 3).cumulants), precision=3))
for order in (3, 5, 7):
    print(f"order {order}: {swaption_breakdown(model, family, spec, order, engine=engine).price:.10e}")

est = mc_price(spec, model, family, McConfig(n_paths=100_000, dt=1 / 24))
price = swaption_breakdown(model, family, spec, engine=engine).price
print(f"Monte Carlo: {est.mean:.6e} +/- {est.std_error:.1e}  (z = {est.z_score(price):+.2f})")

# ATM Black vols for expiries 1, 3, 6 and swap lengths of 1 and 3 periods.
grid = atm_swaption_surface(model, family, [1, 3, 6], [1, 3])
print("ATM swaption vols (rows: expiry index, columns: periods):")
print(np.round(grid.implied_vols, 5))
