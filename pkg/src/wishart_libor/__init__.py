"""Pricing engine for the Wishart (matrix-affine) Libor market model."""

from .affine import (
    JumpOUParams,
    NonCentralWishartJumps,
    WishartJumps,
    WishartParams,
    jump_psi_phi,
    laplace,
    log_laplace,
    wishart_psi_phi,
)
from .analytics import (
    SurfaceGrid,
    atm_swaption_surface,
    atm_term_structure,
    black76,
    black_implied_vol,
    build_caplet_surface,
    correlated_q,
    skew_correlation,
)
from .caps import CapletSpec, CapSpec, FloorletSpec, FourierConfig, caplet_cf, price_cap, price_caplet, price_caplets, price_floorlet
from .errors import *  # noqa: F401,F403
from .libor import (
    MartingaleFamily,
    TenorCurve,
    fit_term_structure,
    forward_coeffs,
    libor_rate,
    martingale_value,
    radon_nikodym,
)
from .oracle import McConfig, McEstimate, mc_price, simulate_jump_ou, simulate_wishart
from .swaptions import (
    CumulantSet,
    SwaptionSpec,
    coupon_bond_moment,
    edgeworth_tail,
    forward_swap_rate,
    moments_to_cumulants,
    price_swaption,
)

__version__ = "0.1.0"
