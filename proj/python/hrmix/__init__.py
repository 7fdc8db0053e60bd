"""Tree-mixture Husler-Reiss models for spatial threshold exceedances."""

from ._hrmix import (
    GpdParams,
    HrmixError,
    MarginalModel,
    bivariate_V,
    bivariate_intensity,
    build_lattice,
    censored_pair_loglik,
    chi_hr,
    chi_tree,
    fit_edge_gamma,
    fit_gpd,
    gamma_from_chi,
    hr_intensity,
    laplacian_minor_det,
    run_report,
    sample_mpd_tree,
    simulate_csv,
    spanning_tree_count,
    tree_prior_probs,
)

__version__ = "0.1.0"


def empirical_chi(x, y, q=0.95):
    """Tail dependence estimate of two equal-length samples at quantile q."""
    import numpy as np

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = ~(np.isnan(x) | np.isnan(y))
    x, y = x[ok], y[ok]
    ex = x > np.quantile(x, q)
    ey = y > np.quantile(y, q)
    joint = np.count_nonzero(ex & ey)
    return 0.5 * (joint / ex.sum() + joint / ey.sum())
