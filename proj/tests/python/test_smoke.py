import math

import numpy as np
import pytest

import hrmix


def test_chi_matches_exponent():
    for g in (0.1, 1.0, 4.0, 25.0):
        assert hrmix.chi_hr(g) == 2.0 - hrmix.bivariate_V(1.0, 1.0, g)
    assert hrmix.chi_hr(4.0) == pytest.approx(math.erfc(1.0 / math.sqrt(2.0)), rel=1e-14)
    assert hrmix.gamma_from_chi(hrmix.chi_hr(2.5)) == pytest.approx(2.5, rel=1e-10)


def test_intensity_is_homogeneous():
    g = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.5, 0.0]])
    x = [0.7, 1.3, 2.2]
    base = hrmix.hr_intensity(x, g)
    assert hrmix.hr_intensity([2 * v for v in x], g) == pytest.approx(2.0**-4 * base, rel=1e-12)
    assert hrmix.hr_intensity(x, g, k=2) == pytest.approx(base, rel=1e-12)


def test_matrix_tree_theorem_on_triangle():
    w = np.array([[0.0, 2.0, 3.0], [2.0, 0.0, 5.0], [3.0, 5.0, 0.0]])
    assert hrmix.laplacian_minor_det(w) == pytest.approx(31.0, rel=1e-12)
    trees, prior = hrmix.tree_prior_probs(3, [(0, 1), (0, 2), (1, 2)], [2.0, 3.0, 5.0])
    assert len(trees) == 3
    assert sum(prior) == pytest.approx(1.0)
    assert max(prior) == pytest.approx(15.0 / 31.0)


def test_lattice_and_sampler():
    lon = [140.0, 140.5, 140.0, 140.5]
    lat = [-38.0, -38.0, -37.5, -37.5]
    edges, tags = hrmix.build_lattice(lon, lat, diagonals=True)
    assert len(edges) == 6
    assert sorted(set(tags)) == ["D1", "D2", "H", "V"]
    assert hrmix.spanning_tree_count(4, edges) == 16

    x = hrmix.sample_mpd_tree(2, [(0, 1)], [4.0], 20000, seed=3)
    assert x.shape == (20000, 2)
    assert np.all(x.max(axis=1) > 1.0)
    a, b = x[:, 0] > 1, x[:, 1] > 1
    chi = 0.5 * ((a & b).sum() / a.sum() + (a & b).sum() / b.sum())
    assert abs(chi - hrmix.chi_hr(4.0)) < 0.03


def test_edge_gamma_recovery():
    x = 20.0 * hrmix.sample_mpd_tree(2, [(0, 1)], [2.0], 5000, seed=11)
    fit = hrmix.fit_edge_gamma(x[:, 0], x[:, 1], 20.0)
    assert 1.7 <= fit["gamma"] <= 2.3
    assert fit["exceedances"] == 5000


def test_margins_round_trip():
    rng = np.random.default_rng(4)
    sample = list(rng.uniform(0, 30, size=2000))
    m = hrmix.MarginalModel(25.0, hrmix.GpdParams(2.0, 0.1), sample)
    for z in (26.0, 40.0, 90.0):
        assert m.from_unit_pareto(m.to_unit_pareto(z)) == pytest.approx(z, rel=1e-12)
    fit = hrmix.fit_gpd(25.0 + rng.exponential(2.0, size=4000), 25.0)
    assert fit["sigma"] == pytest.approx(2.0, rel=0.08)
    assert abs(fit["xi"]) < 0.06


def test_errors_raise():
    with pytest.raises(hrmix.HrmixError):
        hrmix.censored_pair_loglik(30.0, 40.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        hrmix.fit_edge_gamma([30.0] * 3, [30.0] * 3, 20.0)


def test_report_end_to_end(tmp_path):
    csv = hrmix.simulate_csv(nx=3, ny=2, seasons=11, seed=5)
    assert csv.startswith("site_id,lon,lat,date,value\n")
    out = tmp_path / "report"
    cfg = "clusters = 2\nensemble_size = 20\nrisk_samples = 500\n"
    res = hrmix.run_report(csv, str(out), cfg)
    assert res["clusters"] == 2
    assert res["windows"] == 2
    assert len(res["risks"]) == 4
    assert all(r["risk"] > 0 for r in res["risks"])
    assert (out / "manifest.json").exists()
    assert "risk.csv" in res["files"]
    first = (out / "risk.csv").read_bytes()
    hrmix.run_report(csv, str(out), cfg)
    assert (out / "risk.csv").read_bytes() == first
