"""Root finding, stability classification, and basin mapping."""

import numpy as np
import pytest

import perflow as pf
from perflow.equilibria import INCONCLUSIVE, PERFORMATIVELY_STABLE, PRM_MINIMIZER, UNSTABLE


def v(x):
    return np.array([float(x)])


def locations(reports):
    return sorted(float(r.location[0]) for r in reports)


@pytest.fixture(scope="module")
def rgd_roots(bump_model):
    return pf.find_equilibria(bump_model, "rgd", grid_n=2001)


@pytest.fixture(scope="module")
def prm_roots(bump_model):
    return pf.find_equilibria(bump_model, "prm", grid_n=2001)


def planar_model(slope=0.3):
    # two-dimensional: R(x1, x2) = |x1 - slope * x2|^2 / 2
    def risk(x1, x2):
        d = x1 - slope * x2
        return 0.5 * float(d @ d)

    return pf.CallableModel(
        dimension=2,
        domain=pf.Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0])),
        risk=risk,
        grad1=lambda x1, x2: x1 - slope * x2,
        grad2=lambda x1, x2: -slope * (x1 - slope * x2),
    )


class TestFindEquilibria:
    def test_rgd_roots_of_builtin(self, rgd_roots):
        locs = locations(rgd_roots)
        assert len(locs) == 3
        assert locs[0] == pytest.approx(0.0, abs=1e-6)
        assert locs[1] == pytest.approx(0.23, abs=0.005)
        assert locs[2] == pytest.approx(1.0, abs=1e-6)

    def test_prm_roots_of_builtin(self, prm_roots):
        locs = locations(prm_roots)
        assert len(locs) == 3
        assert locs[0] == pytest.approx(0.0, abs=1e-6)
        assert locs[1] == pytest.approx(0.40, abs=0.005)
        assert locs[2] == pytest.approx(1.0, abs=1e-6)

    def test_contracting_model_has_single_root(self, half_model):
        reports = pf.find_equilibria(half_model, "rgd", grid_n=501)
        assert locations(reports) == [pytest.approx(0.5, abs=1e-10)]
        assert PERFORMATIVELY_STABLE in reports[0].labels

    def test_residuals_within_refine_tol(self, bump_model):
        tol = 1e-10
        for kind in ("rgd", "prm"):
            for r in pf.find_equilibria(bump_model, kind, grid_n=2001, refine_tol=tol):
                assert r.residual <= tol

    def test_empty_result_when_no_roots(self):
        m = pf.CallableModel(
            dimension=1,
            domain=pf.interval(0.0, 1.0),
            risk=lambda x1, x2: float(x1[0]),
            grad1=lambda x1, x2: np.array([1.0]),
            grad2=lambda x1, x2: np.array([0.0]),
        )
        assert pf.find_equilibria(m, "rgd", grid_n=101) == []

    def test_grid_too_small_rejected(self, bump_model):
        with pytest.raises(ValueError):
            pf.find_equilibria(bump_model, "rgd", grid_n=2)

    def test_newton_locates_origin_in_two_dimensions(self):
        reports = pf.find_equilibria(planar_model(), "rgd", grid_n=81, refine_tol=1e-12)
        assert len(reports) == 1
        assert np.linalg.norm(reports[0].location) < 1e-10
        assert {PRM_MINIMIZER, PERFORMATIVELY_STABLE} <= reports[0].labels


class TestClassification:
    @pytest.mark.parametrize("x", [0.0, 1.0])
    def test_minimizers_get_both_stable_labels(self, bump_model, x):
        report = pf.classify_equilibrium(bump_model, v(x), tol=1e-8)
        assert report.labels == {PRM_MINIMIZER, PERFORMATIVELY_STABLE}
        assert report.pr_hessian_eigenvalues.min() > 0
        assert report.stability_hessian_eigenvalues.min() > 0
        assert report.rgd_jacobian_eigenvalues.min() > 0

    def test_rgd_crossing_is_unstable(self, rgd_roots):
        middle = [r for r in rgd_roots if 0.1 < r.location[0] < 0.4][0]
        assert middle.labels == {UNSTABLE}
        # repelling: the composed-field Jacobian has a negative direction
        assert middle.rgd_jacobian_eigenvalues.min() < 0
        # yet the frozen-shift decision Hessian is positive: stability in the
        # static sense does not survive the induced drift
        assert middle.stability_hessian_eigenvalues.min() > 0

    def test_prm_crossing_is_unstable(self, prm_roots):
        middle = [r for r in prm_roots if 0.2 < r.location[0] < 0.6][0]
        assert UNSTABLE in middle.labels
        assert middle.pr_hessian_eigenvalues.min() < 0

    def test_crossing_repels_simulated_trajectories(self, bump_model, rgd_roots):
        root = [r for r in rgd_roots if 0.1 < r.location[0] < 0.4][0].location[0]
        below = pf.integrate_flow(bump_model, "rgd", v(root - 0.01), 60.0).final_state[0]
        above = pf.integrate_flow(bump_model, "rgd", v(root + 0.01), 60.0).final_state[0]
        assert abs(below) < 1e-6
        assert abs(above - 1.0) < 1e-6

    def test_not_an_equilibrium(self, bump_model):
        with pytest.raises(pf.NotAnEquilibriumError):
            pf.classify_equilibrium(bump_model, v(0.1), tol=1e-8)

    def test_degenerate_point_is_inconclusive(self):
        # risk x^4/4: gradient x^3, curvature vanishes at the minimizer
        m = pf.CallableModel(
            dimension=1,
            domain=pf.interval(-1.0, 1.0),
            risk=lambda x1, x2: 0.25 * float(x1[0] ** 4),
            grad1=lambda x1, x2: np.array([x1[0] ** 3]),
            grad2=lambda x1, x2: np.array([0.0]),
        )
        report = pf.classify_equilibrium(m, v(0.0), tol=1e-8)
        assert INCONCLUSIVE in report.labels

    def test_report_serialization(self, rgd_roots):
        d = rgd_roots[0].to_dict()
        assert d["labels"] == sorted(rgd_roots[0].labels)
        assert isinstance(d["location"][0], float)


class TestBasinScan:
    def test_rgd_boundary_matches_unstable_root(self, bump_model, rgd_roots):
        root = [r for r in rgd_roots if UNSTABLE in r.labels][0].location[0]
        basin = pf.basin_scan(bump_model, "rgd", rgd_roots, grid_n=401, t_end=60.0)
        cell = 2.0 / 400
        transitions = pf.basin_boundaries(basin)
        zero_to_one = [b for b in transitions if b["left_label"] != b["right_label"]]
        assert any(abs(b["boundary"] - root) <= cell for b in zero_to_one)

    def test_prm_boundary_matches_unstable_root(self, bump_model, prm_roots):
        root = [r for r in prm_roots if UNSTABLE in r.labels][0].location[0]
        basin = pf.basin_scan(bump_model, "prm", prm_roots, grid_n=401, t_end=80.0)
        cell = 2.0 / 400
        assert any(abs(b["boundary"] - root) <= cell for b in pf.basin_boundaries(basin))

    def test_contracting_model_has_single_basin(self, half_model):
        reports = pf.find_equilibria(half_model, "rgd", grid_n=301)
        basin = pf.basin_scan(half_model, "rgd", reports, grid_n=301, t_end=30.0)
        assert np.all(basin.labels == 0)

    def test_labels_reference_known_equilibria(self, bump_model, rgd_roots):
        basin = pf.basin_scan(bump_model, "rgd", rgd_roots, grid_n=201, t_end=60.0)
        assert set(np.unique(basin.labels)) <= set(range(len(rgd_roots))) | {-1}

    def test_labels_stable_under_doubled_horizon(self, bump_model, rgd_roots):
        a = pf.basin_scan(bump_model, "rgd", rgd_roots, grid_n=401, t_end=60.0)
        b = pf.basin_scan(bump_model, "rgd", rgd_roots, grid_n=401, t_end=120.0)
        assert np.array_equal(a.labels, b.labels)

    def test_refining_grid_moves_boundary_less_than_coarse_cell(self, bump_model, rgd_roots):
        coarse = pf.basin_scan(bump_model, "rgd", rgd_roots, grid_n=101, t_end=60.0)
        fine = pf.basin_scan(bump_model, "rgd", rgd_roots, grid_n=1001, t_end=60.0)
        b_coarse = pf.basin_boundaries(coarse)[0]["boundary"]
        b_fine = pf.basin_boundaries(fine)[0]["boundary"]
        assert abs(b_coarse - b_fine) <= 2.0 / 100

    def test_unmatched_points_marked_divergent(self):
        m = pf.CallableModel(
            dimension=1,
            domain=pf.interval(-1.0, 1.0),
            risk=lambda x1, x2: -0.5 * float(x1[0] ** 2),
            grad1=lambda x1, x2: np.array([-x1[0]]),
            grad2=lambda x1, x2: np.array([0.0]),
        )
        basin = pf.basin_scan(m, "rgd", [], grid_n=21, t_end=20.0)
        assert np.all(basin.labels == -1)

    def test_two_dimensional_scan(self):
        m = planar_model()
        reports = pf.find_equilibria(m, "rgd", grid_n=49)
        basin = pf.basin_scan(m, "rgd", reports, grid_n=64, t_end=30.0, h=0.05)
        assert basin.grid.shape == (64, 2)
        assert np.all(basin.labels == 0)

    def test_boundaries_requires_one_dimension(self):
        m = planar_model()
        reports = pf.find_equilibria(m, "rgd", grid_n=25)
        basin = pf.basin_scan(m, "rgd", reports, grid_n=16, t_end=10.0, h=0.05)
        with pytest.raises(ValueError):
            pf.basin_boundaries(basin)
