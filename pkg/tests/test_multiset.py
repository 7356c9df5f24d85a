import numpy as np
import pytest

from occakit import (
    AltConfig,
    ContractViolation,
    IsolatedViewError,
    OmccaConfig,
    RankDeficiencyError,
    ScfConfig,
    build_two_view,
    build_weights,
    center,
    compute_Ds,
    dist_tr,
    g_objective,
    occa_alternate,
    orthonormalize,
    rcomcca,
    reduce_views,
    total_correlation,
)
from occakit.weighting import WeightMatrix


def three_views(q=40, sizes=(8, 6, 7), seed=0, shared=3, noise=0.05):
    """Correlated random views driven by a common latent block."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((shared, q))
    views = []
    for n_i in sizes:
        P = rng.standard_normal((n_i, shared))
        views.append(center(P @ Z + noise * rng.standard_normal((n_i, q))))
    return views


def identity_hats(reduced, k):
    return [np.eye(rv.r)[:, :k].copy() for rv in reduced]


class TestReduceViews:
    def test_full_row_rank_exact_reconstruction(self):
        rng = np.random.default_rng(1)
        S = center(rng.standard_normal((4, 30)))
        (rv,) = reduce_views([S])
        assert rv.r == 4
        assert np.max(np.abs(rv.U @ np.diag(rv.sigma) @ rv.V.T - S)) <= 1e-10

    def test_duplicated_row_drops_rank(self):
        rng = np.random.default_rng(2)
        S = rng.standard_normal((3, 30))
        S = center(np.vstack([S, S[0]]))
        (rv,) = reduce_views([S])
        assert rv.r == 3

    def test_centering_removes_one_dimension(self):
        rng = np.random.default_rng(3)
        S = center(rng.standard_normal((100, 10)))
        (rv,) = reduce_views([S])
        assert rv.r <= 9
        # independent rank oracle
        assert rv.r == np.linalg.matrix_rank(S)

    def test_zero_view_rejected(self):
        from occakit import DegenerateViewError

        with pytest.raises(DegenerateViewError):
            reduce_views([np.zeros((3, 10))])

    def test_factors_orthonormal_and_ordered(self):
        rng = np.random.default_rng(4)
        S = center(rng.standard_normal((6, 25)))
        (rv,) = reduce_views([S])
        assert np.max(np.abs(rv.U.T @ rv.U - np.eye(rv.r))) <= 1e-10
        assert np.max(np.abs(rv.V.T @ rv.V - np.eye(rv.r))) <= 1e-10
        assert np.all(np.diff(rv.sigma) <= 0)
        assert np.all(rv.sigma > 0)

    def test_truncation_stays_within_tolerance(self):
        rng = np.random.default_rng(5)
        U = orthonormalize(rng.standard_normal((6, 3)))
        V = orthonormalize(rng.standard_normal((20, 3)))
        S = U @ np.diag([3.0, 1.0, 1e-20]) @ V.T
        (rv,) = reduce_views([S])
        assert rv.r == 2
        err = np.max(np.abs(rv.U @ np.diag(rv.sigma) @ rv.V.T - S))
        tol = max(S.shape) * np.finfo(float).eps
        assert err <= tol * 3.0


class TestComputeDs:
    def test_two_view_single_term(self):
        views = three_views(sizes=(5, 4), seed=5)[:2]
        reduced = reduce_views(views)
        w = build_weights(views, "uniform")
        hats = identity_hats(reduced, 2)
        D0 = compute_Ds(0, hats, w, reduced)
        rv0, rv1 = reduced
        SX = rv1.sigma[:, None] * hats[1]
        expected = (
            w.rho[0, 1]
            * (rv0.sigma[:, None] * (rv0.V.T @ (rv1.V @ SX)))
            / np.sqrt(np.sum(SX * SX))
        )
        assert np.allclose(D0, expected, atol=1e-12)

    def test_matches_term_by_term_oracle(self):
        views = three_views(seed=6)
        reduced = reduce_views(views)
        w = build_weights(views, "uniform")
        rng = np.random.default_rng(7)
        hats = [orthonormalize(rng.standard_normal((rv.r, 2))) for rv in reduced]
        for s in range(3):
            rv = reduced[s]
            acc = np.zeros((views[0].shape[1], 2))
            for j in range(3):
                if j == s:
                    continue
                rj = reduced[j]
                SX = rj.sigma[:, None] * hats[j]
                acc += w.rho[s, j] * (rj.V @ SX) / np.sqrt(np.sum(SX * SX))
            expected = rv.sigma[:, None] * (rv.V.T @ acc)
            assert np.allclose(compute_Ds(s, hats, w, reduced), expected, atol=1e-12)

    def test_tree_path_term_counts(self):
        # a path graph 0-1-2: middle view pulls from two neighbors, the
        # ends from one each
        views = three_views(seed=8)
        reduced = reduce_views(views)
        rho = np.zeros((3, 3))
        rho[0, 1] = rho[1, 0] = 0.5
        rho[1, 2] = rho[2, 1] = 0.5
        w = WeightMatrix.custom(rho)
        hats = identity_hats(reduced, 1)
        assert compute_Ds(1, hats, w, reduced).shape == (reduced[1].r, 1)
        # the end views must not see each other: D_0 built from view 1
        # alone equals D_0 built with view 2 replaced by garbage
        rng = np.random.default_rng(8)
        hats_garbage = list(hats)
        hats_garbage[2] = orthonormalize(rng.standard_normal((reduced[2].r, 1)))
        assert np.allclose(
            compute_Ds(0, hats, w, reduced),
            compute_Ds(0, hats_garbage, w, reduced),
            atol=0,
        )
        with pytest.raises(IsolatedViewError):
            rho_bad = np.zeros((3, 3))
            rho_bad[0, 1] = rho_bad[1, 0] = 1.0
            compute_Ds(2, hats, WeightMatrix.custom(rho_bad), reduced)

    def test_matches_term_by_term_oracle_sparse_weights(self):
        views = three_views(seed=22)
        reduced = reduce_views(views)
        w = build_weights(views, "tree")
        rng = np.random.default_rng(23)
        hats = [orthonormalize(rng.standard_normal((rv.r, 2))) for rv in reduced]
        for s in range(3):
            rv = reduced[s]
            acc = np.zeros((views[0].shape[1], 2))
            for j in range(3):
                if j == s or w.rho[s, j] == 0.0:
                    continue
                rj = reduced[j]
                SX = rj.sigma[:, None] * hats[j]
                acc += w.rho[s, j] * (rj.V @ SX) / np.sqrt(np.sum(SX * SX))
            expected = rv.sigma[:, None] * (rv.V.T @ acc)
            assert np.allclose(compute_Ds(s, hats, w, reduced), expected, atol=1e-12)


class TestGObjective:
    def test_identical_views_equal_hats(self):
        rng = np.random.default_rng(9)
        S = center(rng.standard_normal((5, 30)))
        views = [S, S.copy()]
        reduced = reduce_views(views)
        w = build_weights(views, "uniform")
        hats = identity_hats(reduced, 1)
        # single pair: per-pair correlation is 1, ordered sum doubles it
        assert g_objective(hats, w, reduced) == pytest.approx(2 * w.rho[0, 1], rel=1e-10)

    def test_zero_cross_covariance(self):
        S1 = center(np.array([[1.0, -1.0, 1.0, -1.0]]))
        S2 = center(np.array([[1.0, 1.0, -1.0, -1.0]]))
        reduced = reduce_views([S1, S2])
        rho = np.zeros((2, 2))
        rho[0, 1] = rho[1, 0] = 1.0
        w = WeightMatrix.custom(rho)
        hats = identity_hats(reduced, 1)
        assert g_objective(hats, w, reduced) == pytest.approx(0.0, abs=1e-12)

    def test_equals_total_correlation_through_correspondence(self):
        views = three_views(seed=10)
        reduced = reduce_views(views)
        w = build_weights(views, "tree")
        rng = np.random.default_rng(11)
        hats = [orthonormalize(rng.standard_normal((rv.r, 2))) for rv in reduced]
        g = g_objective(hats, w, reduced)
        projections = [rv.U @ hx for rv, hx in zip(reduced, hats)]
        f = total_correlation(projections, views, w)
        assert g == pytest.approx(f, rel=1e-10)


class TestRcomcca:
    def test_two_views_consistent_with_alternating_solver(self):
        views = three_views(sizes=(9, 7), seed=12, q=50)[:2]
        w = build_weights(views, "uniform")
        rep = rcomcca(
            views,
            2,
            w,
            cfg=OmccaConfig(
                eps_outer=1e-10,
                max_cycles=300,
                scheme="gauss_seidel",
                scf_cfg=ScfConfig(eps_scf=1e-8, max_iter=100),
            ),
        )
        # same optimization in explicitly reduced coordinates
        reduced = reduce_views(views)
        red_views = [np.diag(rv.sigma) @ rv.V.T for rv in reduced]
        prob = build_two_view(red_views[0], red_views[1])
        alt = occa_alternate(
            prob,
            2,
            alt_cfg=AltConfig(eps_alt=1e-12, max_outer=300),
            scf_cfg=ScfConfig(eps_scf=1e-8, max_iter=100),
        )
        assert dist_tr(reduced[0].U.T @ rep.projections[0], alt.X) <= 1e-4
        assert dist_tr(reduced[1].U.T @ rep.projections[1], alt.Y) <= 1e-4

    def test_gauss_seidel_monotone_g(self):
        views = three_views(seed=13)
        w = build_weights(views, "uniform")
        rep = rcomcca(views, 2, w, cfg=OmccaConfig(scheme="gauss_seidel"))
        tr = np.array(rep.g_trace)
        assert np.all(np.diff(tr) >= -1e-12 * np.abs(tr[1:]))

    def test_jacobi_close_to_gauss_seidel(self):
        views = three_views(seed=14)
        w = build_weights(views, "uniform")
        g_gs = rcomcca(views, 2, w, cfg=OmccaConfig(scheme="gauss_seidel")).g_trace[-1]
        g_j = rcomcca(views, 2, w, cfg=OmccaConfig(scheme="jacobi")).g_trace[-1]
        assert abs(g_gs - g_j) <= 0.05 * max(abs(g_gs), abs(g_j))

    def test_projections_feasible(self):
        views = three_views(seed=15)
        w = build_weights(views, "tree")
        rep = rcomcca(views, 2, w)
        reduced = reduce_views(views)
        for X, rv in zip(rep.projections, reduced):
            assert np.max(np.abs(X.T @ X - np.eye(2))) <= 1e-9
            # range constraint: X lives inside the span of its view
            assert np.max(np.abs(X - rv.U @ (rv.U.T @ X))) <= 1e-9

    def test_tree_weighting_term_count(self):
        views = three_views(seed=16)
        w = build_weights(views, "tree")
        rep = rcomcca(views, 2, w, cfg=OmccaConfig(scheme="gauss_seidel"))
        assert all(c == 2 * (len(views) - 1) for c in rep.ds_terms_per_cycle)
        rep_j = rcomcca(views, 2, w, cfg=OmccaConfig(scheme="jacobi"))
        assert all(c == 2 * (len(views) - 1) for c in rep_j.ds_terms_per_cycle)

    def test_jacobi_thread_count_invariance(self):
        views = three_views(seed=17)
        w = build_weights(views, "uniform")
        cfg = OmccaConfig(scheme="jacobi")
        a = rcomcca(views, 2, w, cfg=cfg, threads=1)
        b = rcomcca(views, 2, w, cfg=cfg, threads=4)
        for Xa, Xb in zip(a.projections, b.projections):
            assert np.array_equal(Xa, Xb)
        assert a.g_trace == b.g_trace

    def test_k_exceeding_reduced_rank_names_view(self):
        views = three_views(seed=18)
        # view 1 gets rank 2: two latent dimensions only
        rng = np.random.default_rng(18)
        q = views[0].shape[1]
        low = rng.standard_normal((6, 2)) @ rng.standard_normal((2, q))
        views[1] = center(low)
        w = build_weights(views, "uniform")
        with pytest.raises(RankDeficiencyError) as exc:
            rcomcca(views, 3, w)
        assert exc.value.view == 1

    def test_needs_two_views(self):
        views = three_views(seed=19)[:1]
        w = WeightMatrix.custom(np.array([[0.0, 1.0], [1.0, 0.0]]))
        with pytest.raises(ContractViolation):
            rcomcca(views, 1, w)

    def test_isolated_view_under_custom_sparse_weights(self):
        views = three_views(seed=20)
        rho = np.zeros((3, 3))
        rho[0, 1] = rho[1, 0] = 1.0  # view 2 isolated
        w = WeightMatrix.custom(rho)
        with pytest.raises(IsolatedViewError):
            rcomcca(views, 1, w)

    def test_five_views_tree_weighting(self):
        views = three_views(q=60, sizes=(8, 6, 7, 9, 5), seed=24)
        w = build_weights(views, "tree")
        rep = rcomcca(views, 2, w, cfg=OmccaConfig(scheme="gauss_seidel"))
        tr = np.array(rep.g_trace)
        assert np.all(np.diff(tr) >= -1e-12 * np.abs(tr[1:]))
        assert all(c == 2 * 4 for c in rep.ds_terms_per_cycle)
        for X in rep.projections:
            assert np.max(np.abs(X.T @ X - np.eye(2))) <= 1e-9

    def test_badly_scaled_views_still_solve(self):
        views = three_views(seed=25)
        views[1] = views[1] * 1e6
        w = build_weights(views, "uniform")
        rep = rcomcca(views, 2, w, cfg=OmccaConfig(scheme="gauss_seidel"))
        # the objective is scale-invariant per view, so huge scales must
        # not break feasibility or monotonicity
        tr = np.array(rep.g_trace)
        assert np.all(np.diff(tr) >= -1e-12 * np.abs(tr[1:]))
        assert rep.g_trace[-1] <= 2.0 + 1e-9


def test_total_correlation_identical_views():
    rng = np.random.default_rng(21)
    S = center(rng.standard_normal((5, 30)))
    X = orthonormalize(rng.standard_normal((5, 2)))
    rho = np.zeros((2, 2))
    rho[0, 1] = rho[1, 0] = 1.0
    w = WeightMatrix.custom(rho)
    assert total_correlation([X, X.copy()], [S, S.copy()], w) == pytest.approx(2.0, rel=1e-10)
