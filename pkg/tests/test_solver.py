import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonconvex_mest.loss import CorrectedLinearLoss, GlassoLoss, build_corrected_gamma
from nonconvex_mest.penalty import make_penalty, penalty_total, side_function
from nonconvex_mest.simulate import gen_sparse_precision, make_linear_problem, oracle_radius
from nonconvex_mest.solver import (
    SolverConfig,
    SolverState,
    check_stationarity,
    composite_step,
    contraction_estimate,
    objective,
    project_g_ball,
    project_l1_ball,
    rsc_probe,
    run,
)


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def l1_projection_oracle(v, R):
    """Bisection on the threshold: independent of the sort-based routine."""
    v = np.asarray(v, dtype=float)
    if np.abs(v).sum() <= R:
        return v
    lo, hi = 0.0, np.abs(v).max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.abs(soft_threshold(v, mid)).sum() > R:
            lo = mid
        else:
            hi = mid
    return soft_threshold(v, hi)


def lasso_enumeration(G, g, lam):
    """Exact minimizer of 1/2 b'Gb - g'b + lam ||b||_1 (G positive definite) by support and sign enumeration."""
    p = g.size
    for size in range(p + 1):
        for S in itertools.combinations(range(p), size):
            S = list(S)
            for signs in itertools.product((-1.0, 1.0), repeat=size):
                b = np.zeros(p)
                if S:
                    s = np.array(signs)
                    b[S] = np.linalg.solve(G[np.ix_(S, S)], g[S] - lam * s)
                    if np.any(np.sign(b[S]) != s):
                        continue
                r = G @ b - g
                off = [j for j in range(p) if j not in S]
                if np.all(np.abs(r[off]) <= lam + 1e-12):
                    return b
    raise AssertionError("no KKT point found")


def corrected_problem(seed=0, n=60, p=20):
    prob = make_linear_problem(n, p, seed=seed)
    return build_corrected_gamma(prob.Z, prob.y, 0.04), prob


class TestCompositeStep:
    def test_huge_lambda_gives_zero(self):
        loss, prob = corrected_problem()
        pen = make_penalty("scad", 1e6)
        sp = run(loss, pen, SolverConfig(R=10.0, eta=2.0, init="random", init_radius=1.0, seed=3))
        assert np.all(sp.beta == 0) and sp.converged

    def test_ista_step_oracle(self):
        rng = np.random.default_rng(1)
        gamma = rng.normal(size=8)
        loss = CorrectedLinearLoss(np.eye(8), gamma)
        pen = make_penalty("l1", 0.3)
        cfg = SolverConfig(R=100.0, eta=1.0)
        st_ = composite_step(SolverState(np.zeros(8), 0, 0.0, 1.0), loss, pen, cfg)
        assert np.allclose(st_.beta, soft_threshold(gamma, 0.3), atol=1e-12)

    @pytest.mark.parametrize("kind", ["l1", "scad", "mcp"])
    def test_infeasible_prox_lands_on_boundary(self, kind):
        rng = np.random.default_rng(2)
        gamma = 5 * rng.normal(size=10)
        loss = CorrectedLinearLoss(np.eye(10), gamma)
        pen = make_penalty(kind, 0.1)
        cfg = SolverConfig(R=0.5, eta=1.0)
        st_ = composite_step(SolverState(np.zeros(10), 0, 0.0, 1.0), loss, pen, cfg)
        assert side_function(pen, st_.beta) == pytest.approx(0.5, abs=1e-6)


class TestProjection:
    def test_identity_inside(self):
        pen = make_penalty("scad", 0.5)
        v = np.array([0.1, -0.2])
        assert np.array_equal(project_g_ball(v, pen, 10.0), v)

    @pytest.mark.parametrize("seed", range(10))
    def test_l1_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(0, 3, size=25)
        R = rng.uniform(0.5, 10)
        pen = make_penalty("l1", 0.7)
        oracle = l1_projection_oracle(v, R)
        assert np.allclose(project_g_ball(v, pen, R), oracle, atol=1e-8)
        assert np.allclose(project_l1_ball(v, R), oracle, atol=1e-8)

    @pytest.mark.parametrize("kind", ["scad", "mcp"])
    def test_symmetry(self, kind):
        x = project_g_ball(np.array([10.0, 10.0]), make_penalty(kind, 0.5), 1.0)
        assert x[0] == pytest.approx(x[1], abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000), kind=st.sampled_from(["l1", "scad", "mcp"]))
    def test_projection_feasible_and_closest_on_ray(self, seed, kind):
        rng = np.random.default_rng(seed)
        pen = make_penalty(kind, rng.uniform(0.1, 1.0))
        v = rng.normal(0, 4, size=12)
        R = rng.uniform(0.2, 3.0)
        x = project_g_ball(v, pen, R)
        assert side_function(pen, x) <= R + 1e-9
        # random feasible points are never closer to v
        for _ in range(20):
            y = x + rng.normal(0, 0.05, size=12)
            if side_function(pen, y) <= R:
                assert np.linalg.norm(y - v) >= np.linalg.norm(x - v) - 1e-9


class TestRun:
    def test_lasso_matches_reference(self):
        rng = np.random.default_rng(4)
        n, p = 500, 10
        X = rng.normal(size=(n, p))
        beta = np.zeros(p)
        beta[:3] = [1.0, -0.5, 0.3]
        loss = build_corrected_gamma(X, X @ beta + 0.1 * rng.normal(size=n), 0.0)
        pen = make_penalty("l1", 0.05)
        cfg = SolverConfig(R=50.0, max_iters=500, tol_stat=1e-8)
        sp = run(loss, pen, cfg)
        ref = run(loss, pen, SolverConfig(R=50.0, max_iters=5000, tol_stat=1e-13, tol_obj=0.0))
        assert sp.converged and sp.residual < 1e-8
        assert abs(sp.objective - ref.objective) <= 1e-6

    def test_lasso_matches_enumeration(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(50, 3))
        loss = build_corrected_gamma(X, X @ np.array([1.0, 0.0, -0.2]) + 0.3 * rng.normal(size=50), 0.0)
        pen = make_penalty("l1", 0.15)
        exact = lasso_enumeration(loss.gamma_hat, loss.gamma_vec, 0.15)
        sp = run(loss, pen, SolverConfig(R=50.0, max_iters=5000, tol_stat=1e-12, tol_obj=0.0))
        assert np.allclose(sp.beta, exact, atol=1e-9)

    def test_eta_below_mu_rejected(self):
        loss, _ = corrected_problem()
        with pytest.raises(ValueError):
            run(loss, make_penalty("mcp", 0.1, b=2.0), SolverConfig(R=1.0, eta=0.1))

    def test_deterministic_replay(self):
        loss, prob = corrected_problem(seed=5)
        pen = make_penalty("scad", 0.2)
        cfg = SolverConfig(R=oracle_radius(pen, prob.beta_star), init="random", seed=11)
        a, b = (run(loss, pen, cfg, beta_star=prob.beta_star, beta_ref=prob.beta_star) for _ in range(2))
        assert np.array_equal(a.beta, b.beta) and a.trace == b.trace

    def test_max_iters_not_converged(self):
        loss, prob = corrected_problem(seed=6)
        pen = make_penalty("l1", 0.05)
        sp = run(loss, pen, SolverConfig(R=10.0, max_iters=1, init="random", seed=1, tol_stat=1e-12))
        assert not sp.converged and sp.stop_reason == "max_iters" and sp.residual >= 0

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), kind=st.sampled_from(["l1", "scad", "mcp"]))
    def test_monotone_and_feasible(self, seed, kind):
        loss, prob = corrected_problem(seed=seed, n=40, p=30)
        pen = make_penalty(kind, 0.15)
        R = oracle_radius(pen, prob.beta_star)
        sp = run(loss, pen, SolverConfig(R=R, eta=max(1.0, pen.mu), init="random", seed=seed, max_iters=300),
                 record_iterates=True)
        objs = [row.objective for row in sp.trace]
        assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))
        assert all(side_function(pen, b) <= R + 1e-9 for b in sp.iterates)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), kind=st.sampled_from(["l1", "scad", "mcp"]))
    def test_prox_step_optimality(self, seed, kind):
        rng = np.random.default_rng(seed)
        loss, prob = corrected_problem(seed=seed, n=40, p=15)
        pen = make_penalty(kind, 0.2)
        R = oracle_radius(pen, prob.beta_star)
        cfg = SolverConfig(R=R, eta=2.0)
        beta = rng.normal(0, 0.1, size=15)
        if side_function(pen, beta) > R:
            beta = project_g_ball(beta, pen, R)
        nxt = composite_step(SolverState(beta, 0, 0.0, cfg.eta), loss, pen, cfg)
        eta, mu = nxt.eta, pen.mu
        v = beta - (loss.gradient(beta) - mu * beta) / eta

        def model(b):
            return 0.5 * np.sum((b - v) ** 2) + (penalty_total(pen, b) + 0.5 * mu * b @ b) / eta

        base = model(nxt.beta)
        checked = 0
        while checked < 100:
            y = nxt.beta + rng.normal(0, 0.02, size=15)
            if side_function(pen, y) <= R:
                assert model(y) >= base - 1e-10
                checked += 1


class TestStationarity:
    def test_kkt_point(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(3, 3))
        G = A @ A.T + np.eye(3)
        g = rng.normal(size=3) * 2
        exact = lasso_enumeration(G, g, 0.5)
        loss = CorrectedLinearLoss(G, g)
        res = check_stationarity(exact, loss, make_penalty("l1", 0.5), SolverConfig(R=100.0))
        assert res < 1e-8

    def test_zero_stationary(self):
        g = np.array([0.1, -0.2, 0.05])
        loss = CorrectedLinearLoss(np.eye(3), g)
        for kind in ("l1", "scad", "mcp"):
            assert check_stationarity(np.zeros(3), loss, make_penalty(kind, 0.3), SolverConfig(R=5.0)) == 0.0

    def test_perturbed_not_stationary(self):
        rng = np.random.default_rng(6)
        A = rng.normal(size=(3, 3))
        G = A @ A.T + np.eye(3)
        g = rng.normal(size=3) * 2
        exact = lasso_enumeration(G, g, 0.5)
        cfg = SolverConfig(R=100.0)
        res = check_stationarity(exact + rng.normal(0, 0.1, 3), CorrectedLinearLoss(G, g),
                                 make_penalty("l1", 0.5), cfg)
        assert res > cfg.tol_stat

    def test_boundary_fixed_point(self):
        loss = CorrectedLinearLoss(np.eye(4), np.array([5.0, 4.0, 0.0, 0.0]))
        pen = make_penalty("l1", 0.1)
        cfg = SolverConfig(R=1.0, max_iters=2000, tol_stat=1e-10)
        sp = run(loss, pen, cfg)
        assert side_function(pen, sp.beta) == pytest.approx(1.0, abs=1e-6)
        assert sp.residual < 1e-8
        assert np.allclose(sp.beta, l1_projection_oracle(loss.gamma_vec, 1.0), atol=1e-6)


class TestGlasso:
    def test_iterates_stay_in_omega(self):
        sample = gen_sparse_precision(8, 8, seed=2, n=100)
        loss = GlassoLoss(sample.sigma_hat)
        pen = make_penalty("l1", 0.1)
        cfg = SolverConfig(R=100.0, max_iters=200, psd_floor=1e-3, init="random", seed=4)
        sp = run(loss, pen, cfg, record_iterates=True)
        for T in sp.iterates:
            assert np.abs(T - T.T).max() <= 1e-12
            assert np.linalg.eigvalsh(T)[0] >= 1e-3 * (1 - 1e-9)
        assert sp.converged

    def test_no_penalty_limit_is_inverse(self):
        sample = gen_sparse_precision(5, 0, seed=3, n=2000)
        loss = GlassoLoss(sample.sigma_hat)
        sp = run(loss, make_penalty("l1", 1e-10), SolverConfig(R=1e12, max_iters=5000, tol_stat=1e-9))
        assert np.allclose(sp.beta, np.linalg.inv(sample.sigma_hat), atol=1e-5)


class TestDiagnostics:
    def test_noise_free_kappa(self):
        est = contraction_estimate(alpha=1.0, mu=0.5, eta=2.0, tau=0.0, k=5, n=100, p=50)
        assert est.varphi == 0.0
        assert est.kappa == pytest.approx(1 - 1.5 / 16)

    def test_hand_formula(self):
        a, m, e, t, k, n, p = 1.0, 0.4, 3.0, 0.5, 4, 400, 100
        phi = t * k * math.log(p) / n / (2 * a - m)
        kappa = (1 - (2 * a - m) / (8 * e) + phi) / (1 - phi)
        est = contraction_estimate(a, m, e, t, k, n, p, delta=1e-3, gap=1.0, lam=0.1, R=5.0)
        assert est.kappa == pytest.approx(kappa) and est.varphi == pytest.approx(phi)
        inv = math.log(1 / kappa)
        tail = (1 + math.log(2) / inv) * math.log(math.log(0.1 * 5.0 / 1e-6))
        assert est.t_star == math.ceil(2 * math.log(1.0 / 1e-6) / inv + tail)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            contraction_estimate(alpha=0.25, mu=0.5, eta=1.0, tau=0.0, k=1, n=10, p=10)

    def test_rsc_identity(self):
        loss = CorrectedLinearLoss(np.eye(20), np.zeros(20), n=100)
        fit = rsc_probe(loss, np.zeros(20), k=4)
        assert fit.ok and fit.alpha1 >= 1 - 1e-6 and fit.tau1 == pytest.approx(0.0, abs=1e-12)

    def test_rsc_clean_eigenvalue(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(2000, 10))
        loss = build_corrected_gamma(X, rng.normal(size=2000), 0.0)
        fit = rsc_probe(loss, np.zeros(10), k=10)
        lam_min = np.linalg.eigvalsh(X.T @ X / 2000)[0]
        assert fit.alpha1 == pytest.approx(lam_min, rel=0.1)

    def test_rsc_indefinite(self):
        loss, prob = corrected_problem(seed=1, n=40, p=100)
        assert np.linalg.eigvalsh(loss.gamma_hat)[0] < 0
        fit = rsc_probe(loss, prob.beta_star)
        assert fit.n_negative > 0 and fit.ok and fit.tau1 > 0
