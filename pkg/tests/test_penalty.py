import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from nonconvex_mest.penalty import (
    CappedMajorant,
    InvalidProxParameter,
    PenaltyDomainError,
    PenaltyError,
    PenaltyKind,
    ProxRequest,
    UnsupportedPenalty,
    capped_l1_majorant,
    make_penalty,
    penalty_derivative,
    penalty_total,
    penalty_value,
    prox_scalar,
    prox_vector,
    side_function,
    side_prox,
    subgradient_interval,
)

SCAD = make_penalty("scad", 1.0, a=3.7)
MCP = make_penalty("mcp", 1.0, b=3.5)
L1 = make_penalty("l1", 1.0)
CAP = make_penalty("capped", 1.0, c=2.0)
WEAK = [L1, SCAD, MCP]


def fine_grid_prox(spec, z, nu):
    """Literal oracle: grid of step 1e-4 over [-|z|-1, |z|+1], then golden-section in the best cell."""
    r = abs(z) + 1.0
    x = np.arange(-r, r + 1e-4, 1e-4)
    f = 0.5 * (x - z) ** 2 + nu * penalty_value(spec, x)
    j = int(np.argmin(f))
    lo, hi = x[max(j - 1, 0)], x[min(j + 1, x.size - 1)]
    g = (np.sqrt(5) - 1) / 2
    h = lambda t: 0.5 * (t - z) ** 2 + nu * float(penalty_value(spec, t))
    for _ in range(100):
        c, d = hi - g * (hi - lo), lo + g * (hi - lo)
        if h(c) < h(d):
            hi = d
        else:
            lo = c
    xs = min([x[j], 0.5 * (lo + hi)], key=h)
    return xs, h(xs)


class TestSpec:
    def test_constants(self):
        assert L1.mu == 0 and L1.L == 1
        assert SCAD.mu == pytest.approx(1 / 2.7)
        assert MCP.mu == pytest.approx(1 / 3.5)
        assert CAP.mu is None
        assert CAP.majorant_mu == (0.0, 0.5)

    @pytest.mark.parametrize("kwargs", [
        dict(kind="l1", lam=0.0), dict(kind="scad", lam=1.0, a=2.0), dict(kind="mcp", lam=1.0, b=0.0),
        dict(kind="capped", lam=1.0, c=0.5)])
    def test_invalid(self, kwargs):
        with pytest.raises(PenaltyError):
            make_penalty(**kwargs)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_penalty("bridge", 1.0)


class TestValue:
    def test_scad_linear_branch(self):
        assert penalty_value(SCAD, 0.5) == pytest.approx(0.5)

    def test_scad_constant_branch(self):
        assert penalty_value(SCAD, 10.0) == pytest.approx(2.35)

    def test_scad_middle_matches_integral(self):
        integral, _ = quad(lambda s: 1.0 if s <= 1 else max(3.7 - s, 0) / 2.7, 0, 2, points=[1.0])
        assert penalty_value(SCAD, 2.0) == pytest.approx(integral, abs=1e-9)
        assert penalty_value(SCAD, 2.0) == pytest.approx(1.814815, abs=1e-5)

    def test_mcp_matches_integral(self):
        integral, _ = quad(lambda s: max(1 - s / 3.5, 0), 0, 1)
        assert penalty_value(MCP, 1.0) == pytest.approx(integral, abs=1e-12)
        assert penalty_value(MCP, 1.0) == pytest.approx(0.857143, abs=1e-6)

    def test_capped(self):
        assert penalty_value(CAP, 3.0) == pytest.approx(1.0)

    def test_vector_total(self):
        assert penalty_total(L1, np.array([1.0, -2.0])) == pytest.approx(3.0)
        assert isinstance(penalty_value(L1, 1.0), float)


class TestDerivative:
    def test_scad_flat(self):
        assert penalty_derivative(SCAD, 0.5) == pytest.approx(1.0)

    def test_mcp_zero_beyond(self):
        assert penalty_derivative(MCP, 7.0) == 0.0

    def test_scad_middle_vs_finite_difference(self):
        h = 1e-6
        fd = (penalty_value(SCAD, 2 + h) - penalty_value(SCAD, 2 - h)) / (2 * h)
        assert penalty_derivative(SCAD, 2.0) == pytest.approx(fd, abs=1e-6)
        assert penalty_derivative(SCAD, 2.0) == pytest.approx(0.62963, abs=1e-5)

    def test_zero_raises(self):
        with pytest.raises(PenaltyDomainError):
            penalty_derivative(SCAD, 0.0)
        assert subgradient_interval(SCAD) == (-1.0, 1.0)

    def test_capped_kink_raises(self):
        with pytest.raises(PenaltyDomainError):
            penalty_derivative(CAP, 1.0)

    @pytest.mark.parametrize("spec", WEAK + [CAP])
    def test_matches_finite_differences(self, spec):
        t = np.random.default_rng(1).uniform(-6, 6, 500)
        kinks = np.array([0, spec.lam, spec.a * spec.lam, spec.b * spec.lam, spec.lam * spec.c / 2])
        t = t[np.min(np.abs(np.abs(t)[:, None] - kinks[None, :]), axis=1) > 1e-3]
        h = 1e-6
        fd = (penalty_value(spec, t + h) - penalty_value(spec, t - h)) / (2 * h)
        assert np.allclose(penalty_derivative(spec, t), fd, atol=1e-5)


class TestProx:
    def test_scad_zero_branch(self):
        assert prox_scalar(SCAD, 0.5, 1.0) == 0.0

    def test_scad_identity_branch(self):
        assert prox_scalar(SCAD, 5.0, 1.0) == 5.0

    def test_scad_middle_branch(self):
        expected = (3 - 3.7 / 2.7) / (1 - 1 / 2.7)
        x_or, _ = fine_grid_prox(SCAD, 3.0, 1.0)
        assert prox_scalar(SCAD, 3.0, 1.0) == pytest.approx(expected, abs=1e-12)
        assert prox_scalar(SCAD, 3.0, 1.0) == pytest.approx(x_or, abs=1e-4)
        assert expected == pytest.approx(2.58824, abs=1e-5)

    def test_mcp(self):
        x_or, _ = fine_grid_prox(MCP, 2.0, 1.0)
        assert prox_scalar(MCP, 2.0, 1.0) == pytest.approx(1.4, abs=1e-12)
        assert x_or == pytest.approx(1.4, abs=1e-4)

    def test_l1_kill(self):
        assert prox_scalar(L1, -0.3, 1.0) == 0.0

    def test_invalid_weight(self):
        with pytest.raises(InvalidProxParameter):
            prox_scalar(SCAD, 1.0, 2.7)
        with pytest.raises(InvalidProxParameter):
            prox_scalar(MCP, 1.0, 3.5)
        with pytest.raises(InvalidProxParameter):
            prox_scalar(L1, 1.0, 0.0)

    def test_capped_prefers_lower_objective(self):
        # far out the identity point wins, near zero the thresholded one
        assert prox_scalar(CAP, 5.0, 1.0) == 5.0
        assert prox_scalar(CAP, 0.8, 1.0) == 0.0

    def test_capped_tie_goes_to_smaller_magnitude(self):
        # lam=1, c=2, nu=1: inner objective 1/2 + |z|-1 (|z|>=2) vs outer 1; tie at |z| = 1.5
        assert prox_scalar(CAP, 1.5, 1.0) == pytest.approx(0.5)

    @pytest.mark.parametrize("kind", ["l1", "scad", "mcp", "capped"])
    def test_literal_oracle(self, kind):
        rng = np.random.default_rng(7)
        for _ in range(25):
            spec = make_penalty(kind, rng.uniform(0.1, 2), c=2.0)
            z, nu = rng.uniform(-10, 10), rng.uniform(0.1, 0.95)
            x = prox_scalar(spec, z, nu)
            f = 0.5 * (x - z) ** 2 + nu * penalty_value(spec, x)
            _, f_or = fine_grid_prox(spec, z, nu)
            assert abs(f - f_or) <= 1e-8

    def test_vector_examples(self):
        assert np.array_equal(prox_vector(SCAD, ProxRequest(np.zeros(3), 1.0)), np.zeros(3))
        assert np.allclose(prox_vector(L1, ProxRequest(np.array([2.0, -0.5]), 1.0)), [1.0, 0.0])
        assert np.allclose(prox_vector(SCAD, ProxRequest(np.array([5.0, 0.5]), 1.0)), [5.0, 0.0])

    def test_request_validation(self):
        with pytest.raises(InvalidProxParameter):
            ProxRequest(np.zeros(2), 1.0, shrink=0.0)
        with pytest.raises(InvalidProxParameter):
            ProxRequest(np.zeros(2), -1.0)

    @settings(max_examples=200, deadline=None)
    @given(z=st.floats(-50, 50), nu=st.floats(0.01, 0.99), kind=st.sampled_from(["l1", "scad", "mcp", "capped"]))
    def test_shrinkage(self, z, nu, kind):
        x = prox_scalar(make_penalty(kind, 0.7), z, nu)
        assert abs(x) <= abs(z) + 1e-12
        assert x == 0 or np.sign(x) == np.sign(z)


class TestSide:
    def test_l1(self):
        assert side_function(make_penalty("l1", 2.0), np.array([1.0, -1.0])) == pytest.approx(2.0)

    def test_zero(self):
        assert side_function(SCAD, np.zeros(4)) == 0.0

    def test_scad_value(self):
        beta = np.array([10.0, 0.0])
        expected = 2.35 + 50 / 2.7
        assert side_function(SCAD, beta) == pytest.approx(expected)
        assert side_function(SCAD, beta) >= np.abs(beta).sum()
        assert expected == pytest.approx(20.869, abs=1e-3)

    def test_capped_strict(self):
        with pytest.raises(UnsupportedPenalty):
            side_function(CAP, np.ones(2))
        assert side_function(CAP, np.array([3.0]), strict=False) == pytest.approx(1.0)

    @pytest.mark.parametrize("spec", WEAK)
    def test_side_prox_is_minimizer(self, spec):
        rng = np.random.default_rng(3)
        v = rng.normal(0, 3, 6)
        w = 0.8
        x = side_prox(spec, v, w)
        obj = lambda u: 0.5 * np.sum((u - v) ** 2) + w * side_function(spec, u)
        for _ in range(200):
            assert obj(x) <= obj(x + rng.normal(0, 0.05, 6)) + 1e-12


class TestMajorant:
    def test_examples(self):
        maj = capped_l1_majorant(CAP, np.array([0.0, 0.5, 3.0]))
        assert isinstance(maj, CappedMajorant)
        vals = maj.value(np.array([0.0, 0.5, 3.0]))
        assert np.allclose(vals, [0.0, 0.5, 1.0])
        assert np.allclose(vals, penalty_value(CAP, np.array([0.0, 0.5, 3.0])))
        assert (maj.mu1, maj.mu2) == (0.0, 0.5)

    def test_upper_bound_on_grid(self):
        t = np.linspace(-5, 5, 10_000)
        for anchor in (0.2, 3.0):
            maj = capped_l1_majorant(CAP, np.full(t.shape, anchor))
            assert np.all(maj.value(t) >= penalty_value(CAP, t) - 1e-15)

    def test_only_capped(self):
        with pytest.raises(UnsupportedPenalty):
            capped_l1_majorant(SCAD, np.zeros(2))


class TestAssumptionProperties:
    grid = np.linspace(1e-4, 10, 10_000)

    @pytest.mark.parametrize("spec", WEAK + [CAP])
    def test_symmetry_and_origin(self, spec):
        t = np.random.default_rng(0).uniform(-10, 10, 10_000)
        assert np.array_equal(penalty_value(spec, t), penalty_value(spec, -t))
        assert penalty_value(spec, 0.0) == 0.0

    @pytest.mark.parametrize("spec", WEAK + [CAP])
    def test_monotone_and_ratio(self, spec):
        v = penalty_value(spec, self.grid)
        assert np.all(np.diff(v) >= -1e-15)
        assert np.all(np.diff(v / self.grid) <= 1e-12)

    @pytest.mark.parametrize("spec", WEAK)
    def test_lipschitz(self, spec):
        rng = np.random.default_rng(2)
        t1, t2 = rng.uniform(-10, 10, (2, 10_000))
        lhs = np.abs(penalty_value(spec, t2) - penalty_value(spec, t1))
        assert np.all(lhs <= spec.lam * spec.L * np.abs(t2 - t1) + 1e-12)

    @pytest.mark.parametrize("spec", WEAK)
    def test_weak_convexity(self, spec):
        t = np.linspace(-10, 10, 10_001)
        f = penalty_value(spec, t) + 0.5 * spec.mu * t**2
        assert np.all(f[1:-1] <= 0.5 * (f[:-2] + f[2:]) + 1e-12)

    @pytest.mark.parametrize("spec", WEAK)
    def test_l1_lower_bound(self, spec):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            beta = rng.normal(0, rng.uniform(0.1, 5), 8)
            rhs = penalty_total(spec, beta) + 0.5 * spec.mu * beta @ beta
            assert spec.lam * spec.L * np.abs(beta).sum() <= rhs + 1e-10

    @settings(max_examples=200, deadline=None)
    @given(t=st.floats(-100, 100), lam=st.floats(0.05, 5), kind=st.sampled_from(["l1", "scad", "mcp", "capped"]))
    def test_value_bounds(self, t, lam, kind):
        spec = make_penalty(kind, lam)
        v = penalty_value(spec, t)
        assert 0 <= v <= lam * abs(t) + 1e-12
        assert v == penalty_value(spec, -t)
