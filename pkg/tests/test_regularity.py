import numpy as np
import pytest

from nlobs.errors import PreconditionViolated, Unbounded
from nlobs.regularity import (
    SamplePlan,
    _collect,
    estimate_lipschitz,
    estimate_osl,
    estimate_regularity,
    implied_lipschitz_bound,
    qib_estimate,
    qib_region_radius,
    verify_qib,
)
from nlobs.systems import (
    DynamicalSystem,
    Nonlinearity,
    PolyTerm,
    Region,
    builtin,
    eval_phi,
)

PLAN = SamplePlan(pair_count=2000, seed=42)


def linear_system(slope=2.0, r=3.0):
    return DynamicalSystem(
        A=np.zeros((1, 1)),
        C=np.eye(1),
        phi=Nonlinearity("polynomial", terms=(PolyTerm(0, slope, (1,)),)),
        region=Region.ball(r, 1),
    )


class TestLipschitzEstimate:
    def test_example1_r2(self, example1):
        lip = estimate_lipschitz(example1, plan=SamplePlan(pair_count=20000, seed=42))
        assert 11.7 <= lip <= 12.1

    def test_example3_paper_radius(self, example3):
        lip = estimate_lipschitz(example3, plan=SamplePlan(pair_count=20000, seed=42))
        assert abs(lip - 105.75) <= 0.02 * 105.75

    def test_linear_phi(self):
        assert estimate_lipschitz(linear_system(), plan=PLAN) == pytest.approx(
            2.0, abs=1e-6
        )

    def test_grid_mode(self, example1):
        lip = estimate_lipschitz(
            example1, plan=SamplePlan(mode="grid", points_per_axis=31, pair_count=400)
        )
        assert 11.7 <= lip <= 12.1


class TestOslEstimate:
    def test_example1_zero(self, example1):
        osl = estimate_osl(example1, plan=SamplePlan(pair_count=20000, seed=42))
        assert -1e-3 <= osl <= 1e-9

    def test_example2_half(self, example2):
        osl = estimate_osl(example2, plan=SamplePlan(pair_count=20000, seed=42))
        assert -0.5 <= osl <= -0.49

    def test_example3_zero(self, example3):
        osl = estimate_osl(example3, plan=SamplePlan(pair_count=20000, seed=42))
        assert -1e-3 <= osl <= 1e-9

    def test_linear_phi(self):
        assert estimate_osl(linear_system(), plan=PLAN) == pytest.approx(2.0, abs=1e-6)


class TestExample2NonLipschitz:
    def test_pairwise_estimate_blows_up_near_origin(self, example2):
        plan = SamplePlan(pair_count=100000, seed=42)
        est = estimate_regularity(example2, plan=plan)
        assert est.lip > 50.0
        assert est.witnesses["lipschitz"].kind == "pair"
        # the extremal pair sits near the kink at 0
        assert np.linalg.norm(est.witnesses["lipschitz"].x1) < 1e-2


class TestSharedSampleProperties:
    def test_fan_ordering_zero_exceptions(self, poly_system_factory):
        rng = np.random.default_rng(10)
        plan = SamplePlan(pair_count=150, count=32, seed=0)
        for _ in range(150):
            sys_ = poly_system_factory(rng)
            assert estimate_osl(sys_, plan=plan) <= estimate_lipschitz(sys_, plan=plan)

    def test_lipschitz_implies_qib_witness(self, poly_system_factory):
        rng = np.random.default_rng(11)
        plan = SamplePlan(pair_count=300, count=32, seed=1)
        for _ in range(40):
            sys_ = poly_system_factory(rng)
            lip = estimate_lipschitz(sys_, plan=plan)
            report = verify_qib(sys_, beta=lip * lip, gamma=0.0, plan=plan)
            assert report.violations == 0

    def test_region_monotonicity(self, poly_system_factory):
        # sampled estimates are monotone in the ball radius up to the
        # documented 1e-9 relative wobble of flat suprema
        rng = np.random.default_rng(12)
        plan = SamplePlan(pair_count=300, count=128, seed=2)
        for k in range(80):
            sys_ = poly_system_factory(rng, radius=4.0)
            r1 = float(rng.uniform(0.5, 1.9))
            small, big = Region.ball(r1, sys_.n), Region.ball(2 * r1, sys_.n)
            for op in (estimate_lipschitz, estimate_osl):
                lo = op(sys_, small, plan)
                hi = op(sys_, big, plan)
                assert hi >= lo - 1e-9 * max(1.0, abs(lo))

    def test_deterministic_given_seed(self, example3):
        a = estimate_regularity(example3, plan=PLAN)
        b = estimate_regularity(example3, plan=PLAN)
        assert a.lip == b.lip and a.rho == b.rho
        assert a.beta == b.beta and a.gamma == b.gamma


class TestQibEstimate:
    def test_example3_fit_feasible_on_same_samples(self, example3):
        beta, gamma = qib_estimate(example3, plan=PLAN, alpha=70.6, rho=0.0)
        assert gamma + 2 * 70.6 > 0
        report = verify_qib(example3, beta, gamma, plan=PLAN)
        assert report.violations == 0

    def test_literature_pair_fails_near_origin(self, example3):
        # The often-quoted pair (-200, -141) is NOT an inner bound on the
        # full ball: near-diagonal pairs at small norm violate it, e.g.
        # x1=(0.1,0), x2=(0,0.1). The sampled check must surface that.
        x1 = np.array([0.1, 0.0])
        x2 = np.array([0.0, 0.1])
        d = x1 - x2
        dphi = eval_phi(example3, x1) - eval_phi(example3, x2)
        slack = -200.0 * d @ d + (-141.0) * d @ dphi - dphi @ dphi
        assert slack < -3.9
        report = verify_qib(example3, -200.0, -141.0, plan=PLAN)
        assert report.violations > 0
        assert np.linalg.norm(report.worst_pair[0]) < example3.region.r

    def test_zero_phi(self):
        sys_ = DynamicalSystem(
            A=np.zeros((2, 2)),
            C=np.eye(2)[:1],
            phi=Nonlinearity("polynomial", terms=()),
            region=Region.ball(1.0, 2),
        )
        beta, gamma = qib_estimate(sys_, plan=SamplePlan(pair_count=400, seed=3))
        assert gamma == 0.0
        assert 0.0 <= beta < 1e-300
        assert verify_qib(sys_, beta, gamma, plan=SamplePlan(pair_count=400, seed=3)).violations == 0

    def test_example1_beats_hand_picked_pair(self):
        sys_ = builtin("example1", radius=1.0)
        plan = SamplePlan(pair_count=2000, seed=42)
        beta, gamma = qib_estimate(sys_, plan=plan, alpha=1.0, rho=0.0)
        xi_lp = beta + 0.0 * (gamma + 2.0) + 1.0
        # gamma=0, beta=lip^2=9 is feasible by hand, xi = 10
        assert verify_qib(sys_, 9.0, 0.0, plan=plan).violations == 0
        assert xi_lp <= 10.0

    def test_lp_optimality_against_rejection_sampling(self, example3):
        alpha, rho = 70.6, 0.0
        beta_star, gamma_star = qib_estimate(example3, plan=PLAN, alpha=alpha, rho=rho)
        xi_star = beta_star + rho * (gamma_star + 2 * alpha) + 1.0
        _, data = _collect(example3, None, PLAN)
        rng = np.random.default_rng(4)
        gamma_min = 1e-9 - 2 * alpha
        found = 0
        tries = 0
        while found < 1000 and tries < 100000:
            tries += 1
            g = gamma_min + float(rng.uniform(0.0, 30.0))
            b = beta_star + float(rng.uniform(0.0, 100.0))
            if np.all(b * data.a + g * data.b - data.c >= 0.0):
                found += 1
                xi_cand = b + rho * (g + 2 * alpha) + 1.0
                assert xi_star <= xi_cand + 1e-9 * max(1.0, abs(xi_star))
        assert found == 1000

    def test_flat_optimum_tie_break(self):
        # all pairs identical with <dx, dPhi> = 0: the objective is flat in
        # gamma at rho = 0 and the smallest |gamma| must be returned
        a = np.ones(120)
        b = np.zeros(120)
        c = np.ones(120)
        from nlobs.regularity import _qib_lp

        beta, gamma = _qib_lp(a, b, c, alpha=1.0, rho=0.0)
        assert gamma == 0.0
        assert beta == pytest.approx(1.0, abs=1e-12)
        # with rho > 0 the objective grows in gamma: pushed to the margin
        beta2, gamma2 = _qib_lp(a, b, c, alpha=1.0, rho=0.5)
        assert gamma2 == pytest.approx(1e-9 - 2.0, abs=1e-15)
        assert beta2 == pytest.approx(1.0, abs=1e-12)

    def test_unbounded_for_too_small_rho(self, example3):
        # rho below every sampled pairwise ratio makes the objective
        # decrease forever along gamma
        with pytest.raises(Unbounded):
            qib_estimate(example3, plan=PLAN, alpha=70.6, rho=-1e6)

    def test_pair_count_floor(self, example3):
        with pytest.raises(PreconditionViolated):
            qib_estimate(example3, plan=SamplePlan(pair_count=50), alpha=1.0)


class TestVerifyQib:
    def test_example3_enlarged_radius_violations(self):
        sys_ = builtin("example3", radius=8.0)
        report = verify_qib(sys_, -200.0, -141.0, plan=PLAN)
        assert report.violations >= 1
        assert report.worst_slack < 0

    def test_dominating_beta(self):
        sys_ = builtin("example1", radius=0.1)
        report = verify_qib(sys_, 1e9, 0.0, plan=SamplePlan(pair_count=500, seed=1))
        assert report.violations == 0
        assert report.worst_slack >= 0


class TestRegionRadius:
    def test_paper_values(self):
        assert qib_region_radius(-200.0, -141.0) == pytest.approx(5.9372, abs=1e-3)

    def test_hand_computed(self):
        assert qib_region_radius(0.0, -4.0) == pytest.approx(1.0, abs=1e-12)

    def test_preconditions(self):
        with pytest.raises(PreconditionViolated):
            qib_region_radius(-200.0, 1.0)
        with pytest.raises(PreconditionViolated):
            qib_region_radius(-200.0, -10.0)


class TestImpliedLipschitz:
    def test_gamma_zero(self):
        assert implied_lipschitz_bound(0.5, 4.0, 0.0) == pytest.approx(2.0)

    def test_gamma_positive(self):
        assert implied_lipschitz_bound(1.0, 2.0, 2.0) == pytest.approx(2.0)

    def test_small_alpha_route(self):
        assert implied_lipschitz_bound(0.0, 3.0, -1.0, alpha=1.0) == pytest.approx(3.0)

    def test_none_for_strongly_negative_gamma(self):
        assert implied_lipschitz_bound(0.0, -200.0, -141.0) is None
        assert implied_lipschitz_bound(0.0, -200.0, -141.0, alpha=1.0) is None


class TestEstimateRegularity:
    def test_bundle(self, example3):
        est = estimate_regularity(example3, plan=PLAN, alpha=70.6)
        assert est.rho <= est.lip
        assert -1e-3 <= est.rho <= 1e-9
        assert est.beta is not None
        assert set(est.witnesses) == {"lipschitz", "one_sided"}
        assert "pairs" in est.method

    def test_region_containment_precondition(self, example3):
        with pytest.raises(PreconditionViolated):
            estimate_regularity(example3, region=Region.ball(10.0, 2), plan=PLAN)
