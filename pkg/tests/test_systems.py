import json

import numpy as np
import pytest

from nlobs.errors import (
    DimensionMismatch,
    NotDifferentiableAtPoint,
    ParseError,
    SchemaError,
    UnknownBuiltin,
)
from nlobs.systems import (
    DynamicalSystem,
    Nonlinearity,
    PolyTerm,
    Region,
    builtin,
    eval_phi,
    eval_phi_batch,
    jacobian,
    parse_system,
    register_builtin,
    serialize_system,
)


class TestBuiltins:
    def test_example1(self, example1):
        assert example1.n == 1 and example1.p == 1
        assert np.array_equal(example1.A, [[0.0]])
        assert eval_phi(example1, [2.0]) == pytest.approx([-8.0])

    def test_example2(self, example2):
        assert example2.region.shape == "box"
        assert example2.region.lower == (-1.0,) and example2.region.upper == (1.0,)
        assert eval_phi(example2, [1.0]) == pytest.approx([-1.0])
        assert eval_phi(example2, [-0.25]) == pytest.approx([0.5])

    def test_example3(self, example3):
        assert np.array_equal(example3.A, [[1.0, -1.0], [1.0, 1.0]])
        assert np.array_equal(example3.C, [[0.0, 1.0]])
        assert eval_phi(example3, [1.0, 0.0]) == pytest.approx([-1.0, 0.0])

    def test_radius_override(self):
        assert builtin("example3", radius=8.0).region.r == 8.0
        e2 = builtin("example2", radius=4.0)
        assert e2.region.lower == (-4.0,) and e2.region.upper == (4.0,)

    def test_unknown(self):
        with pytest.raises(UnknownBuiltin):
            builtin("example99")


class TestEvalPhi:
    def test_zero_at_origin(self, example3):
        assert np.array_equal(eval_phi(example3, [0.0, 0.0]), [0.0, 0.0])

    def test_dimension_mismatch(self, example3):
        with pytest.raises(DimensionMismatch):
            eval_phi(example3, [1.0])

    def test_batch_matches_single(self, example3):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(40, 2))
        batch = eval_phi_batch(example3, pts)
        for i, x in enumerate(pts):
            assert np.allclose(batch[i], eval_phi(example3, x))

    def test_input_multiplier(self):
        # term -2 * x0^2 * u1
        sys_ = DynamicalSystem(
            A=np.zeros((1, 1)),
            C=np.eye(1),
            phi=Nonlinearity("polynomial", terms=(PolyTerm(0, -2.0, (2,), u_index=1),)),
            region=Region.ball(1.0, 1),
            input_dim=2,
        )
        assert eval_phi(sys_, [3.0], u=[0.0, 5.0]) == pytest.approx([-90.0])
        assert jacobian(sys_, [3.0], u=[0.0, 5.0]) == pytest.approx(np.array([[-60.0]]))
        with pytest.raises(DimensionMismatch):
            eval_phi(sys_, [3.0])


class TestJacobian:
    def test_example1(self, example1):
        assert jacobian(example1, [2.0]) == pytest.approx(np.array([[-12.0]]))

    def test_example3_display(self, example3):
        x, y = 1.0, 1.0
        assert jacobian(example3, [x, y]) == pytest.approx(np.array([[-4.0, -2.0], [-2.0, -4.0]]))
        x, y = 0.7, -0.3
        want = [
            [-3 * x**2 - y**2, -2 * x * y],
            [-2 * x * y, -3 * y**2 - x**2],
        ]
        assert jacobian(example3, [x, y]) == pytest.approx(np.asarray(want))

    def test_zero_polynomial(self):
        sys_ = DynamicalSystem(
            A=np.zeros((2, 2)),
            C=np.eye(2),
            phi=Nonlinearity("polynomial", terms=()),
            region=Region.ball(1.0, 2),
        )
        assert np.array_equal(jacobian(sys_, [0.3, -0.2]), np.zeros((2, 2)))

    def test_example2_analytic_and_origin(self, example2):
        assert jacobian(example2, [0.25]) == pytest.approx(np.array([[-1.0]]))
        with pytest.raises(NotDifferentiableAtPoint):
            jacobian(example2, [0.0])

    def test_example3_symmetry_everywhere(self, example3):
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = rng.uniform(-5, 5, size=2)
            j = jacobian(example3, x)
            assert np.array_equal(j, j.T)

    def test_matches_finite_differences(self, poly_system_factory):
        rng = np.random.default_rng(2)
        for _ in range(100):
            sys_ = poly_system_factory(rng)
            x = rng.uniform(-1, 1, size=sys_.n)
            j = jacobian(sys_, x)
            h = 1e-6 * max(1.0, float(np.linalg.norm(x)))
            fd = np.empty_like(j)
            for k in range(sys_.n):
                e = np.zeros(sys_.n)
                e[k] = h
                fd[:, k] = (eval_phi(sys_, x + e) - eval_phi(sys_, x - e)) / (2 * h)
            scale = max(1.0, float(np.max(np.abs(j))))
            assert np.max(np.abs(j - fd)) <= 1e-5 * scale

    def test_finite_difference_fallback_for_builtin(self):
        register_builtin(
            "_test_sine",
            lambda radius: DynamicalSystem(
                A=np.zeros((1, 1)),
                C=np.eye(1),
                phi=Nonlinearity("builtin", name="_test_sine"),
                region=Region.ball(radius or 1.0, 1),
            ),
            phi=lambda pts: np.sin(pts),
        )
        sys_ = builtin("_test_sine")
        assert jacobian(sys_, [0.5]) == pytest.approx(np.array([[np.cos(0.5)]]), abs=1e-8)


class TestRegion:
    def test_ball_contains(self):
        ball = Region.ball(2.0, 2)
        assert ball.contains([1.0, 1.0])
        assert ball.contains([2.0, 0.0])
        assert not ball.contains([2.1, 0.0])

    def test_box_validation(self):
        with pytest.raises(DimensionMismatch):
            Region.box((0.0,), (0.0,))
        with pytest.raises(DimensionMismatch):
            Region.ball(-1.0, 2)

    def test_clip(self):
        ball = Region.ball(1.0, 2)
        assert np.linalg.norm(ball.clip([3.0, 4.0])) == pytest.approx(1.0)
        box = Region.box((-1.0, -1.0), (1.0, 1.0))
        assert np.array_equal(box.clip([2.0, 0.5]), [1.0, 0.5])


class TestSerialization:
    def test_builtin_round_trip(self, example3):
        text = json.dumps(serialize_system(example3))
        assert parse_system(text) == example3

    def test_all_builtins_round_trip(self):
        for name in ("example1", "example2", "example3"):
            sys_ = builtin(name)
            assert parse_system(json.dumps(serialize_system(sys_))) == sys_

    def test_random_round_trip(self, poly_system_factory):
        rng = np.random.default_rng(3)
        for _ in range(50):
            sys_ = poly_system_factory(rng)
            assert parse_system(json.dumps(serialize_system(sys_))) == sys_

    def test_parse_error(self):
        with pytest.raises(ParseError):
            parse_system("{not json")

    def test_missing_key_names_field(self, example3):
        obj = serialize_system(example3)
        del obj["C"]
        with pytest.raises(SchemaError) as err:
            parse_system(json.dumps(obj))
        assert err.value.field == "C"

    def test_wrong_exponent_length(self, example3):
        obj = serialize_system(example3)
        obj["phi"]["terms"][0]["exps"] = [3]
        with pytest.raises(DimensionMismatch):
            parse_system(json.dumps(obj))

    def test_bad_shapes(self, example3):
        obj = serialize_system(example3)
        obj["A"] = [[1.0]]
        with pytest.raises(DimensionMismatch):
            parse_system(json.dumps(obj))
