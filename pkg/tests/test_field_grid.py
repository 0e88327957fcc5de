"""测试网格插值、文件读写、场叠加与零点/控制电压求解"""

import math

import numpy as np
import pytest
from rusty_results.prelude import Err

from paul_junction.core.field_grid import (
    FieldGrid,
    GridTrapModel,
    catmull_rom_sample,
    load_field_grid,
    rf_curvature,
    sample_stack,
    save_field_grid,
    solve_control_voltages,
    superpose,
)
from paul_junction.core.potential import TransferProfile
from paul_junction.core.validators import GridMismatch, OutOfDomain

ORIGIN = np.array([-3.0, -3.0, -3.0])
SPACING = np.array([1.0, 0.5, 0.25])
DIMS = (7, 13, 25)


def lattice():
    axes = [ORIGIN[i] + SPACING[i] * np.arange(DIMS[i]) for i in range(3)]
    return np.meshgrid(*axes, indexing="ij")


def quadratic(x, y, z):
    # 每个坐标最高二次
    return x**2 + 2 * y * z - 3 * z + x * y * z + 0.5 * y**2 * z**2


def quadratic_gradient(x, y, z):
    return np.array([2 * x + y * z, 2 * z + x * z + y * z**2, 2 * y - 3 + x * y + y**2 * z])


def make_grid(potentials: dict[str, np.ndarray], roles=None, layers=None, spacing=SPACING) -> FieldGrid:
    names = list(potentials)
    return FieldGrid(
        origin=ORIGIN.copy(),
        spacing=np.asarray(spacing, dtype=float),
        dims=DIMS,
        potentials=potentials,
        roles=roles or {n: "rf" for n in names},
        layers=layers or {n: "bottom" for n in names},
        plane_half_gap=25.0,
    )


@pytest.fixture
def poly_grid():
    X, Y, Z = lattice()
    return make_grid({"poly": quadratic(X, Y, Z)})


class TestFieldGrid:
    def test_too_few_points(self):
        with pytest.raises(ValueError):
            FieldGrid(ORIGIN, SPACING, (3, 13, 25), {}, {}, {}, 25.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            make_grid({"a": np.zeros((7, 13, 24))})

    def test_interior_bounds(self, poly_grid):
        lo, hi = poly_grid.interior_bounds()
        assert lo == pytest.approx([-2.0, -2.5, -2.75])
        assert hi == pytest.approx([2.0, 2.5, 2.75])


class TestCatmullRom:
    @pytest.mark.parametrize("point", [
        (0.0, 0.0, 0.0),  # 网格节点
        (0.3, -1.7, 2.1),
        (-1.95, 2.45, -2.7),
        (1.5, 0.25, 0.125),  # 单元中点
    ])
    def test_exact_for_quadratic(self, poly_grid, point):
        sampled = catmull_rom_sample(poly_grid, "poly", point).unwrap()
        assert sampled.potential == pytest.approx(quadratic(*point), abs=1e-10)
        assert sampled.gradient == pytest.approx(quadratic_gradient(*point), abs=1e-9)

    def test_gradient_is_derivative_of_sample(self):
        """非多项式数据上梯度仍是插值函数的解析导数"""
        X, Y, Z = lattice()
        grid = make_grid({"wave": np.sin(X) * np.cos(2 * Y) * np.exp(0.3 * Z)})
        point = np.array([0.37, -0.81, 1.13])
        h = 1e-6
        grad = catmull_rom_sample(grid, "wave", point).unwrap().gradient
        for i in range(3):
            step = np.zeros(3)
            step[i] = h
            plus = catmull_rom_sample(grid, "wave", point + step).unwrap().potential
            minus = catmull_rom_sample(grid, "wave", point - step).unwrap().potential
            assert grad[i] == pytest.approx((plus - minus) / (2 * h), abs=1e-6)

    @pytest.mark.parametrize("face, axis", [
        ((0.0, 0.3, 0.1), 0),  # x = 0 为单元面
        ((0.2, 0.5, 0.1), 1),
        ((0.2, 0.3, 0.25), 2),
    ])
    def test_c1_across_cell_faces(self, face, axis):
        """单元面两侧的电势与梯度连续"""
        X, Y, Z = lattice()
        grid = make_grid({"wave": np.sin(X) * np.cos(2 * Y) * np.exp(0.3 * Z)})
        inside = np.asarray(face, dtype=float)
        left = inside.copy()
        left[axis] -= 1e-10
        a = catmull_rom_sample(grid, "wave", left).unwrap()
        b = catmull_rom_sample(grid, "wave", inside).unwrap()
        assert a.potential == pytest.approx(b.potential, abs=1e-9)
        assert a.gradient == pytest.approx(b.gradient, abs=1e-9)

    def test_cubic_error_is_third_order(self):
        """x³ 的插值误差随步长按 h³ 收敛"""
        def max_error(h):
            n = int(round(4.0 / h)) + 1
            x = -2.0 + h * np.arange(n)
            grid = FieldGrid(
                origin=np.array([-2.0, 0.0, 0.0]),
                spacing=np.array([h, 1.0, 1.0]),
                dims=(n, 4, 4),
                potentials={"cubic": np.broadcast_to(x[:, None, None] ** 3, (n, 4, 4)).copy()},
                roles={"cubic": "control"},
                layers={"cubic": "bottom"},
                plane_half_gap=25.0,
            )
            xs = np.linspace(-1.5, 1.5, 401)
            points = np.column_stack([xs, np.full_like(xs, 1.5), np.full_like(xs, 1.5)])
            phi, _, valid = sample_stack(grid, grid.stack(), points)
            assert valid.all()
            return np.max(np.abs(phi[0] - xs**3))

        coarse, fine = max_error(0.5), max_error(0.25)
        assert coarse / fine == pytest.approx(8.0, rel=0.15)

    def test_out_of_domain(self, poly_grid):
        result = catmull_rom_sample(poly_grid, "poly", (2.5, 0.0, 0.0))
        assert isinstance(result, Err)
        assert isinstance(result.Error, OutOfDomain)

    def test_unknown_electrode(self, poly_grid):
        result = catmull_rom_sample(poly_grid, "missing", (0.0, 0.0, 0.0))
        assert isinstance(result, Err)
        assert isinstance(result.Error, GridMismatch)

    def test_vectorized_valid_mask(self, poly_grid):
        points = np.array([[0.0, 0.0, 0.0], [2.5, 0.0, 0.0], [0.0, 0.0, -2.75]])
        _, _, valid = sample_stack(poly_grid, poly_grid.stack(), points)
        assert valid.tolist() == [True, False, True]


class TestGridFile:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        grid = make_grid(
            {"bottom.rf": rng.normal(size=DIMS), "top.ctrl": rng.normal(size=DIMS)},
            roles={"bottom.rf": "rf", "top.ctrl": "control"},
            layers={"bottom.rf": "bottom", "top.ctrl": "top"},
        )
        path = tmp_path / "field_grid.txt"
        save_field_grid(grid, path)
        loaded = load_field_grid(path).unwrap()
        assert loaded.dims == grid.dims
        assert np.array_equal(loaded.origin, grid.origin)
        assert np.array_equal(loaded.spacing, grid.spacing)
        assert loaded.roles == grid.roles
        assert loaded.layers == grid.layers
        for name in grid.names:
            assert np.array_equal(loaded.potentials[name], grid.potentials[name])

    def test_not_a_grid_file(self, tmp_path):
        path = tmp_path / "other.txt"
        path.write_text("hello\n", encoding="utf-8")
        result = load_field_grid(path)
        assert isinstance(result, Err)
        assert isinstance(result.Error, GridMismatch)

    def test_truncated_file(self, tmp_path, poly_grid):
        path = tmp_path / "field_grid.txt"
        save_field_grid(poly_grid, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        path.write_text("\n".join(lines[:-3]) + "\n", encoding="utf-8")
        assert isinstance(load_field_grid(path), Err)


class TestSuperpose:
    def _pair(self):
        X, Y, Z = lattice()
        rf = make_grid({"bottom.rf": X**2}, roles={"bottom.rf": "rf"}, layers={"bottom.rf": "bottom"})
        ctrl = make_grid({"top.dc": Y + Z}, roles={"top.dc": "control"}, layers={"top.dc": "top"})
        return rf, ctrl

    def test_weights_follow_profile(self):
        rf, ctrl = self._pair()
        profile = TransferProfile("linear", T=10.0)
        field = superpose([rf, ctrl], {"bottom.rf": 2.0, "top.dc": 3.0}, profile).unwrap()
        point = (1.0, 0.5, 0.25)
        tau = 2.5  # f = 0.25
        expected = 2.0 * 0.75 * math.cos(2 * tau) * 1.0 + 3.0 * 0.25 * 0.75
        assert field(point, tau).unwrap().potential == pytest.approx(expected, abs=1e-10)

    def test_linear_in_voltages(self):
        rf, ctrl = self._pair()
        profile = TransferProfile("linear", T=10.0)
        points = np.array([[1.0, 0.5, 0.25], [-0.7, 1.3, -1.1]])
        a = {"bottom.rf": 2.0, "top.dc": -1.0}
        b = {"bottom.rf": 0.5, "top.dc": 3.0}
        both = {k: 2.0 * a[k] - 3.0 * b[k] for k in a}
        sample = lambda v: superpose([rf, ctrl], v, profile).unwrap().sample(points, 3.7)  # noqa: E731
        phi_a, grad_a, _ = sample(a)
        phi_b, grad_b, _ = sample(b)
        phi, grad, _ = sample(both)
        assert phi == pytest.approx(2.0 * phi_a - 3.0 * phi_b, abs=1e-10)
        assert grad == pytest.approx(2.0 * grad_a - 3.0 * grad_b, abs=1e-10)

    @pytest.mark.parametrize("f", [0.0, 0.3, 0.5])
    def test_rotoreflection(self, f):
        """上层网格为下层的 (x, y, z) → (y, -x, -z) 像时，Φ(p; f) = Φ(Rp; 1-f)"""
        axis = -2.0 + 0.5 * np.arange(9)
        X, Y, Z = np.meshgrid(axis, axis, axis, indexing="ij")

        def bottom(x, y, z):
            # 在 (x, y) → (-x, -y) 下不变
            return (x**2 + 0.5 * x * y + 2.0 * y**2) * np.exp(0.3 * z) + z

        def spec(name, values, layer):
            return FieldGrid(
                origin=np.full(3, -2.0),
                spacing=np.full(3, 0.5),
                dims=(9, 9, 9),
                potentials={name: values},
                roles={name: "control"},
                layers={name: layer},
                plane_half_gap=25.0,
            )

        grids = [spec("bottom.dc", bottom(X, Y, Z), "bottom"), spec("top.dc", bottom(Y, -X, -Z), "top")]
        volts = {"bottom.dc": 1.5, "top.dc": 1.5}
        here = superpose(grids, volts, TransferProfile("constant", T=1.0, level=f)).unwrap()
        there = superpose(grids, volts, TransferProfile("constant", T=1.0, level=1.0 - f)).unwrap()

        rng = np.random.default_rng(9)
        points = rng.uniform(-1.4, 1.4, size=(20, 3))
        mirrored = np.column_stack([points[:, 1], -points[:, 0], -points[:, 2]])
        phi, _, valid = here.sample(points, 0.0)
        phi_r, _, valid_r = there.sample(mirrored, 0.0)
        assert valid.all() and valid_r.all()
        assert phi_r == pytest.approx(phi, rel=1e-10, abs=1e-12)

    def test_missing_voltage_is_grounded(self):
        rf, ctrl = self._pair()
        field = superpose([rf, ctrl], {"top.dc": 1.0}, TransferProfile("constant", T=1.0, level=1.0)).unwrap()
        assert field((1.0, 0.5, 0.25), 0.0).unwrap().potential == pytest.approx(0.75)

    def test_lattice_mismatch(self):
        rf, _ = self._pair()
        other = make_grid({"x": np.zeros(DIMS)}, spacing=(1.0, 0.5, 0.3))
        result = superpose([rf, other], {}, TransferProfile("linear", T=1.0))
        assert isinstance(result, Err)
        assert isinstance(result.Error, GridMismatch)

    def test_duplicate_electrode(self):
        rf, _ = self._pair()
        assert isinstance(superpose([rf, rf], {}, TransferProfile("linear", T=1.0)), Err)

    def test_unknown_voltage(self):
        rf, ctrl = self._pair()
        result = superpose([rf, ctrl], {"nope": 1.0}, TransferProfile("linear", T=1.0))
        assert isinstance(result, Err)

    def test_out_of_domain(self):
        rf, ctrl = self._pair()
        field = superpose([rf, ctrl], {"bottom.rf": 1.0}, TransferProfile("linear", T=1.0)).unwrap()
        assert isinstance(field((0.0, 0.0, 2.9), 0.0), Err)

    def test_per_trajectory_voltages(self):
        rf, ctrl = self._pair()
        field = superpose([rf, ctrl], [{"top.dc": 1.0}, {"top.dc": 2.0}], TransferProfile("constant", T=1.0, level=1.0)).unwrap()
        points = np.array([[0.0, 0.5, 0.25], [0.0, 0.5, 0.25]])
        phi, _, _ = field.sample(points, 0.0, np.array([0, 1]))
        assert phi == pytest.approx([0.75, 1.5])


class TestGridTrapModel:
    def test_rf_curvature_sign(self, peregrine_grid):
        from paul_junction.core.field_grid import find_rf_null

        null = find_rf_null(peregrine_grid, "bottom").unwrap()
        kappa = rf_curvature(peregrine_grid, "bottom", null.z)
        assert kappa != 0.0
        assert math.isfinite(kappa)

    def test_control_voltages_reproduce_targets(self, peregrine_grid):
        model = GridTrapModel.build(peregrine_grid).unwrap()
        solution = solve_control_voltages(peregrine_grid, "bottom", model.nulls["bottom"].z, 0.2, -0.05, 8.4e-3).unwrap()
        assert solution.residual < 1e-6
        assert set(solution.voltages) == {"bottom.ctrl_mid", "bottom.ctrl_end", "bottom.ctrl_outer"}

    def test_voltages_cover_every_electrode(self, peregrine_grid):
        model = GridTrapModel.build(peregrine_grid).unwrap()
        volts = model.voltages(0.25, 0.2, 0.0, 8.4e-3).unwrap()
        assert set(volts) == set(peregrine_grid.names)
        assert volts["bottom.rf"] == volts["top.rf"] > 0
