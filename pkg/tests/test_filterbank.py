import numpy as np
import pytest

from _helpers import draw_siso_case, simulate_case
from iostab import excite, filterbank, matkit, oracle, plant
from iostab.cli import multiset_distance
from iostab.errors import DimensionError, ModelError


def demo_model_and_spec():
    model = plant.DiffOpModel.siso([-1.0], [1.0])
    spec = filterbank.FilterSpec.for_model(model, [1.0], 0.5)
    return model, spec


class TestFilterSpec:
    def test_rejects_non_hurwitz(self):
        with pytest.raises(ModelError):
            filterbank.FilterSpec(c=np.array([-1.0]), beta=0.5, n=1, m=1, p=1)

    def test_rejects_beta_on_filter_pole(self):
        with pytest.raises(ModelError):
            filterbank.FilterSpec(c=np.array([2.0]), beta=2.0, n=1, m=1, p=1)

    def test_rejects_wrong_length(self):
        with pytest.raises(ModelError):
            filterbank.FilterSpec(c=np.array([1.0, 1.0]), beta=0.5, n=1, m=1, p=1)


class TestCompanion:
    def test_first_order(self):
        spec = filterbank.FilterSpec(c=np.array([2.0]), beta=1.0, n=1, m=1, p=1)
        ref = filterbank.build_companion(spec)
        assert np.array_equal(ref.A, [[-2.0]])
        assert np.array_equal(ref.B, [[1.0]])

    def test_second_order_structure(self):
        spec = filterbank.FilterSpec(c=np.array([3.0, 2.0]), beta=1.5, n=2, m=1, p=1)
        ref = filterbank.build_companion(spec)
        assert np.array_equal(ref.A, [[0.0, 1.0], [-2.0, -3.0]])
        assert np.array_equal(ref.B, [[0.0], [1.0]])

    def test_kron_expansions(self):
        spec = filterbank.FilterSpec(c=np.array([2.0]), beta=1.0, n=1, m=2, p=1)
        ref = filterbank.build_companion(spec)
        assert np.array_equal(ref.A_input, -2.0 * np.eye(2))
        assert np.array_equal(ref.B_input, np.eye(2))


class TestExperimentSystem:
    def test_augmented_dimension_first_order_siso(self):
        model, spec = demo_model_and_spec()
        ss = plant.realize_observability_canonical(model)
        system = filterbank.assemble_experiment_system(ss, spec)
        assert system.order == 6  # x(1) + zeta(1) + mu(1) + phi(2) + upsilon(1)

    def test_dimension_mismatch(self):
        model, _ = demo_model_and_spec()
        ss = plant.realize_observability_canonical(model)
        bad = filterbank.FilterSpec(c=np.array([1.0]), beta=0.5, n=1, m=2, p=1)
        with pytest.raises(DimensionError):
            filterbank.assemble_experiment_system(ss, bad)

    def test_zero_input_zero_state_stays_at_origin(self):
        model, spec = demo_model_and_spec()
        ss = plant.realize_observability_canonical(model)
        system = filterbank.assemble_experiment_system(ss, spec)
        rec = filterbank.simulate_zoh(system, np.zeros(system.order),
                                      np.zeros((5, 1)), 0.2)
        for arr in (rec.y, rec.zeta, rec.mu, rec.phi, rec.upsilon, rec.delta):
            assert np.all(arr == 0.0)

    def test_delta_zero_at_start(self, rng):
        model, spec = demo_model_and_spec()
        ss = plant.realize_observability_canonical(model)
        system = filterbank.assemble_experiment_system(ss, spec)
        rec = filterbank.simulate_zoh(system, system.initial_state(rng.standard_normal(1)),
                                      rng.uniform(-1, 1, (5, 1)), 0.2)
        assert np.array_equal(rec.delta[0], np.zeros(2))


class TestZohSimulation:
    def test_integrator_ramp(self):
        # scalar x' = u with u = 1 held: x_k = 0.5 k at T_S = 0.5
        Ad, Bd = filterbank.zoh_discretize(np.array([[0.0]]), np.array([[1.0]]), 0.5)
        x = 0.0
        for k in range(1, 6):
            x = Ad[0, 0] * x + Bd[0, 0] * 1.0
            assert abs(x - 0.5 * k) <= 1e-14

    def test_exponential_decay(self):
        Ad, _ = filterbank.zoh_discretize(np.array([[-1.0]]), np.array([[1.0]]), 0.3)
        x = 1.0
        for k in range(1, 6):
            x = Ad[0, 0] * x
            assert abs(x - np.exp(-0.3 * k)) <= 1e-13

    def test_semigroup_property(self, rng):
        model, spec, ts = draw_siso_case(rng, 2)
        ss = plant.realize_observability_canonical(model)
        system = filterbank.assemble_experiment_system(ss, spec)
        Ad, Bd = filterbank.zoh_discretize(system.A, system.B, ts)
        Ad2, Bd2 = filterbank.zoh_discretize(system.A, system.B, ts / 2.0)
        x = rng.standard_normal(system.order)
        d = rng.standard_normal(system.B.shape[1])
        one_step = Ad @ x + Bd @ d
        two_half = Ad2 @ (Ad2 @ x + Bd2 @ d) + Bd2 @ d
        assert np.max(np.abs(one_step - two_half)) <= 1e-10 * max(
            1.0, np.max(np.abs(one_step))
        )

    def test_delta_is_output_not_state(self, rng):
        model, spec, ts = draw_siso_case(rng, 2)
        _, rec, _ = simulate_case(model, spec, ts, seed=3)
        recomputed = rec.chi - spec.beta * rec.phi
        assert np.array_equal(recomputed, rec.delta)

    def test_record_rejects_nonzero_filter_start(self):
        with pytest.raises(ModelError):
            filterbank.ExperimentRecord(
                times=np.array([0.0]), u=np.zeros((1, 1)), y=np.zeros((1, 1)),
                zeta=np.ones((1, 1)), mu=np.zeros((1, 1)), phi=np.zeros((1, 2)),
                upsilon=np.zeros((1, 1)), delta=np.zeros((1, 2)), x0=np.zeros(1),
            )


class TestController:
    def test_zero_gain_states_decay(self):
        _, spec = demo_model_and_spec()
        ctrl = filterbank.build_controller(spec, np.zeros((1, 2)))
        assert ctrl.order == 2
        eigs = matkit.spectrum(ctrl.A)
        assert np.max(eigs.real) < 0.0
        assert np.all(ctrl.C == 0.0)

    def test_gain_shape_checked(self):
        _, spec = demo_model_and_spec()
        with pytest.raises(DimensionError):
            filterbank.build_controller(spec, np.zeros((1, 3)))

    def test_closed_loop_stable_plant_zero_gain(self):
        model = plant.DiffOpModel.siso([2.0], [1.0])
        spec = filterbank.FilterSpec.for_model(model, [1.0], 0.5)
        ss = plant.realize_observability_canonical(model)
        ctrl = filterbank.build_controller(spec, np.zeros((1, 2)))
        A_cl = filterbank.closed_loop_matrix(ss, ctrl)
        assert np.max(matkit.spectrum(A_cl).real) < 0.0

    def test_closed_loop_unstable_plant_zero_gain(self):
        model, spec = demo_model_and_spec()  # pole at +1
        ss = plant.realize_observability_canonical(model)
        ctrl = filterbank.build_controller(spec, np.zeros((1, 2)))
        A_cl = filterbank.closed_loop_matrix(ss, ctrl)
        assert np.max(matkit.spectrum(A_cl).real) > 0.0

    def test_hand_designed_gain_stabilizes_demo_plant(self):
        model, spec = demo_model_and_spec()
        ss = plant.realize_observability_canonical(model)
        ctrl = filterbank.build_controller(spec, np.array([[-1.0, -3.0]]))
        A_cl = filterbank.closed_loop_matrix(ss, ctrl)
        assert A_cl.shape == (3, 3)
        eigs = matkit.spectrum(A_cl)
        assert np.max(eigs.real) < 0.0
        # spectrum = {-1} plus the roots of s^2 + s + 1
        expected = np.concatenate([[-1.0 + 0.0j], np.roots([1.0, 1.0, 1.0])])
        assert multiset_distance(expected, eigs) <= 1e-9

    def test_block_triangular_spectrum_equivalence(self, rng):
        for _ in range(10):
            model, spec, _ = draw_siso_case(rng, int(rng.integers(1, 4)))
            ss = plant.realize_observability_canonical(model)
            dyn = oracle.build_filtered_dynamics(model, spec)
            gain = rng.uniform(-2.0, 2.0, (1, 2 * model.n))
            ctrl = filterbank.build_controller(spec, gain)
            loop = matkit.spectrum(filterbank.closed_loop_matrix(ss, ctrl))
            ref = filterbank.build_companion(spec)
            q = dyn.dim
            pn = ref.A_output.shape[0]
            block = np.zeros((q + pn, q + pn))
            block[:q, :q] = dyn.A + dyn.B @ gain
            block[:q, q:] = dyn.G
            block[q:, q:] = ref.A_output.T
            expected = matkit.spectrum(block)
            assert multiset_distance(expected, loop) <= 1e-7


class TestCsvExport:
    def test_round_trip_full_precision(self, tmp_path, rng):
        model, spec, ts = draw_siso_case(rng, 1)
        _, rec, _ = simulate_case(model, spec, ts, seed=11)
        path = tmp_path / "trajectory.csv"
        filterbank.write_trajectory_csv(rec, path)
        lines = path.read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header[:3] == ["t", "u_1", "y_1"]
        assert header[3:] == ["zeta_1", "mu_1", "phi_1", "phi_2", "upsilon_1",
                              "delta_1", "delta_2"]
        row = np.array([float(v) for v in lines[2].split(",")])
        assert row[0] == rec.times[1]
        assert row[2] == rec.y[1, 0]
        assert row[-1] == rec.delta[1, 1]
