import json
import math

import numpy as np
import pytest

from iostab import excite, filterbank, matkit
from iostab.errors import DimensionError, ExcitationError


def make_spec(c, beta, n=None, m=1, p=1):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return filterbank.FilterSpec(c=c, beta=beta, n=n or c.size, m=m, p=p)


class TestPersistencyChecks:
    def test_ramp_is_order_two(self):
        # Hankel [[1,2,3],[2,3,4]] has two independent rows
        assert excite.check_pe_order([1.0, 2.0, 3.0, 4.0], 2)

    def test_constant_is_only_order_one(self):
        assert excite.check_pe_order([2.0, 2.0, 2.0], 1)
        assert not excite.check_pe_order([1.0, 1.0, 1.0, 1.0], 2)

    def test_zero_sequence_fails(self):
        assert not excite.check_pe_order([0.0, 0.0, 0.0], 1)

    def test_generator_certifies_requested_order(self):
        plan = excite.gen_pe_sequence(seed=3, m=1, order=6, count=40, ts=0.2)
        assert plan.order == 6
        assert excite.check_pe_order(plan.d, 6)
        assert excite.check_pe_order(plan.d[1:], 6)

    def test_generator_is_seed_reproducible(self):
        a = excite.gen_pe_sequence(seed=9, m=2, order=4, count=30, ts=0.1)
        b = excite.gen_pe_sequence(seed=9, m=2, order=4, count=30, ts=0.1)
        assert np.array_equal(a.d, b.d)

    def test_generator_rejects_short_count(self):
        with pytest.raises(DimensionError):
            excite.gen_pe_sequence(seed=0, m=1, order=6, count=10, ts=0.1)

    def test_default_orders(self):
        assert excite.default_pe_order(1, 1, 1) == 6   # 4n + 2 at n = 1
        assert excite.default_pe_order(2, 2, 2) == 20
        assert excite.default_sample_count(1, 1, 6) >= 12  # 8n + 4 at n = 1


class TestSamplingPathology:
    def test_real_spectra_always_safe(self):
        assert excite.check_sampling_pathology(
            [np.array([-1.0, -2.0, 0.5])], 1.0, 0.7
        )

    def test_conjugate_pair_aliases_at_matching_period(self):
        eigs = np.array([1j * math.pi, -1j * math.pi])
        assert not excite.check_sampling_pathology([eigs], 1.0, 1.0)

    def test_conjugate_pair_safe_off_period(self):
        eigs = np.array([1j * math.pi, -1j * math.pi])
        assert excite.check_sampling_pathology([eigs], 1.0, 0.7)

    def test_beta_participates(self):
        # -beta and an eigenvalue -beta + 2*pi*i/T_S alias
        ts = 0.5
        eigs = np.array([-1.0 + 2j * math.pi / ts])
        assert not excite.check_sampling_pathology([eigs], 1.0, ts)

    def test_spectra_disjoint(self):
        assert excite.check_spectra_disjoint([1.0 + 0j], [2.0 + 0j])
        assert not excite.check_spectra_disjoint([1.0 + 0j], [1.0 + 0j, 3.0 + 0j])


class TestFirAnnihilator:
    def test_first_order_coefficients(self):
        # (z - e^{-0.1}) (z - e^{-0.2}) expanded by hand
        spec = make_spec([2.0], 1.0)
        ann = excite.fir_annihilator(spec, 0.1, 12)
        expected = np.array([
            1.0,
            -(math.exp(-0.1) + math.exp(-0.2)),
            math.exp(-0.3),
        ])
        assert np.max(np.abs(ann.fir - expected)) <= 1e-12
        assert ann.matrix.shape == (12, 10)
        assert matkit.numerical_rank(ann.matrix) == 10

    def test_zero_beta_gives_unit_root(self):
        spec = make_spec([2.0], 0.0)
        ann = excite.fir_annihilator(spec, 0.3, 8)
        assert abs(np.polyval(ann.fir, 1.0)) <= 1e-12

    def test_minimal_width_single_column(self):
        spec = make_spec([2.0], 1.0)
        ann = excite.fir_annihilator(spec, 0.3, 3)
        assert ann.width == 1

    def test_too_few_samples(self):
        spec = make_spec([2.0], 1.0)
        with pytest.raises(DimensionError):
            excite.fir_annihilator(spec, 0.3, 2)

    def test_kills_initial_state_response(self, rng):
        spec = make_spec([3.0, 2.0], 0.8, n=2)
        ts = 0.25
        N = 15
        ann = excite.fir_annihilator(spec, ts, N)
        ref = filterbank.build_companion(spec)
        ArT = ref.A.T
        for _ in range(10):
            x0 = rng.standard_normal(2)
            rows = np.column_stack([
                (matkit.mat_exp(ArT * (k * ts)) - np.exp(-spec.beta * k * ts) * np.eye(2)) @ x0
                for k in range(1, N + 1)
            ])
            assert np.max(np.abs(rows @ ann.matrix)) <= 1e-9 * max(
                np.linalg.norm(x0), 1e-12
            )


class TestNullspaceAnnihilator:
    def test_first_order_width(self):
        spec = make_spec([2.0], 1.0)
        times = np.linspace(0.2, 2.0, 9)
        ann = excite.nullspace_annihilator(spec, times)
        # coordinate matrix is the single row e^{-2 t_i} - e^{-t_i}: rank 1
        assert ann.width == 8

    def test_orthonormal_columns(self):
        spec = make_spec([3.0, 2.0], 0.8, n=2)
        ann = excite.nullspace_annihilator(spec, np.linspace(0.3, 3.0, 10))
        gram = ann.matrix.T @ ann.matrix
        assert np.max(np.abs(gram - np.eye(ann.width))) <= 1e-12

    def test_contains_uniform_route_span(self):
        spec = make_spec([3.0, 2.0], 0.8, n=2)
        ts, N = 0.25, 12
        uniform = excite.fir_annihilator(spec, ts, N)
        times = ts * np.arange(1, N + 1)
        general = excite.nullspace_annihilator(spec, times)
        W_u = uniform.matrix
        W_g = general.matrix
        projection = W_g @ (W_g.T @ W_u)
        assert np.max(np.abs(projection - W_u)) <= 1e-9

    def test_kills_initial_state_response_nonuniform(self, rng):
        spec = make_spec([3.0, 2.0], 0.8, n=2)
        times = np.sort(rng.uniform(0.1, 3.0, 9))
        ann = excite.nullspace_annihilator(spec, times)
        ref = filterbank.build_companion(spec)
        ArT = ref.A.T
        x0 = rng.standard_normal(2)
        rows = np.column_stack([
            (matkit.mat_exp(ArT * t) - np.exp(-spec.beta * t) * np.eye(2)) @ x0
            for t in times
        ])
        assert np.max(np.abs(rows @ ann.matrix)) <= 1e-9 * np.linalg.norm(x0)

    def test_rejects_unordered_times(self):
        spec = make_spec([2.0], 1.0)
        with pytest.raises(ValueError):
            excite.nullspace_annihilator(spec, [0.3, 0.2, 0.5])


class TestApplication:
    def test_identity_mode_leaves_data_unchanged(self, rng):
        M = rng.standard_normal((3, 6))
        ident = excite.Annihilator(matrix=np.eye(6), route="general-nullspace",
                                   n=1, beta=1.0)
        assert np.array_equal(excite.apply_annihilator(M, ident), M)

    def test_dimension_mismatch(self, rng):
        spec = make_spec([2.0], 1.0)
        ann = excite.fir_annihilator(spec, 0.3, 8)
        with pytest.raises(DimensionError):
            excite.apply_annihilator(rng.standard_normal((2, 7)), ann)

    def test_fir_streaming_matches_toeplitz_product(self, rng):
        spec = make_spec([3.0, 2.0], 0.8, n=2)
        ann = excite.fir_annihilator(spec, 0.25, 14)
        M = rng.standard_normal((5, 14))
        toeplitz_route = excite.apply_annihilator(M, ann)
        fir_route = excite.apply_fir(M, ann)
        assert np.max(np.abs(toeplitz_route - fir_route)) <= 1e-12

    def test_fir_streaming_requires_uniform_route(self, rng):
        spec = make_spec([2.0], 1.0)
        ann = excite.nullspace_annihilator(spec, np.linspace(0.2, 2.0, 8))
        with pytest.raises(ValueError):
            excite.apply_fir(rng.standard_normal((2, 8)), ann)


class TestExports:
    def test_excitation_csv(self, tmp_path):
        plan = excite.gen_pe_sequence(seed=1, m=2, order=2, count=8, ts=0.2)
        path = tmp_path / "excitation.csv"
        excite.write_excitation_csv(plan, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "k,d_1,d_2"
        assert len(lines) == 9
        row = lines[3].split(",")
        assert int(row[0]) == 2
        assert float(row[1]) == plan.d[2, 0]

    def test_annihilator_csv_and_sidecar(self, tmp_path):
        spec = make_spec([2.0], 1.0)
        ann = excite.fir_annihilator(spec, 0.3, 6)
        csv_path = tmp_path / "annihilator.csv"
        excite.write_annihilator_csv(ann, csv_path)
        lines = csv_path.read_text().strip().splitlines()
        assert len(lines) == 6
        assert len(lines[0].split(",")) == ann.width
        sidecar = json.loads(excite.annihilator_sidecar_json(ann))
        assert sidecar["route"] == "uniform-fir"
        assert sidecar["n"] == 1
        assert sidecar["T_S"] == 0.3
        assert len(sidecar["fir"]) == 3
        assert "\n" not in excite.annihilator_sidecar_json(ann)

    def test_excitation_failure_reports_rank(self, monkeypatch):
        monkeypatch.setattr(excite, "check_pe_order", lambda *a, **k: False)
        with pytest.raises(ExcitationError) as err:
            excite.gen_pe_sequence(seed=0, m=1, order=2, count=10, ts=0.1,
                                   max_retries=3)
        assert "rank" in str(err.value)
