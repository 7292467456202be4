"""Model-based ground truth used to verify every data-driven quantity.

With full knowledge of the plant, the stacked filter state
chi = col(zeta, mu) obeys an LTI model

    chi' = A chi + B u + G exp(A_rp^T t) x0,

where A_rp is the output Kronecker expansion of the reference companion
matrix and x0 the (unknown to the data-driven side) plant initial
state.  This module assembles (A, B, G) from the plant coefficients,
evaluates the induced disturbance on the delta signal, and provides
structural and adaptive baselines for cross-checking.
"""

from dataclasses import dataclass

import numpy as np

from . import filterbank, matkit, plant as plant_mod
from .errors import AssumptionError, DimensionError
from .matkit import DEFAULT_POLICY, NumericPolicy


@dataclass(frozen=True)
class CheckReport:
    """One named numerical check: measured value against its threshold."""

    name: str
    value: float
    threshold: float
    passed: bool

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name} value={self.value:.6e} threshold={self.threshold:.6e}"


@dataclass(frozen=True)
class FilterStateDynamics:
    """Exact dynamics (A, B, G) of the stacked filter state col(zeta, mu)."""

    A: np.ndarray  # (m+p)n x (m+p)n
    B: np.ndarray  # (m+p)n x m
    G: np.ndarray  # (m+p)n x pn
    model: plant_mod.DiffOpModel
    spec: filterbank.FilterSpec
    reachable: bool

    @property
    def dim(self):
        return self.A.shape[0]


def build_filtered_dynamics(model, spec, policy: NumericPolicy = DEFAULT_POLICY):
    """Assemble the exact filter-state dynamics from the plant coefficients.

    The plant must satisfy the structural admissibility gate (coprime
    SISO polynomials, or a minimal MIMO canonical realization); the
    reachability of the resulting pair (A, B) is verified numerically
    and reported.
    """
    plant_mod.validate_model(model, policy)
    n, m, p = model.n, model.m, model.p
    if (spec.n, spec.m, spec.p) != (n, m, p):
        raise DimensionError("filter spec dimensions do not match the plant model")
    ref = filterbank.build_companion(spec)
    mn, pn = m * n, p * n
    q = mn + pn

    A = np.zeros((q, q))
    A[:mn, :mn] = ref.A_input
    # Input coupling into the output-filter block: last p rows carry (B_n ... B_1).
    A[q - p :, :mn] = np.hstack([model.b_coefs[n - 1 - k] for k in range(n)])
    A[mn:, mn:] = companion_block_output(model)

    B = np.zeros((q, m))
    B[:mn, :] = ref.B_input

    ss = plant_mod.realize_observability_canonical(model)
    G = np.zeros((q, pn))
    G[mn:, :] = ref.B_output @ ss.C

    reach = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(q)])
    reachable = matkit.numerical_rank(reach, policy.rank_tol) == q
    return FilterStateDynamics(A=A, B=B, G=G, model=model, spec=spec,
                               reachable=reachable)


def companion_block_output(model):
    """Block companion of the plant output coefficients (-A_n ... -A_1)."""
    n, p = model.n, model.p
    pn = p * n
    blk = np.zeros((pn, pn))
    if n > 1:
        blk[: pn - p, p:] = np.eye(p * (n - 1))
    blk[pn - p :, :] = np.hstack([-model.a_coefs[n - 1 - k] for k in range(n)])
    return blk


def epsilon_trajectory(spec, dynamics, x0, times):
    """Columns of the initial-condition disturbance on the delta signal.

    epsilon(t) = Gamma (exp(A_rp^T t) - exp(-beta t) I) x0, with Gamma
    the unique solution of Gamma A_rp^T + beta Gamma = G.  The value at
    t = 0 is exactly zero by construction and is enforced as such.
    """
    ref = filterbank.build_companion(spec)
    Arp_T = ref.A_output.T
    pn = Arp_T.shape[0]
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != pn:
        raise DimensionError(f"x0 must have length {pn}")
    q = dynamics.dim
    gamma = matkit.solve_sylvester(spec.beta * np.eye(q), Arp_T, dynamics.G)
    times = np.asarray(times, dtype=float).reshape(-1)
    cols = np.zeros((q, times.size))
    for k, t in enumerate(times):
        if t == 0.0:
            continue
        ft = matkit.mat_exp(Arp_T * t) - np.exp(-spec.beta * t) * np.eye(pn)
        cols[:, k] = gamma @ (ft @ x0)
    return cols


def delta_consistency_residual(record, dynamics, eps_cols,
                               policy: NumericPolicy = DEFAULT_POLICY):
    """Max-norm residual of delta against its exact reconstruction.

    Checks max_k ||delta(t_k) - A phi(t_k) - B upsilon(t_k) - eps(t_k)||_inf
    with pass threshold residual_tol * (1 + max ||delta||_inf).
    """
    delta = record.delta.T
    phi = record.phi.T
    upsilon = record.upsilon.T
    if eps_cols.shape != delta.shape:
        raise DimensionError("disturbance columns must match the delta samples")
    residual = delta - dynamics.A @ phi - dynamics.B @ upsilon - eps_cols
    value = float(np.max(np.abs(residual))) if residual.size else 0.0
    threshold = policy.residual_tol * (1.0 + float(np.max(np.abs(delta), initial=0.0)))
    return CheckReport("delta_consistency", value, threshold, value <= threshold)


def regression_parameters(model):
    """Parameter vector reproducing psi from chi for zero plant initial state.

    With psi = y + (-c_n .. -c_1) mu, the exact linear relation is
    psi = theta^T chi (plus a term decaying from the plant initial
    state), where theta = col(b_n..b_1, -a_n..-a_1) in the ascending
    filter-state ordering used here.
    """
    if not model.is_siso:
        raise DimensionError("regression baseline is defined for SISO records only")
    return np.concatenate([model.b[::-1], -model.a[::-1]])


@dataclass(frozen=True)
class ThetaEstimate:
    """Trajectory and outcome of the normalized-gradient parameter estimator."""

    theta_path: np.ndarray          # per-sample estimate, regressor coordinates
    theta_final: np.ndarray
    prediction_errors: np.ndarray   # psi_k - theta_k^T chi_k per sample
    regressor_norms: np.ndarray
    b_est: np.ndarray               # mapped back to (b_1 .. b_n)
    a_est: np.ndarray               # mapped back to (a_1 .. a_n)


def gradient_estimator(record, spec, theta0=None, substeps=20):
    """Normalized-gradient parameter estimator driven by the record.

    Integrates theta' = (psi - theta^T chi) / (1 + chi^T chi) * chi
    with an explicit scheme holding the regressor constant between
    samples (``substeps`` Euler steps per sampling interval).
    Convergence to the true parameters is not asserted; it depends on
    the richness of the regressor.
    """
    if record.u.shape[1] != 1 or record.y.shape[1] != 1:
        raise DimensionError("gradient estimator expects a SISO record")
    n = spec.n
    chi = record.chi
    psi = record.y[:, 0] + record.mu @ (-spec.c[::-1])
    dim = chi.shape[1]
    theta = np.zeros(dim) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    if theta.size != dim:
        raise DimensionError(f"theta0 must have length {dim}")

    steps = record.n_samples - 1
    path = np.zeros((record.n_samples, dim))
    path[0] = theta
    errors = np.zeros(record.n_samples)
    errors[0] = psi[0] - theta @ chi[0]
    for k in range(steps):
        dt = (record.times[k + 1] - record.times[k]) / substeps
        xk = chi[k]
        denom = 1.0 + xk @ xk
        for _ in range(substeps):
            theta = theta + dt * ((psi[k] - theta @ xk) / denom) * xk
        path[k + 1] = theta
        errors[k + 1] = psi[k + 1] - theta @ chi[k + 1]

    return ThetaEstimate(
        theta_path=path,
        theta_final=theta.copy(),
        prediction_errors=errors,
        regressor_norms=np.linalg.norm(chi, axis=1),
        b_est=theta[:n][::-1].copy(),
        a_est=-theta[n:][::-1].copy(),
    )


def _report(name, diff, scale, tol):
    threshold = float(tol * (1.0 + scale))
    return CheckReport(name, float(diff), threshold, bool(diff <= threshold))


def verify_interconnection_decomposition(model, spec,
                                         policy: NumericPolicy = DEFAULT_POLICY):
    """Structural check of the reachable/unreachable state-space split.

    The cascade of the plant and the two state filters is similar, via
    an explicit block transform P, to a block-triangular system whose
    reachable block is exactly the filter-state dynamics (A, B) and
    whose unreachable block is the transposed reference matrix.  All
    block identities are verified numerically and reported.
    """
    plant_mod.validate_model(model, policy)
    dyn = build_filtered_dynamics(model, spec, policy)
    ss = plant_mod.realize_observability_canonical(model)
    ref = filterbank.build_companion(spec)
    n, m, p = model.n, model.m, model.p
    mn, pn = m * n, p * n
    q = mn + pn

    A_i = np.zeros((q + pn, q + pn))
    A_i[:mn, :mn] = ref.A_input
    A_i[mn:q, mn:q] = ref.A_output
    A_i[mn:q, q:] = ref.B_output @ ss.C
    A_i[q:, q:] = ss.A
    B_i = np.vstack([ref.B_input, np.zeros((pn, m)), ss.B])

    O = plant_mod.observability_matrix(ss, n)
    M = plant_mod.markov_toeplitz(ss, n)
    c_ext = np.concatenate(([1.0], spec.c))
    powers = [np.linalg.matrix_power(ss.A, k) for k in range(n + 1)]
    q_of_A = sum(c_ext[k] * powers[n - k] for k in range(n + 1))
    F_cols = []
    for j in range(1, n + 1):
        F_cols.append(sum(c_ext[i] * powers[n - j - i] for i in range(n - j + 1)) @ ss.B)
    F = np.hstack(F_cols)
    O_inv = np.linalg.inv(O)
    U1 = F - q_of_A @ O_inv @ M
    U2 = q_of_A @ O_inv

    P = np.eye(q + pn)
    P[q:, :mn] = U1
    P[q:, mn:q] = U2
    T = np.linalg.solve(P, A_i @ P)
    Bt = np.linalg.solve(P, B_i)

    tol = policy.decomposition_tol
    reports = [
        _report("transformed_top_left_is_filter_dynamics",
                np.max(np.abs(T[:q, :q] - dyn.A)), np.max(np.abs(dyn.A)), tol),
        _report("transformed_bottom_right_is_reference_transpose",
                np.max(np.abs(T[q:, q:] - ref.A_output.T)),
                np.max(np.abs(ref.A_output)), tol),
        _report("transformed_bottom_left_is_zero",
                np.max(np.abs(T[q:, :q])), np.max(np.abs(A_i)), tol),
        _report("transformed_input_matrix",
                max(np.max(np.abs(Bt[:q] - dyn.B)), np.max(np.abs(Bt[q:]))),
                1.0, tol),
    ]
    # Closed-form rows of the transform: C U1 = (B_n ... B_1) and
    # C U2 = (c_n I - A_n ... c_1 I - A_1); SISO reduces to C U1 = B^T.
    cu1_target = np.hstack([model.b_coefs[n - 1 - k] for k in range(n)])
    cu2_target = np.hstack(
        [spec.c[n - 1 - k] * np.eye(p) - model.a_coefs[n - 1 - k] for k in range(n)]
    )
    reports.append(_report("output_row_of_input_transform",
                           np.max(np.abs(ss.C @ U1 - cu1_target)),
                           np.max(np.abs(cu1_target)), tol))
    reports.append(_report("output_row_of_state_transform",
                           np.max(np.abs(ss.C @ U2 - cu2_target)),
                           np.max(np.abs(cu2_target)), tol))
    return reports
