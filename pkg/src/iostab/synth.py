"""Sampled data matrices, the feasibility program, and gain extraction.

Given filtered data (delta_f, phi_f, upsilon_f), a stabilizing static
gain on the filter state exists iff there is a matrix Z with

    He(delta_f Z^T) < 0,   He(Z phi_f^T) > 0,   Sk(Z phi_f^T) = 0,

and then K = upsilon_f Z^T (Z phi_f^T)^{-1}.  The program is solved as
a margin-maximization problem: the skew equality is eliminated by a
nullspace parameterization of vec(Z), the margin t is pushed up by a
log-barrier path-following method over the two matrix-inequality
blocks, and Z is normalized by a Frobenius ball (the inequalities are
homogeneous in Z, so an unnormalized margin would be unbounded or
zero).  Every returned certificate is re-checked by eigenvalue
computations that share no code with the solver.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import filterbank, matkit, oracle, plant as plant_mod
from .errors import ConditioningError, ConvergenceError, DimensionError, GateError
from .matkit import DEFAULT_POLICY, NumericPolicy


@dataclass(frozen=True)
class DataMatrices:
    """Columns of (delta, phi, upsilon) at the selected sample times."""

    delta: np.ndarray    # (m+p)n x N
    phi: np.ndarray      # (m+p)n x N
    upsilon: np.ndarray  # m x N
    times: np.ndarray    # (N,)

    @property
    def count(self):
        return self.delta.shape[1]


@dataclass(frozen=True)
class FilteredData:
    """Data matrices after right-multiplication by an annihilator."""

    delta: np.ndarray
    phi: np.ndarray
    upsilon: np.ndarray
    route: str
    scale: float = 1.0  # joint divisor already applied to all three blocks

    @property
    def width(self):
        return self.delta.shape[1]

    def normalized(self):
        """Jointly rescale all three blocks to unit peak spectral norm.

        The downstream quantities (rank gate, recovered dynamics, gain)
        are invariant under a joint positive scaling; normalizing keeps
        the feasibility certificates and equality residuals on an O(1)
        scale.
        """
        sigma = max(
            np.linalg.norm(self.delta, 2),
            np.linalg.norm(self.phi, 2),
            np.linalg.norm(self.upsilon, 2),
        )
        if sigma == 0.0:
            return self
        return FilteredData(
            delta=self.delta / sigma,
            phi=self.phi / sigma,
            upsilon=self.upsilon / sigma,
            route=self.route,
            scale=self.scale * sigma,
        )


def assemble_data_matrices(record, sample_indices=None):
    """Extract the (delta, phi, upsilon) columns at the chosen samples.

    Defaults to all samples after t = 0; indices must be strictly
    increasing and the first selected time must be positive.
    """
    if sample_indices is None:
        sample_indices = np.arange(1, record.n_samples)
    idx = np.asarray(sample_indices, dtype=int)
    if idx.size == 0:
        raise DimensionError("at least one sample index is required")
    if np.any(idx < 0) or np.any(idx >= record.n_samples):
        raise IndexError("sample index out of range")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("sample indices must be strictly increasing")
    times = record.times[idx]
    if times[0] <= 0.0:
        raise ValueError("the first selected sample time must be positive")
    return DataMatrices(
        delta=record.delta[idx].T.copy(),
        phi=record.phi[idx].T.copy(),
        upsilon=record.upsilon[idx].T.copy(),
        times=times.copy(),
    )


def filter_data(dm, annihilator):
    """Right-multiply all three data matrices by the same annihilator."""
    if dm.count != annihilator.count:
        raise DimensionError(
            f"data has {dm.count} columns, annihilator expects {annihilator.count}"
        )
    W = annihilator.matrix
    return FilteredData(
        delta=dm.delta @ W,
        phi=dm.phi @ W,
        upsilon=dm.upsilon @ W,
        route=annihilator.route,
    )


def rank_gate(fd, policy: NumericPolicy = DEFAULT_POLICY, n=None, m=None, p=None):
    """Full-rank test of col(phi_f, upsilon_f) against (m+p)n + m.

    Returns ``(passed, achieved_rank, target)``.  Optional n, m, p
    cross-validate the block shapes.
    """
    q = fd.delta.shape[0]
    m_rows = fd.upsilon.shape[0]
    if n is not None and m is not None and p is not None:
        if q != (m + p) * n or m_rows != m:
            raise DimensionError(
                f"filtered data shaped for (m+p)n = {q}, m = {m_rows}; "
                f"scenario says n={n}, m={m}, p={p}"
            )
    target = q + m_rows
    stacked = np.vstack([fd.phi, fd.upsilon])
    achieved = matkit.numerical_rank(stacked, policy.rank_tol)
    return achieved == target, achieved, target


def rank_gate_diagnostics(fd):
    """Conditioning diagnostic for a failed (or near-failed) rank gate."""
    stacked = np.vstack([fd.phi, fd.upsilon])
    s = np.linalg.svd(stacked, compute_uv=False)
    return {
        "singular_values": [float(v) for v in s],
        "sigma_max": float(s[0]) if s.size else 0.0,
        "sigma_min": float(s[-1]) if s.size else 0.0,
        "shape": list(stacked.shape),
    }


def estimate_filter_dynamics(fd, policy: NumericPolicy = DEFAULT_POLICY):
    """Recover the filter-state dynamics pair (A, B) from filtered data.

    Validation identity only; the synthesis path never uses it.
    Refuses when the rank gate does not pass.
    """
    passed, achieved, target = rank_gate(fd, policy)
    if not passed:
        raise GateError(
            f"rank gate not passed (achieved {achieved}, target {target}); "
            "the recovery identity is not available"
        )
    q = fd.delta.shape[0]
    stacked = np.vstack([fd.phi, fd.upsilon])
    AB = fd.delta @ matkit.pinv_svd(stacked, policy.pinv_tol)
    return AB[:, :q], AB[:, q:]


@dataclass
class SynthesisResult:
    """Outcome of the feasibility program, with certified residuals."""

    status: str                 # "feasible" | "infeasible"
    Z: np.ndarray | None
    margin: float               # certified min margin of both blocks
    strict_threshold: float
    residuals: dict
    data_scale: float
    barrier_stages: int = 0
    newton_steps: int = 0
    gain: np.ndarray | None = None
    closed_loop_eigs: np.ndarray | None = field(default=None)


def check_lmi_solution(fd, Z, policy: NumericPolicy = DEFAULT_POLICY):
    """Independent certificate check: eigenvalues and skew residual only.

    Shares no code with the solver.  Returns the measured quantities;
    ``margin`` is the smaller of the two definiteness gaps.
    """
    S1 = fd.delta @ Z.T
    S1 = S1 + S1.T
    P = Z @ fd.phi.T
    S2 = P + P.T
    max_eig_neg_block = float(np.max(scipy.linalg.eigvalsh(S1)))
    min_eig_pos_block = float(np.min(scipy.linalg.eigvalsh(S2)))
    skew_norm = float(np.linalg.norm(P - P.T, "fro"))
    margin = min(-max_eig_neg_block, min_eig_pos_block)
    return {
        "max_eig_He": max_eig_neg_block,
        "min_eig_P": min_eig_pos_block,
        "skew_norm": skew_norm,
        "margin": float(margin),
    }


def _skew_nullspace(phi):
    """Orthonormal basis of {vec(Z) : Z phi^T symmetric} (C-order vec)."""
    q, nbar = phi.shape
    n_pairs = q * (q - 1) // 2
    E = np.zeros((n_pairs, q * nbar))
    row = 0
    for a in range(q):
        for b in range(a + 1, q):
            E[row, a * nbar : (a + 1) * nbar] = phi[b]
            E[row, b * nbar : (b + 1) * nbar] -= phi[a]
            row += 1
    if n_pairs == 0:
        return np.eye(q * nbar)
    _, s, Vh = np.linalg.svd(E, full_matrices=True)
    cutoff = max(E.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.count_nonzero(s > cutoff))
    return Vh[rank:].T


def _logdet_chol(M):
    L = np.linalg.cholesky(M)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _is_pd(M):
    try:
        np.linalg.cholesky(M)
        return True
    except np.linalg.LinAlgError:
        return False


class _BarrierProblem:
    """Margin maximization over the equality-eliminated coordinates."""

    def __init__(self, delta, phi, V, rho):
        self.q, self.nbar = delta.shape
        self.V = V
        self.r = V.shape[1]
        self.rho2 = rho * rho
        basis = V.T.reshape(self.r, self.q, self.nbar)
        # Per-coordinate responses of the two barrier blocks.
        self.D1 = np.einsum("ab,ijb->iaj", delta, basis)  # delta @ Z_i^T
        self.D1 = -(self.D1 + np.swapaxes(self.D1, 1, 2))
        self.D2 = np.einsum("iab,jb->iaj", basis, phi)    # Z_i @ phi^T
        self.D2 = self.D2 + np.swapaxes(self.D2, 1, 2)

    def blocks(self, z, t):
        M1 = np.tensordot(z, self.D1, axes=1) - t * np.eye(self.q)
        M2 = np.tensordot(z, self.D2, axes=1) - t * np.eye(self.q)
        return M1, M2

    def in_domain(self, z, t):
        b = self.rho2 - z @ z
        if b <= 0.0:
            return False
        M1, M2 = self.blocks(z, t)
        return _is_pd(M1) and _is_pd(M2)

    def value(self, z, t, tau):
        M1, M2 = self.blocks(z, t)
        b = self.rho2 - z @ z
        return -tau * t - _logdet_chol(M1) - _logdet_chol(M2) - np.log(b)

    def grad_hess(self, z, t, tau):
        M1, M2 = self.blocks(z, t)
        b = self.rho2 - z @ z
        g = np.zeros(self.r + 1)
        G_rows = []
        for M, D in ((M1, self.D1), (M2, self.D2)):
            lam, Q = np.linalg.eigh(M)
            S = (Q / np.sqrt(lam)) @ Q.T  # M^{-1/2}
            Minv = (Q / lam) @ Q.T
            g[: self.r] -= np.einsum("ab,iab->i", Minv, D)
            g[self.r] += float(np.trace(Minv))
            K = np.einsum("ab,ibc,cd->iad", S, D, S).reshape(self.r, -1)
            G = np.vstack([K, -Minv.reshape(1, -1)])
            G_rows.append(G)
        g[: self.r] += (2.0 / b) * z
        g[self.r] += -tau
        H = G_rows[0] @ G_rows[0].T + G_rows[1] @ G_rows[1].T
        H[: self.r, : self.r] += (2.0 / b) * np.eye(self.r)
        H[: self.r, : self.r] += (4.0 / (b * b)) * np.outer(z, z)
        return g, H


def _warm_start(problem, delta, phi, rho, rounds=3, shift=0.05):
    """Cyclic projections onto the two shifted cones within the affine set."""
    q, r = problem.q, problem.r
    TA1 = (-problem.D1).reshape(r, q * q).T  # z -> vec(He(delta Z^T))
    TA2 = problem.D2.reshape(r, q * q).T     # z -> vec(He(Z phi^T))
    TA1_pinv = np.linalg.pinv(TA1)
    TA2_pinv = np.linalg.pinv(TA2)
    eps = shift * rho
    z = problem.V.T @ phi.reshape(-1)
    for _ in range(rounds):
        for T, T_pinv, clip_hi in ((TA1, TA1_pinv, True), (TA2, TA2_pinv, False)):
            S = (T @ z).reshape(q, q)  # symmetric by construction
            lam, Q = np.linalg.eigh(S)
            lam = np.minimum(lam, -eps) if clip_hi else np.maximum(lam, eps)
            target = (Q * lam) @ Q.T
            z = z + T_pinv @ (target.reshape(-1) - T @ z)
    if not np.all(np.isfinite(z)):
        z = np.zeros(r)
    norm = np.linalg.norm(z)
    if norm > 0.8 * rho:
        z = z * (0.8 * rho / norm)
    return z


def solve_stabilization_lmi(fd, policy: NumericPolicy = DEFAULT_POLICY,
                            gap_tol=1e-10, mu=20.0, max_stages=40,
                            max_newton=80):
    """Margin-maximizing solve of the stabilization feasibility program.

    Maximizes t subject to He(delta_f Z^T) <= -tI, He(Z phi_f^T) >= tI,
    Sk(Z phi_f^T) = 0 and ||Z||_F <= sqrt(width) (after internal column
    equilibration and unit spectral scaling of the data; feasibility is
    invariant under both).  The equality is eliminated exactly by a
    nullspace parameterization, the search space is restricted to the
    row space of the stacked data (orthogonal components affect no
    constraint product), and the inequality blocks are handled by a
    log-barrier path-following method started from an
    alternating-projections warm start.  The returned margin is
    re-measured by the independent checker; the result is feasible iff
    it exceeds ``strict_feasibility_factor * max(block norms)``.
    """
    q, nbar = fd.delta.shape
    strict_threshold = policy.strict_feasibility_factor * max(
        np.linalg.norm(fd.delta, 2), np.linalg.norm(fd.phi, 2)
    )

    def _degenerate(Z):
        return SynthesisResult(
            status="infeasible", Z=Z, margin=0.0,
            strict_threshold=strict_threshold,
            residuals={"max_eig_He": 0.0, "min_eig_P": 0.0, "skew_norm": 0.0,
                       "margin": 0.0},
            data_scale=fd.scale,
        )

    # Column equilibration: any annihilator right-multiplied by a
    # positive diagonal is still an annihilator, and all data products
    # with Z mapped accordingly are unchanged.
    stacked = np.vstack([fd.delta, fd.phi, fd.upsilon])
    col_norms = np.linalg.norm(stacked, axis=0)
    if np.all(col_norms == 0.0):
        return _degenerate(None)
    D_eq = np.where(col_norms > 0.0, 1.0 / np.maximum(col_norms, 1e-300), 1.0)
    delta = fd.delta * D_eq
    phi = fd.phi * D_eq
    upsilon = fd.upsilon * D_eq
    sigma = max(np.linalg.norm(delta, 2), np.linalg.norm(phi, 2),
                np.linalg.norm(upsilon, 2))
    delta = delta / sigma
    phi = phi / sigma

    # Exact reduction onto the row space of the stacked data: components
    # of Z orthogonal to it contribute nothing to any constraint product
    # but consume the norm ball, so the optimum never uses them.
    stacked_eq = np.vstack([delta, phi, upsilon / sigma])
    _, s_red, Vh_red = np.linalg.svd(stacked_eq, full_matrices=False)
    cutoff = max(stacked_eq.shape) * np.finfo(float).eps * (s_red[0] if s_red.size else 0.0)
    d = int(np.count_nonzero(s_red > cutoff))
    if d == 0:
        return _degenerate(None)
    R = Vh_red[:d]
    delta_r = delta @ R.T
    phi_r = phi @ R.T
    rho = float(np.sqrt(nbar))

    V = _skew_nullspace(phi_r)
    if V.shape[1] == 0:
        return _degenerate(np.zeros((q, nbar)))

    problem = _BarrierProblem(delta_r, phi_r, V, rho)
    z = _warm_start(problem, delta_r, phi_r, rho)
    M1, M2 = problem.blocks(z, 0.0)
    head = min(np.min(scipy.linalg.eigvalsh(M1)), np.min(scipy.linalg.eigvalsh(M2)))
    t = head - 0.1 * (1.0 + abs(head))
    if not problem.in_domain(z, t):  # pragma: no cover - defensive fallback
        z = np.zeros(problem.r)
        t = -1.0

    nu = 2 * q + 1
    tau = 1.0
    stages = 0
    newton_total = 0
    while True:
        for _ in range(max_newton):
            g, H = problem.grad_hess(z, t, tau)
            try:
                chol = scipy.linalg.cho_factor(H)
            except np.linalg.LinAlgError:
                H = H + 1e-10 * max(1.0, np.trace(H) / H.shape[0]) * np.eye(H.shape[0])
                chol = scipy.linalg.cho_factor(H)
            step = -scipy.linalg.cho_solve(chol, g)
            decrement = float(-g @ step)
            if decrement / 2.0 <= 1e-11:
                break
            f0 = problem.value(z, t, tau)
            alpha = 1.0
            while True:
                z_try = z + alpha * step[: problem.r]
                t_try = t + alpha * step[problem.r]
                if problem.in_domain(z_try, t_try) and (
                    problem.value(z_try, t_try, tau)
                    <= f0 - 0.25 * alpha * decrement
                ):
                    break
                alpha *= 0.5
                if alpha < 1e-16:
                    raise ConvergenceError(
                        f"barrier line search stalled at stage {stages} "
                        f"(tau={tau:.3e}, t={t:.3e}, decrement={decrement:.3e})"
                    )
            z = z + alpha * step[: problem.r]
            t = t + alpha * step[problem.r]
            newton_total += 1
        stages += 1
        if nu / tau <= gap_tol:
            break
        if stages >= max_stages:
            raise ConvergenceError(
                f"barrier did not close the gap after {stages} stages "
                f"(gap {nu / tau:.3e}, target {gap_tol:.3e})"
            )
        tau *= mu

    Y = (V @ z).reshape(q, d)
    # Map back: Y parameterizes the row-space coordinates of the
    # equilibrated problem; right-multiplying by D_eq restores a Z whose
    # products with the caller's (unequilibrated) data are identical.
    Z = (Y @ R) * D_eq
    measured = check_lmi_solution(fd, Z, policy)
    status = "feasible" if measured["margin"] > strict_threshold else "infeasible"
    return SynthesisResult(
        status=status,
        Z=Z,
        margin=measured["margin"],
        strict_threshold=strict_threshold,
        residuals=measured,
        data_scale=fd.scale,
        barrier_stages=stages,
        newton_steps=newton_total,
    )


def compute_gain(fd, Z, policy: NumericPolicy = DEFAULT_POLICY):
    """Gain K = upsilon_f Z^T (Z phi_f^T)^{-1} by a positive-definite solve.

    Z must satisfy the feasibility program: Z phi_f^T is required to be
    symmetric positive definite within tolerance.
    """
    P = Z @ fd.phi.T
    sym_defect = np.linalg.norm(P - P.T, "fro")
    scale = max(1.0, np.linalg.norm(P, "fro"))
    if sym_defect > 1e-6 * scale:
        raise ConditioningError(
            f"Z phi^T is not numerically symmetric (defect {sym_defect:.3e})"
        )
    P_sym = 0.5 * (P + P.T)
    min_eig = float(np.min(scipy.linalg.eigvalsh(P_sym)))
    if min_eig <= 0.0:
        raise ConditioningError(
            f"Z phi^T is not positive definite (min eigenvalue {min_eig:.3e})"
        )
    rhs = Z @ fd.upsilon.T
    try:
        gain_T = scipy.linalg.solve(P_sym, rhs, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"gain solve failed: {exc}") from exc
    return gain_T.T


def verify_synthesis(model, spec, gain, policy: NumericPolicy = DEFAULT_POLICY):
    """Stability report for a synthesized gain.

    Measures the spectral abscissa of the exact filter-state dynamics
    under the gain and of the full plant-controller interconnection;
    PASS requires both below ``-stability_margin``.
    """
    dyn = oracle.build_filtered_dynamics(model, spec, policy)
    direct = matkit.spectrum(dyn.A + dyn.B @ gain)
    ss = plant_mod.realize_observability_canonical(model)
    controller = filterbank.build_controller(spec, gain)
    loop = matkit.spectrum(filterbank.closed_loop_matrix(ss, controller))
    direct_max = float(np.max(direct.real))
    loop_max = float(np.max(loop.real))
    passed = direct_max < -policy.stability_margin and loop_max < -policy.stability_margin
    return {
        "direct_eigs": direct,
        "loop_eigs": loop,
        "direct_max_re": direct_max,
        "loop_max_re": loop_max,
        "passed": passed,
    }


def candidate_from_gain(fd, dynamics, gain):
    """Certificate candidate Z for a known stabilizing gain (smoke check).

    Builds a Lyapunov certificate P for the closed filter-state matrix
    and lifts col(P, K P) through the pseudoinverse of the stacked
    filtered data.  Exact only when the rank gate holds; intended for
    cross-checking, not synthesis.
    """
    A_cl = dynamics.A + dynamics.B @ gain
    q = A_cl.shape[0]
    P = matkit.solve_sylvester(A_cl, A_cl.T, -np.eye(q))
    P = 0.5 * (P + P.T)
    stacked = np.vstack([fd.phi, fd.upsilon])
    target = np.vstack([P, gain @ P])
    return (matkit.pinv_svd(stacked, 0.0) @ target).T
