"""Excitation design and annihilator construction.

The disturbance column that the unknown plant initial state injects
into the sampled data is spanned by matrices of the form
exp(A_r^T t_i) - exp(-beta t_i) I.  Right-multiplying the data by a
matrix whose columns annihilate every such combination removes the
disturbance exactly.  Two constructions are provided:

* uniform-fir: for a uniform grid t_i = i*T_S, a banded lower-Toeplitz
  matrix whose band holds the coefficients of
  (z - exp(-beta*T_S)) * det(zI - exp(A_r^T T_S)); equivalently a
  causal FIR filter applied along each data row, keeping only the
  full-overlap outputs;
* general-nullspace: for arbitrary strictly increasing sample times,
  an orthonormal basis of the nullspace of the coordinate matrix of
  exp(A_r^T t_i) in the powers of A_r^T (first row shifted by
  exp(-beta t_i)).
"""

import json
from dataclasses import dataclass

import numpy as np

from . import filterbank, matkit
from .errors import ConditioningError, DimensionError, ExcitationError
from .matkit import DEFAULT_POLICY, NumericPolicy

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ExcitationPlan:
    """Piecewise-constant input sequence with a certified excitation order."""

    d: np.ndarray  # (N, m); row k applied on [k*T_S, (k+1)*T_S)
    ts: float
    order: int
    seed: int

    @property
    def count(self):
        return self.d.shape[0]

    @property
    def n_inputs(self):
        return self.d.shape[1]


@dataclass(frozen=True)
class Annihilator:
    """Right-multiplier that cancels the initial-state disturbance columns."""

    matrix: np.ndarray  # N x width
    route: str          # "uniform-fir" | "general-nullspace"
    n: int
    beta: float
    ts: float | None = None
    fir: np.ndarray | None = None  # (w_0, ..., w_{n+1}), descending, uniform route

    @property
    def count(self):
        return self.matrix.shape[0]

    @property
    def width(self):
        return self.matrix.shape[1]


def default_pe_order(n, m, p):
    """Excitation order covering both the SISO and MIMO sufficient conditions."""
    return 2 * ((m + p) * n + m)


def default_sample_count(n, m, order):
    """Sample count satisfying all stated excitation-length requirements."""
    return max(8 * n + 4, (m + 1) * order - 1 + order)


def check_pe_order(seq, order, policy: NumericPolicy = DEFAULT_POLICY):
    """True iff the depth-``order`` Hankel matrix of the sequence has full row rank."""
    data = np.atleast_2d(np.asarray(seq, dtype=float))
    if data.shape[0] == 1 and data.shape[1] > 1 and np.asarray(seq).ndim == 1:
        data = data.T
    H = matkit.build_hankel(data, order)
    return matkit.numerical_rank(H, policy.rank_tol) == order * data.shape[1]


def gen_pe_sequence(seed, m, order, count, ts, amplitude=1.0,
                    policy: NumericPolicy = DEFAULT_POLICY, max_retries=20):
    """Deterministic-from-seed excitation certified at the requested order.

    Uniform draws on [-amplitude, amplitude]; the certificate covers the
    full sequence d_0..d_{N-1} and, when the length permits, also the
    tail d_1..d_{N-1} (the tail is what the sufficient rank conditions
    quantify over).  Retries with fresh draws up to ``max_retries``.
    """
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    if count < (m + 1) * order - 1:
        raise DimensionError(
            f"count {count} below the minimum (m+1)*order - 1 = {(m + 1) * order - 1}"
        )
    rng = np.random.default_rng(seed)
    check_tail = count >= (m + 1) * order
    last_rank = -1
    for _ in range(max_retries):
        d = rng.uniform(-amplitude, amplitude, size=(count, m))
        full_ok = check_pe_order(d, order, policy)
        tail_ok = check_pe_order(d[1:], order, policy) if check_tail else True
        if full_ok and tail_ok:
            return ExcitationPlan(d=d, ts=float(ts), order=order, seed=seed)
        last_rank = matkit.numerical_rank(matkit.build_hankel(d, order), policy.rank_tol)
    raise ExcitationError(
        f"could not certify excitation order {order} after {max_retries} draws "
        f"(last Hankel rank {last_rank}, target {order * m})"
    )


def check_sampling_pathology(spectra, beta, ts, policy: NumericPolicy = DEFAULT_POLICY):
    """True iff the sampling time is free of aliasing pathologies.

    Unsafe when two elements of {-beta} union the given spectra differ
    by 2*pi*h/T_S on the imaginary axis for a nonzero integer h.
    """
    if ts <= 0:
        raise ValueError("sampling time must be positive")
    pts = [np.atleast_1d(np.asarray(s, dtype=complex)).ravel() for s in
           (spectra if isinstance(spectra, (list, tuple)) else [spectra])]
    pts = np.concatenate(pts + [np.array([-beta], dtype=complex)])
    tol = policy.pathology_tol
    step = 2.0 * np.pi / ts
    for i in range(pts.size):
        for j in range(pts.size):
            if i == j:
                continue
            d = pts[j] - pts[i]
            if abs(d.real) > tol:
                continue
            h = round(d.imag / step)
            if h != 0 and abs(d - 1j * step * h) <= tol:
                return False
    return True


def check_spectra_disjoint(first, second, tol=1e-9):
    """True iff two spectra have no common point within tolerance."""
    a = np.atleast_1d(np.asarray(first, dtype=complex))
    b = np.atleast_1d(np.asarray(second, dtype=complex))
    return bool(np.abs(a[:, None] - b[None, :]).min() > tol)


def fir_annihilator(spec, ts, count, policy: NumericPolicy = DEFAULT_POLICY):
    """Banded Toeplitz annihilator for the uniform grid t_i = i*T_S.

    The band holds the n+2 coefficients of the monic polynomial
    (z - exp(-beta*T_S)) * det(zI - exp(A_r^T T_S)); the matrix has
    count - n - 1 columns of rank count - n - 1.
    """
    n = spec.n
    if count < n + 2:
        raise DimensionError(f"need at least n + 2 = {n + 2} samples, got {count}")
    if ts <= 0:
        raise ValueError("sampling time must be positive")
    ref = filterbank.build_companion(spec)
    disc = matkit.mat_exp(ref.A.T * ts)
    w = np.polymul(np.array([1.0, -np.exp(-spec.beta * ts)]), matkit.char_poly(disc))
    first_col = np.zeros(count)
    first_col[: n + 2] = w[::-1]
    W = matkit.build_toeplitz_lower(first_col, count, count - n - 1)
    return Annihilator(matrix=W, route="uniform-fir", n=n, beta=spec.beta,
                       ts=float(ts), fir=w)


def nullspace_annihilator(spec, times, policy: NumericPolicy = DEFAULT_POLICY):
    """Orthonormal nullspace annihilator for arbitrary sample times.

    Expands exp(A_r^T t_i) in the first n powers of A_r^T, shifts the
    constant coordinate by exp(-beta t_i), and returns an orthonormal
    basis of the nullspace of the resulting n x N coordinate matrix.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    n = spec.n
    N = times.size
    if N < n + 1:
        raise DimensionError(f"need at least n + 1 = {n + 1} samples, got {N}")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    ref = filterbank.build_companion(spec)
    ArT = ref.A.T
    e1 = np.zeros(n)
    e1[0] = 1.0
    powers = [np.linalg.matrix_power(ArT, j) for j in range(n)]
    basis = np.column_stack([P @ e1 for P in powers])
    theta = np.zeros((n, N))
    for i, t in enumerate(times):
        E = matkit.mat_exp(ArT * t)
        coords = np.linalg.solve(basis, E @ e1)
        recon = sum(coords[j] * powers[j] for j in range(n))
        err = np.max(np.abs(recon - E))
        if err > 1e-8 * max(1.0, np.max(np.abs(E))):
            raise ConditioningError(
                f"power-basis expansion failed at t = {t} (residual {err:.3e})"
            )
        theta[:, i] = coords
        theta[0, i] -= np.exp(-spec.beta * t)
    U, s, Vh = np.linalg.svd(theta)
    cutoff = policy.rank_tol if policy.rank_tol > 0 else max(theta.shape) * _EPS * (
        s[0] if s.size else 0.0
    )
    rank = int(np.count_nonzero(s > cutoff))
    W = Vh[rank:].T
    if W.shape[1] < N - n:
        raise ConditioningError(
            f"nullspace dimension {W.shape[1]} below the guaranteed {N - n}"
        )
    return Annihilator(matrix=W, route="general-nullspace", n=n, beta=spec.beta)


def apply_annihilator(M, annihilator):
    """Right-multiply a data matrix by the annihilator."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != annihilator.count:
        raise DimensionError(
            f"data has {M.shape[1]} columns, annihilator expects {annihilator.count}"
        )
    return M @ annihilator.matrix


def apply_fir(M, annihilator):
    """Streaming FIR route: convolve each row, keep full-overlap outputs.

    Only defined for the uniform route; agrees with the Toeplitz
    product to machine precision.
    """
    if annihilator.route != "uniform-fir" or annihilator.fir is None:
        raise ValueError("FIR streaming is only defined for the uniform route")
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != annihilator.count:
        raise DimensionError(
            f"data has {M.shape[1]} columns, annihilator expects {annihilator.count}"
        )
    return np.vstack([np.convolve(row, annihilator.fir, mode="valid") for row in M])


def write_excitation_csv(plan, path):
    """Export an excitation plan as CSV with header k,d_1..d_m."""
    header = ["k"] + [f"d_{i + 1}" for i in range(plan.n_inputs)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for k, row in enumerate(plan.d):
            fh.write(",".join([str(k)] + [f"{v:.17g}" for v in row]) + "\n")


def write_annihilator_csv(annihilator, path):
    """Export the annihilator matrix as CSV (no header), full precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in annihilator.matrix:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def annihilator_sidecar_json(annihilator):
    """One-line JSON sidecar describing the annihilator construction."""
    payload = {
        "route": annihilator.route,
        "n": annihilator.n,
        "beta": annihilator.beta,
        "T_S": annihilator.ts,
        "fir": None if annihilator.fir is None else [float(v) for v in annihilator.fir],
    }
    return json.dumps(payload, sort_keys=True)
