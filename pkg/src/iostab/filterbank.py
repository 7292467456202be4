"""Reference filters, the plant-filter experiment system, and controllers.

The filter bank driven by the plant input u and output y is

    zeta'    = (A_r (x) I_m) zeta + (B_r (x) I_m) u     zeta(0) = 0
    mu'      = (A_r (x) I_p) mu   + (B_r (x) I_p) y     mu(0)   = 0
    phi'     = -beta phi + chi                          phi(0)  = 0
    upsilon' = -beta upsilon + u                        upsilon(0) = 0
    delta    = chi - beta phi

with chi = col(zeta, mu), A_r the companion matrix of the monic
polynomial s^n + c_1 s^(n-1) + ... + c_n and B_r its last unit column.
delta is an output, never an integrated or differentiated state.
"""

from dataclasses import dataclass

import numpy as np

from . import matkit, plant as plant_mod
from .errors import DimensionError, ModelError
from .matkit import DEFAULT_POLICY, NumericPolicy


@dataclass(frozen=True)
class FilterSpec:
    """Filter coefficients c_1..c_n and the scalar beta.

    The polynomial s^n + c_1 s^(n-1) + ... + c_n must be Hurwitz and
    -beta must not be one of its roots; both are enforced at
    construction time.
    """

    c: np.ndarray
    beta: float
    n: int
    m: int
    p: int

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if c.size != self.n:
            raise ModelError(f"need exactly n = {self.n} filter coefficients")
        if self.m < 1 or self.p < 1:
            raise ModelError("m and p must be >= 1")
        roots = np.roots(np.concatenate(([1.0], c)))
        if roots.size and np.max(roots.real) >= -DEFAULT_POLICY.hurwitz_margin:
            raise ModelError(
                f"filter polynomial is not Hurwitz (max root real part "
                f"{np.max(roots.real):.3e})"
            )
        if not plant_mod.check_beta_admissible(c, self.beta):
            raise ModelError(f"-beta = {-self.beta} is a filter pole")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def for_model(cls, model, c, beta):
        return cls(c=np.asarray(c, dtype=float), beta=beta,
                   n=model.n, m=model.m, p=model.p)

    def q_poly(self):
        """Monic filter polynomial [1, c_1, ..., c_n] (descending)."""
        return np.concatenate(([1.0], self.c))


@dataclass(frozen=True)
class ReferenceMatrices:
    """Companion pair (A, B) and its input/output Kronecker expansions."""

    A: np.ndarray        # n x n companion
    B: np.ndarray        # n x 1 last unit column
    A_input: np.ndarray  # A (x) I_m
    B_input: np.ndarray  # B (x) I_m
    A_output: np.ndarray  # A (x) I_p
    B_output: np.ndarray  # B (x) I_p


def companion_from_tail(c):
    """Companion matrix with top block [0 | I] and bottom row (-c_n .. -c_1)."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = c.size
    A = np.zeros((n, n))
    if n > 1:
        A[: n - 1, 1:] = np.eye(n - 1)
    A[n - 1, :] = -c[::-1]
    return A


def build_companion(spec):
    """Reference matrices of a filter spec, with Kronecker expansions."""
    A = companion_from_tail(spec.c)
    B = np.zeros((spec.n, 1))
    B[-1, 0] = 1.0
    return ReferenceMatrices(
        A=A,
        B=B,
        A_input=matkit.kron_product(A, np.eye(spec.m)),
        B_input=matkit.kron_product(B, np.eye(spec.m)),
        A_output=matkit.kron_product(A, np.eye(spec.p)),
        B_output=matkit.kron_product(B, np.eye(spec.p)),
    )


@dataclass(frozen=True)
class ExperimentSystem:
    """Augmented LTI system of the plant and the full filter bank.

    The state is col(x, zeta, mu, phi, upsilon), driven by u.
    """

    plant: plant_mod.StateSpace
    spec: FilterSpec
    A: np.ndarray
    B: np.ndarray
    x_slice: slice
    zeta_slice: slice
    mu_slice: slice
    phi_slice: slice
    upsilon_slice: slice

    @property
    def order(self):
        return self.A.shape[0]

    def initial_state(self, x0_plant):
        """Augmented initial state with all filter states at zero."""
        x0_plant = np.asarray(x0_plant, dtype=float).reshape(-1)
        if x0_plant.size != self.plant.order:
            raise DimensionError(f"plant initial state must have length {self.plant.order}")
        x = np.zeros(self.order)
        x[self.x_slice] = x0_plant
        return x


def assemble_experiment_system(plant_ss, spec):
    """One augmented LTI system producing all filter signals from u.

    The plant output y = C x feeds the mu filter internally, so the
    only external input is u.
    """
    if plant_ss.n_inputs != spec.m or plant_ss.n_outputs != spec.p:
        raise DimensionError(
            f"plant has (m, p) = ({plant_ss.n_inputs}, {plant_ss.n_outputs}), "
            f"filter spec expects ({spec.m}, {spec.p})"
        )
    ref = build_companion(spec)
    n, m, p = spec.n, spec.m, spec.p
    h = plant_ss.order
    mn, pn = m * n, p * n
    q = mn + pn
    total = h + mn + pn + q + m

    x_sl = slice(0, h)
    zeta_sl = slice(h, h + mn)
    mu_sl = slice(h + mn, h + mn + pn)
    phi_sl = slice(h + mn + pn, h + mn + pn + q)
    ups_sl = slice(h + mn + pn + q, total)

    A = np.zeros((total, total))
    B = np.zeros((total, m))

    A[x_sl, x_sl] = plant_ss.A
    B[x_sl, :] = plant_ss.B

    A[zeta_sl, zeta_sl] = ref.A_input
    B[zeta_sl, :] = ref.B_input

    A[mu_sl, mu_sl] = ref.A_output
    A[mu_sl, x_sl] = ref.B_output @ plant_ss.C

    A[phi_sl, phi_sl] = -spec.beta * np.eye(q)
    A[phi_sl, zeta_sl] = np.eye(q)[:, :mn]
    A[phi_sl, mu_sl] = np.eye(q)[:, mn:]

    A[ups_sl, ups_sl] = -spec.beta * np.eye(m)
    B[ups_sl, :] = np.eye(m)

    return ExperimentSystem(
        plant=plant_ss, spec=spec, A=A, B=B,
        x_slice=x_sl, zeta_slice=zeta_sl, mu_slice=mu_sl,
        phi_slice=phi_sl, upsilon_slice=ups_sl,
    )


@dataclass(frozen=True)
class ExperimentRecord:
    """Sampled trajectories of all signals on the uniform grid t_k = k*T_S.

    Row k of each array is the sample at t_k; ``u`` holds the input
    value applied on [t_k, t_{k+1}) (the final row repeats the last
    held value).  All filter states are zero at t = 0.
    """

    times: np.ndarray
    u: np.ndarray
    y: np.ndarray
    zeta: np.ndarray
    mu: np.ndarray
    phi: np.ndarray
    upsilon: np.ndarray
    delta: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        for name in ("zeta", "mu", "phi", "upsilon"):
            first = np.asarray(getattr(self, name))[0]
            if np.any(first != 0.0):
                raise ModelError(f"filter state {name} must be zero at t = 0")

    @property
    def chi(self):
        """col(zeta, mu) per sample."""
        return np.hstack([self.zeta, self.mu])

    @property
    def n_samples(self):
        return self.times.size


def zoh_discretize(A, B, ts):
    """Exact zero-order-hold pair (A_d, B_d) via one block matrix exponential."""
    h, m = B.shape
    block = np.zeros((h + m, h + m))
    block[:h, :h] = A * ts
    block[:h, h:] = B * ts
    E = matkit.mat_exp(block)
    return E[:h, :h], E[:h, h:]


def simulate_zoh(system, x0_aug, inputs, ts):
    """Exact piecewise-constant-input simulation of the experiment system.

    ``inputs`` holds d_0..d_{N-1} (row k applied on [k*T_S, (k+1)*T_S));
    samples are recorded at t_k = k*T_S for k = 0..N.
    """
    if ts <= 0:
        raise ValueError("sampling time must be positive")
    x0_aug = np.asarray(x0_aug, dtype=float).reshape(-1)
    if x0_aug.size != system.order:
        raise DimensionError(f"augmented state must have length {system.order}")
    d = np.atleast_2d(np.asarray(inputs, dtype=float))
    if d.shape[0] == 1 and d.shape[1] > 1 and np.asarray(inputs).ndim == 1:
        d = d.T
    if d.shape[1] != system.B.shape[1]:
        raise DimensionError(f"inputs must have {system.B.shape[1]} columns")
    if not np.all(np.isfinite(d)):
        raise ValueError("inputs contain non-finite entries")

    steps = d.shape[0]
    Ad, Bd = zoh_discretize(system.A, system.B, ts)
    states = np.zeros((steps + 1, system.order))
    states[0] = x0_aug
    for k in range(steps):
        states[k + 1] = Ad @ states[k] + Bd @ d[k]

    spec = system.spec
    x = states[:, system.x_slice]
    zeta = states[:, system.zeta_slice]
    mu = states[:, system.mu_slice]
    phi = states[:, system.phi_slice]
    upsilon = states[:, system.upsilon_slice]
    chi = np.hstack([zeta, mu])
    delta = chi - spec.beta * phi
    y = x @ system.plant.C.T
    u = np.vstack([d, d[-1:]]) if steps else np.zeros((1, system.B.shape[1]))

    return ExperimentRecord(
        times=np.arange(steps + 1) * ts,
        u=u, y=y, zeta=zeta, mu=mu, phi=phi, upsilon=upsilon, delta=delta,
        x0=x0_aug[system.x_slice].copy(),
    )


@dataclass(frozen=True)
class ControllerRealization:
    """Dynamic output-feedback controller built on the filter states.

    State col(zeta, mu) of dimension (m+p)n, input y, output
    u = K col(zeta, mu); the zeta filter is driven by the controller's
    own output, so the closed loop has no algebraic loop.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    spec: FilterSpec
    gain: np.ndarray

    @property
    def order(self):
        return self.A.shape[0]


def build_controller(spec, gain):
    """Interconnect the filter bank with the static gain on col(zeta, mu)."""
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    n, m, p = spec.n, spec.m, spec.p
    mn, pn = m * n, p * n
    if gain.shape != (m, mn + pn):
        raise DimensionError(f"gain must be {m}x{mn + pn}, got {gain.shape}")
    ref = build_companion(spec)
    A = np.zeros((mn + pn, mn + pn))
    A[:mn, :] = ref.B_input @ gain
    A[:mn, :mn] += ref.A_input
    A[mn:, mn:] = ref.A_output
    B = np.zeros((mn + pn, p))
    B[mn:, :] = ref.B_output
    return ControllerRealization(A=A, B=B, C=gain.copy(), spec=spec, gain=gain.copy())


def closed_loop_matrix(plant_ss, controller):
    """Autonomous matrix of the plant-controller feedback interconnection.

    State ordering col(x, zeta, mu); the spectrum of this matrix is the
    stability certificate for the loop.
    """
    if plant_ss.n_inputs != controller.C.shape[0]:
        raise DimensionError("controller output dimension does not match plant input")
    if plant_ss.n_outputs != controller.B.shape[1]:
        raise DimensionError("controller input dimension does not match plant output")
    h = plant_ss.order
    q = controller.order
    A = np.zeros((h + q, h + q))
    A[:h, :h] = plant_ss.A
    A[:h, h:] = plant_ss.B @ controller.C
    A[h:, :h] = controller.B @ plant_ss.C
    A[h:, h:] = controller.A
    return A


def write_trajectory_csv(record, path):
    """Export an experiment record as CSV, full double precision."""
    m = record.u.shape[1]
    p = record.y.shape[1]
    header = ["t"]
    header += [f"u_{i + 1}" for i in range(m)]
    header += [f"y_{i + 1}" for i in range(p)]
    header += [f"zeta_{i + 1}" for i in range(record.zeta.shape[1])]
    header += [f"mu_{i + 1}" for i in range(record.mu.shape[1])]
    header += [f"phi_{i + 1}" for i in range(record.phi.shape[1])]
    header += [f"upsilon_{i + 1}" for i in range(record.upsilon.shape[1])]
    header += [f"delta_{i + 1}" for i in range(record.delta.shape[1])]
    data = np.hstack([
        record.times[:, None], record.u, record.y, record.zeta,
        record.mu, record.phi, record.upsilon, record.delta,
    ])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def random_filter_spec(model, rng, beta_range=(0.3, 1.5),
                       policy: NumericPolicy = DEFAULT_POLICY, max_tries=200):
    """Random admissible filter for a given plant model.

    Draws a Hurwitz filter polynomial and a beta, rejecting draws that
    share a root with the plant polynomial or hit -beta.
    """
    if model.is_siso:
        plant_eigs = np.roots(model.denominator())
    else:
        plant_eigs = matkit.spectrum(
            plant_mod.realize_observability_canonical(model).A
        )
    for _ in range(max_tries):
        c_full = plant_mod.poly_from_conjugate_roots(
            rng, model.n, (-2.0, -0.3), (-1.0, 1.0)
        )
        beta = float(rng.uniform(*beta_range))
        c = c_full[1:]
        if not plant_mod.check_beta_admissible(c, beta, policy):
            continue
        if model.is_siso:
            if not plant_mod.check_c_nonresonant(model.a, c, beta, policy):
                continue
        else:
            filt_eigs = np.roots(c_full)
            sep = np.abs(plant_eigs[:, None] - filt_eigs[None, :]).min()
            if sep <= 1e-3 or min(np.abs(filt_eigs + beta)) <= 1e-3:
                continue
            if min(np.abs(plant_eigs + beta)) <= 1e-3:
                continue
        return FilterSpec.for_model(model, c, beta)
    raise ModelError("could not draw an admissible filter spec")
