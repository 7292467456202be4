"""Plant models and structural checks.

A plant is described by the coefficient matrices of an n-th order ODE
relating output derivatives to input derivatives,

    y^(n) + A_1 y^(n-1) + ... + A_n y = B_1 u^(n-1) + ... + B_n u,

with ``A_i`` of size p x p and ``B_i`` of size p x m.  The SISO case is
the p = m = 1 specialization with scalar coefficients a_i, b_i.
"""

from dataclasses import dataclass

import numpy as np

from . import matkit
from .errors import AssumptionError, DimensionError, ModelError, NotObservableError
from .matkit import DEFAULT_POLICY, NumericPolicy


@dataclass(frozen=True)
class DiffOpModel:
    """Coefficient matrices of the differential-operator plant form."""

    n: int
    m: int
    p: int
    a_coefs: tuple  # (A_1, ..., A_n), each p x p
    b_coefs: tuple  # (B_1, ..., B_n), each p x m

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.p < 1:
            raise ModelError("n, m, p must all be >= 1")
        if len(self.a_coefs) != self.n or len(self.b_coefs) != self.n:
            raise ModelError("need exactly n output and n input coefficient blocks")
        a = tuple(np.atleast_2d(np.asarray(Ai, dtype=float)) for Ai in self.a_coefs)
        b = tuple(np.atleast_2d(np.asarray(Bi, dtype=float)) for Bi in self.b_coefs)
        for Ai in a:
            if Ai.shape != (self.p, self.p):
                raise ModelError(f"output blocks must be {self.p}x{self.p}, got {Ai.shape}")
        for Bi in b:
            if Bi.shape != (self.p, self.m):
                raise ModelError(f"input blocks must be {self.p}x{self.m}, got {Bi.shape}")
        if not all(np.all(np.isfinite(blk)) for blk in a + b):
            raise ModelError("coefficient blocks contain non-finite entries")
        object.__setattr__(self, "a_coefs", a)
        object.__setattr__(self, "b_coefs", b)

    @classmethod
    def siso(cls, a, b):
        """Build a SISO model from scalar coefficient lists (a_1..a_n, b_1..b_n)."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.size != b.size:
            raise ModelError("a and b must have the same length n")
        return cls(
            n=a.size,
            m=1,
            p=1,
            a_coefs=tuple(np.array([[ai]]) for ai in a),
            b_coefs=tuple(np.array([[bi]]) for bi in b),
        )

    @property
    def is_siso(self):
        return self.m == 1 and self.p == 1

    @property
    def a(self):
        """SISO scalar coefficients (a_1, ..., a_n)."""
        if not self.is_siso:
            raise ModelError("scalar coefficients only defined for SISO models")
        return np.array([Ai[0, 0] for Ai in self.a_coefs])

    @property
    def b(self):
        """SISO scalar coefficients (b_1, ..., b_n)."""
        if not self.is_siso:
            raise ModelError("scalar coefficients only defined for SISO models")
        return np.array([Bi[0, 0] for Bi in self.b_coefs])

    def denominator(self):
        """SISO denominator polynomial [1, a_1, ..., a_n] (descending)."""
        return np.concatenate(([1.0], self.a))

    def numerator(self):
        """SISO numerator polynomial [b_1, ..., b_n] (descending)."""
        return self.b.copy()


@dataclass(frozen=True)
class StateSpace:
    """State-space triple (A, B, C); the output map has no feedthrough."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError("B row count must match A")
        if C.shape[1] != A.shape[0]:
            raise DimensionError("C column count must match A")
        for M in (A, B, C):
            if not np.all(np.isfinite(M)):
                raise ModelError("state-space matrices contain non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def order(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]


def realize_observability_canonical(model):
    """Observability-canonical state-space realization of a plant model.

    The state dimension is p*n; the output map reads the last p states
    and the last block column of A carries the negated coefficient
    blocks (-A_n, ..., -A_1) top to bottom.
    """
    n, m, p = model.n, model.m, model.p
    h = p * n
    A = np.zeros((h, h))
    if n > 1:
        A[p:, : h - p] = np.eye(p * (n - 1))
    for i, Ai in enumerate(model.a_coefs):  # i = 0 -> A_1
        row = p * (n - 1 - i)
        A[row : row + p, h - p :] = -Ai
    B = np.vstack([model.b_coefs[n - 1 - k] for k in range(n)])  # B_n, ..., B_1
    C = np.zeros((p, h))
    C[:, h - p :] = np.eye(p)
    return StateSpace(A, B, C)


def _trim_leading_zeros(coeffs, tol=0.0):
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    idx = 0
    while idx < coeffs.size - 1 and abs(coeffs[idx]) <= tol:
        idx += 1
    return coeffs[idx:]


def sylvester_resultant(f, g):
    """Resultant of two polynomials as the Sylvester-matrix determinant.

    Leading zeros are trimmed first, so the resultant refers to the
    actual degrees.  Returns 0.0 when either polynomial is identically
    zero.
    """
    f = _trim_leading_zeros(f)
    g = _trim_leading_zeros(g)
    if np.all(f == 0.0) or np.all(g == 0.0):
        return 0.0
    df, dg = f.size - 1, g.size - 1
    if df == 0 and dg == 0:
        return 1.0
    S = np.zeros((df + dg, df + dg))
    for i in range(dg):
        S[i, i : i + df + 1] = f
    for i in range(df):
        S[dg + i, i : i + dg + 1] = g
    return float(np.linalg.det(S))


def check_coprime_siso(a, b, policy: NumericPolicy = DEFAULT_POLICY):
    """Coprimality of the SISO denominator and numerator polynomials.

    ``a`` is the monic denominator [1, a_1, ..., a_n]; ``b`` the
    numerator [b_1, ..., b_n] (degree <= n-1, leading zeros allowed).
    Returns ``(coprime, resultant)``; an identically zero numerator is
    reported as structurally not coprime.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if np.allclose(b, 0.0):
        return False, 0.0
    res = sylvester_resultant(a, b)
    threshold = policy.resultant_tol * np.linalg.norm(a) * np.linalg.norm(b)
    return bool(abs(res) > threshold), res


def check_beta_admissible(c, beta, policy: NumericPolicy = DEFAULT_POLICY):
    """True iff -beta is not a root of s^n + c_1 s^(n-1) + ... + c_n."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    q = np.concatenate(([1.0], c))
    value = abs(np.polyval(q, -beta))
    scale = np.polyval(np.abs(q), max(1.0, abs(beta)))
    return bool(value > policy.resultant_tol * scale)


def check_c_nonresonant(a, c, beta, policy: NumericPolicy = DEFAULT_POLICY):
    """Joint admissibility of the filter polynomial against the plant.

    True iff the resultant of ``(s^n + a_1 s^(n-1) + ... + a_n)(s + beta)``
    and ``s^n + c_1 s^(n-1) + ... + c_n`` is nonzero beyond tolerance;
    this rules out both a shared root between the plant and filter
    polynomials and ``-beta`` being a filter pole.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    pa = np.polymul(np.concatenate(([1.0], a)), np.array([1.0, beta]))
    qc = np.concatenate(([1.0], c))
    res = sylvester_resultant(pa, qc)
    threshold = policy.resultant_tol * np.linalg.norm(pa) * np.linalg.norm(qc)
    return bool(abs(res) > threshold)


def observability_matrix(ss, depth):
    """col(C, CA, ..., CA^(depth-1))."""
    return np.vstack([ss.C @ np.linalg.matrix_power(ss.A, i) for i in range(depth)])


def markov_toeplitz(ss, depth):
    """Block lower-shifted Toeplitz of the Markov parameters CA^(k)B.

    Block (i, j) is CA^(i-j-1)B for j < i and zero otherwise; the first
    block row is entirely zero (no feedthrough).
    """
    p, m = ss.n_outputs, ss.n_inputs
    powers = [np.linalg.matrix_power(ss.A, k) for k in range(depth)]
    M = np.zeros((p * depth, m * depth))
    for i in range(depth):
        for j in range(i):
            M[i * p : (i + 1) * p, j * m : (j + 1) * m] = ss.C @ powers[i - j - 1] @ ss.B
    return M


def initial_condition_map(ss, n, x0, u_derivs):
    """Stacked output derivatives at t=0 from the state and input derivatives.

    Returns ``(y_derivs, O, M)`` where
    ``y_derivs = O @ x0 + M @ u_derivs`` with O the depth-n observability
    matrix and M the Markov-parameter Toeplitz matrix.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    u_derivs = np.asarray(u_derivs, dtype=float).reshape(-1)
    O = observability_matrix(ss, n)
    M = markov_toeplitz(ss, n)
    if x0.size != ss.order:
        raise DimensionError(f"x0 must have length {ss.order}")
    if u_derivs.size != M.shape[1]:
        raise DimensionError(f"u_derivs must have length {M.shape[1]}")
    return O @ x0 + M @ u_derivs, O, M


def invert_initial_condition_map(ss, n, y_derivs, u_derivs,
                                 policy: NumericPolicy = DEFAULT_POLICY):
    """Recover the state from stacked output/input derivatives at t=0.

    Requires the depth-n observability matrix to be invertible; raises
    ``NotObservableError`` otherwise.
    """
    y_derivs = np.asarray(y_derivs, dtype=float).reshape(-1)
    u_derivs = np.asarray(u_derivs, dtype=float).reshape(-1)
    O = observability_matrix(ss, n)
    M = markov_toeplitz(ss, n)
    if O.shape[0] != O.shape[1] or matkit.numerical_rank(O, policy.rank_tol) < ss.order:
        raise NotObservableError("observability matrix is singular at the given depth")
    return np.linalg.solve(O, y_derivs - M @ u_derivs)


def check_minimality_mimo(ss, n, policy: NumericPolicy = DEFAULT_POLICY):
    """Reachable + observable + state dimension p*n, under numerical rank."""
    h = ss.order
    if h != ss.n_outputs * n:
        return False
    reach = np.hstack([np.linalg.matrix_power(ss.A, k) @ ss.B for k in range(h)])
    if matkit.numerical_rank(reach, policy.rank_tol) < h:
        return False
    obs = observability_matrix(ss, n)
    return matkit.numerical_rank(obs, policy.rank_tol) == h


def validate_model(model, policy: NumericPolicy = DEFAULT_POLICY):
    """Structural admissibility gate for a plant model.

    SISO: the denominator and numerator polynomials must be coprime.
    MIMO: the canonical realization must be minimal with state
    dimension p*n.  Raises ``AssumptionError`` on failure.
    """
    if model.is_siso:
        ok, res = check_coprime_siso(model.denominator(), model.numerator(), policy)
        if not ok:
            raise AssumptionError(
                f"plant polynomials are not coprime (resultant {res:.3e})"
            )
    else:
        ss = realize_observability_canonical(model)
        if not check_minimality_mimo(ss, model.n, policy):
            raise AssumptionError("canonical MIMO realization is not minimal")


def poly_from_conjugate_roots(rng, degree, re_range, im_range):
    """Real monic polynomial with random conjugate-closed roots (descending)."""
    roots = []
    remaining = degree
    while remaining > 0:
        if remaining >= 2 and rng.random() < 0.5:
            re = rng.uniform(*re_range)
            im = rng.uniform(*im_range)
            roots.extend([complex(re, im), complex(re, -im)])
            remaining -= 2
        else:
            roots.append(complex(rng.uniform(*re_range), 0.0))
            remaining -= 1
    coeffs = np.atleast_1d(np.poly(np.array(roots)))
    return coeffs.real


def random_coprime_siso(rng, n, require_unstable=False,
                        policy: NumericPolicy = DEFAULT_POLICY,
                        max_tries=200):
    """Random coprime SISO model with roots in [-2, 2] x [-1, 1]i.

    Non-coprime draws are rejected; with ``require_unstable`` the
    denominator must have a root with positive real part.
    """
    for _ in range(max_tries):
        re_range = (-2.0, 2.0)
        a_full = poly_from_conjugate_roots(rng, n, re_range, (-1.0, 1.0))
        deg_b = int(rng.integers(0, n))
        b_full = poly_from_conjugate_roots(rng, deg_b, re_range, (-1.0, 1.0))
        b_full = b_full * rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
        b = np.concatenate([np.zeros(n - deg_b - 1), b_full])
        if require_unstable and np.max(np.roots(a_full).real) <= 0.05:
            continue
        ok, _ = check_coprime_siso(a_full, b, policy)
        if not ok:
            continue
        return DiffOpModel.siso(a_full[1:], b)
    raise ModelError("could not draw a coprime SISO model")


def random_mimo_model(rng, n, m, p, require_unstable=False,
                      policy: NumericPolicy = DEFAULT_POLICY,
                      max_tries=200):
    """Random MIMO model whose canonical realization is minimal."""
    for _ in range(max_tries):
        a_blocks = tuple(rng.uniform(-1.0, 1.0, (p, p)) for _ in range(n))
        b_blocks = tuple(rng.uniform(-1.0, 1.0, (p, m)) for _ in range(n))
        model = DiffOpModel(n=n, m=m, p=p, a_coefs=a_blocks, b_coefs=b_blocks)
        ss = realize_observability_canonical(model)
        if not check_minimality_mimo(ss, n, policy):
            continue
        if require_unstable and np.max(matkit.spectrum(ss.A).real) <= 0.05:
            continue
        return model
    raise ModelError("could not draw a minimal MIMO model")


def _format_block(block):
    return " ; ".join(
        " ".join(repr(float(v)) for v in row) for row in np.atleast_2d(block)
    )


def _parse_block(text, rows, cols, key):
    parts = [seg.split() for seg in text.split(";")]
    try:
        values = [[float(v) for v in row] for row in parts]
    except ValueError as exc:
        raise ModelError(f"non-numeric entry in {key}: {exc}") from exc
    flat = [v for row in values for v in row]
    if len(flat) != rows * cols:
        raise ModelError(f"{key} must have {rows * cols} entries, got {len(flat)}")
    return np.array(flat).reshape(rows, cols)


def model_to_text(model):
    """Serialize a plant model to the structured-text plant grammar."""
    lines = ["[plant]", f"n = {model.n}", f"m = {model.m}", f"p = {model.p}"]
    if model.is_siso:
        lines.append("a = " + " ".join(repr(float(v)) for v in model.a))
        lines.append("b = " + " ".join(repr(float(v)) for v in model.b))
    else:
        for i, Ai in enumerate(model.a_coefs, start=1):
            lines.append(f"A{i} = " + _format_block(Ai))
        for i, Bi in enumerate(model.b_coefs, start=1):
            lines.append(f"B{i} = " + _format_block(Bi))
    return "\n".join(lines) + "\n"


def model_from_mapping(mapping):
    """Build a plant model from a {key: string} mapping (parsed [plant] section)."""
    try:
        n = int(mapping["n"])
        m = int(mapping.get("m", 1))
        p = int(mapping.get("p", 1))
    except (KeyError, ValueError) as exc:
        raise ModelError(f"plant section needs integer n, m, p: {exc}") from exc
    if "a" in mapping or "b" in mapping:
        if m != 1 or p != 1:
            raise ModelError("scalar a/b keys are only valid for m = p = 1")
        a = np.array([float(v) for v in mapping["a"].split()])
        b = np.array([float(v) for v in mapping["b"].split()])
        if a.size != n or b.size != n:
            raise ModelError(f"a and b must each list {n} coefficients")
        return DiffOpModel.siso(a, b)
    a_blocks, b_blocks = [], []
    for i in range(1, n + 1):
        if f"a{i}" not in mapping or f"b{i}" not in mapping:
            raise ModelError(f"missing coefficient block A{i} or B{i}")
        a_blocks.append(_parse_block(mapping[f"a{i}"], p, p, f"A{i}"))
        b_blocks.append(_parse_block(mapping[f"b{i}"], p, m, f"B{i}"))
    return DiffOpModel(n=n, m=m, p=p, a_coefs=tuple(a_blocks), b_coefs=tuple(b_blocks))
