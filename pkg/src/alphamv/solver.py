"""Equilibrium strategies, value coefficients, and probability distortions.

The solution has two default states.  Post-default, the reinsurance exposure
solves a scalar integral equation and the stock amount is in closed form; the
value intercepts are plain time integrals.  Pre-default, the bond amount is
eliminated algebraically from its first-order condition at every instant,
which couples the two mean intercepts; the whole coefficient system is
integrated backward as ODEs.

Time convention: ``tau = T - t`` and ``A(t) = e^{r tau}`` is the accumulation
factor to the horizon.  The recurring jump-exponent body is

    E(t, z) = pi_q(t) z A(t) + (gamma/2) pi_q(t)^2 z^2 A(t)^2,

and every distorted integrand carries ``exp(+-beta3 E)``.  Exponent arguments
are saturated at ``+-exp_cap`` before exponentiation (a warning, not an
error); bracket expansion keeps actual roots well below saturation territory.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .config import ModelParams, NumericsConfig
from .errors import NumericalError, SaturationWarning, ValidationError
from .levy import ClaimMeasure

__all__ = [
    "ValueCoefficients",
    "EquilibriumSolution",
    "DistortionFunctions",
    "DistortionSide",
    "pi_s_star",
    "reinsurance_foc",
    "bracket_pi_q",
    "solve_pi_q_star",
    "solve_pi_q_grid",
    "count_foc_sign_changes",
    "scan_foc_sign_changes",
    "post_default_coeffs",
    "pre_default_system",
    "solve_equilibrium",
    "reference_mean_intercepts",
    "distortions",
    "strategy_distortions",
    "value_function",
    "penalty_rate",
]

DEFAULT_EXP_CAP = 700.0
DEFAULT_ROOT_TOL = 1e-10

_BISECT_ITERS = 16          # localize before Newton takes over
_NEWTON_ITERS = 5           # quadratic: 2^-16 bracket -> machine precision
_MAX_DOUBLINGS = 60


# ---------------------------------------------------------------------------
# closed-form stock strategy
# ---------------------------------------------------------------------------

def _stock_denominator(params: ModelParams) -> float:
    # gamma + (2 alpha - 1)(beta1 rho^2 + beta2 rho_hat^2) > 0 for alpha >= 1/2
    two_a = 2.0 * params.alpha - 1.0
    return params.gamma + two_a * (params.beta1 * params.rho ** 2
                                   + params.beta2 * params.rho_hat ** 2)


def pi_s_star(t, params: ModelParams):
    """Equilibrium stock amount; identical pre- and post-default.

    Vectorized over t; returns a scalar for scalar input.
    """
    t = np.asarray(t, dtype=float)
    two_a = 2.0 * params.alpha - 1.0
    numer = ((params.mu - params.r) * np.exp(-params.r * (params.T - t))
             - params.sigma1 * params.sigma2 * params.rho * (params.gamma + two_a * params.beta1))
    value = numer / (params.sigma2 ** 2 * _stock_denominator(params))
    return value if value.ndim else float(value)


# ---------------------------------------------------------------------------
# reinsurance first-order condition and root solve
# ---------------------------------------------------------------------------

def _clipped_exp(x: np.ndarray, exp_cap: float) -> np.ndarray:
    if np.max(np.abs(x), initial=0.0) > exp_cap:
        warnings.warn(
            f"exponent saturated at +-{exp_cap:g} during claim-integral evaluation",
            SaturationWarning, stacklevel=3,
        )
        x = np.clip(x, -exp_cap, exp_cap)
    return np.exp(x)


def _foc_values(A, pi, params: ModelParams, measure: ClaimMeasure,
                exp_cap: float, with_derivative: bool):
    """F(t, pi) (and optionally dF/dpi) for broadcastable A and pi arrays.

    A and pi must broadcast against each other; a node axis is appended.
    """
    A = np.asarray(A, dtype=float)[..., None]
    pi = np.asarray(pi, dtype=float)[..., None]
    z = measure.nodes
    w = measure.weights
    zA = z * A
    zA2 = zA * zA
    G = zA + params.gamma * pi * zA2
    E = pi * zA + 0.5 * params.gamma * pi * pi * zA2
    ep = _clipped_exp(params.beta3 * E, exp_cap)
    em = 1.0 / ep  # symmetric clipping makes exp(-clip(x)) the exact reciprocal
    mix = params.alpha * ep + params.alpha_hat * em
    F = ((1.0 + params.eta) * zA - G * mix) @ w
    if not with_derivative:
        return F, None
    dmix = params.alpha * ep - params.alpha_hat * em
    dF = -(params.gamma * zA2 * mix + params.beta3 * G * G * dmix) @ w
    return F, dF


def reinsurance_foc(t, pi_q, params: ModelParams, measure: ClaimMeasure,
                    exp_cap: float = DEFAULT_EXP_CAP):
    """Residual of the reinsurance first-order condition.

    Positive at pi_q = 0 (equals eta * e^{r(T-t)} * int z nu(dz) there) and
    strictly decreasing in pi_q for alpha >= 1/2, so the root is unique.
    Broadcasts over t and pi_q.
    """
    if np.any(np.asarray(pi_q) < 0):
        raise ValidationError("pi_q<0", "reinsurance exposure must satisfy pi_q >= 0")
    A = params.discount_to_horizon(t)
    F, _ = _foc_values(A, pi_q, params, measure, exp_cap, with_derivative=False)
    return F if F.ndim else float(F)


def bracket_pi_q(t, params: ModelParams, measure: ClaimMeasure,
                 exp_cap: float = DEFAULT_EXP_CAP) -> float:
    """Upper bracket endpoint: smallest power-of-two hi with F(t, hi) < 0."""
    A = params.discount_to_horizon(t)
    hi = 1.0
    for _ in range(_MAX_DOUBLINGS):
        F, _ = _foc_values(A, hi, params, measure, exp_cap, with_derivative=False)
        if F < 0:
            return hi
        hi *= 2.0
    raise NumericalError(
        f"bracket expansion for pi_q failed after {_MAX_DOUBLINGS} doublings at t={t}: "
        "pathological parameters"
    )


def solve_pi_q_star(t: float, params: ModelParams, measure: ClaimMeasure,
                    root_tol: float = DEFAULT_ROOT_TOL,
                    exp_cap: float = DEFAULT_EXP_CAP) -> float:
    """Unique equilibrium reinsurance exposure at time t (any default state).

    Brent on the expanded bracket, with a Newton polish if the residual is not
    yet below ``root_tol`` relative to the natural scale
    ``eta e^{r(T-t)} int z nu(dz)``.
    """
    A = float(params.discount_to_horizon(t))
    hi = bracket_pi_q(t, params, measure, exp_cap)
    scale = params.eta * A * measure.moment(1)

    def f(pi: float) -> float:
        F, _ = _foc_values(A, pi, params, measure, exp_cap, with_derivative=False)
        return float(F)

    root = brentq(f, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    for _ in range(8):
        F, dF = _foc_values(A, root, params, measure, exp_cap, with_derivative=True)
        if abs(float(F)) <= root_tol * scale:
            break
        step = float(F) / float(dF)
        root = min(max(root - step, 0.0), hi)
    else:
        raise NumericalError(f"pi_q root polish did not reach tolerance at t={t}")
    return float(root)


def solve_pi_q_grid(times, params: ModelParams, measure: ClaimMeasure,
                    exp_cap: float = DEFAULT_EXP_CAP) -> np.ndarray:
    """Vectorized root solve at many times at once.

    Bisection localizes the root inside the expanded bracket, then Newton
    drives the residual to machine precision (F is smooth and strictly
    decreasing).  Agrees with :func:`solve_pi_q_star` point by point; exists
    because sweeps and the backward integrator need thousands of roots per
    call.
    """
    times = np.asarray(times, dtype=float)
    A = params.discount_to_horizon(times)
    hi = np.ones_like(A)
    for _ in range(_MAX_DOUBLINGS):
        F, _ = _foc_values(A, hi, params, measure, exp_cap, with_derivative=False)
        open_mask = F >= 0
        if not np.any(open_mask):
            break
        hi[open_mask] *= 2.0
    else:
        raise NumericalError("bracket expansion for pi_q failed on the time grid")
    lo = np.zeros_like(hi)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        F, _ = _foc_values(A, mid, params, measure, exp_cap, with_derivative=False)
        positive = F > 0
        lo = np.where(positive, mid, lo)
        hi = np.where(positive, hi, mid)
    root = 0.5 * (lo + hi)
    for _ in range(_NEWTON_ITERS):
        F, dF = _foc_values(A, root, params, measure, exp_cap, with_derivative=True)
        root = np.clip(root - F / dF, lo, hi)
    return root


def scan_foc_sign_changes(times, params: ModelParams, measure: ClaimMeasure,
                          n_points: int = 10_000,
                          exp_cap: float = DEFAULT_EXP_CAP) -> np.ndarray:
    """Sign changes of F(t, .) on [0, bracket(t)] over uniform scans, per time.

    The scan runs in float32 with two reused work buffers so each scan stays
    cache-resident.  Between neighboring scan points F moves by
    O(bracket/n_points) times its O(1) slope, orders of magnitude above
    float32 rounding, so the sign pattern is exact.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    counts = np.empty(times.size, dtype=int)
    grid01 = np.linspace(0.0, 1.0, n_points, dtype=np.float32)[:, None]
    grid01_sq = grid01 * grid01
    shape = (n_points, measure.nodes.size)
    work_u = np.empty(shape, np.float32)
    work_v = np.empty(shape, np.float32)
    w32 = measure.weights.astype(np.float32)
    alpha32 = np.float32(params.alpha)
    alpha_hat32 = np.float32(params.alpha_hat)
    cap32 = np.float32(exp_cap)
    for j, t in enumerate(times):
        hi = bracket_pi_q(float(t), params, measure, exp_cap)
        A = float(params.discount_to_horizon(t))
        c = (measure.nodes * A).astype(np.float32)                       # z A
        d = (0.5 * params.gamma * (measure.nodes * A) ** 2).astype(np.float32)
        hi32 = np.float32(hi)
        np.multiply(grid01, hi32 * c, out=work_u)
        np.multiply(grid01_sq, hi32 * hi32 * d, out=work_v)
        work_u += work_v
        work_u *= np.float32(params.beta3)
        np.minimum(work_u, cap32, out=work_u)
        np.exp(work_u, out=work_u)                                       # e^{b3 E}
        np.divide(alpha_hat32, work_u, out=work_v)
        work_u *= alpha32
        work_u += work_v                                                 # mix
        np.multiply(grid01, (2.0 * hi32) * d, out=work_v)
        work_v += c                                                      # G
        work_u *= work_v
        F = np.float32(1.0 + params.eta) * (c @ w32) - work_u @ w32
        signs = np.sign(F)
        signs = signs[signs != 0]
        counts[j] = int(np.count_nonzero(np.diff(signs) != 0))
    return counts


def count_foc_sign_changes(t: float, params: ModelParams, measure: ClaimMeasure,
                           n_points: int = 10_000,
                           exp_cap: float = DEFAULT_EXP_CAP) -> int:
    """Number of sign changes of F(t, .) on [0, bracket] over a uniform scan."""
    return int(scan_foc_sign_changes(t, params, measure, n_points, exp_cap)[0])


# ---------------------------------------------------------------------------
# coefficient system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValueCoefficients:
    """Time-grid coefficients of the affine value and mean functions.

    ``value = A(t) x + B_h(t)`` and the distorted means are
    ``A(t) x + b_h(t)`` with A(t) = e^{r(T-t)}.  All intercepts vanish at T.
    """

    grid: np.ndarray
    A: np.ndarray
    B1: np.ndarray
    B0: np.ndarray
    b1_lo: np.ndarray
    b1_hi: np.ndarray
    b0_lo: np.ndarray
    b0_hi: np.ndarray
    r: float
    T: float


@dataclass(frozen=True)
class EquilibriumSolution:
    """Equilibrium strategies and value coefficients on a uniform time grid.

    ``pi_q`` and ``pi_s`` are the same functions in both default states;
    ``pi_p`` is the pre-default bond amount (identically 0 after default).
    ``fine_grid``/``fine_pi_q``/``fine_pi_s`` hold the half-step refinement
    used internally by the backward integrator; interpolation helpers use it.
    """

    grid: np.ndarray
    pi_q: np.ndarray
    pi_s: np.ndarray
    pi_p: np.ndarray
    coeffs: ValueCoefficients
    fine_grid: np.ndarray = field(repr=False, default=None)
    fine_pi_q: np.ndarray = field(repr=False, default=None)
    fine_pi_s: np.ndarray = field(repr=False, default=None)

    def __post_init__(self) -> None:
        if np.any(self.pi_q < 0):
            raise ValidationError("pi_q<0", "equilibrium reinsurance exposure must be nonnegative")

    def pi_q_at(self, t):
        return np.interp(t, self.fine_grid, self.fine_pi_q)

    def pi_s_at(self, t):
        return np.interp(t, self.fine_grid, self.fine_pi_s)

    def pi_p_at(self, t):
        return np.interp(t, self.grid, self.pi_p)


class _NodeTables:
    """Per-node ingredients of the coefficient integrands on a fine time grid.

    Everything that does not depend on the integrated state is precomputed
    here: the strategies, the distorted claim integrals I+- and the entropy
    jump term of the B equations.
    """

    def __init__(self, times: np.ndarray, params: ModelParams, measure: ClaimMeasure,
                 betas: tuple[float, float, float],
                 pi_q: np.ndarray, pi_s: np.ndarray,
                 exp_cap: float):
        b1, b2, b3 = betas
        self.times = times
        A = params.discount_to_horizon(times)
        self.A = A
        self.pi_q = pi_q
        self.pi_s = pi_s
        m1 = measure.moment(1)

        z = measure.nodes
        w = measure.weights
        zA = z * A[:, None]
        E = pi_q[:, None] * zA + 0.5 * params.gamma * (pi_q[:, None] * zA) ** 2
        ep = _clipped_exp(b3 * E, exp_cap)
        em = _clipped_exp(-b3 * E, exp_cap)
        self.I_plus = (z * ep) @ w          # int z e^{+b3 E} nu(dz)
        self.I_minus = (z * em) @ w
        if b3 > 0:
            # (alpha/b3) int (1 - e^{+b3 E}) nu - (alpha_hat/b3) int (1 - e^{-b3 E}) nu
            self.KB = (params.alpha / b3) * ((1.0 - ep) @ w) \
                - (params.alpha_hat / b3) * ((1.0 - em) @ w)
        else:
            self.KB = -(E @ w)              # b3 -> 0 limit of the same term
        two_a = 2.0 * params.alpha - 1.0
        drift_q = params.theta - params.eta + (1.0 + params.eta) * pi_q
        s1, s2, rho = params.sigma1, params.sigma2, params.rho
        sharpe_num = (params.mu - params.r
                      - s1 * s2 * rho * (params.gamma + two_a * b1) * A)
        cross = b1 * rho ** 2 + b2 * params.rho_hat ** 2
        sharpe = sharpe_num ** 2 / (2.0 * s2 ** 2 * (params.gamma + two_a * cross))

        common = drift_q * A * m1
        A2 = A * A
        # time integrands of the three post-default coefficients
        self.fB1 = (common
                    - 0.5 * params.gamma * s1 ** 2 * A2
                    - 0.5 * two_a * b1 * s1 ** 2 * A2
                    + sharpe + self.KB)
        lin_lo = (params.mu - params.r) * A - 2.0 * b1 * s1 * s2 * rho * A2
        lin_hi = (params.mu - params.r) * A + 2.0 * b1 * s1 * s2 * rho * A2
        quad = s2 ** 2 * A2 * cross
        self.f1_lo = (common - b1 * s1 ** 2 * A2 + lin_lo * pi_s
                      - quad * pi_s ** 2 - pi_q * A * self.I_plus)
        self.f1_hi = (common + b1 * s1 ** 2 * A2 + lin_hi * pi_s
                      + quad * pi_s ** 2 - pi_q * A * self.I_minus)


def _make_fine_grid(grid: np.ndarray) -> np.ndarray:
    """Half-step refinement whose even entries are exactly the input grid."""
    fine = np.empty(2 * (grid.size - 1) + 1)
    fine[0::2] = grid
    fine[1::2] = 0.5 * (grid[:-1] + grid[1:])
    return fine


def _validate_uniform_grid(grid: np.ndarray, T: float) -> None:
    if grid.ndim != 1 or grid.size < 2:
        raise ValidationError("grid", "time grid must hold at least two points")
    steps = np.diff(grid)
    if grid[0] != 0.0 or abs(grid[-1] - T) > 1e-12 or np.any(steps <= 0) \
            or np.max(steps) - np.min(steps) > 1e-9 * np.max(steps):
        raise ValidationError("grid", "time grid must be uniform over [0, T]")


def _pre_default_pi_p(y: Sequence[float], A: float, params: ModelParams) -> float:
    # explicit linear solve of the bond first-order condition at one instant
    num = (params.delta - params.zeta * params.hP
           + params.gamma * params.zeta * params.hP
           * (params.alpha * (y[1] - y[4]) + params.alpha_hat * (y[2] - y[5])))
    return num / (params.gamma * params.zeta ** 2 * params.hP * A)


def _solve_coefficients(params: ModelParams, measure: ClaimMeasure, grid: np.ndarray,
                        include_pre_default: bool,
                        betas: Optional[tuple[float, float, float]] = None,
                        strategy: Optional[tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]] = None,
                        root_tol: float = DEFAULT_ROOT_TOL,
                        exp_cap: float = DEFAULT_EXP_CAP):
    """Backward RK4 sweep of the coefficient system on ``grid``.

    ``strategy`` optionally pins (pi_q, pi_s, pi_p) on the fine grid instead of
    recomputing them; with ``betas`` overridden this evaluates the mean
    intercepts of a fixed strategy under a different ambiguity level (the
    beta = 0 case is the reference measure).  When pi_p is not pinned it is
    eliminated algebraically inside every integrator stage.

    Returns (tables, states) where states has shape (len(grid), 6) with
    columns (B1, b1_lo, b1_hi, B0, b0_lo, b0_hi); the pre-default columns are
    NaN when not requested.
    """
    grid = np.asarray(grid, dtype=float)
    _validate_uniform_grid(grid, params.T)
    if include_pre_default and (params.hP == 0.0 or params.zeta == 0.0):
        raise NumericalError(
            "defaultable-bond demand unbounded: the bond first-order condition has no "
            f"finite root for hP={params.hP}, zeta={params.zeta}"
        )
    fine = _make_fine_grid(grid)
    if betas is None:
        betas = (params.beta1, params.beta2, params.beta3)
    if strategy is None:
        pi_q = solve_pi_q_grid(fine, params, measure, exp_cap)
        residual, _ = _foc_values(params.discount_to_horizon(fine), pi_q, params,
                                  measure, exp_cap, with_derivative=False)
        scale = params.eta * params.discount_to_horizon(fine) * measure.moment(1)
        if np.any(np.abs(residual) > root_tol * scale):
            raise NumericalError("pi_q roots did not reach the configured tolerance")
        pi_s = np.asarray(pi_s_star(fine, params), dtype=float)
        pi_p_pinned = None
    else:
        pi_q, pi_s, pi_p_pinned = strategy
    tables = _NodeTables(fine, params, measure, betas, pi_q, pi_s, exp_cap)

    hP, zeta, delta = params.hP, params.zeta, params.delta
    a, ah, gamma = params.alpha, params.alpha_hat, params.gamma
    A = tables.A
    fB1, f1lo, f1hi = tables.fB1, tables.f1_lo, tables.f1_hi

    def rhs(i: int, y: Sequence[float]) -> tuple[float, ...]:
        dB1 = -fB1[i]
        db1lo = -f1lo[i]
        db1hi = -f1hi[i]
        if not include_pre_default:
            return dB1, db1lo, db1hi, 0.0, 0.0, 0.0
        Ai = A[i]
        pi_p = pi_p_pinned[i] if pi_p_pinned is not None else _pre_default_pi_p(y, Ai, params)
        bond = pi_p * delta * Ai
        lump = -zeta * pi_p * Ai
        f0lo = f1lo[i] + bond + hP * (lump + y[1])
        f0hi = f1hi[i] + bond + hP * (lump + y[2])
        fB0 = (fB1[i] + bond + hP * (lump + y[0])
               - 0.5 * a * gamma * hP * (lump + y[1] - y[4]) ** 2
               - 0.5 * ah * gamma * hP * (lump + y[2] - y[5]) ** 2)
        return (dB1, db1lo, db1hi,
                hP * y[3] - fB0, hP * y[4] - f0lo, hP * y[5] - f0hi)

    n = grid.size
    states = np.zeros((n, 6))
    y = [0.0] * 6  # terminal condition: every intercept vanishes at T
    for k in range(n - 2, -1, -1):
        h = grid[k] - grid[k + 1]
        i_hi, i_mid, i_lo = 2 * k + 2, 2 * k + 1, 2 * k
        k1 = rhs(i_hi, y)
        k2 = rhs(i_mid, [y[j] + 0.5 * h * k1[j] for j in range(6)])
        k3 = rhs(i_mid, [y[j] + 0.5 * h * k2[j] for j in range(6)])
        k4 = rhs(i_lo, [y[j] + h * k3[j] for j in range(6)])
        y = [y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) for j in range(6)]
        states[k] = y
    if not include_pre_default:
        states[:, 3:] = np.nan
    return tables, states


def post_default_coeffs(params: ModelParams, measure: ClaimMeasure, grid,
                        root_tol: float = DEFAULT_ROOT_TOL,
                        exp_cap: float = DEFAULT_EXP_CAP):
    """B1, b1_lo, b1_hi on ``grid`` (terminal values zero)."""
    grid = np.asarray(grid, dtype=float)
    _, states = _solve_coefficients(params, measure, grid, include_pre_default=False,
                                    root_tol=root_tol, exp_cap=exp_cap)
    return states[:, 0], states[:, 1], states[:, 2]


def pre_default_system(params: ModelParams, measure: ClaimMeasure, grid,
                       root_tol: float = DEFAULT_ROOT_TOL,
                       exp_cap: float = DEFAULT_EXP_CAP):
    """pi_p, B0, b0_lo, b0_hi on ``grid``.

    Raises NumericalError for hP = 0 or zeta = 0 (no finite bond demand).
    """
    grid = np.asarray(grid, dtype=float)
    _, states = _solve_coefficients(params, measure, grid, include_pre_default=True,
                                    root_tol=root_tol, exp_cap=exp_cap)
    A = params.discount_to_horizon(grid)
    pi_p = np.array([_pre_default_pi_p(states[k], A[k], params) for k in range(grid.size)])
    return pi_p, states[:, 3], states[:, 4], states[:, 5]


def solve_equilibrium(params: ModelParams, measure: ClaimMeasure,
                      numerics: NumericsConfig) -> EquilibriumSolution:
    """Full equilibrium: strategies and value coefficients on a uniform grid."""
    grid = np.linspace(0.0, params.T, numerics.time_steps + 1)
    tables, states = _solve_coefficients(
        params, measure, grid, include_pre_default=True,
        root_tol=numerics.root_tol, exp_cap=numerics.exp_cap,
    )
    A = params.discount_to_horizon(grid)
    pi_p = np.array([_pre_default_pi_p(states[k], A[k], params) for k in range(grid.size)])
    coeffs = ValueCoefficients(
        grid=grid, A=A,
        B1=states[:, 0], B0=states[:, 3],
        b1_lo=states[:, 1], b1_hi=states[:, 2],
        b0_lo=states[:, 4], b0_hi=states[:, 5],
        r=params.r, T=params.T,
    )
    return EquilibriumSolution(
        grid=grid,
        pi_q=tables.pi_q[0::2], pi_s=tables.pi_s[0::2], pi_p=pi_p,
        coeffs=coeffs,
        fine_grid=tables.times, fine_pi_q=tables.pi_q, fine_pi_s=tables.pi_s,
    )


def reference_mean_intercepts(params: ModelParams, measure: ClaimMeasure,
                              solution: EquilibriumSolution,
                              exp_cap: float = DEFAULT_EXP_CAP):
    """Mean intercepts of the equilibrium strategy under the reference measure.

    Evaluates the same backward system with every ambiguity level set to zero
    while keeping the strategy fixed, so ``E[X(T) | X(t)=x, H(t)=h]`` equals
    ``e^{r(T-t)} x + b_ref_h(t)``.  Returns (b1_ref, b0_ref) on the solution
    grid.
    """
    pi_p_fine = np.interp(solution.fine_grid, solution.grid, solution.pi_p)
    _, states = _solve_coefficients(
        params, measure, solution.grid, include_pre_default=True,
        betas=(0.0, 0.0, 0.0),
        strategy=(solution.fine_pi_q, solution.fine_pi_s, pi_p_fine),
        exp_cap=exp_cap,
    )
    return states[:, 1], states[:, 4]


# ---------------------------------------------------------------------------
# value function, distortions, penalty
# ---------------------------------------------------------------------------

def value_function(t, x, h: int, coeffs: ValueCoefficients):
    """Equilibrium value e^{r(T-t)} x + B_h(t), with B interpolated linearly."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > coeffs.T):
        raise ValidationError("t_range", f"time must lie in [0, {coeffs.T}], got {t}")
    if h not in (0, 1):
        raise ValidationError("h_range", f"default state must be 0 or 1, got {h}")
    B = coeffs.B1 if h == 1 else coeffs.B0
    value = np.exp(coeffs.r * (coeffs.T - t_arr)) * np.asarray(x, dtype=float) \
        + np.interp(t_arr, coeffs.grid, B)
    return value if value.ndim else float(value)


@dataclass(frozen=True)
class DistortionSide:
    """One extreme measure: drift shifts phi1, phi2 and jump tilt phi3.

    ``sign`` is +1 for the ambiguity-averse (infimum) measure, whose penalty
    enters the objective with a plus sign, and -1 for the ambiguity-seeking
    (supremum) measure.
    """

    phi1: Callable[[np.ndarray], np.ndarray]
    phi2: Callable[[np.ndarray], np.ndarray]
    phi3: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sign: int


@dataclass(frozen=True)
class DistortionFunctions:
    """The six extremal distortion functions of an equilibrium solution.

    phi1/phi2 are deterministic functions of t, phi3 of (t, z); the hi
    functions are the sign-flipped (i = 1, 2) and reciprocal-exponential
    (i = 3) counterparts of the lo functions.
    """

    phi1_lo: Callable
    phi2_lo: Callable
    phi1_hi: Callable
    phi2_hi: Callable
    phi3_lo: Callable
    phi3_hi: Callable

    @property
    def lo(self) -> DistortionSide:
        return DistortionSide(self.phi1_lo, self.phi2_lo, self.phi3_lo, +1)

    @property
    def hi(self) -> DistortionSide:
        return DistortionSide(self.phi1_hi, self.phi2_hi, self.phi3_hi, -1)


def strategy_distortions(times: np.ndarray, pi_q_values: np.ndarray,
                         pi_s_values: np.ndarray, params: ModelParams,
                         exp_cap: float = DEFAULT_EXP_CAP) -> DistortionFunctions:
    """Extremal distortions induced by any deterministic strategy.

    The strategy is given by samples on ``times`` and interpolated linearly in
    between; the closed-form first-order conditions in phi hold for arbitrary
    deterministic strategies, not just the equilibrium one.
    """
    times = np.asarray(times, dtype=float)
    pi_q_values = np.asarray(pi_q_values, dtype=float)
    pi_s_values = np.asarray(pi_s_values, dtype=float)

    def _A(t):
        return params.discount_to_horizon(t)

    def phi1_lo(t):
        return params.beta1 * (params.sigma1 + params.sigma2 * params.rho
                               * np.interp(t, times, pi_s_values)) * _A(t)

    def phi2_lo(t):
        return params.beta2 * params.sigma2 * params.rho_hat \
            * np.interp(t, times, pi_s_values) * _A(t)

    def _exponent(t, z):
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        A = _A(t)
        pq = np.interp(t, times, pi_q_values)
        E = pq * z * A + 0.5 * params.gamma * (pq * z * A) ** 2
        return np.clip(params.beta3 * E, -exp_cap, exp_cap)

    def phi3_lo(t, z):
        return 1.0 - np.exp(_exponent(t, z))

    def phi3_hi(t, z):
        return 1.0 - np.exp(-_exponent(t, z))

    return DistortionFunctions(
        phi1_lo=phi1_lo, phi2_lo=phi2_lo,
        phi1_hi=lambda t: -phi1_lo(t), phi2_hi=lambda t: -phi2_lo(t),
        phi3_lo=phi3_lo, phi3_hi=phi3_hi,
    )


def distortions(solution: EquilibriumSolution, params: ModelParams,
                exp_cap: float = DEFAULT_EXP_CAP) -> DistortionFunctions:
    """Extremal distortions of the equilibrium solution (evaluated lazily)."""
    return strategy_distortions(solution.fine_grid, solution.fine_pi_q,
                                solution.fine_pi_s, params, exp_cap)


def penalty_rate(phi1: float, phi2: float, phi3_nodes, params: ModelParams,
                 measure: ClaimMeasure):
    """Entropic penalty per unit time for distortion values at one instant.

    ``phi3_nodes`` holds phi3(t, z_i) on the measure's quadrature nodes.
    Raises for phi3 >= 1 anywhere (outside the admissible distortion range).
    Vectorized: phi1/phi2 may be arrays if phi3_nodes carries a matching
    leading axis.
    """
    phi3 = np.asarray(phi3_nodes, dtype=float)
    if np.any(phi3 >= 1.0):
        raise ValidationError("phi3>=1", "jump distortion must satisfy phi3 < 1 everywhere")
    q = 1.0 - phi3
    entropy = (q * np.log(q) + phi3) @ measure.weights
    rate = (np.asarray(phi1, dtype=float) ** 2 / (2.0 * params.beta1)
            + np.asarray(phi2, dtype=float) ** 2 / (2.0 * params.beta2)
            + entropy / params.beta3)
    return rate if rate.ndim else float(rate)
