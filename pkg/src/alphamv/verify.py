"""Cross-checks between the backward solver and the forward Monte Carlo engine.

Every check is an oracle from an independent route: distorted-measure means
against the backward mean intercepts, the assembled alpha-robust objective
against the closed-form value, algebraic distortion identities, directional
sweeps, and the default-time law.  The report prints one pass/fail line per
check with the measured discrepancy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ClaimModelSpec, ModelParams, NumericsConfig, replace_param
from .errors import ValidationError
from .levy import build_measure
from .simulate import objective_from_terminal, simulate_terminal
from .solver import distortions, pi_s_star, solve_equilibrium, value_function, count_foc_sign_changes
from .sweep import SweepSpec, run_sweep

__all__ = ["CheckResult", "VerificationReport", "run_verification"]

_MIN_VERIFY_PATHS = 1000  # a 3-standard-error suite is meaningless below this


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def _monotone(values: np.ndarray, direction: str) -> bool:
    tol = 1e-10 * max(1.0, float(np.max(np.abs(values))))
    diffs = np.diff(values)
    return bool(np.all(diffs >= -tol) if direction == "inc" else np.all(diffs <= tol))


def run_verification(params: ModelParams, claims: ClaimModelSpec,
                     numerics: NumericsConfig) -> VerificationReport:
    """Run the full oracle suite at the configured Monte Carlo scale."""
    if numerics.mc_paths < _MIN_VERIFY_PATHS:
        raise ValidationError(
            "paths too few",
            f"paths too few for verification: mc_paths={numerics.mc_paths} < {_MIN_VERIFY_PATHS}",
        )
    measure = build_measure(claims, numerics.quad_nodes)
    solution = solve_equilibrium(params, measure, numerics)
    dist = distortions(solution, params, numerics.exp_cap)
    checks: list[CheckResult] = []

    # --- Monte Carlo runs: one per (side, default state) -------------------
    n, dt, seed = numerics.mc_paths, numerics.mc_dt, numerics.seed
    samples = {}
    for i, (side, tag) in enumerate(((dist.lo, "lo"), (dist.hi, "hi"))):
        for h in (1, 0):
            x_T, default_time, _ = simulate_terminal(
                solution, side, params, measure, n, dt, seed + i + 10 * h,
                x0=params.x0, h0=h)
            samples[(tag, h)] = (x_T, default_time)

    erT = math.exp(params.r * params.T)

    # g-intercept oracles: distorted means against the backward intercepts
    for (tag, h), b in (
        (("lo", 1), solution.coeffs.b1_lo), (("lo", 0), solution.coeffs.b0_lo),
        (("hi", 1), solution.coeffs.b1_hi), (("hi", 0), solution.coeffs.b0_hi),
    ):
        x_T, _ = samples[(tag, h)]
        target = erT * params.x0 + b[0]
        se = float(x_T.std(ddof=1) / math.sqrt(x_T.size))
        diff = float(x_T.mean() - target)
        checks.append(CheckResult(
            f"g_intercept_{tag}_h{h}", abs(diff) <= 3 * se,
            f"|mean - (e^rT x0 + b)| = {abs(diff):.3e} vs 3*SE = {3 * se:.3e}",
        ))

    # value identity: alpha J_lo + (1-alpha) J_hi against e^{rT} x0 + B_h(0)
    for h in (1, 0):
        est_lo = objective_from_terminal(samples[("lo", h)][0], dist.lo, params, measure)
        est_hi = objective_from_terminal(samples[("hi", h)][0], dist.hi, params, measure)
        value = params.alpha * est_lo.j_value + params.alpha_hat * est_hi.j_value
        se = math.hypot(params.alpha * est_lo.std_error, params.alpha_hat * est_hi.std_error)
        target = value_function(0.0, params.x0, h, solution.coeffs)
        diff = value - target
        checks.append(CheckResult(
            f"value_identity_h{h}", abs(diff) <= 3 * se,
            f"|alphaJ_lo+alpha_hat*J_hi - V| = {abs(diff):.3e} vs 3*SE = {3 * se:.3e}",
        ))

    # default frequency against the exponential law
    x_T, default_time = samples[("lo", 0)]
    frac = float(np.mean(~np.isnan(default_time)))
    p_def = 1.0 - math.exp(-params.hP * params.T)
    se = math.sqrt(max(p_def * (1 - p_def), 1e-300) / x_T.size)
    checks.append(CheckResult(
        "default_frequency", abs(frac - p_def) <= 3 * se,
        f"|{frac:.5f} - {p_def:.5f}| vs 3*SE = {3 * se:.3e}",
    ))

    # --- algebraic distortion identities ------------------------------------
    rng = np.random.default_rng(numerics.seed)
    ts = rng.uniform(0.0, params.T, 10_000)
    zs = rng.uniform(measure.nodes[0], measure.nodes[-1], 10_000)
    sign_err = max(
        float(np.max(np.abs(dist.phi1_hi(ts) + dist.phi1_lo(ts)))),
        float(np.max(np.abs(dist.phi2_hi(ts) + dist.phi2_lo(ts)))),
    )
    prod_err = float(np.max(np.abs(
        (1.0 - dist.phi3_lo(ts, zs)) * (1.0 - dist.phi3_hi(ts, zs)) - 1.0)))
    checks.append(CheckResult(
        "distortion_sign_identity", sign_err <= 1e-12,
        f"max |phi_hi + phi_lo| = {sign_err:.3e} (tol 1e-12)",
    ))
    checks.append(CheckResult(
        "distortion_product_identity", prod_err <= 1e-12,
        f"max |(1-phi3_lo)(1-phi3_hi) - 1| = {prod_err:.3e} (tol 1e-12)",
    ))

    # informational: largest distortion magnitudes over the grid
    phi3_grid = dist.phi3_lo(solution.fine_grid[:, None], measure.nodes[None, :])
    mags = (
        float(np.max(np.abs(dist.phi1_lo(solution.fine_grid)))),
        float(np.max(np.abs(dist.phi2_lo(solution.fine_grid)))),
        float(np.max(np.abs(phi3_grid))),
    )
    checks.append(CheckResult(
        "distortion_magnitudes", True,
        f"max|phi1| = {mags[0]:.3e}, max|phi2| = {mags[1]:.3e}, max|phi3| = {mags[2]:.3e}",
    ))

    # --- root uniqueness at a few times -------------------------------------
    scan_counts = [count_foc_sign_changes(t, params, measure, 10_000, numerics.exp_cap)
                   for t in np.linspace(0.0, params.T, 11)]
    checks.append(CheckResult(
        "foc_single_sign_change", all(c == 1 for c in scan_counts),
        f"sign changes over 10^4-point scans at 11 times: {sorted(set(scan_counts))}",
    ))

    # --- directional suite ---------------------------------------------------
    directions = [
        ("alpha", 0.5, 1.0, "pi_q0", "dec"),
        ("beta3", 0.01, 1.0, "pi_q0", "dec"),
        ("gamma", 0.1, 2.0, "pi_q0", "dec"),
        ("mu", 0.06, 0.2, "pi_s0", "inc"),
        ("sigma2", 0.1, 0.5, "pi_s0", "dec"),
        ("delta", params.zeta * params.hP, 0.05, "pi_p0", "inc"),
        ("zeta", 0.05, 1.0, "pi_p0", "dec"),
        ("alpha", 0.5, 1.0, "pi_p0", "inc"),
        ("hP", 0.0002, 0.005, "pi_p0", "dec"),
    ]
    for param, lo, hi, quantity, want in directions:
        spec = SweepSpec.from_range(param, lo, hi, 20, quantity)
        result = run_sweep(params, claims, numerics, spec)
        values = result.ok_values()
        ok = values.size >= 2 and _monotone(values, want)
        checks.append(CheckResult(
            f"monotone_{quantity}_vs_{param}", ok,
            f"{'non' if not ok else ''}monotone ({want}) over {values.size} points, "
            f"range [{values[0]:.6g}, {values[-1]:.6g}]",
        ))
    checks.append(CheckResult(
        "monotone_pi_q_vs_t", _monotone(solution.pi_q, "inc"),
        f"pi_q over the time grid, range [{solution.pi_q[0]:.6g}, {solution.pi_q[-1]:.6g}]",
    ))

    # sign conditions of the stock strategy (finite differences)
    eps = 1e-6
    def dpi_s_dt(p: ModelParams) -> float:
        return float((pi_s_star(eps, p) - pi_s_star(0.0, p)) / eps)
    p_up = replace_param(params, claims, numerics, "mu", params.r + 0.05)[0]
    p_dn = replace_param(params, claims, numerics, "mu", params.r - 0.02)[0]
    sign_t = dpi_s_dt(p_up) > 0 and dpi_s_dt(p_dn) < 0
    def dpi_s_dsigma1(rho: float) -> float:
        base = replace_param(params, claims, numerics, "rho", rho)[0]
        bumped = replace_param(base, claims, numerics, "sigma1", params.sigma1 + eps)[0]
        return float((pi_s_star(0.0, bumped) - pi_s_star(0.0, base)) / eps)
    sign_s1 = dpi_s_dsigma1(-0.5) > 0 and dpi_s_dsigma1(0.5) < 0
    checks.append(CheckResult(
        "pi_s_sign_conditions", sign_t and sign_s1,
        "d pi_s/dt sign follows sign(mu - r); d pi_s/d sigma1 sign follows -sign(rho)",
    ))

    return VerificationReport(checks=tuple(checks))
