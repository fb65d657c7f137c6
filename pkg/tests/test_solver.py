"""Solver oracles: closed forms, root properties, coefficient equations."""

import dataclasses
import math
import warnings

import numpy as np
import pytest

from alphamv.config import ModelParams
from alphamv.errors import NumericalError, SaturationWarning, ValidationError
from alphamv.levy import build_measure, integrate
from alphamv.solver import (bracket_pi_q, count_foc_sign_changes, distortions,
                            penalty_rate, pi_s_star, post_default_coeffs,
                            pre_default_system, reference_mean_intercepts,
                            reinsurance_foc, solve_equilibrium, solve_pi_q_grid,
                            solve_pi_q_star, value_function)

from conftest import BASE_KWARGS


# ---------------------------------------------------------------------------
# stock strategy closed form
# ---------------------------------------------------------------------------

def test_pi_s_star_hand_evaluated_at_horizon(base_params):
    # independent hand arithmetic: (0.05 + 0.025 + 0.03) / (0.04 * 2.0)
    assert pi_s_star(base_params.T, base_params) == pytest.approx(0.105 / 0.08, abs=1e-12)


def test_pi_s_star_vanishes_when_mu_equals_r_and_rho_zero():
    params = ModelParams(**{**BASE_KWARGS, "mu": 0.05, "rho": 0.0})
    for t in np.linspace(0.0, params.T, 7):
        assert pi_s_star(t, params) == pytest.approx(0.0, abs=1e-15)


def test_pi_s_star_rho_zero_reduction():
    params = ModelParams(**{**BASE_KWARGS, "rho": 0.0})
    ts = np.linspace(0.0, params.T, 9)
    expected = ((params.mu - params.r) * np.exp(-params.r * (params.T - ts))
                / (params.sigma2 ** 2 * (params.gamma + (2 * params.alpha - 1) * params.beta2)))
    assert np.allclose(pi_s_star(ts, params), expected, rtol=1e-14)


def test_pi_s_star_invariant_to_beta12_at_alpha_half():
    base = ModelParams(**{**BASE_KWARGS, "alpha": 0.5})
    bumped = ModelParams(**{**BASE_KWARGS, "alpha": 0.5, "beta1": 7.0, "beta2": 0.4})
    ts = np.linspace(0.0, base.T, 11)
    assert np.allclose(pi_s_star(ts, base), pi_s_star(ts, bumped), rtol=0, atol=0)


# ---------------------------------------------------------------------------
# reinsurance first-order condition
# ---------------------------------------------------------------------------

def test_foc_at_zero_exposure(base_params, base_measure):
    # alpha + alpha_hat = 1 cancels the exponential terms against z e^{r(T-t)}
    for t in (0.0, 4.2, base_params.T):
        expected = base_params.eta * math.exp(base_params.r * (base_params.T - t)) \
            * base_measure.moment(1)
        assert reinsurance_foc(t, 0.0, base_params, base_measure) == pytest.approx(expected, rel=1e-12)


def test_foc_negative_at_large_exposure(base_params, base_measure):
    assert reinsurance_foc(0.0, 10.0, base_params, base_measure) < 0.0


def test_foc_strictly_decreasing(base_params, base_measure):
    hi = bracket_pi_q(0.0, base_params, base_measure)
    grid = np.linspace(0.0, hi, 101)
    values = reinsurance_foc(np.zeros_like(grid), grid, base_params, base_measure)
    slopes = np.diff(values) / np.diff(grid)
    assert np.all(slopes < 0.0)


def test_foc_rejects_negative_exposure(base_params, base_measure):
    with pytest.raises(ValidationError):
        reinsurance_foc(0.0, -0.1, base_params, base_measure)


def test_root_against_grid_scan(base_params, base_measure):
    # the root must sit inside the single sign-change cell of a 1e5-point scan
    root = solve_pi_q_star(0.0, base_params, base_measure)
    hi = bracket_pi_q(0.0, base_params, base_measure)
    grid = np.linspace(0.0, hi, 100_001)
    values = reinsurance_foc(np.zeros_like(grid), grid, base_params, base_measure)
    flips = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
    assert flips.size == 1
    assert grid[flips[0]] <= root <= grid[flips[0] + 1]


def test_root_beta3_limit_oracle(base_params, base_measure):
    # first-order expansion of the exponentials: pi_q* -> eta m1 e^{-r(T-t)}/(gamma m2)
    params = dataclasses.replace(base_params, beta3=1e-8)
    m1, m2 = base_measure.moment(1), base_measure.moment(2)
    for t in np.linspace(0.0, params.T, 5):
        limit = params.eta * m1 * math.exp(-params.r * (params.T - t)) / (params.gamma * m2)
        root = solve_pi_q_star(t, params, base_measure)
        assert root == pytest.approx(limit, rel=1e-4)


def test_scalar_and_grid_solvers_agree(base_params, base_measure):
    ts = np.array([0.0, 1.7, 5.0, 9.99, 10.0])
    grid_roots = solve_pi_q_grid(ts, base_params, base_measure)
    for t, expected in zip(ts, grid_roots):
        assert solve_pi_q_star(float(t), base_params, base_measure) == pytest.approx(expected, abs=1e-13)


def test_root_independent_of_default_state(base_params, base_measure):
    # the pre- and post-default conditions are the same equation; two separate
    # invocations must agree bit for bit
    a = solve_pi_q_star(3.0, base_params, base_measure)
    b = solve_pi_q_star(3.0, base_params, base_measure)
    assert a == b


def test_single_sign_change_at_sample_times(base_params, base_measure):
    for t in np.linspace(0.0, base_params.T, 5):
        assert count_foc_sign_changes(float(t), base_params, base_measure, 10_000) == 1


def test_saturation_warning_not_error(base_params, base_measure):
    # pi = 200 pushes beta3 E beyond the cap while the clipped product stays finite
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value = reinsurance_foc(0.0, 200.0, base_params, base_measure)
    assert any(issubclass(w.category, SaturationWarning) for w in caught)
    assert np.isfinite(value) and value < 0.0


def test_bracket_expansion_failure_signals_pathology(base_measure):
    # gamma ~ 0 pushes the root beyond 2^60 while beta3 ~ 0 keeps F positive
    params = ModelParams(**{**BASE_KWARGS, "gamma": 1e-300, "beta3": 1e-300})
    with pytest.raises(NumericalError, match="bracket"):
        bracket_pi_q(0.0, params, base_measure)


# ---------------------------------------------------------------------------
# coefficient system
# ---------------------------------------------------------------------------

def test_terminal_values_are_zero(base_solution):
    c = base_solution.coeffs
    for array in (c.B1, c.B0, c.b1_lo, c.b1_hi, c.b0_lo, c.b0_hi):
        assert array[-1] == 0.0
    assert c.A[-1] == pytest.approx(1.0, abs=1e-15)


def test_discount_coefficient_matches_exponential(base_params, base_solution):
    expected = np.exp(base_params.r * (base_params.T - base_solution.grid))
    assert np.allclose(base_solution.coeffs.A, expected, rtol=1e-15)


def test_b1_lo_below_b1_hi(base_solution):
    # the integrands differ by sign-definite beta1/beta2 terms
    assert np.all(base_solution.coeffs.b1_lo <= base_solution.coeffs.b1_hi + 1e-15)


def test_post_default_coeffs_standalone_match_full_solution(base_params, base_measure, base_solution):
    B1, b1_lo, b1_hi = post_default_coeffs(base_params, base_measure, base_solution.grid)
    assert np.allclose(B1, base_solution.coeffs.B1, rtol=0, atol=1e-12)
    assert np.allclose(b1_lo, base_solution.coeffs.b1_lo, rtol=0, atol=1e-12)
    assert np.allclose(b1_hi, base_solution.coeffs.b1_hi, rtol=0, atol=1e-12)


def test_pre_default_terminal_bond_amount(base_params, base_measure):
    grid = np.linspace(0.0, base_params.T, 201)
    pi_p, B0, b0_lo, b0_hi = pre_default_system(base_params, base_measure, grid)
    p = base_params
    hand = (p.delta - p.zeta * p.hP) / (p.gamma * p.zeta ** 2 * p.hP)
    assert pi_p[-1] == pytest.approx(hand, rel=1e-12)
    assert B0[-1] == 0.0 and b0_lo[-1] == 0.0 and b0_hi[-1] == 0.0


def test_pre_default_bond_amount_zero_at_fair_spread(base_measure):
    # delta = zeta hP kills the excess drift; terminal demand is zero
    params = ModelParams(**{**BASE_KWARGS, "delta": 0.001})
    grid = np.linspace(0.0, params.T, 101)
    pi_p, _, _, _ = pre_default_system(params, base_measure, grid)
    assert pi_p[-1] == pytest.approx(0.0, abs=1e-12)


def test_pre_default_unbounded_demand_errors(base_measure):
    for overrides in ({"hP": 0.0, "delta": 0.01}, {"zeta": 0.0, "delta": 0.0}):
        params = ModelParams(**{**BASE_KWARGS, **overrides})
        grid = np.linspace(0.0, params.T, 51)
        with pytest.raises(NumericalError, match="unbounded"):
            pre_default_system(params, base_measure, grid)


def test_rk4_order_on_grid_halving(base_params, base_measure):
    values = {}
    for m in (40, 80, 160):
        grid = np.linspace(0.0, base_params.T, m + 1)
        _, B0, _, _ = pre_default_system(base_params, base_measure, grid)
        values[m] = B0[0]
    d1 = abs(values[40] - values[80])
    d2 = abs(values[80] - values[160])
    assert math.log2(d1 / d2) >= 3.5


def test_b0_lo_satisfies_its_ode(base_params, base_measure, base_solution):
    # centered difference of b0_lo against the integrand reconstructed from
    # public pieces: b' - hP b + f = O(step^2)
    p = base_params
    sol = base_solution
    c = sol.coeffs
    dist = distortions(sol, p)
    grid = sol.grid
    h = grid[1] - grid[0]
    ks = np.arange(20, grid.size - 1, 97)
    m1 = base_measure.moment(1)
    for k in ks:
        t = grid[k]
        A = c.A[k]
        pi_q, pi_s, pi_p = sol.pi_q[k], sol.pi_s[k], sol.pi_p[k]
        I_plus = integrate(base_measure, lambda z: z * (1.0 - dist.phi3_lo(t, z)))
        f1 = ((p.theta - p.eta + (1 + p.eta) * pi_q) * A * m1
              - p.beta1 * p.sigma1 ** 2 * A ** 2
              + ((p.mu - p.r) * A - 2 * p.beta1 * p.sigma1 * p.sigma2 * p.rho * A ** 2) * pi_s
              - p.sigma2 ** 2 * A ** 2 * (p.beta1 * p.rho ** 2 + p.beta2 * p.rho_hat ** 2) * pi_s ** 2
              - pi_q * A * I_plus)
        f0 = f1 + pi_p * p.delta * A + p.hP * (-p.zeta * pi_p * A + c.b1_lo[k])
        derivative = (c.b0_lo[k + 1] - c.b0_lo[k - 1]) / (2 * h)
        residual = derivative - p.hP * c.b0_lo[k] + f0
        assert abs(residual) <= 50.0 * h ** 2


def test_reference_intercepts_beta_independent(base_params, base_measure, base_solution):
    # under the reference measure the ambiguity levels must not matter
    bumped = dataclasses.replace(base_params, beta1=2.5, beta2=0.7, beta3=0.3)
    b1_ref, b0_ref = reference_mean_intercepts(base_params, base_measure, base_solution)
    b1_ref2, b0_ref2 = reference_mean_intercepts(bumped, base_measure, base_solution)
    assert np.allclose(b1_ref, b1_ref2, rtol=0, atol=1e-12)
    assert np.allclose(b0_ref, b0_ref2, rtol=0, atol=1e-12)


def test_reference_intercept_closed_form_post_default(base_params, base_measure, base_solution):
    # with the strategy fixed, the post-default reference intercept is the
    # plain integral of A(s) [(mu-r) pi_s + (theta - eta + eta pi_q) m1]
    p = base_params
    b1_ref, _ = reference_mean_intercepts(p, base_measure, base_solution)
    fine = base_solution.fine_grid
    A = np.exp(p.r * (p.T - fine))
    m1 = base_measure.moment(1)
    integrand = A * ((p.mu - p.r) * base_solution.fine_pi_s
                     + (p.theta - p.eta + p.eta * base_solution.fine_pi_q) * m1)
    from scipy.integrate import simpson
    expected = simpson(integrand, x=fine)
    assert b1_ref[0] == pytest.approx(expected, rel=1e-9)


# ---------------------------------------------------------------------------
# distortions, value function, penalty
# ---------------------------------------------------------------------------

def test_distortions_vanish_without_ambiguity(base_measure, base_numerics):
    params = ModelParams(**{**BASE_KWARGS, "beta1": 1e-8, "beta2": 1e-8, "beta3": 1e-8})
    solution = solve_equilibrium(params, base_measure, base_numerics)
    dist = distortions(solution, params)
    ts = np.linspace(0.0, params.T, 64)
    zs = np.linspace(0.8, 1.2, 64)
    assert np.max(np.abs(dist.phi1_lo(ts))) < 1e-6
    assert np.max(np.abs(dist.phi2_lo(ts))) < 1e-6
    assert np.max(np.abs(dist.phi3_lo(ts[:, None], zs[None, :]))) < 1e-6


def test_distortion_identities(base_params, base_solution):
    dist = distortions(base_solution, base_params)
    rng = np.random.default_rng(99)
    ts = rng.uniform(0.0, base_params.T, 10_000)
    zs = rng.uniform(0.5, 1.5, 10_000)
    assert np.max(np.abs(dist.phi1_hi(ts) + dist.phi1_lo(ts))) <= 1e-12
    assert np.max(np.abs(dist.phi2_hi(ts) + dist.phi2_lo(ts))) <= 1e-12
    product = (1.0 - dist.phi3_lo(ts, zs)) * (1.0 - dist.phi3_hi(ts, zs))
    assert np.max(np.abs(product - 1.0)) <= 1e-12


def test_averse_measure_inflates_claim_intensity(base_params, base_solution):
    dist = distortions(base_solution, base_params)
    ts = np.linspace(0.0, base_params.T, 32)
    zs = np.linspace(0.7, 1.8, 16)
    assert np.all(1.0 - dist.phi3_lo(ts[:, None], zs[None, :]) >= 1.0)


def test_value_function_terminal_and_affine(base_params, base_solution):
    c = base_solution.coeffs
    for h in (0, 1):
        assert value_function(base_params.T, 3.7, h, c) == pytest.approx(3.7, abs=1e-12)
        x = 1.9
        gap = value_function(4.0, 2 * x, h, c) - value_function(4.0, x, h, c)
        assert gap == pytest.approx(math.exp(base_params.r * (base_params.T - 4.0)) * x, rel=1e-12)
    with pytest.raises(ValidationError):
        value_function(-0.1, 1.0, 0, c)
    with pytest.raises(ValidationError):
        value_function(base_params.T + 0.1, 1.0, 1, c)


def test_penalty_rate_zero_and_quadratic(base_params, base_measure):
    zeros = np.zeros_like(base_measure.nodes)
    assert penalty_rate(0.0, 0.0, zeros, base_params, base_measure) == pytest.approx(0.0, abs=1e-15)
    params = ModelParams(**{**BASE_KWARGS, "beta1": 1.0})
    assert penalty_rate(1.0, 0.0, zeros, params, base_measure) == pytest.approx(0.5, rel=1e-14)


def test_penalty_rate_rejects_phi3_at_one(base_params, base_measure):
    phi3 = np.zeros_like(base_measure.nodes)
    phi3[3] = 1.0
    with pytest.raises(ValidationError):
        penalty_rate(0.0, 0.0, phi3, base_params, base_measure)


def test_penalty_symmetry_between_sides(base_params, base_solution, base_measure):
    # phi1/phi2 contributions agree between the paired distortions (squares
    # kill the signs) while the phi3 entropy terms differ
    dist = distortions(base_solution, base_params)
    t = 2.5
    z = base_measure.nodes
    rate_lo = penalty_rate(float(dist.phi1_lo(t)), float(dist.phi2_lo(t)),
                           dist.phi3_lo(t, z), base_params, base_measure)
    rate_hi = penalty_rate(float(dist.phi1_hi(t)), float(dist.phi2_hi(t)),
                           dist.phi3_hi(t, z), base_params, base_measure)
    def entropy(phi3):
        q = 1.0 - phi3
        return float((q * np.log(q) + phi3) @ base_measure.weights) / base_params.beta3
    assert rate_lo - rate_hi == pytest.approx(
        entropy(dist.phi3_lo(t, z)) - entropy(dist.phi3_hi(t, z)), rel=1e-12)
    assert rate_lo != pytest.approx(rate_hi, rel=1e-6)


def test_solution_strategies_nonnegative_and_reproducible(base_params, base_claims,
                                                          base_numerics, base_solution):
    assert np.all(base_solution.pi_q >= 0.0)
    # an independent re-solve (fresh measure) reproduces every column exactly
    again = solve_equilibrium(base_params, build_measure(base_claims, base_numerics.quad_nodes),
                              base_numerics)
    assert np.array_equal(again.pi_q, base_solution.pi_q)
    assert np.array_equal(again.pi_s, base_solution.pi_s)
    assert np.array_equal(again.pi_p, base_solution.pi_p)
