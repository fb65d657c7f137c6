"""Claim-size Levy measure: quadrature representation and exact sampling.

The measure nu(dz) of a compound Poisson claim process has total mass lambda
and a density proportional to the claim-size density.  Every integral
``int_0^inf g(z) nu(dz)`` used by the solver is evaluated as a fixed
Gauss-Legendre rule ``sum_i w_i g(z_i)`` whose weights already absorb lambda
and the density, so callers never see the distribution again.

For the truncated normal the quadrature support is clipped to
``[max(0, muZ - 8 sigmaZ), muZ + 8 sigmaZ]``; the neglected tail mass is below
1e-15 of lambda, far beneath the solver's root tolerance, so exponential
integrands remain exact to tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import norm

from .config import ClaimModelSpec
from .errors import NumericalError, ValidationError

__all__ = ["ClaimMeasure", "build_measure", "integrate", "premium_rate", "sample_claims"]

_SUPPORT_SIGMAS = 8.0


@dataclass(frozen=True)
class ClaimMeasure:
    """Quadrature view of the claim measure: nodes z_i > 0, weights w_i >= 0.

    ``sum_i w_i = lambda`` up to quadrature tolerance, and
    ``sum_i w_i z_i = lambda E[Z]``.  Immutable and shareable.
    """

    spec: ClaimModelSpec
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float).copy()
        weights = np.asarray(self.weights, dtype=float).copy()
        if np.any(nodes <= 0):
            raise ValidationError("nodes<=0", "all quadrature nodes must be strictly positive")
        if np.any(weights < 0):
            raise ValidationError("weights<0", "all quadrature weights must be nonnegative")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def moment(self, k: int) -> float:
        """int z^k nu(dz); moment(0) is the total mass lambda."""
        return float(self.weights @ self.nodes ** k)


def build_measure(spec: ClaimModelSpec, quad_nodes: int) -> ClaimMeasure:
    """Build the Gauss-Legendre representation of the claim measure."""
    x, w = leggauss(quad_nodes)
    if spec.kind == "truncated-normal":
        lo = max(0.0, spec.muZ - _SUPPORT_SIGMAS * spec.sigmaZ)
        hi = spec.muZ + _SUPPORT_SIGMAS * spec.sigmaZ
        nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        scale = 0.5 * (hi - lo)
        trunc_const = norm.sf(-spec.muZ / spec.sigmaZ)  # P(Z_untruncated > 0)
        dens = norm.pdf(nodes, loc=spec.muZ, scale=spec.sigmaZ) / trunc_const
        weights = spec.lam * scale * w * dens
    else:
        z_grid, density = spec.z_grid, spec.density
        lo, hi = float(z_grid[0]), float(z_grid[-1])
        nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        scale = 0.5 * (hi - lo)
        dens = np.interp(nodes, z_grid, density)
        # normalize under the same rule so the total mass is lambda exactly
        total = scale * float(w @ dens)
        weights = spec.lam * scale * w * dens / total
    return ClaimMeasure(spec=spec, nodes=nodes, weights=weights)


def integrate(measure: ClaimMeasure, g) -> float:
    """sum_i w_i g(z_i).  Linear in g, monotone for pointwise-ordered integrands.

    Raises NumericalError naming the first offending node if g is not finite
    there.
    """
    values = np.asarray(g(measure.nodes), dtype=float)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NumericalError(
            f"integrand not finite at node z={measure.nodes[bad]!r} (index {bad}): {values[bad]!r}"
        )
    return float(measure.weights @ values)


def premium_rate(measure: ClaimMeasure, theta: float) -> float:
    """(1 + theta) * int z nu(dz), the expected-value premium principle."""
    if theta <= 0:
        raise ValidationError("theta<=0", f"safety loading must satisfy theta > 0, got {theta}")
    return (1.0 + theta) * measure.moment(1)


def sample_truncated_sizes(spec: ClaimModelSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n claim sizes exactly from the claim-size distribution.

    Truncated normal: rejection from the untruncated normal (acceptance is
    essentially 1 for the base parameters).  Tabulated densities: inverse
    transform on the tabulated CDF.
    """
    if n == 0:
        return np.empty(0)
    if spec.kind == "truncated-normal":
        out = rng.normal(spec.muZ, spec.sigmaZ, size=n)
        bad = out <= 0
        while np.any(bad):
            out[bad] = rng.normal(spec.muZ, spec.sigmaZ, size=int(bad.sum()))
            bad = out <= 0
        return out
    cdf = np.concatenate([[0.0], np.cumsum(
        0.5 * (spec.density[1:] + spec.density[:-1]) * np.diff(spec.z_grid))])
    cdf /= cdf[-1]
    return np.interp(rng.random(n), cdf, spec.z_grid)


def sample_claims(measure: ClaimMeasure, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Claim sizes arriving over a window of length dt.

    The count is Poisson(lambda * dt); sizes are iid draws from the claim-size
    distribution.  Pass an independent Generator per concurrent consumer.
    """
    if dt < 0:
        raise ValidationError("dt<0", f"window length must satisfy dt >= 0, got {dt}")
    if dt == 0:
        return np.empty(0)
    count = int(rng.poisson(measure.spec.lam * dt))
    return sample_truncated_sizes(measure.spec, count, rng)
