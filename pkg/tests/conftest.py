"""Shared fixtures: the base parameter set and its solved equilibrium."""

import pytest

from alphamv.config import ClaimModelSpec, ModelParams, NumericsConfig
from alphamv.levy import build_measure
from alphamv.solver import solve_equilibrium

BASE_KWARGS = dict(
    r=0.05, mu=0.1, sigma2=0.2, rho=-0.5, sigma1=0.5, theta=0.1, eta=0.2,
    delta=0.01, zeta=0.5, hP=0.002, gamma=0.5, alpha=0.8,
    beta1=1.0, beta2=3.0, beta3=0.1, T=10.0, T1=12.0, x0=1.0,
)


@pytest.fixture(scope="session")
def base_params():
    return ModelParams(**BASE_KWARGS)


@pytest.fixture(scope="session")
def base_claims():
    return ClaimModelSpec(lam=1.0, muZ=1.0, sigmaZ=0.1)


@pytest.fixture(scope="session")
def base_numerics():
    return NumericsConfig()


@pytest.fixture(scope="session")
def base_measure(base_claims, base_numerics):
    return build_measure(base_claims, base_numerics.quad_nodes)


@pytest.fixture(scope="session")
def base_solution(base_params, base_measure, base_numerics):
    return solve_equilibrium(base_params, base_measure, base_numerics)


@pytest.fixture()
def base_config_file(tmp_path, base_params, base_claims, base_numerics):
    from alphamv.config import save_config
    path = tmp_path / "base.cfg"
    save_config(path, base_params, base_claims, base_numerics)
    return path


def write_config(path, overrides=None, drop=None, numerics_overrides=None):
    """Write the base config as a flat file with optional key overrides."""
    from alphamv.config import NUMERICS_DEFAULTS
    values = dict(BASE_KWARGS)
    values["lambda"] = 1.0
    values["muZ"] = 1.0
    values["sigmaZ"] = 0.1
    if overrides:
        values.update(overrides)
    numerics = dict(NUMERICS_DEFAULTS)
    if numerics_overrides:
        numerics.update(numerics_overrides)
    lines = [f"{k} = {v!r}" for k, v in values.items() if not (drop and k in drop)]
    lines += [f"{k} = {v!r}" for k, v in numerics.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
