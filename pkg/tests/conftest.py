from pathlib import Path

import numpy as np
import pytest

import ranswitch as rs

REPO_ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = REPO_ROOT / "scenarios"


@pytest.fixture(scope="session")
def scenarios_dir() -> Path:
    return SCENARIOS


@pytest.fixture(scope="session")
def two_mode_family():
    """Scalar modes dx/dt = -x and dx/dt = +x."""
    return rs.SubsystemFamily(
        n=1, drift=(rs.LinearField([[-1.0]]), rs.LinearField([[1.0]]))
    )


@pytest.fixture(scope="session")
def eh_law():
    return rs.SwitchingLaw.eh(6.0, [0.8, 0.2], sigma0=0)


@pytest.fixture(scope="session")
def two_mode_cert(two_mode_family):
    return rs.CertificateFamily.from_quadratic(
        [np.eye(1), np.eye(1)], drifts=two_mode_family.drift, mu=1.01
    )


@pytest.fixture(scope="session")
def synthesis_family():
    """Scalar dx/dt = x + x u."""
    return rs.SubsystemFamily(
        n=1,
        drift=(rs.LinearField([[1.0]]),),
        control=((rs.LinearField([[1.0]]),),),
    )


@pytest.fixture(scope="session")
def synthesis_cert():
    return rs.CertificateFamily.from_quadratic([[[0.5]]], lam=[1.0], mu=1.01)
