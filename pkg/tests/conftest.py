"""Pytest configuration and fixtures."""

import numpy as np
import pytest

from twofe.data import drop_degenerate, write_csv
from twofe.families import get_family
from twofe.models import PanelDataset
from twofe.simulation import DgpKind, DgpSpec, generate


def _pruned(kind: DgpKind, family: str, N: int, T: int, seed: int) -> PanelDataset:
    sim = generate(DgpSpec(kind=kind, N=N, T=T, seed=seed), 0)
    dataset, _, _ = drop_degenerate(sim.dataset, get_family(family))
    return dataset


@pytest.fixture(scope="session")
def probit_panel():
    """Create a static probit panel without degenerate units."""
    return _pruned(DgpKind.STATIC_PROBIT_AR, "probit", N=40, T=10, seed=3)


@pytest.fixture(scope="session")
def gaussian_panel():
    """Create a linear panel with one autoregressive regressor."""
    return _pruned(DgpKind.LINEAR_AR, "gaussian", N=20, T=8, seed=5)


@pytest.fixture(scope="session")
def poisson_panel():
    """Create a static Poisson panel without all-zero units."""
    return _pruned(DgpKind.STATIC_POISSON_AR, "poisson", N=20, T=8, seed=7)


@pytest.fixture
def small_panel():
    """Create a 3 x 4 panel with two regressors and one missing cell."""
    rng = np.random.default_rng(11)
    mask = np.ones((3, 4), dtype=bool)
    mask[1, 2] = False
    return PanelDataset(
        unit_ids=("a", "b", "c"),
        time_ids=("1", "2", "3", "4"),
        y=rng.normal(size=(3, 4)),
        X=rng.normal(size=(3, 4, 2)),
        mask=mask,
        regressor_names=("x1", "x2"),
    )


@pytest.fixture
def probit_csv(tmp_path, probit_panel):
    """Write the probit panel as a long-format CSV."""
    return write_csv(probit_panel, tmp_path / "probit.csv")


@pytest.fixture
def gaussian_csv(tmp_path, gaussian_panel):
    """Write the linear panel as a long-format CSV."""
    return write_csv(gaussian_panel, tmp_path / "gaussian.csv")


@pytest.fixture
def series_csv(tmp_path):
    """Write a balanced count series file (id,time,z,y) for the calibrated designs."""
    rng = np.random.default_rng(2)
    n_units, n_periods = 8, 12
    z = rng.normal(0.0, 0.5, (n_units, n_periods))
    y = rng.poisson(np.exp(1.0 + 0.3 * z)) + 1
    path = tmp_path / "series.csv"
    lines = ["id,time,z,y"]
    for i in range(n_units):
        for t in range(n_periods):
            lines.append(f"{i + 1},{t + 1},{float(z[i, t])!r},{int(y[i, t])}")
    path.write_text("\n".join(lines) + "\n")
    return path
