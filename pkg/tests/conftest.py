"""Shared fixtures: a small synthetic economy workspace for pipeline tests."""

import pytest

from latentpc.synthetic import EconomyParams, write_economy

# Short sample keeps CLI round-trips fast while leaving room for the df gate.
FAST_PARAMS = EconomyParams(start_year=1988, end_year=2012)


@pytest.fixture(scope="session")
def economy_workspace(tmp_path_factory):
    """Synthetic vintage CSVs plus a run config, written once per session."""
    root = tmp_path_factory.mktemp("economy")
    config_path = write_economy(
        root, seed=7, params=FAST_PARAMS, methodologies=("LSR", "ARX1", "MA1", "EWMA")
    )
    return config_path
