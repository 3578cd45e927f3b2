import numpy as np
import pytest

from jordanflow.identities import (
    TOLERANCE, burgers_identity, eps_burgers_identity, eps_chain_identity, eps_ns_identity,
    ns_identity, run_identities,
)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_reduction_identities(n):
    rng = np.random.default_rng(n)
    assert ns_identity(rng, n) <= TOLERANCE
    assert burgers_identity(rng, n) <= TOLERANCE


@pytest.mark.parametrize("n,M", [(1, 1), (2, 3), (3, 2)])
def test_epsilon_identities(n, M):
    rng = np.random.default_rng(10 * n + M)
    assert eps_chain_identity(rng, n, M, lmax=4) <= TOLERANCE
    assert eps_ns_identity(rng, n, M) <= TOLERANCE
    assert eps_burgers_identity(rng, n, M) <= TOLERANCE


def test_run_identities_small_and_deterministic():
    a = run_identities(seed=3, sets=4, lmax=3)
    b = run_identities(seed=3, sets=4, lmax=3)
    assert [r.name for r in a] == ["ns", "burgers", "eps_chain", "eps_ns", "eps_burgers"]
    assert all(r.passed and r.sets == 4 for r in a)
    assert [r.max_defect for r in a] == [r.max_defect for r in b]
