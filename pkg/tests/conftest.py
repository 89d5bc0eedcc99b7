import sys

import numpy as np
import pytest
import scipy.linalg

from svdcluster import Collection


def oracle_sv(M):
    """Singular values via LAPACK gesvd, a different driver from the library's default."""
    M = np.asarray(M, dtype=np.float64)
    if M.shape[1] == 0:
        return np.zeros(0)
    return scipy.linalg.svd(M, compute_uv=False, lapack_driver="gesvd")


def oracle_tail_sq(M, r):
    s = oracle_sv(M)[r:]
    return float(np.sum(s * s))


def oracle_cluster_rel(coll, members, r):
    M = coll.concat(members)
    total = float(np.sum(M * M))
    return np.sqrt(oracle_tail_sq(M, r) / total) if total > 0 else 0.0


def random_collection(rng, m, count, cols=None):
    """Mixed-width gaussian blocks with energies spread over a few orders of magnitude."""
    arrays = []
    for _ in range(count):
        n = cols if cols is not None else int(rng.integers(1, 6))
        arrays.append(rng.standard_normal((m, n)) * 10 ** rng.uniform(-1, 1))
    return Collection.from_arrays(arrays)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(mod.format_line(n))
