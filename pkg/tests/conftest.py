import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from identreg.population import PopulationPair
from identreg.spectral import SymPsd

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end of the run
ACCEPTANCE = {}


def random_psd(rng, p, rank=None, log_range=(-3.0, 2.0), repeat=False):
    """Q diag(lam) Q^T with optional rank deficiency and a repeated eigenvalue."""
    rank = p if rank is None else rank
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    lam = np.zeros(p)
    lam[:rank] = np.exp(rng.uniform(*log_range, rank))
    if repeat and rank >= 2:
        lam[1] = lam[0]
    return (q * lam) @ q.T


def random_pair(rng, p=None, max_dim=12, rank=None, repeat=False):
    p = int(rng.integers(2, max_dim + 1)) if p is None else p
    if rank is None:
        rank = int(rng.integers(1, p + 1))
    a = random_psd(rng, p, rank, repeat=repeat)
    b = a @ rng.standard_normal(p)
    return PopulationPair(SymPsd(a, validate=False), b, validate=False)


def planted_pair(rng, max_dim=12):
    """Relevant eigenvalues in [0.1, 1], irrelevant block in [10, 100]."""
    p = int(rng.integers(4, max_dim + 1))
    d = int(rng.integers(1, min(4, p - 1) + 1))
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    lr = np.sort(rng.uniform(0.1, 1.0, d))[::-1]
    li = np.sort(rng.uniform(10.0, 100.0, p - d))[::-1]
    a = (q * np.r_[lr, li]) @ q.T
    c = rng.uniform(0.5, 2.0, d) * rng.choice([-1.0, 1.0], d)
    return PopulationPair(SymPsd(a), q[:, :d] @ (lr * c))


def ones_pair(rng):
    """Sigma = a 11'/p + mu (I - 11'/p), sigma = c 1_p; the relevant subspace is span{1_p}."""
    p = int(rng.integers(2, 13))
    a, mu, c = rng.uniform(0.1, 1.0), rng.uniform(2.0, 10.0), rng.uniform(0.5, 3.0)
    j = np.ones((p, p)) / p
    return PopulationPair(SymPsd(a * j + mu * (np.eye(p) - j)), c * np.ones(p))


seeds = st.integers(min_value=0, max_value=2**32 - 1)
pairs = seeds.map(lambda s: random_pair(np.random.default_rng(s)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}: {detail}")
