import numpy as np
import pytest

from mcadams_anon.lpc import PoleSet, coeffs_from_poles

AR2_RHO = 0.95
AR2_THETA = 0.3927  # about 1000 Hz at 16 kHz


def ar2_coeffs(rho=AR2_RHO, theta=AR2_THETA):
    """A(z) coefficients of a resonator, computed from the quadratic factor by hand."""
    return np.array([-2 * rho * np.cos(theta), rho**2])


def random_stable_poles(rng, order, rho_max=0.98):
    """Random conjugate-closed pole set of the given order with |p| < rho_max."""
    n_pairs = order // 2
    n_real = order - 2 * n_pairs
    rho = rng.uniform(0.05, rho_max, n_pairs)
    phi = rng.uniform(0.05, np.pi - 0.05, n_pairs)
    real = rng.uniform(-rho_max, rho_max, n_real)
    return PoleSet(
        np.concatenate([rho, rho, np.abs(real)]),
        np.concatenate([phi, -phi, np.where(real < 0, np.pi, 0.0)]),
    )


def ar_process(coeffs, n, rng, gain=0.01):
    from scipy.signal import lfilter

    return lfilter([1.0], np.concatenate(([1.0], coeffs)), gain * rng.standard_normal(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def resonator_1k():
    return coeffs_from_poles(PoleSet([AR2_RHO, AR2_RHO], [AR2_THETA, -AR2_THETA]))


def eer_bruteforce(targets, nontargets):
    """Exhaustive sweep: try every score (and +inf) as a threshold, walk the
    resulting operating points in threshold order and intersect each segment
    with the FA = FR diagonal."""
    thresholds = sorted(set(list(targets) + list(nontargets))) + [float("inf")]
    points = []
    for t in thresholds:
        fa = sum(1 for s in nontargets if s >= t) / len(nontargets)
        fr = sum(1 for s in targets if s < t) / len(targets)
        points.append((fa, fr))
    for (fa0, fr0), (fa1, fr1) in zip(points, points[1:]):
        d0, d1 = fa0 - fr0, fa1 - fr1
        if d0 == 0:
            return fa0
        if d0 > 0 >= d1:
            lam = d0 / (d0 - d1)
            return fa0 + lam * (fa1 - fa0)
    raise AssertionError("no crossing found")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
