import numpy as np
import pytest

from vinefolio import bicop
from vinefolio.bicop import ALL_FAMILIES, CopulaFamily as F, FittedBicop
from vinefolio.errors import InvalidParameter, LengthMismatch

PARAM_CASES = [
    (F.INDEPENDENCE, 0.0, None),
    (F.GAUSSIAN, -0.7, None), (F.GAUSSIAN, 0.2, None), (F.GAUSSIAN, 0.9, None),
    (F.STUDENT_T, -0.5, 4.0), (F.STUDENT_T, 0.3, 10.0), (F.STUDENT_T, 0.8, 25.0),
    (F.CLAYTON, 0.5, None), (F.CLAYTON, 2.0, None), (F.CLAYTON, 8.0, None),
    (F.GUMBEL, 1.2, None), (F.GUMBEL, 2.5, None), (F.GUMBEL, 6.0, None),
    (F.FRANK, -8.0, None), (F.FRANK, 2.0, None), (F.FRANK, 15.0, None),
    (F.CLAYTON_90, -2.0, None), (F.CLAYTON_180, 2.0, None), (F.CLAYTON_270, -2.0, None),
    (F.GUMBEL_90, -2.5, None), (F.GUMBEL_180, 2.5, None), (F.GUMBEL_270, -2.5, None),
]


def _cop(fam, th, th2):
    return FittedBicop(fam, th, th2)


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------


def test_independence_density_is_one():
    c = _cop(F.INDEPENDENCE, 0.0, None)
    assert bicop.density(c, 0.3, 0.8) == pytest.approx(1.0)


def test_gaussian_zero_theta_is_independence():
    c = _cop(F.GAUSSIAN, 0.0, None)
    assert bicop.density(c, 0.3, 0.7) == pytest.approx(1.0, abs=1e-12)


def test_clayton_density_matches_mixed_partial_of_cdf():
    th = 2.0
    c = _cop(F.CLAYTON, th, None)

    def cdf(u, v):
        return (u ** -th + v ** -th - 1.0) ** (-1.0 / th)

    eps = 1e-5
    u0, v0 = 0.5, 0.5
    fd = (cdf(u0 + eps, v0 + eps) - cdf(u0 + eps, v0 - eps)
          - cdf(u0 - eps, v0 + eps) + cdf(u0 - eps, v0 - eps)) / (4 * eps * eps)
    assert bicop.density(c, u0, v0) == pytest.approx(fd, rel=1e-4)


@pytest.mark.parametrize("fam,th,th2", PARAM_CASES)
def test_density_finite_nonnegative(fam, th, th2):
    c = _cop(fam, th, th2)
    rng = np.random.default_rng(2)
    u, v = rng.random(200), rng.random(200)
    d = np.asarray(bicop.density(c, u, v))
    assert np.all(np.isfinite(d)) and np.all(d >= 0.0)


def test_invalid_parameter_rejected():
    with pytest.raises(InvalidParameter):
        FittedBicop(F.GAUSSIAN, 1.5, None)
    with pytest.raises(InvalidParameter):
        FittedBicop(F.CLAYTON, -1.0, None)
    with pytest.raises(InvalidParameter):
        FittedBicop(F.GUMBEL, 0.5, None)


@pytest.mark.parametrize("fam,th,th2", [
    (F.GAUSSIAN, 0.6, None), (F.STUDENT_T, 0.5, 5.0),
    (F.CLAYTON, 2.0, None), (F.GUMBEL, 2.5, None), (F.FRANK, 5.0, None),
    (F.CLAYTON_90, -2.0, None), (F.GUMBEL_180, 2.5, None),
])
def test_density_integrates_to_one(fam, th, th2):
    c = _cop(fam, th, th2)
    g = np.linspace(0.0025, 0.9975, 201)
    U, V = np.meshgrid(g, g)
    D = np.asarray(bicop.density(c, U, V))
    integral = np.trapezoid(np.trapezoid(D, g, axis=1), g)
    assert integral == pytest.approx(1.0, abs=1e-2)


def test_uniform_margins():
    c = _cop(F.FRANK, 5.0, None)
    g = np.linspace(0.0025, 0.9975, 201)
    for u0 in (0.2, 0.5, 0.8):
        d = np.asarray(bicop.density(c, np.full_like(g, u0), g))
        assert np.trapezoid(d, g) == pytest.approx(1.0, abs=1e-2)


def test_rotation_density_consistency():
    rng = np.random.default_rng(3)
    u, v = rng.random(100) * 0.9 + 0.05, rng.random(100) * 0.9 + 0.05
    base = _cop(F.CLAYTON, 2.0, None)
    d180 = np.asarray(bicop.density(_cop(F.CLAYTON_180, 2.0, None), u, v))
    assert np.allclose(d180, np.asarray(bicop.density(base, 1 - u, 1 - v)), atol=1e-12)
    d90 = np.asarray(bicop.density(_cop(F.CLAYTON_90, -2.0, None), u, v))
    assert np.allclose(d90, np.asarray(bicop.density(base, 1 - u, v)), atol=1e-12)
    d270 = np.asarray(bicop.density(_cop(F.CLAYTON_270, -2.0, None), u, v))
    assert np.allclose(d270, np.asarray(bicop.density(base, u, 1 - v)), atol=1e-12)


# ---------------------------------------------------------------------------
# h-function and inverse
# ---------------------------------------------------------------------------


def test_h_gaussian_independence():
    c = _cop(F.GAUSSIAN, 0.0, None)
    for v in (0.1, 0.5, 0.9):
        assert bicop.h_func(c, 0.37, v) == pytest.approx(0.37, abs=1e-12)


@pytest.mark.parametrize("fam,th,th2", PARAM_CASES)
def test_h_matches_finite_difference_of_cdf(fam, th, th2):
    # h(u|v) = dC/dv; integrate the density over u' <= u to get C numerically
    # is slow, so use the cheaper identity dh/du = density instead.
    c = _cop(fam, th, th2)
    g = np.linspace(0.1, 0.9, 9)
    U, V = np.meshgrid(g, g)
    eps = 1e-6
    fd = (np.asarray(bicop.h_func(c, U + eps, V))
          - np.asarray(bicop.h_func(c, U - eps, V))) / (2 * eps)
    assert np.max(np.abs(fd - np.asarray(bicop.density(c, U, V)))) < 1e-5


def test_h_is_cdf_in_first_argument():
    c = _cop(F.GUMBEL, 2.5, None)
    u = np.linspace(1e-9, 1 - 1e-9, 500)
    h = np.asarray(bicop.h_func(c, u, np.full_like(u, 0.4)))
    assert np.all(np.diff(h) >= -1e-12)
    assert h[0] < 1e-6 and h[-1] > 1 - 1e-6


def test_clayton180_rotation_identity():
    base = _cop(F.CLAYTON, 2.0, None)
    rot = _cop(F.CLAYTON_180, 2.0, None)
    rng = np.random.default_rng(4)
    u, v = rng.random(50), rng.random(50)
    lhs = np.asarray(bicop.h_func(rot, u, v))
    rhs = 1.0 - np.asarray(bicop.h_func(base, 1 - u, 1 - v))
    assert np.max(np.abs(lhs - rhs)) < 1e-10


@pytest.mark.parametrize("fam,th,th2", PARAM_CASES)
def test_inv_h_round_trip(fam, th, th2):
    c = _cop(fam, th, th2)
    rng = np.random.default_rng(5)
    w = rng.random(1000) * 0.98 + 0.01
    v = rng.random(1000) * 0.98 + 0.01
    u = np.asarray(bicop.inv_h(c, w, v))
    assert np.all((u > 0) & (u < 1))
    assert np.max(np.abs(np.asarray(bicop.h_func(c, u, v)) - w)) < 1e-8


def test_inv_h_gaussian_independence():
    c = _cop(F.GAUSSIAN, 0.0, None)
    assert bicop.inv_h(c, 0.42, 0.9) == pytest.approx(0.42, abs=1e-10)


@pytest.mark.parametrize("fam,th", [(F.GAUSSIAN, 0.6), (F.FRANK, 5.0)])
def test_center_symmetry(fam, th):
    c = _cop(fam, th, None)
    assert bicop.inv_h(c, bicop.h_func(c, 0.5, 0.5), 0.5) == pytest.approx(0.5, abs=1e-8)


def test_h_func_cond_first_consistency():
    # dC/du at (u,v) equals dC/dv at the swapped copula for exchangeable
    # families; for rotations it must match a finite difference in v.
    eps = 1e-6
    rng = np.random.default_rng(6)
    u, v = rng.random(50) * 0.8 + 0.1, rng.random(50) * 0.8 + 0.1
    for fam, th in [(F.GAUSSIAN, 0.6), (F.CLAYTON, 2.0), (F.CLAYTON_90, -2.0),
                    (F.GUMBEL_270, -2.5), (F.FRANK, -5.0), (F.CLAYTON_180, 2.0)]:
        c = _cop(fam, th, None)
        # integrate density over v' <= v by Gauss-Legendre to get dC/du.
        got = np.asarray(bicop.h_func_cond_first(c, u, v))
        nodes, weights = np.polynomial.legendre.leggauss(64)
        approx = np.zeros_like(u)
        for i in range(len(u)):
            t = 0.5 * v[i] * (nodes + 1.0)
            wgt = 0.5 * v[i] * weights
            approx[i] = float(wgt @ np.asarray(bicop.density(c, np.full_like(t, u[i]), t)))
        assert np.max(np.abs(got - approx)) < 1e-4, fam


# ---------------------------------------------------------------------------
# tau
# ---------------------------------------------------------------------------


def test_model_tau_independence():
    assert bicop.model_tau(_cop(F.INDEPENDENCE, 0.0, None)) == 0.0


def test_model_tau_comonotone_limit():
    taus = [bicop.model_tau(_cop(F.GAUSSIAN, th, None)) for th in (0.9, 0.99, 0.999)]
    assert taus == sorted(taus)
    assert taus[-1] > 0.97


@pytest.mark.parametrize("fam,th", [
    (F.GAUSSIAN, 0.6), (F.CLAYTON, 2.0), (F.GUMBEL, 2.0), (F.FRANK, 5.0),
])
def test_model_tau_matches_simulation(fam, th):
    c = _cop(fam, th, None)
    s = bicop.sample(c, 100_000, np.random.default_rng(0))
    emp = bicop.empirical_tau(s[:, 0], s[:, 1])
    assert emp == pytest.approx(bicop.model_tau(c), abs=0.02)


def test_model_tau_sign_matches_parameter_sign():
    for th in (-0.5, 0.5):
        assert np.sign(bicop.model_tau(_cop(F.GAUSSIAN, th, None))) == np.sign(th)
    for th in (-5.0, 5.0):
        assert np.sign(bicop.model_tau(_cop(F.FRANK, th, None))) == np.sign(th)


def test_empirical_tau_perfect_and_reverse():
    u = np.random.default_rng(1).random(60)
    assert bicop.empirical_tau(u, u) == pytest.approx(1.0)
    assert bicop.empirical_tau(u, -u) == pytest.approx(-1.0)


def test_empirical_tau_brute_force():
    rng = np.random.default_rng(7)
    u, v = rng.random(50), rng.random(50)
    num = 0
    for i in range(50):
        for j in range(i + 1, 50):
            num += np.sign((u[i] - u[j]) * (v[i] - v[j]))
    expected = num / (50 * 49 / 2)
    assert bicop.empirical_tau(u, v) == pytest.approx(expected, abs=1e-12)


def test_empirical_tau_length_mismatch():
    with pytest.raises(LengthMismatch):
        bicop.empirical_tau(np.zeros(10), np.zeros(11))


# ---------------------------------------------------------------------------
# fitting and selection
# ---------------------------------------------------------------------------


def test_fit_clayton_recovers_parameter():
    s = bicop.sample(_cop(F.CLAYTON, 2.0, None), 2000, np.random.default_rng(8))
    fitted = bicop.fit(F.CLAYTON, s[:, 0], s[:, 1])
    assert 1.7 <= fitted.theta <= 2.3


def test_fit_independent_data_small_theta():
    rng = np.random.default_rng(9)
    fitted = bicop.fit(F.GAUSSIAN, rng.random(2000), rng.random(2000))
    assert abs(fitted.theta) < 0.08


def test_fit_comonotone_hits_upper_bound():
    u = np.random.default_rng(10).random(500)
    fitted = bicop.fit(F.GUMBEL, u, u.copy())
    upper = bicop._THETA_BOUNDS[F.GUMBEL][1]
    assert fitted.theta == pytest.approx(upper, rel=1e-6)


def test_fit_improves_on_tau_start():
    s = bicop.sample(_cop(F.FRANK, 6.0, None), 1000, np.random.default_rng(11))
    fitted = bicop.fit(F.FRANK, s[:, 0], s[:, 1])
    start = bicop._tau_inversion_start(F.FRANK, bicop.empirical_tau(s[:, 0], s[:, 1]))
    start_ll = bicop._loglik(F.FRANK, start, None, s[:, 0], s[:, 1])
    assert fitted.loglik >= start_ll - 1e-9


def test_select_family_recovers_clayton():
    hits = 0
    for seed in range(20):
        s = bicop.sample(_cop(F.CLAYTON, 3.0, None), 2000, np.random.default_rng(seed))
        sel = bicop.select_family(s[:, 0], s[:, 1],
                                  {F.GAUSSIAN, F.CLAYTON, F.GUMBEL, F.FRANK})
        hits += sel.family is F.CLAYTON
    assert hits >= 18


def test_select_family_independence_dominates():
    rng = np.random.default_rng(12)
    sel = bicop.select_family(rng.random(2000), rng.random(2000), ALL_FAMILIES)
    assert sel.family is F.INDEPENDENCE


def test_select_family_single_candidate():
    rng = np.random.default_rng(13)
    sel = bicop.select_family(rng.random(300), rng.random(300), {F.FRANK})
    assert sel.family is F.FRANK
