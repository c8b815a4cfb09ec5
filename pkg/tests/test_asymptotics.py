import math

import gmpy2
import mpmath
import numpy as np
import pytest
from gmpy2 import mpfr
from hypothesis import given
from hypothesis import strategies as st

from pochxi._mp import to_mpf, working
from pochxi.afamily import (
    DomainError,
    bessel,
    dirichlet5,
    first_zero,
    incgamma,
    riemann_bessel_approx,
    sign_changes,
    xi_exact,
)
from pochxi.coefficients import coeff_vector
from pochxi.asymptotics import (
    FitResult,
    _sublogxl_beta,
    bessel_NT,
    bessel_xi_asymptotic,
    bessel_zeros,
    constants_s_m,
    fit,
    growth_class,
    incgamma_asymptotic,
    lambert_w,
    riemann_bessel_asymptotic,
    riemann_bessel_NT,
    riemann_bessel_zero_spacing,
    separation_margin,
    solve_u_equation,
    sublog,
    sublog_r,
)

BITS = 256


# ---------------------------------------------------------------- Lambert W / sublog


def test_lambert_trivial_points():
    assert lambert_w(0) == 0
    with working(BITS):
        assert abs(lambert_w(gmpy2.exp(mpfr(1)), BITS) - 1) < mpfr("1e-70")
        # -1/e is rounded, so W sits within sqrt(ulp) of the branch point
        assert abs(lambert_w(-gmpy2.exp(mpfr(-1)), BITS) + 1) < mpfr("1e-35")


def test_lambert_residual_at_ten():
    with working(BITS):
        w = lambert_w(10, BITS)
        assert abs(w * gmpy2.exp(w) - 10) <= mpfr("1e-28")


@given(st.floats(-0.3678, 1e8))
def test_lambert_defining_equation(x):
    with working(BITS):
        w = lambert_w(x, BITS)
        xv = mpfr(x)
        assert abs(w * gmpy2.exp(w) - xv) <= mpfr("1e-30") * max(abs(xv), mpfr("1e-10"))
        assert w >= -1


def test_lambert_matches_mpmath():
    with mpmath.workprec(BITS):
        for x in ("0.5", "3", "1e5"):
            ref = mpmath.lambertw(mpmath.mpf(x)).real
            assert abs(to_mpf(lambert_w(x, BITS)) - ref) < mpmath.mpf("1e-70") * abs(ref)


def test_lambert_domain():
    with pytest.raises(DomainError):
        lambert_w(-0.5)


def test_sublog_exact_points():
    with working(BITS):
        assert abs(sublog(4, BITS) - 2) < mpfr("1e-70")
        assert abs(sublog(27, BITS) - 3) < mpfr("1e-70")


@pytest.mark.parametrize("n", ["10", "1e3", "1e6", "1e12"])
def test_sublog_defining_equation(n):
    with working(BITS):
        s = sublog(n, BITS)
        nv = mpfr(n)
        assert abs(s**s - nv) <= mpfr("1e-25") * nv


def test_sublog_sandwich_at_million():
    with working(BITS):
        L = gmpy2.log(mpfr(10) ** 6)
        s = sublog(10**6, BITS)
        assert L**mpfr("0.9") < s < L


def test_sublog_r():
    with working(BITS):
        assert abs(sublog_r(10**5, 1, BITS) - sublog(10**5, BITS)) < mpfr("1e-70")
        s = sublog_r(10**5, 3, BITS)
        # log n = s log(s / r)
        assert abs(s * gmpy2.log(s / 3) - gmpy2.log(mpfr(10) ** 5)) < mpfr("1e-60")
    with pytest.raises(DomainError):
        sublog(1)
    with pytest.raises(DomainError):
        sublog_r(10, 0)


# ---------------------------------------------------------------- fits on synthetic data


def test_log_power_recovers_parameters():
    n = np.arange(10, 201, dtype=float)
    y = 5.58 * np.log(n + 1) ** 0.66 - 6.76
    f = fit((n, y), "log_power")
    assert abs(f.params["c"] - 0.66) < 1e-6 and abs(f.params["A"] - 5.58) < 1e-5
    assert f.r2 == pytest.approx(1.0, abs=1e-12)
    assert f.n_range == (10, 200) and f.npoints == 191


def test_pure_log_and_sublog_recover_parameters():
    n = np.arange(10, 120, dtype=float)
    f = fit((n, 2.5 * np.log(n / 3.0)), "pure_log")
    assert f.params["A"] == pytest.approx(2.5) and f.params["n0"] == pytest.approx(3.0)
    y = 2 * 0.7 * np.array([float(sublog(int(k), 64)) for k in n]) - 0.4
    g = fit((n, y), "sublog")
    assert g.params["b"] == pytest.approx(0.7, rel=1e-8) and g.params["D"] == pytest.approx(-0.4)


def test_sublogxl_recovers_parameters():
    n = np.arange(10, 201, 3, dtype=float)
    truth = dict(sigma=2.0, mu=0.3, q=3.0)
    y = np.array([_sublogxl_beta(k, truth["sigma"], truth["mu"], truth["q"], 1.0) for k in n])
    f = fit((n, y), "sublogxl", a=1.0)
    assert f.r2 > 0.999999
    assert f.params["sigma"] == pytest.approx(2.0, rel=1e-3)
    assert f.params["q"] == pytest.approx(3.0, rel=1e-3)


def test_sublogxl_beta_solves_its_equation():
    b = _sublogxl_beta(150.0, 0.83, 4e-5, 16.5, 1.0)
    L = math.log(b / 4e-5)
    assert b / 2 * (math.log(0.83 / (2 * math.e) * L) + 16.5 / (0.83 * L)) == pytest.approx(
        math.log(150.0), rel=1e-12)


def test_fit_errors_and_export():
    n = np.arange(1, 9, dtype=float)
    with pytest.raises(ValueError):
        fit((n, n), "log_power")
    with pytest.raises(ValueError):
        fit((np.arange(20.0), np.arange(20.0)), "cubic")
    n = np.arange(10, 40, dtype=float)
    f = fit((n, np.log(n)), "pure_log")
    head, row = f.csv_lines()
    assert head.split(",")[0] == "model" and row.startswith("pure_log,")
    assert isinstance(f, FitResult) and f.r2 <= 1


# ---------------------------------------------------------------- fits on traces


def test_step_fit_exponent(traces):
    f = fit(traces("step_w1"), "log_power", (4, 100))
    assert 0.9 <= f.params["c"] <= 1.1


def test_bessel_fit_exponent(traces):
    f = fit(traces("bessel_a1"), "log_power", (10, 200))
    assert 0.53 <= f.params["c"] <= 0.73 and f.r2 > 0.9999


def test_riemann_fit_exponent(traces):
    f = fit(traces("riemann"), "log_power", (10, 200))
    assert 0.56 <= f.params["c"] <= 0.76
    assert 5.0 <= f.params["A"] <= 6.2


@pytest.mark.parametrize("name", ["step_w1", "bessel_a1", "riemann"])
def test_fit_stable_under_even_subsample(traces, name):
    tr = traces(name)
    full = fit(tr, "log_power", (10, 200))
    ns = np.array([r.n for r in tr.good_rows()])
    even = fit(tr, "log_power", (10, 200), subsample=slice(int(ns[ns >= 10][0] % 2), None, 2))
    assert abs(full.params["c"] - even.params["c"]) <= 0.05


def test_growth_classifier(traces):
    sub = [fit(traces(n), "log_power", (10, 200)).params["c"] for n in ("riemann", "bessel_a1")]
    supra = [fit(traces("tau_k5"), "log_power", (10, 200)).params["c"]]
    assert all(c < 0.8 for c in sub) and all(c > 1.1 for c in supra)
    assert [growth_class(c) for c in sub + supra] == ["sub", "sub", "supra"]
    assert separation_margin(sub, supra) >= 0.3


def test_dirichlet5_weight_breaks_alternation():
    # the sign-changing weight makes most b_k negative at moderate beta
    with working(256):
        cv = coeff_vector(dirichlet5(5), "4", range(11), 256, 1e-30)
        assert sum(v <= 0 for v in cv.values) >= 5
        assert all(v > 0 for v in coeff_vector(dirichlet5(5), "20", range(11), 256, 1e-30).values)


# ---------------------------------------------------------------- u-equation


def test_u_equation_solution():
    s = solve_u_equation(1.12)
    assert abs(s.u_star - 4.4) <= 0.1


def test_u_equation_offsets_and_ratio():
    s = solve_u_equation(1.12)
    assert abs(s.n0 - 5.10) <= 0.1 and abs(math.log(s.n0) - 1.63) <= 0.02
    assert s.jump_ratio == pytest.approx(math.exp(math.pi / s.u_star))
    assert abs(s.jump_ratio - 2.1) <= 0.15
    assert math.exp(math.pi / 4.4) == pytest.approx(2.04, abs=0.01)


def test_u_equation_residual_at_root():
    s = solve_u_equation(1.12)
    with mpmath.workprec(128):
        g = mpmath.gamma(1 - 1j * mpmath.mpf(s.u_star))
        lhs = s.u_star * mpmath.log(mpmath.log(1 / abs(g))) + mpmath.loggamma(1 - 1j * s.u_star).imag
        assert abs(lhs - (1.12 + mpmath.pi)) < 1e-12
        assert s.n0 == pytest.approx(float(mpmath.log(1 / abs(g))))


def test_u_equation_rejects_bad_tau():
    with pytest.raises(DomainError):
        solve_u_equation(0)


def test_jump_predictions_bracket_step_jumps():
    s = solve_u_equation(1.12)
    pred = s.jump_ns(6)
    assert all(b / a == pytest.approx(s.jump_ratio) for a, b in zip(pred, pred[1:]))
    for j in (6, 17, 40, 87):
        nearest = min(pred, key=lambda p: abs(math.log(p / j)))
        assert max(nearest / j, j / nearest) <= 1.5, j


# ---------------------------------------------------------------- constants


def test_constants():
    s, m, q = constants_s_m()
    assert abs(s - 0.831) <= 0.001
    assert abs(m / mpmath.mpf("3.89e-5") - 1) <= 0.02
    assert q == pytest.approx(21 * math.pi / 4) and abs(q - 16.49) < 0.01


# ---------------------------------------------------------------- reference forms


def test_bessel_first_zero_from_large_t_form():
    exact = first_zero(bessel(), "0.5", 10, steps=60)
    assert abs(bessel_zeros(1, 1) - float(exact)) <= 0.3


@pytest.mark.parametrize("a,k", [(1, 1), (1, 4), ("0.005", 2), ("0.3", 7)])
def test_bessel_zeros_sit_on_cosine_nodes(a, k):
    with mpmath.workprec(128):
        t = bessel_zeros(a, k)
        am = mpmath.mpf(a)
        phase = t / 2 * mpmath.log(t / (2 * am * mpmath.e)) - mpmath.pi / 4
        assert abs(phase - (k - mpmath.mpf(1) / 2) * mpmath.pi) < mpmath.mpf("1e-30")
        assert abs(bessel_xi_asymptotic(a, t)) < mpmath.mpf("1e-30")
        assert abs(bessel_NT(a, t) - (k - mpmath.mpf(1) / 4)) < mpmath.mpf("1e-30")


def test_small_a_bessel_zeros_near_exact():
    brackets = sign_changes(bessel("0.005"), "0.5", 3, steps=250)[:2]
    exact = [float(first_zero(bessel("0.005"), a, b, steps=4)) for a, b in brackets]
    got = [float(bessel_zeros("0.005", k)) for k in (1, 2)]
    assert exact[0] == pytest.approx(1.29, abs=0.01) and exact[1] == pytest.approx(2.47, abs=0.01)
    assert all(abs(g - e) <= 0.05 * e for g, e in zip(got, exact))


def test_bessel_asymptotic_amplitude_ratio():
    # at the cosine crests the exact transform exceeds the closed form by a factor -> pi
    ratios = []
    for k in (4, 6, 8, 10):
        with mpmath.workprec(128):
            crest = mpmath.findroot(
                lambda t: t / 2 * mpmath.log(t / (2 * mpmath.e)) - mpmath.pi / 4 - k * mpmath.pi,
                10 + 2 * k)
            ratios.append(float(xi_exact(bessel(), str(crest), 128) / bessel_xi_asymptotic(1, crest)))
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert all(0 < r - math.pi < 0.02 for r in ratios)


def test_bessel_NT_counts_zeros():
    count = len(sign_changes(bessel(), "0.5", 30, steps=300))
    assert abs(float(bessel_NT(1, 30)) - count) <= 1


def test_incgamma_asymptotic_ratio_at_100():
    r = float(xi_exact(incgamma("1"), 100, 128)) / float(incgamma_asymptotic(1, 100))
    assert 0.8 <= r <= 1.2


def test_incgamma_asymptotic_forms():
    assert incgamma_asymptotic(1, 7) == pytest.approx(float(8 / (mpmath.e * 49)))
    for a in (0.3, 2.0):
        ratio = incgamma_asymptotic(a, 10) / incgamma_asymptotic(1, 10)
        assert float(ratio) == pytest.approx(a * math.exp(-a) / math.exp(-1))


def test_incgamma_asymptotic_improves_with_t():
    errs = [abs(float(xi_exact(incgamma("1"), t, 128)) / float(incgamma_asymptotic(1, t)) - 1)
            for t in (25, 50, 100)]
    assert errs[2] < errs[0]


def test_riemann_bessel_ratio_at_30():
    r = float(riemann_bessel_asymptotic(30)) / float(xi_exact(riemann_bessel_approx(), 30, 128))
    assert 0.7 <= r <= 1.3


def test_riemann_bessel_zero_count():
    counted = len(sign_changes(riemann_bessel_approx(), 20, 40, steps=200))
    predicted = float(riemann_bessel_NT(40) - riemann_bessel_NT(20))
    assert abs(predicted - counted) <= 1


def test_riemann_bessel_zero_spacing_against_measured_gaps():
    zs = [float(a) for a, _ in sign_changes(riemann_bessel_approx(), 20, 40, steps=400)]
    for a, b in zip(zs, zs[1:]):
        assert abs((b - a) / float(riemann_bessel_zero_spacing((a + b) / 2)) - 1) < 0.1
