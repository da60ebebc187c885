"""Objective assembly: published optima, structural identities, hand-written forms."""

import math

import numpy as np
import pytest

from reluinj.kernels import fq1_lifted, fq1_plain, fq2_lifted, fq2_plain, gamma_sph_hat
from reluinj.objective import (InjectivityMode, Method, NetworkProfile, ObjectiveBreakdown, SaddleVariables,
                               evaluate, phi0_lifted, phi0_plain)

P, V = NetworkProfile, SaddleVariables

WEAK2_OPT = (P((6.7004, 8.267), "weak"), V((1.7697,), (0.8935, 0.9642), (0.3078,), 0.5560))
# published with the two gamma_bar columns in the other order
STRONG2_OPT = (P((6.7004, 12.35), "strong"), V((1.7708,), (0.8938, 0.9647), (0.3077,), 0.3954))
WEAK3_OPT = (P((6.7004, 8.267, 9.49), "weak"), V((1.75, 3.73), (0.8830, 1.1224, 2.344125), (0.3128, 0.2952), 1.1620))
STRONG3_OPT = (P((6.7004, 12.35, 17.13), "strong"), V((1.76, 7.2), (0.8870, 2.1721, 5.7610), (0.3101, 0.1955), 1.5965))
LIFTED_WEAK2_OPT = (P((6.7004, 8.264), "weak"), V((1.7931,), (0.8810, 0.9053), (0.3361,), 0.5504, 0.1091))
LIFTED_STRONG2_OPT = (P((6.7004, 12.183), "strong"), V((1.9060,), (0.7862, 0.5707), (0.5728,), 0.3561, 0.8315))


def random_point(rng, layers, c3=None):
    alphas = tuple(np.cumsum(rng.uniform(0.5, 4.0, layers)) + 2.0)
    r = tuple(np.cumprod(rng.uniform(1.2, 2.5, layers - 1)))
    gb = tuple(rng.uniform(0.5, 2.5, layers))
    gamma = tuple(rng.uniform(0.05, 1.0, layers - 1))
    return alphas, V(r, gb, gamma, rng.uniform(0.0, 2.0), c3)


class TestPublishedOptima:
    """The saddle value at a published optimum is close to zero."""

    @pytest.mark.parametrize("point,tol", [(WEAK2_OPT, 1e-4), (STRONG2_OPT, 1e-4), (STRONG3_OPT, 5e-3),
                                           (LIFTED_WEAK2_OPT, 1e-4), (LIFTED_STRONG2_OPT, 1e-4)])
    def test_near_zero(self, point, tol):
        assert abs(evaluate(*point).total) < tol

    def test_weak2_frozen(self):
        assert evaluate(*WEAK2_OPT).total == pytest.approx(6.798000e-05, abs=1e-9)

    def test_strong2_column_order(self):
        profile, vars = STRONG2_OPT
        printed_order = V(vars.r, vars.gamma_bar[::-1], vars.gamma, vars.nu)
        assert abs(evaluate(profile, printed_order).total) > 40 * abs(evaluate(profile, vars).total)

    @pytest.mark.xfail(strict=True, reason="the rounded 3-layer optimum (r to 3 digits) leaves |phi0| ~ 9e-3")
    def test_weak3_within_5e3(self):
        assert abs(evaluate(*WEAK3_OPT).total) < 5e-3

    def test_weak3_small(self):
        # the rounding of r explains the residual; the solver's own optimum is checked elsewhere
        assert abs(evaluate(*WEAK3_OPT).total) < 1e-2


class TestIdentities:
    def test_strong_is_weak_minus_two_nu(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            layers = int(rng.integers(2, 5))
            alphas, vars = random_point(rng, layers)
            weak = evaluate(P(alphas, "weak"), vars).total
            strong = evaluate(P(alphas, "strong"), vars).total
            assert abs(strong - (weak - 2.0 * vars.nu)) < 1e-12

    def test_small_c3_bridge(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            layers = int(rng.integers(2, 4))
            alphas, vars = random_point(rng, layers)
            lifted = V(vars.r, vars.gamma_bar, vars.gamma, vars.nu, 1e-6)
            for mode in ("weak", "strong"):
                prof = P(alphas, mode)
                assert abs(evaluate(prof, lifted).total - evaluate(prof, vars).total) < 1e-3

    def test_terms_add_up(self):
        bd = evaluate(*WEAK3_OPT)
        assert bd.total == math.fsum(bd.layer_terms + (bd.last_layer_term, bd.nu_term, bd.constant_term))
        assert len(bd.layer_terms) == 2 and bd.constant_term == -1.0

    def test_nu_term(self):
        profile, vars = WEAK2_OPT
        assert evaluate(profile, vars).nu_term == pytest.approx(-0.5560 * (2 - 8.267))


def hand_plain_2(a1, a2, r, gb1, gb2, nu, gamma, kappa):
    return (gb1 + a1 * fq1_plain(gb1, gamma) - gamma * r * r + gb2
            + a2 * r * r * fq2_plain(4 * gb2 * nu / r**2) / (4 * gb2) - nu * (kappa - a2) - 1)


def hand_plain_3(a, r1, r2, gb, nu, g1, g2, kappa):
    nu1 = 4 * gb[2] * nu / r2**2
    return (gb[0] + a[0] * fq1_plain(gb[0], g1) - g1 * r1**2
            + r1 * (gb[1] + a[1] * fq1_plain(gb[1], g2) - g2 * r2**2 / r1**2)
            + gb[2] + a[2] * r2**2 * fq2_plain(nu1) / (4 * gb[2]) - nu * (kappa - a[2]) - 1)


def hand_lifted_2(a1, a2, r, gb1, gb2, nu, gamma, c3, kappa):
    gs = (c3 + math.sqrt(c3 * c3 + 4)) / 4
    return (c3 / 2 + c3 * r * r / 2 + gb1 - a1 / c3 * math.log(fq1_lifted(c3, gb1, gamma)) - gamma * r * r
            + gb2 - nu * (kappa - a2) - a2 / c3 * math.log(fq2_lifted(c3, r, gb2, 4 * gb2 * nu / r**2))
            - gs + math.log(1 - c3 / (2 * gs)) / (2 * c3))


class TestHandWritten:
    @pytest.mark.parametrize("mode,kappa", [("weak", 2), ("strong", 4)])
    def test_two_layer_plain(self, mode, kappa):
        rng = np.random.default_rng(3)
        for _ in range(10):
            (a1, a2), vars = random_point(rng, 2)
            ref = hand_plain_2(a1, a2, vars.r[0], *vars.gamma_bar, vars.nu, vars.gamma[0], kappa)
            assert phi0_plain(P((a1, a2), mode), vars).total == pytest.approx(ref, abs=1e-12)

    @pytest.mark.parametrize("mode,kappa", [("weak", 2), ("strong", 4)])
    def test_three_layer_plain(self, mode, kappa):
        rng = np.random.default_rng(4)
        for _ in range(10):
            a, vars = random_point(rng, 3)
            ref = hand_plain_3(a, *vars.r, vars.gamma_bar, vars.nu, *vars.gamma, kappa)
            assert phi0_plain(P(a, mode), vars).total == pytest.approx(ref, abs=1e-12)

    def test_two_layer_lifted(self):
        profile, vars = LIFTED_STRONG2_OPT
        ref = hand_lifted_2(*profile.alphas, vars.r[0], *vars.gamma_bar, vars.nu, vars.gamma[0], vars.c3, 4)
        assert phi0_lifted(profile, vars).total == pytest.approx(ref, abs=1e-12)

    def test_printed_spherical_form(self):
        profile, vars = LIFTED_STRONG2_OPT
        c3 = vars.c3
        shift = []
        for printed in (False, True):
            gs = gamma_sph_hat(c3, printed)
            shift.append(-gs + math.log(1 - c3 / (2 * gs)) / (2 * c3))
        diff = evaluate(profile, vars, printed_gamma_sph=True).total - evaluate(profile, vars).total
        assert diff == pytest.approx(shift[1] - shift[0], abs=1e-12)
        assert diff < 0


class TestTypes:
    def test_profile(self):
        p = P((6.7004, 8.267, 9.49), "Weak")
        assert p.mode is InjectivityMode.WEAK and p.layers == 3
        assert p.expansions[1] == pytest.approx(1.2338, abs=1e-4)
        with pytest.raises(ValueError):
            P((6.7, -1.0))
        with pytest.raises(ValueError):
            P(())
        with pytest.raises(ValueError):
            P((6.7,), "medium")

    def test_modes_and_methods(self):
        assert InjectivityMode.WEAK.kappa == 2 and InjectivityMode.STRONG.kappa == 4
        assert InjectivityMode.STRONG.threshold_factor == 2
        assert Method.parse("LIFTED") is Method.LIFTED
        with pytest.raises(ValueError):
            Method.parse("exact")

    @pytest.mark.parametrize("kwargs", [
        dict(r=(1.0,), gamma_bar=(1.0,), gamma=(0.3,), nu=0.5),
        dict(r=(), gamma_bar=(1.0, 1.0), gamma=(), nu=0.5),
        dict(r=(-1.0,), gamma_bar=(1.0, 1.0), gamma=(0.3,), nu=0.5),
        dict(r=(1.0,), gamma_bar=(0.0, 1.0), gamma=(0.3,), nu=0.5),
        dict(r=(1.0,), gamma_bar=(1.0, 1.0), gamma=(0.3,), nu=-0.5),
        dict(r=(1.0,), gamma_bar=(1.0, 1.0), gamma=(0.3,), nu=0.5, c3=0.0),
    ])
    def test_variables_rejected(self, kwargs):
        with pytest.raises(ValueError):
            V(**kwargs)

    def test_variables_round_trip(self):
        vars = LIFTED_WEAK2_OPT[1]
        assert V.from_dict(vars.to_dict()) == vars
        assert vars.radii == (1.0, 1.7931)

    def test_lifted_validity(self):
        assert LIFTED_STRONG2_OPT[1].lifted_valid()
        assert not V((1.9,), (0.7862, 0.57), (0.5728,), 0.35, 1.5).lifted_valid()

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            evaluate(P((6.7, 8.2, 9.4)), WEAK2_OPT[1])
        with pytest.raises(ValueError):
            phi0_lifted(*WEAK2_OPT)
        with pytest.raises(ValueError):
            phi0_plain(*LIFTED_WEAK2_OPT)

    def test_breakdown_dict(self):
        d = evaluate(*WEAK3_OPT).to_dict()
        assert isinstance(d["layer_terms"], list)
        assert ObjectiveBreakdown(**{**d, "layer_terms": tuple(d["layer_terms"])}).total == d["total"]
