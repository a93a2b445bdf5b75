from __future__ import annotations

import math
import random

import numpy as np
import pytest

from gradeguard.errors import AllUndefined, NoInflection, RankDeficient
from gradeguard.irm import (
    CalCurve,
    LogisticFit,
    PolyFit,
    assemble_cal,
    calibrate,
    find_ncal_first_inflection,
    find_scal_minimum,
    fit_logistic,
    fit_poly4,
    threshold_sweep,
)
from gradeguard.metrics import confident_rmse


def logistic(x, L, k, t0):
    return L / (1.0 + np.exp(-k * (np.asarray(x, dtype=float) - t0)))


def random_items(rng: random.Random, n: int):
    """(true, mean, score) triples with scores spread over [0, 0.35]."""
    items = []
    for _ in range(n):
        true = rng.choice([i / 2 for i in range(11)])
        mean = min(5.0, max(0.0, true + rng.gauss(0, 0.8)))
        items.append((true, mean, rng.uniform(0.0, 0.35)))
    return items


class TestThresholdSweep:
    def test_full_inclusion_limit(self):
        rng = random.Random(1)
        items = random_items(rng, 30)
        grid = [0.0, 0.1, 0.2, 0.3, 0.4]
        points = threshold_sweep(items, grid)
        last = points[-1]
        assert last.N_k == 30
        assert last.penalty == 0.0
        global_rmse = math.sqrt(sum((t - m) ** 2 for t, m, _ in items) / 30)
        assert last.E_k == pytest.approx(global_rmse, abs=1e-12)

    def test_half_split_by_construction(self):
        items = ([(3.0, 3.0, 0.02)] * 10) + ([(3.0, 3.0, 0.2)] * 10)
        points = threshold_sweep(items, [0.05])
        assert points[0].N_k == 10
        assert points[0].penalty == pytest.approx(0.5)

    def test_every_point_matches_refilter_oracle(self):
        rng = random.Random(2)
        items = random_items(rng, 50)
        grid = [round(0.01 * i, 2) for i in range(40)]
        points = threshold_sweep(items, grid)
        assert len(points) == len(grid)
        for point in points:
            e, n = confident_rmse(items, point.S_k)
            assert point.N_k == n
            assert point.penalty == pytest.approx(1 - n / 50, abs=1e-12)
            if e is None:
                assert point.E_k is None
            else:
                assert point.E_k == pytest.approx(e, abs=1e-12)

    def test_monotone_counts_and_penalty(self):
        rng = random.Random(3)
        items = random_items(rng, 80)
        grid = [round(0.005 * i, 3) for i in range(90)]
        points = threshold_sweep(items, grid)
        counts = [p.N_k for p in points]
        penalties = [p.penalty for p in points]
        assert counts == sorted(counts)
        assert penalties == sorted(penalties, reverse=True)

    def test_normalized_and_standardized_moments(self):
        rng = random.Random(4)
        items = random_items(rng, 60)
        points = threshold_sweep(items, [round(0.01 * i, 2) for i in range(40)])
        defined = [p for p in points if p.E_k is not None]
        e_primes = [p.E_prime for p in defined]
        zs = [p.Z_E for p in defined]
        assert max(e_primes) == 1.0
        assert abs(sum(zs) / len(zs)) < 1e-9
        var = sum((z - sum(zs) / len(zs)) ** 2 for z in zs) / (len(zs) - 1)
        assert math.sqrt(var) == pytest.approx(1.0, abs=1e-9)

    def test_all_undefined_raises(self):
        items = [(3.0, 3.0, 0.5)] * 5
        with pytest.raises(AllUndefined):
            threshold_sweep(items, [0.0, 0.1])


class TestFitLogistic:
    def test_exact_recovery_on_noiseless_data(self):
        xs = np.linspace(0.0, 0.2, 40)
        ys = logistic(xs, L=1.0, k=30.0, t0=0.08)
        fit = fit_logistic(xs, ys)
        assert fit.L == pytest.approx(1.0, abs=1e-6)
        assert fit.k == pytest.approx(30.0, abs=1e-6)
        assert fit.t0 == pytest.approx(0.08, abs=1e-6)
        assert fit.residual_rms < 1e-9
        assert not fit.degenerate

    def test_value_at_midpoint_is_half_amplitude(self):
        xs = np.linspace(0.0, 0.3, 30)
        fit = fit_logistic(xs, logistic(xs, L=2.0, k=25.0, t0=0.12))
        assert fit.value(fit.t0) == pytest.approx(fit.L / 2.0, rel=1e-9)

    def test_constant_data_gives_flat_degenerate_fit(self):
        xs = np.linspace(0.0, 0.5, 12)
        fit = fit_logistic(xs, np.full_like(xs, 0.7))
        assert fit.degenerate
        assert abs(fit.k) < 1e-3
        assert fit.value(0.25) == pytest.approx(0.7)
        assert fit.residual_rms == pytest.approx(0.0, abs=1e-12)

    def test_noisy_data_keeps_small_residuals(self):
        xs = np.linspace(0.0, 0.25, 50)
        clean = logistic(xs, L=1.0, k=40.0, t0=0.1)
        for seed in range(100):
            rng = np.random.default_rng(seed)
            fit = fit_logistic(xs, clean + rng.normal(0, 0.01, size=xs.shape))
            assert fit.residual_rms <= 0.02

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            fit_logistic([0.0, 0.1, 0.2], [0.0, 0.5, 1.0])


class TestFitPoly4:
    def test_quartic_recovered_exactly(self):
        xs = np.linspace(0.0, 1.0, 11)
        ys = xs ** 4 - xs ** 2 + 0.3
        fit = fit_poly4(xs, ys)
        assert fit.coeffs == pytest.approx((0.3, 0.0, -1.0, 0.0, 1.0), abs=1e-9)

    def test_constant_data(self):
        xs = np.linspace(0.0, 0.5, 9)
        fit = fit_poly4(xs, np.full_like(xs, 0.7))
        assert fit.coeffs == pytest.approx((0.7, 0.0, 0.0, 0.0, 0.0), abs=1e-9)

    def test_five_points_interpolated_exactly(self):
        xs = np.array([0.0, 0.1, 0.25, 0.4, 0.5])
        rng = np.random.default_rng(8)
        ys = rng.uniform(0, 1, size=5)
        fit = fit_poly4(xs, ys)
        assert fit.residual_rms == pytest.approx(0.0, abs=1e-9)
        assert fit.value(xs) == pytest.approx(ys, abs=1e-9)

    def test_rank_deficiency_detected(self):
        xs = np.array([0.0, 0.1, 0.1, 0.2, 0.2, 0.3])
        with pytest.raises(RankDeficient):
            fit_poly4(xs, np.ones_like(xs))

    def test_no_perturbed_coefficients_do_better(self):
        rng = np.random.default_rng(15)
        xs = np.linspace(0.0, 0.5, 25)
        ys = rng.uniform(0, 1, size=xs.shape)
        fit = fit_poly4(xs, ys)
        base = np.array(fit.coeffs)
        vander = np.vander(xs, 5, increasing=True)
        best_sse = float(np.sum((vander @ base - ys) ** 2))
        for _ in range(300):
            trial = base + rng.normal(0, 1e-4, size=5)
            sse = float(np.sum((vander @ trial - ys) ** 2))
            assert sse >= best_sse - 1e-12


def synthetic_sweep(n_low=25, n_high=25):
    """Items whose scores split cleanly into a low and a high population."""
    rng = random.Random(20)
    items = []
    for _ in range(n_low):
        true = rng.choice([i / 2 for i in range(11)])
        items.append((true, min(5.0, max(0.0, true + rng.gauss(0, 0.1))),
                      rng.uniform(0.02, 0.05)))
    for _ in range(n_high):
        true = rng.choice([i / 2 for i in range(11)])
        items.append((true, min(5.0, max(0.0, true + rng.gauss(0, 0.9))),
                      rng.uniform(0.08, 0.2)))
    grid = [round(0.005 * i, 3) for i in range(61)]
    return threshold_sweep(items, grid)


class TestAssembleCal:
    def test_curve_is_half_and_half(self):
        sweep = synthetic_sweep()
        curve = assemble_cal(sweep, "ncal", exclusion_cutoff=0.02)
        for x in np.linspace(curve.domain[0], curve.domain[1], 17):
            expected = 0.5 * curve.rmse_fit.value(x) + 0.5 * curve.penalty_fit.value(x)
            assert curve.value(x) == pytest.approx(expected, abs=1e-12)

    def test_all_confident_sweep_has_zero_penalty_fit(self):
        items = [(3.0, 3.1, 0.01), (2.0, 2.2, 0.015), (4.0, 3.9, 0.012),
                 (1.0, 1.3, 0.018), (5.0, 4.8, 0.011), (2.5, 2.4, 0.013)]
        grid = [0.02, 0.05, 0.1, 0.15, 0.2, 0.25]
        sweep = threshold_sweep(items, grid)
        curve = assemble_cal(sweep, "ncal", exclusion_cutoff=0.0)
        assert curve.penalty_fit.coeffs == pytest.approx((0, 0, 0, 0, 0), abs=1e-9)

    def test_exclusion_applies_to_logistic_not_poly(self):
        sweep = synthetic_sweep()
        cutoff = 0.03
        curve = assemble_cal(sweep, "scal", exclusion_cutoff=cutoff)
        kept = [(p.S_k, p.Z_E) for p in sweep
                if p.Z_E is not None and p.S_k >= cutoff]
        manual_log = fit_logistic([x for x, _ in kept], [y for _, y in kept])
        assert curve.rmse_fit == manual_log
        manual_poly = fit_poly4([p.S_k for p in sweep], [p.penalty for p in sweep])
        assert curve.penalty_fit == manual_poly

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            assemble_cal(synthetic_sweep(), "other")


def flat_logistic(level: float) -> LogisticFit:
    return LogisticFit(L=level, k=0.0, t0=0.1, residual_rms=0.0, degenerate=True)


def poly_from_coeffs(*coeffs) -> PolyFit:
    return PolyFit(coeffs=tuple(coeffs), residual_rms=0.0)


class TestScalMinimum:
    def test_increasing_logistic_with_zero_poly_minimizes_left(self):
        curve = CalCurve(mode="scal",
                         rmse_fit=LogisticFit(L=1.0, k=20.0, t0=0.2, residual_rms=0.0),
                         penalty_fit=poly_from_coeffs(0, 0, 0, 0, 0),
                         domain=(0.0, 0.5))
        assert find_scal_minimum(curve) == pytest.approx(0.0, abs=1e-5)

    def test_parabola_minimum_found_analytically(self):
        # Flat RMSE fit plus (x - 0.22)^2 penalty: argmin is exactly 0.22.
        curve = CalCurve(mode="scal",
                         rmse_fit=flat_logistic(0.4),
                         penalty_fit=poly_from_coeffs(0.22 ** 2, -2 * 0.22, 1.0, 0.0, 0.0),
                         domain=(0.0, 0.5))
        assert find_scal_minimum(curve) == pytest.approx(0.22, abs=1e-5)

    def test_quartic_minimum_found_analytically(self):
        # Penalty (x - a)^4 has its only stationary point at a.
        a = 0.31
        coeffs = (a ** 4, -4 * a ** 3, 6 * a ** 2, -4 * a, 1.0)
        curve = CalCurve(mode="scal", rmse_fit=flat_logistic(0.0),
                         penalty_fit=poly_from_coeffs(*coeffs), domain=(0.0, 0.5))
        assert find_scal_minimum(curve) == pytest.approx(a, abs=1e-4)

    def test_mode_checked(self):
        curve = CalCurve(mode="ncal", rmse_fit=flat_logistic(0.0),
                         penalty_fit=poly_from_coeffs(0, 0, 0, 0, 0),
                         domain=(0.0, 0.5))
        with pytest.raises(ValueError):
            find_scal_minimum(curve)


class TestNcalInflection:
    def test_pure_logistic_inflects_at_midpoint(self):
        t0 = 0.13
        curve = CalCurve(mode="ncal",
                         rmse_fit=LogisticFit(L=1.0, k=35.0, t0=t0, residual_rms=0.0),
                         penalty_fit=poly_from_coeffs(0, 0, 0, 0, 0),
                         domain=(0.0, 0.5))
        assert find_ncal_first_inflection(curve) == pytest.approx(t0, abs=1e-5)

    def test_linear_penalty_does_not_move_the_inflection(self):
        # A linear penalty has zero curvature, so the sign change stays at t0.
        t0 = 0.045
        curve = CalCurve(mode="ncal",
                         rmse_fit=LogisticFit(L=0.8, k=60.0, t0=t0, residual_rms=0.0),
                         penalty_fit=poly_from_coeffs(1.0, -1.5, 0.0, 0.0, 0.0),
                         domain=(0.0, 0.5))
        assert find_ncal_first_inflection(curve) == pytest.approx(t0, abs=1e-5)

    def test_first_of_several_sign_changes_wins(self):
        # Logistic curvature flips at t0=0.1; the cubic penalty flips at 0.3.
        curve = CalCurve(mode="ncal",
                         rmse_fit=LogisticFit(L=1.0, k=80.0, t0=0.1, residual_rms=0.0),
                         penalty_fit=poly_from_coeffs(0.0, 0.0, 1e-6, -1e-6 / 0.9, 0.0),
                         domain=(0.0, 0.5))
        x = find_ncal_first_inflection(curve)
        assert x == pytest.approx(0.1, abs=1e-3)

    def test_no_sign_change_raises(self):
        curve = CalCurve(mode="ncal", rmse_fit=flat_logistic(0.5),
                         penalty_fit=poly_from_coeffs(1.0, -2.0, 1.0, 0.0, 0.0),
                         domain=(0.0, 0.5))
        with pytest.raises(NoInflection):
            find_ncal_first_inflection(curve)


class TestCalibrate:
    def test_two_population_items_give_interior_optima(self):
        rng = random.Random(31)
        items = []
        for _ in range(40):
            true = rng.choice([i / 2 for i in range(11)])
            items.append((true, min(5.0, max(0.0, true + rng.gauss(0, 0.12))),
                          rng.uniform(0.02, 0.05)))
        for _ in range(10):
            true = rng.choice([i / 2 for i in range(11)])
            items.append((true, min(5.0, max(0.0, true + rng.gauss(0, 1.0))),
                          rng.uniform(0.09, 0.22)))
        grid = [round(0.005 * i, 3) for i in range(61)]
        result = calibrate(items, grid=grid, exclusion_cutoff=0.02)
        lo, hi = result.scal_curve.domain
        assert lo <= result.optimal_is_scal <= hi
        assert lo <= result.optimal_is_ncal <= hi
        assert all(s < 0.02 for s in result.excluded_points) or not result.excluded_points

    def test_curves_have_dip_and_knee_shapes(self):
        # Sign-pattern check of the assembled curves on two-population
        # items: the standardized curve dips below its endpoints (U shape)
        # and the normalized curve's curvature changes sign (knee).
        sweep = synthetic_sweep()
        scal = assemble_cal(sweep, "scal", 0.02)
        ncal = assemble_cal(sweep, "ncal", 0.02)
        lo, hi = scal.domain
        optimum = find_scal_minimum(scal)
        assert scal.value(optimum) <= min(scal.value(lo), scal.value(hi)) + 1e-12

        xs = np.linspace(lo, hi, 801)
        curvature_signs = set(np.sign(ncal.second_derivative(xs)))
        assert {1.0, -1.0} <= curvature_signs
        inflection = find_ncal_first_inflection(ncal)
        assert lo <= inflection <= hi

    def test_excluded_points_recorded(self):
        sweep = synthetic_sweep()
        items_grid = [p.S_k for p in sweep]
        assert any(s < 0.02 for s in items_grid)
