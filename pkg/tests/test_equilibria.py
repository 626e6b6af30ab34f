from __future__ import annotations

import math

import numpy as np
import pytest

from hyperlv.equilibria import (ContinuumReport, EquilibriumRecord, NoSolution, SolverConfig,
                                Stability, classify_stability, enumerate_equilibria,
                                existence_certificates, solve_k1, solve_tau, solve_winner_set,
                                tau_bounds, tau_map, winner_count_commentary)
from hyperlv.model import CompetitionModel, jacobian, vector_field
from oracles import W0, newton_restricted, tau_grid

# Closed form for b = (2, 3), a = s = 1/2, p = 2: squaring
# tau = (sqrt(2 - tau) + sqrt(3 - tau))^2 twice gives 5 tau^2 - 10 tau + 1 = 0,
# and the admissible root (3 tau >= 5) is 1 + 2/sqrt(5).
TAU_23 = 1.0 + 2.0 / math.sqrt(5.0)


def model(w, t=3, k=0.5):
    return CompetitionModel.from_inputs(w, t=t, k=k)


class TestFixedPoint:
    def test_closed_form_tau(self):
        tau = solve_tau([2.0, 3.0], 0.5, 0.5, 2)
        assert tau == pytest.approx(TAU_23, abs=1e-11)
        assert tau == pytest.approx(1.894, abs=5e-4)

    def test_tau_bounds_example(self):
        lo, hi = tau_bounds([2.0, 3.0], 0.5, 0.5, 2)
        assert (lo, hi) == pytest.approx((1.6, 2.4))
        assert lo < TAU_23 < hi

    def test_symmetric_example(self):
        rec = solve_winner_set(model([1.0, 1.0]), [0, 1])
        np.testing.assert_allclose(rec.z_star, [math.sqrt(0.8)] * 2, rtol=1e-12)
        assert rec.tau == pytest.approx(1.6, abs=1e-11)

    def test_unequal_example_residual(self):
        rec = solve_winner_set(model([1.0, 2.0]), [0, 1])
        x = np.array([math.sqrt((2 - TAU_23) / 0.5), math.sqrt((3 - TAU_23) / 0.5)])
        np.testing.assert_allclose(rec.z_star, x, rtol=1e-10)
        # (-A) x^2 = b on the restricted system
        lhs = 0.5 * x.sum() ** 2 + 0.5 * x ** 2
        np.testing.assert_allclose(lhs, [2.0, 3.0], atol=1e-10)

    def test_map_is_decreasing(self):
        b = np.array([2.0, 3.0, 4.5])
        grid = np.linspace(0, 2, 50)
        vals = [tau_map(x, b, 0.3, 0.7, 3) for x in grid]
        assert np.all(np.diff(vals) < 0)

    def test_matches_newton_oracle(self):
        rng = np.random.default_rng(4)
        checked = 0
        for _ in range(200):
            d, p, k = int(rng.integers(2, 6)), int(rng.choice([1, 2, 4])), float(rng.uniform(0.01, 0.3))
            b = rng.uniform(1, 3, d)
            rec = solve_winner_set(model(b - 1, t=p + 1, k=k), range(d))
            if isinstance(rec, NoSolution):
                continue
            x = newton_restricted(b, k, p, rec.z_star * 1.1)
            np.testing.assert_allclose(rec.z_star, x, rtol=1e-8)
            checked += 1
        assert checked > 50

    def test_nonexistence_is_certified(self):
        # strong lateral inhibition with spread inputs: no positive 3-winner point
        res = solve_winner_set(model([0.0, 5.0, 5.0], k=0.4), [0, 1, 2])
        assert isinstance(res, NoSolution)
        assert res.h_at_edge > res.edge
        exists, _ = tau_grid([1.0, 6.0, 6.0], 0.4, 0.6, 2)
        assert not exists

    def test_bracket_restarts_agree(self):
        b = np.array([2.0, 2.5, 4.0])
        base = solve_tau(b, 0.2, 0.8, 2)
        rng = np.random.default_rng(0)
        for _ in range(20):
            lo, hi = np.sort(rng.uniform(0, b.min(), 2))
            assert solve_tau(b, 0.2, 0.8, 2, bracket=(lo, hi)) == pytest.approx(base, abs=1e-10)


class TestSolveWinnerSet:
    def test_single_winner(self):
        rec = solve_winner_set(model(W0, k=0.5), [6])
        assert rec.z_star[6] == pytest.approx(3.0)
        assert rec.residual < 1e-12

    def test_single_winner_k_gt_1(self):
        rec = solve_winner_set(model(W0, t=5, k=2.0), [5])
        assert rec.z_star[5] == pytest.approx(8.1796 ** 0.25)
        assert rec.tau is None

    def test_k_gt_1_multi_winner_solution(self):
        m = model([1.0, 1.02, 1.04], k=1.5)
        rec = solve_winner_set(m, [0, 1, 2])
        assert isinstance(rec, EquilibriumRecord)
        assert rec.residual < 1e-8 and np.all(rec.z_star > 0)
        assert classify_stability(m, rec).stability is Stability.UNSTABLE

    def test_bad_sets(self):
        with pytest.raises(ValueError):
            solve_winner_set(model([1.0, 2.0]), [])
        with pytest.raises(ValueError):
            solve_winner_set(model([1.0, 2.0]), [2])

    def test_routes_k1(self):
        assert isinstance(solve_winner_set(model([1.0, 1.0], k=1.0), [0, 1]), ContinuumReport)


class TestK1:
    def test_single(self):
        rec = solve_k1(model(W0, k=1.0), [6])
        assert rec.z_star[6] == pytest.approx(3.0)

    def test_continuum(self):
        rep = solve_k1(model([1.0, 1.0], k=1.0), [0, 1])
        assert isinstance(rep, ContinuumReport)
        assert rep.total == pytest.approx(math.sqrt(2.0))
        assert rep.representative.z_star.sum() == pytest.approx(math.sqrt(2.0))
        assert rep.representative.residual < 1e-12

    def test_unequal_has_no_solution(self):
        assert isinstance(solve_k1(model([1.0, 2.0], k=1.0), [0, 1]), NoSolution)

    def test_requires_k1(self):
        with pytest.raises(ValueError):
            solve_k1(model([1.0], k=0.5), [0])


class TestStability:
    def test_k1_wta_record_is_stable(self):
        m = model(W0, k=1.0)
        rec = classify_stability(m, solve_k1(m, [6]))
        assert rec.stability is Stability.ASYMPTOTICALLY_STABLE
        assert rec.consistent

    def test_k15_single_winners(self):
        m = model(W0, k=1.5)
        cat = enumerate_equilibria(m)
        stable = {r.winner_set for r in cat.stable()}
        assert stable == {(5,), (6,)}
        for j in range(10):
            rec = cat.find([j])
            expected = 9.0 - 1.5 * (1 + W0[j]) < 0
            assert (rec.stability is Stability.ASYMPTOTICALLY_STABLE) == expected

    def test_coexistence_unstable_for_k_above_1(self):
        m = model([1.0, 1.02, 1.04], k=1.2)
        rec = classify_stability(m, solve_winner_set(m, [0, 1, 2]))
        assert rec.stability is Stability.UNSTABLE
        assert rec.theory_verdict is Stability.UNSTABLE

    def test_k1_continuum_marginal(self):
        m = model([2.0, 2.0, 2.0], k=1.0)
        cat = enumerate_equilibria(m)
        assert cat.continua
        for c in cat.continua:
            assert c.representative.stability is Stability.MARGINAL

    def test_spectral_matches_eigvals(self):
        m = model(W0, k=0.5)
        rec = classify_stability(m, solve_winner_set(m, [5, 6]))
        top = np.max(np.linalg.eigvals(jacobian(m, rec.z_star)).real)
        assert rec.max_real_part == pytest.approx(top)
        assert rec.stability is Stability.ASYMPTOTICALLY_STABLE

    def test_rejects_bad_residual(self):
        m = model([1.0, 2.0])
        bad = EquilibriumRecord(winner_set=(0, 1), z_star=np.ones(2), residual=1.0)
        with pytest.raises(ValueError):
            classify_stability(m, bad)


class TestEnumeration:
    def test_n1(self):
        for k in (0.3, 1.0, 2.0):
            cat = enumerate_equilibria(model([3.0], k=k))
            assert [r.winner_set for r in cat] == [(), (0,)]
            assert cat.records[0].stability is Stability.UNSTABLE
            assert cat.records[1].z_star[0] == pytest.approx(2.0)

    def test_k2_pair(self):
        cat = enumerate_equilibria(model([1.0, 0.0], k=2.0))
        assert [r.winner_set for r in cat] == [(), (0,), (1,)]
        full = enumerate_equilibria(model([1.0, 0.0], k=2.0), SolverConfig(max_d=2))
        for r in full:
            if r.d == 2:
                assert r.stability is not Stability.ASYMPTOTICALLY_STABLE

    def test_reference_model_coexistence_exists(self):
        cat = enumerate_equilibria(model(W0, k=0.01))
        rec = cat.find(range(10))
        assert rec is not None and rec.stability is Stability.ASYMPTOTICALLY_STABLE
        assert np.all(rec.z_star > 0)

    def test_records_satisfy_invariants(self):
        m = model(W0, k=0.5)
        cat = enumerate_equilibria(m)
        keys = [(r.d, r.winner_set) for r in cat]
        assert keys == sorted(keys)
        for r in cat:
            assert np.max(np.abs(vector_field(m, r.z_star))) < 1e-8
            assert set(np.flatnonzero(r.z_star > 0)) == set(r.winner_set)
            if r.tau is not None:
                assert 0 < r.tau < m.b[list(r.winner_set)].min()
                lo, hi = r.tau_bounds
                assert lo - 1e-12 <= r.tau <= hi + 1e-12

    def test_truncation_flag(self):
        cat = enumerate_equilibria(model(W0, k=0.5), SolverConfig(max_subsets=5))
        assert cat.truncated and cat.subsets_tried == 5

    def test_size_limit(self):
        with pytest.raises(ValueError):
            enumerate_equilibria(model(np.ones(21)))

    def test_deterministic(self):
        a = enumerate_equilibria(model(W0, t=5, k=0.01))
        b = enumerate_equilibria(model(W0, t=5, k=0.01))
        assert [r.winner_set for r in a] == [r.winner_set for r in b]
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.z_star, y.z_star)


class TestCertificates:
    def test_dominance(self):
        m = model([1.0, 1.0, 1.0], k=0.5)
        assert existence_certificates(m, 1).dominance_ok
        assert not existence_certificates(m, 2).dominance_ok  # 0.5 * (4 - 1) > 1

    def test_homogeneous(self):
        cert = existence_certificates(model([1.0, 1.0], k=0.5), 2)
        assert cert.homogeneous_inputs and cert.spread_bound == math.inf
        assert cert.spread_ok
        assert isinstance(solve_winner_set(model([1.0, 1.0], k=0.5), [0, 1]), EquilibriumRecord)

    def test_bound_value(self):
        m = model([1.0, 2.0], k=0.5)
        cert = existence_certificates(m, 1)
        assert cert.spread_bound == pytest.approx(math.sqrt(0.5 * 2 / (0.5 * 1)))
        assert cert.tau_bounds == pytest.approx((0.5 * 2 / 1.0, 0.5 * 3 / 1.0))

    def test_not_applicable_for_k_ge_1(self):
        for k in (1.0, 1.5):
            cert = existence_certificates(model([1.0, 2.0], k=k), 1)
            assert cert.spread_ok is None and cert.tau_bounds is None

    def test_range(self):
        with pytest.raises(ValueError):
            existence_certificates(model([1.0]), 2)

    def test_commentary(self):
        assert "one winner" in winner_count_commentary(model(W0, k=1.5))
        assert "largest input" in winner_count_commentary(model(W0, k=1.0))
        assert "tied" in winner_count_commentary(model([2.0, 2.0], k=1.0))
        assert "several" in winner_count_commentary(model(W0, k=0.5))


def test_k_gt_1_spread_inputs_have_no_multi_winner_point():
    res = solve_winner_set(model([1.0, 1.2, 1.4], k=1.2), [0, 1, 2])
    assert isinstance(res, NoSolution) and res.edge == pytest.approx(2.4)
