"""Invariant suite run by ``hyperlv verify``.

Each check returns a plain dict with at least ``passed`` (bool, or None when
skipped) and the measured quantity next to its tolerance.
"""

from __future__ import annotations

import itertools

import numpy as np

from .dynamics import (HypothesisError, IntegratorOptions, check_lyapunov_descent,
                       check_lyapunov_hypothesis, check_ratio_law, integrate)
from .equilibria import EquilibriumCatalog, is_k_one, solve_tau
from .model import (CompetitionModel, finite_difference_jacobian, jacobian, vector_field,
                    vector_field_tensor)
from .tensor import SymmetricTensor, contract

JACOBIAN_RTOL = 1e-6
CONTRACTION_TOL = 1e-10
RATIO_TOL = 1e-5
LYAPUNOV_TOL = 1e-9
RESIDUAL_TOL = 1e-8
DENSE_LIMIT = 10**6


def jacobian_relative_error(model: CompetitionModel, z, step: float = 1e-6) -> float:
    """``max |J_fd - J| / max |J|`` at ``z``."""
    exact = jacobian(model, z)
    approx = finite_difference_jacobian(model, z, step)
    scale = max(float(np.max(np.abs(exact))), 1e-300)
    return float(np.max(np.abs(approx - exact)) / scale)


def check_jacobian(model: CompetitionModel, rng: np.random.Generator, points: int = 100) -> dict:
    worst = 0.0
    for _ in range(points):
        z = rng.uniform(0.05, 2.0, model.n)
        worst = max(worst, jacobian_relative_error(model, z))
    return {"passed": worst < JACOBIAN_RTOL, "max_rel_error": worst, "tol": JACOBIAN_RTOL,
            "points": points}


def check_contraction(model: CompetitionModel, rng: np.random.Generator, samples: int = 50) -> dict:
    if model.n ** model.t > DENSE_LIMIT:
        return {"passed": None, "skipped": f"n^t = {model.n ** model.t} exceeds {DENSE_LIMIT}"}
    tensor = model.tensor
    dense = SymmetricTensor.dense(tensor.to_dense())
    worst = 0.0
    for _ in range(samples):
        z = rng.uniform(0.0, 2.0, model.n)
        a = contract(tensor, z)
        b = contract(dense, z)
        scale = max(1.0, float(np.max(np.abs(b))))
        worst = max(worst, float(np.max(np.abs(a - b))) / scale)
        worst = max(worst, float(np.max(np.abs(vector_field(model, z) - vector_field_tensor(model, z))))
                    / max(1.0, float(np.max(np.abs(vector_field(model, z))))))
    return {"passed": worst < CONTRACTION_TOL, "max_rel_error": worst, "tol": CONTRACTION_TOL,
            "samples": samples}


def grid_scan_exists(b, a: float, s: float, p: int, points: int = 10**5) -> bool:
    """Sign change of ``H(tau) - tau`` on a uniform grid over ``(0, b_min]``."""
    b = np.asarray(b, dtype=np.float64)
    grid = np.linspace(0.0, float(b.min()), points + 1)[1:]
    H = a / s * np.sum(np.maximum(b[None, :] - grid[:, None], 0.0) ** (1.0 / p), axis=1) ** p
    return bool(np.any(H - grid <= 0))


def check_equilibria(model: CompetitionModel, catalog: EquilibriumCatalog) -> dict:
    """Residuals, tau bounds, existence criterion and theory/spectrum agreement."""
    failures = []
    worst_res = 0.0
    for rec in catalog:
        worst_res = max(worst_res, rec.residual)
        label = [i + 1 for i in rec.winner_set]
        if rec.residual >= RESIDUAL_TOL:
            failures.append(f"residual {rec.residual:.2e} on {label}")
        if rec.tau is not None and rec.tau_bounds is not None:
            lo, hi = rec.tau_bounds
            slack = 1e-9 * max(1.0, hi)
            if not (lo - slack <= rec.tau <= hi + slack):
                failures.append(f"tau {rec.tau} outside [{lo}, {hi}] on {label}")
        if rec.consistent is False:
            failures.append(f"spectral verdict {rec.stability.value} vs theory "
                            f"{rec.theory_verdict.value} on {label}")
    if model.k < 1 and not is_k_one(model.k):
        found = {r.winner_set for r in catalog}
        top_d = max((r.d for r in catalog), default=0)
        for d in range(2, min(model.n, 4) + 1):
            for D in itertools.combinations(range(model.n), d):
                b = model.b[list(D)]
                exists = solve_tau(b, model.k, 1 - model.k, model.p) is not None
                if exists != grid_scan_exists(b, model.k, 1 - model.k, model.p, 2000):
                    failures.append(f"existence verdict disagrees with grid scan on {[i + 1 for i in D]}")
                elif exists and d <= top_d and D not in found:
                    failures.append(f"solvable set {[i + 1 for i in D]} missing from catalog")
    return {"passed": not failures, "max_residual": worst_res, "records": len(catalog),
            "failures": failures}


def check_ratio(model: CompetitionModel, z0) -> dict:
    if not is_k_one(model.k):
        return {"passed": None, "skipped": "ratio law applies only at k = 1"}
    if z0 is None:
        return {"passed": None, "skipped": "no initial_state in config"}
    traj = integrate(model, z0, IntegratorOptions(mode="adaptive"))
    rep = check_ratio_law(model, traj)
    return {"passed": rep.max_error < RATIO_TOL, "max_slope_error": rep.max_error, "tol": RATIO_TOL,
            "pairs_hit_floor": len(rep.hit_floor), "pairs_excluded": len(rep.excluded)}


def check_lyapunov(model: CompetitionModel, catalog: EquilibriumCatalog, z0,
                   rng: np.random.Generator, starts: int = 5) -> dict:
    try:
        check_lyapunov_hypothesis(model)
    except HypothesisError as exc:
        return {"passed": None, "skipped": str(exc)}
    coexist = catalog.find(range(model.n))
    if coexist is None:
        return {"passed": None, "skipped": "no positive equilibrium found"}
    z_star = coexist.z_star
    violations = 0
    worst = 0.0
    if z0 is not None:
        rep = check_lyapunov_descent(model, integrate(model, z0), z_star, LYAPUNOV_TOL)
        violations += rep.violations
        worst = max(worst, rep.max_violation)
    u1 = 0
    for _ in range(starts):
        start = z_star * rng.uniform(1.0, 3.0, model.n)
        rep = check_lyapunov_descent(model, integrate(model, start), z_star, LYAPUNOV_TOL)
        u1 += rep.u1_violations
    return {"passed": violations == 0 and u1 == 0, "violations_from_z0": violations,
            "u1_violations_random_starts": u1, "max_violation": float(worst), "tol": LYAPUNOV_TOL}


def run_suite(model: CompetitionModel, catalog: EquilibriumCatalog, z0, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    return {
        "jacobian_fd": check_jacobian(model, rng),
        "contraction": check_contraction(model, rng),
        "equilibria": check_equilibria(model, catalog),
        "ratio_law": check_ratio(model, z0),
        "lyapunov": check_lyapunov(model, catalog, z0, rng),
    }
