"""Trajectory integration, outcome classification and trajectory-level checks."""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .equilibria import EquilibriumRecord, Stability, is_k_one
from .model import CompetitionModel, field_unchecked, vector_field
from .tensor import classify_structure, is_irreducible

FloatArray = NDArray[np.float64]


class IntegrationError(RuntimeError):
    pass


class HypothesisError(ValueError):
    """A check was asked to run outside the hypotheses that justify it."""


@dataclass(frozen=True)
class IntegratorOptions:
    mode: str = "fixed"
    h: float = 1e-3
    t_max: float = 2000.0
    tol_conv: float = 1e-10
    z_floor: float = 1e-12
    h_min: float = 1e-12
    rtol: float = 1e-10
    atol: float = 1e-16
    h_max: float = 1.0
    record_stride: int = 1
    auto_adaptive: bool = True

    def __post_init__(self) -> None:
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"mode must be 'fixed' or 'adaptive', got {self.mode!r}")
        if not (self.h > 0 and self.t_max > 0 and self.tol_conv > 0):
            raise ValueError("h, t_max and tol_conv must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    times: FloatArray
    states: FloatArray
    converged: bool
    final_state: FloatArray
    steps: int
    rejected_steps: int
    max_step_error: Optional[float]
    mode: str

    @property
    def raw_final(self) -> FloatArray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.times)


def _wants_adaptive(model: CompetitionModel, opts: IntegratorOptions) -> bool:
    if opts.mode == "adaptive":
        return True
    if not opts.auto_adaptive or model.n < 2 or not is_k_one(model.k):
        return False
    top = np.sort(model.w)[::-1]
    return bool(top[0] - top[1] < 0.1)


def integrate(model: CompetitionModel, z0, opts: IntegratorOptions = IntegratorOptions()) -> Trajectory:
    """Integrate from a strictly positive state until ``|dz/dt| < tol_conv`` or ``t_max``.

    Fixed mode is classical RK4 with step ``h``; adaptive mode is the
    Dormand-Prince 5(4) pair.  A step that would make any component
    nonpositive is retried at half the step.
    """
    z0 = np.array(z0, dtype=np.float64)
    if z0.shape != (model.n,):
        raise ValueError(f"initial state of shape {z0.shape} does not match n={model.n}")
    if np.any(z0 <= 0):
        raise ValueError("initial state must be strictly positive")
    if _wants_adaptive(model, opts):
        return _integrate_dopri(model, z0, opts)
    return _integrate_rk4(model, z0, opts)


def _finish(model, times, states, converged, steps, rejected, max_err, opts, mode) -> Trajectory:
    states = np.array(states)
    final = states[-1].copy()
    final[final < opts.z_floor] = 0.0
    return Trajectory(times=np.array(times), states=states, converged=converged,
                      final_state=final, steps=steps, rejected_steps=rejected,
                      max_step_error=max_err, mode=mode)


def _integrate_rk4(model: CompetitionModel, z: FloatArray, opts: IntegratorOptions) -> Trajectory:
    b, k, p = model.b, model.k, model.p
    h0, t_max, tol = opts.h, opts.t_max, opts.tol_conv
    t = 0.0
    times, states = [t], [z.copy()]
    steps = rejected = 0
    converged = False
    while True:
        k1 = field_unchecked(b, k, p, z)
        if np.max(np.abs(k1)) < tol:
            converged = True
            break
        if t >= t_max:
            break
        h = min(h0, t_max - t)
        while True:
            with np.errstate(over="ignore", invalid="ignore"):
                k2 = field_unchecked(b, k, p, z + 0.5 * h * k1)
                k3 = field_unchecked(b, k, p, z + 0.5 * h * k2)
                k4 = field_unchecked(b, k, p, z + h * k3)
                z_new = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if np.all(z_new > 0) and np.all(np.isfinite(z_new)):
                break
            rejected += 1
            h *= 0.5
            if h < opts.h_min:
                raise IntegrationError(f"step underflow at t={t:.6g}: a component keeps going negative")
        z = z_new
        t += h
        steps += 1
        if steps % opts.record_stride == 0:
            times.append(t)
            states.append(z.copy())
    if times[-1] != t:
        times.append(t)
        states.append(z.copy())
    return _finish(model, times, states, converged, steps, rejected, None, opts, "fixed")


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _integrate_dopri(model: CompetitionModel, z: FloatArray, opts: IntegratorOptions) -> Trajectory:
    b, k, p = model.b, model.k, model.p
    f = lambda y: field_unchecked(b, k, p, y)  # noqa: E731
    t = 0.0
    h = min(opts.h, opts.h_max)
    times, states = [t], [z.copy()]
    steps = rejected = 0
    max_err = 0.0
    converged = False
    K = np.empty((7, model.n))
    K[0] = f(z)
    while True:
        if np.max(np.abs(K[0])) < opts.tol_conv:
            converged = True
            break
        if t >= opts.t_max:
            break
        h = min(h, opts.t_max - t)
        with np.errstate(over="ignore", invalid="ignore"):
            for s in range(1, 7):
                K[s] = f(z + h * (np.asarray(_A[s]) @ K[:s]))
            z_new = z + h * (_B5 @ K)
            err_vec = h * (_E @ K)
            scale = opts.atol + opts.rtol * np.maximum(np.abs(z), np.abs(z_new))
            err = float(np.max(np.abs(err_vec) / scale))
        if not (np.all(z_new > 0) and np.isfinite(err)):
            rejected += 1
            h *= 0.5
        elif err <= 1.0:
            t += h
            z = z_new
            K[0] = K[6]
            steps += 1
            max_err = max(max_err, float(np.max(np.abs(err_vec))))
            if steps % opts.record_stride == 0:
                times.append(t)
                states.append(z.copy())
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = min(h * factor, opts.h_max)
            continue
        else:
            rejected += 1
            h *= max(0.2, 0.9 * err ** -0.2)
        if h < opts.h_min:
            raise IntegrationError(f"step underflow at t={t:.6g} (h={h:.3e})")
    if times[-1] != t:
        times.append(t)
        states.append(z.copy())
    return _finish(model, times, states, converged, steps, rejected, max_err, opts, "adaptive")


# -- outcome classification ----------------------------------------------------

class Outcome(str, enum.Enum):
    WTA = "WTA"
    VWTA = "VWTA"
    WSA = "WSA"
    COEXISTENCE = "COEXISTENCE"
    NONCONVERGED = "NONCONVERGED"


@dataclass(frozen=True)
class OutcomeReport:
    label: Outcome
    winners: tuple[int, ...]
    final_values: FloatArray
    matched_equilibrium: Optional[EquilibriumRecord] = None
    low_confidence: bool = False
    alternatives: tuple[tuple[int, ...], ...] = ()
    notes: tuple[str, ...] = field(default=())


def classify_outcome(model: CompetitionModel, traj: Trajectory,
                     equilibria: Optional[Sequence[EquilibriumRecord]] = None,
                     winner_threshold: float = 1e-3, match_tol: float = 1e-4) -> OutcomeReport:
    """Label the converged state of ``traj`` as WTA, VWTA, WSA or COEXISTENCE.

    Winners are components above ``winner_threshold`` times the largest
    component.  A component within a factor of 10 of that cutoff marks the
    report low-confidence.
    """
    final = np.asarray(traj.final_state, dtype=np.float64)
    top = float(final.max())
    if not traj.converged or top <= 0:
        return OutcomeReport(label=Outcome.NONCONVERGED, winners=(), final_values=final)
    cut = winner_threshold * top
    winners = tuple(int(i) for i in np.flatnonzero(final > cut))
    low = bool(np.any((final > cut / 10) & (final < cut * 10)))
    notes = []
    d = len(winners)
    if d == 1:
        w = model.w
        j = winners[0]
        if w[j] < w.max():
            label = Outcome.VWTA
        else:
            label = Outcome.WTA
            if np.count_nonzero(w == w.max()) > 1:
                notes.append("maximal input is tied")
    elif d == model.n:
        label = Outcome.COEXISTENCE
    else:
        label = Outcome.WSA

    matched = None
    alternatives: tuple[tuple[int, ...], ...] = ()
    if equilibria is not None:
        recs = list(equilibria)
        if recs:
            dist = [float(np.max(np.abs(r.z_star - final))) for r in recs]
            best = int(np.argmin(dist))
            if dist[best] <= match_tol:
                matched = recs[best]
        if label in (Outcome.VWTA, Outcome.WTA):
            alternatives = tuple(r.winner_set for r in recs
                                 if r.d == 1 and r.stability is Stability.ASYMPTOTICALLY_STABLE
                                 and r.winner_set != winners)
    return OutcomeReport(label=label, winners=winners, final_values=final,
                         matched_equilibrium=matched, low_confidence=low,
                         alternatives=alternatives, notes=tuple(notes))


# -- trajectory-level laws -----------------------------------------------------------

@dataclass(frozen=True)
class RatioLawReport:
    """Fitted ``d/dt log(z_i/z_j)`` against ``w_i - w_j``.

    ``slope_error[i, j]`` is ``nan`` for pairs with too few samples above
    the floor; ``hit_floor`` lists pairs fitted only on a prefix.
    """

    slopes: FloatArray
    slope_error: FloatArray
    excluded: tuple[tuple[int, int], ...]
    hit_floor: tuple[tuple[int, int], ...]

    @property
    def max_error(self) -> float:
        vals = self.slope_error[np.isfinite(self.slope_error)]
        return float(vals.max()) if vals.size else 0.0


def check_ratio_law(model: CompetitionModel, traj: Trajectory, floor: float = 1e-10,
                    min_samples: int = 3) -> RatioLawReport:
    """At ``k = 1`` every ratio ``z_i/z_j`` grows exactly like ``exp((w_i - w_j) t)``."""
    if not is_k_one(model.k):
        raise HypothesisError(f"the ratio law holds only at k = 1 (got k={model.k})")
    t = traj.times
    Z = traj.states
    if np.any(Z[0] <= 0):
        raise HypothesisError("ratio law needs a strictly positive initial state")
    n = model.n
    logs = np.log(np.maximum(Z, np.finfo(float).tiny))
    above = Z > floor
    slopes = np.full((n, n), np.nan)
    err = np.full((n, n), np.nan)
    excluded, floored = [], []
    for i in range(n):
        slopes[i, i], err[i, i] = 0.0, 0.0
        for j in range(i + 1, n):
            ok = above[:, i] & above[:, j]
            # keep the leading run: once a component drops below the floor it is noise
            stop = int(np.argmin(ok)) if not ok.all() else len(ok)
            if stop < len(ok):
                floored.append((i, j))
            if stop < min_samples:
                excluded.append((i, j))
                continue
            y = logs[:stop, i] - logs[:stop, j]
            slope = float(np.polyfit(t[:stop], y, 1)[0])
            slopes[i, j], slopes[j, i] = slope, -slope
            e = abs(slope - (model.w[i] - model.w[j]))
            err[i, j] = err[j, i] = e
    return RatioLawReport(slopes=slopes, slope_error=err, excluded=tuple(excluded),
                          hit_floor=tuple(floored))


@dataclass(frozen=True)
class LyapunovReport:
    """Descent of ``V = (z_m/z*_m - 1)^2`` with ``m`` the index of smallest ratio.

    ``u1_violations`` counts increases between consecutive samples that both
    lie in ``U1 = {z >= z*}``; the rest fall in ``U2 = {min z/z* < 1}``.
    ``left_u3`` is ``None`` unless the trajectory starts in ``U3 = {z < z*}``.
    """

    violations: int
    max_violation: float
    u1_violations: int
    u2_violations: int
    samples: int
    started_in_u3: bool
    left_u3: Optional[bool]
    u3_max_ratio_decreases: int
    values: FloatArray = field(repr=False)


def lyapunov_value(z, z_star) -> FloatArray:
    """``V`` for a single state or a stack of states (last axis = neurons)."""
    R = np.asarray(z, dtype=np.float64) / np.asarray(z_star, dtype=np.float64)
    return (R.min(axis=-1) - 1.0) ** 2


def check_lyapunov_hypothesis(model: CompetitionModel) -> None:
    neg = -model.tensor
    flags = classify_structure(neg)
    if flags.h_plus is not True:
        raise HypothesisError(
            f"-A is not an H+-tensor (k={model.k}, n={model.n}, t={model.t}: "
            f"off-diagonal mass {model.k * (model.n ** model.p - 1):.4g} vs diagonal 1)")
    if not is_irreducible(neg):
        raise HypothesisError("-A is reducible")


def check_lyapunov_descent(model: CompetitionModel, traj: Trajectory, z_star,
                           tol: float = 1e-9, check_hypothesis: bool = True) -> LyapunovReport:
    if check_hypothesis:
        check_lyapunov_hypothesis(model)
    z_star = np.asarray(z_star, dtype=np.float64)
    if z_star.shape != (model.n,) or np.any(z_star <= 0):
        raise HypothesisError("z_star must be a strictly positive n-vector")
    if np.max(np.abs(vector_field(model, z_star))) > 1e-8:
        raise HypothesisError("z_star is not an equilibrium")
    R = traj.states / z_star
    V = (R.min(axis=1) - 1.0) ** 2
    dV = np.diff(V)
    bad = dV > tol
    in_u1 = np.all(R >= 1.0, axis=1)
    pair_u1 = in_u1[:-1] & in_u1[1:]
    in_u3 = np.all(R < 1.0, axis=1)
    started = bool(in_u3[0])
    left = bool(not in_u3.all()) if started else None
    rmax = R.max(axis=1)
    pair_u3 = in_u3[:-1] & in_u3[1:]
    u3_dec = int(np.count_nonzero(pair_u3 & (np.diff(rmax) < -tol)))
    return LyapunovReport(
        violations=int(bad.sum()),
        max_violation=float(dV.max()) if dV.size else 0.0,
        u1_violations=int((bad & pair_u1).sum()),
        u2_violations=int((bad & ~pair_u1).sum()),
        samples=len(V),
        started_in_u3=started,
        left_u3=left,
        u3_max_ratio_decreases=u3_dec,
        values=V,
    )


# -- sweeps -------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepCell:
    k: float
    t: int
    outcome: Optional[OutcomeReport]
    error: Optional[str] = None

    @property
    def label(self) -> Outcome:
        return self.outcome.label if self.outcome is not None else Outcome.NONCONVERGED

    @property
    def max_final(self) -> float:
        return float(self.outcome.final_values.max()) if self.outcome is not None else math.nan


def _run_cell(args) -> SweepCell:
    w, k, t, z0, opts, threshold = args
    try:
        model = CompetitionModel(t=t, k=k, w=w)
        traj = integrate(model, z0, opts)
        return SweepCell(k=k, t=t, outcome=classify_outcome(model, traj, winner_threshold=threshold))
    except Exception as exc:  # recorded in-table, the sweep continues
        return SweepCell(k=k, t=t, outcome=None, error=f"{type(exc).__name__}: {exc}")


def sweep_workers(requested: Optional[int] = None) -> int:
    cap = os.environ.get("HYPERLV_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def sweep(template: CompetitionModel, k_values: Sequence[float], t_values: Sequence[int], z0,
          opts: IntegratorOptions = IntegratorOptions(), winner_threshold: float = 1e-3,
          workers: Optional[int] = None) -> list[SweepCell]:
    """Outcome grid over ``k`` (outer) and ``t`` (inner) for the template's inputs."""
    jobs = [(template.w, float(k), int(t), np.asarray(z0, dtype=np.float64), opts, winner_threshold)
            for k in k_values for t in t_values]
    nw = min(sweep_workers(workers), len(jobs)) if jobs else 1
    if nw <= 1:
        return [_run_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(_run_cell, jobs))
