"""Equilibria of the competition model, one per winner set.

Restricted to a winner set ``D`` the equilibrium equations read

    k (sum_{j in D} x_j)^p + (1 - k) x_i^p = b_i,     i in D,

an all-ones-plus-identity tensor equation.  With ``tau = k (sum x)^p`` it
collapses to the scalar fixed point ``tau = H(tau)`` which is monotone and
solved by bisection.  ``k = 1`` degenerates to the all-ones equation, whose
positive solutions form a continuum when they exist at all.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Union

import numpy as np
from numpy.typing import NDArray

from .model import CompetitionModel, jacobian, vector_field, winner_block_spectrum

FloatArray = NDArray[np.float64]

K_ONE_TOL = 1e-12


class Stability(str, enum.Enum):
    ASYMPTOTICALLY_STABLE = "ASYMPTOTICALLY_STABLE"
    UNSTABLE = "UNSTABLE"
    MARGINAL = "MARGINAL"
    UNCLASSIFIED = "UNCLASSIFIED"


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for winner-set enumeration and stability classification.

    ``max_d=None`` enumerates every size when ``k <= 1`` and only single
    winners when ``k > 1``.
    """

    bisection_tol: float = 1e-12
    max_d: Optional[int] = None
    stability_margin: float = 1e-9
    residual_tol: float = 1e-8
    max_subsets: int = 1 << 14

    def __post_init__(self) -> None:
        if not self.bisection_tol > 0:
            raise ValueError("bisection_tol must be positive")
        if self.max_d is not None and self.max_d < 1:
            raise ValueError("max_d must be >= 1")
        if self.stability_margin < 0:
            raise ValueError("stability_margin must be nonnegative")

    def effective_max_d(self, model: CompetitionModel) -> int:
        if self.max_d is None:
            return 1 if model.k > 1 + K_ONE_TOL else model.n
        return min(self.max_d, model.n)


@dataclass(frozen=True)
class EquilibriumRecord:
    winner_set: tuple[int, ...]
    z_star: FloatArray
    residual: float
    tau: Optional[float] = None
    stability: Stability = Stability.UNCLASSIFIED
    max_real_part: Optional[float] = None
    eigenvalues: Optional[NDArray[np.complex128]] = field(default=None, repr=False)
    theory_verdict: Optional[Stability] = None
    tau_bounds: Optional[tuple[float, float]] = None
    notes: tuple[str, ...] = ()

    @property
    def d(self) -> int:
        return len(self.winner_set)

    @property
    def consistent(self) -> Optional[bool]:
        """Whether the spectral verdict agrees with the closed-form criteria."""
        if self.theory_verdict is None or self.stability is Stability.UNCLASSIFIED:
            return None
        return self.theory_verdict is self.stability


@dataclass(frozen=True)
class NoSolution:
    """Certified absence of a positive equilibrium on ``winner_set``.

    ``h_at_edge`` is ``H`` at the end of the admissible ``tau`` interval and
    ``edge`` that endpoint; nonexistence means the fixed-point map has no
    crossing there.
    """

    winner_set: tuple[int, ...]
    reason: str
    h_at_edge: Optional[float] = None
    edge: Optional[float] = None


@dataclass(frozen=True)
class ContinuumReport:
    """``k = 1`` with equal inputs on ``winner_set``: every positive ``z`` with
    ``sum_{D} z = total`` is an equilibrium.  ``representative`` is the
    symmetric point of the continuum."""

    winner_set: tuple[int, ...]
    total: float
    representative: EquilibriumRecord


SolveResult = Union[EquilibriumRecord, NoSolution, ContinuumReport]


# -- scalar fixed point ----------------------------------------------------

def tau_map(tau: float, b: FloatArray, a: float, s: float, p: int) -> float:
    """``H(tau) = (a/s) (sum_i (b_i - tau)^{1/p})^p``."""
    return a / s * float(np.sum(np.maximum(b - tau, 0.0) ** (1.0 / p))) ** p


def bisect_decreasing(f, lo: float, hi: float, tol: float, max_iter: int = 400) -> float:
    """Root of a function with ``f(lo) > 0 >= f(hi)``."""
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    else:
        raise RuntimeError("bisection failed to reach tolerance")
    return 0.5 * (lo + hi)


def solve_tau(b, a: float, s: float, p: int, tol: float = 1e-12,
              bracket: Optional[tuple[float, float]] = None) -> Optional[float]:
    """Unique fixed point of ``H`` on ``(0, min b)``, or ``None`` if none exists.

    ``F(tau) = H(tau) - tau`` is strictly decreasing with ``F(0) > 0``, so a
    root exists iff ``H(b_min) <= b_min``.  A custom ``bracket`` inside
    ``[0, b_min]`` is widened to the full interval if it misses the sign
    change.
    """
    b = np.asarray(b, dtype=np.float64)
    b_min = float(b.min())

    def F(x: float) -> float:
        return tau_map(x, b, a, s, p) - x

    if F(b_min) > 0:
        return None
    lo, hi = (0.0, b_min) if bracket is None else bracket
    lo, hi = max(0.0, lo), min(b_min, hi)
    if not (lo < hi and F(lo) > 0 and F(hi) <= 0):
        lo, hi = 0.0, b_min
    return bisect_decreasing(F, lo, hi, tol)


def existence_margin(b, a: float, s: float, p: int) -> tuple[float, float]:
    """``(H(b_min^-), b_min)``; a positive solution exists iff the first <= the second."""
    b = np.asarray(b, dtype=np.float64)
    b_min = float(b.min())
    return tau_map(b_min, b, a, s, p), b_min


def tau_bounds(b, a: float, s: float, p: int) -> tuple[float, float]:
    b = np.asarray(b, dtype=np.float64)
    d = b.size
    c = a * d ** p
    return c * float(b.min()) / (s + c), c * float(b.max()) / (s + c)


def solve_restricted(b, k: float, p: int, tol: float = 1e-12):
    """Positive solution of ``k E x^p + (1 - k) I x^p = b`` for ``k < 1``.

    Returns ``(x, tau)`` or ``None``.
    """
    b = np.asarray(b, dtype=np.float64)
    s = 1.0 - k
    tau = solve_tau(b, k, s, p, tol)
    if tau is None:
        return None
    x = ((b - tau) / s) ** (1.0 / p)
    return x, tau


def _solve_restricted_k_gt_1(b: FloatArray, k: float, p: int, tol: float):
    """Same equation for ``k > 1``, where ``x_i = ((tau - b_i)/(k - 1))^{1/p}``.

    ``G(tau) - tau`` with ``G(tau) = k/(k-1) (sum (tau - b_i)^{1/p})^p`` is
    concave on ``[b_max, inf)`` and tends to ``+inf``, hence increasing; the
    root is bracketed by doubling.
    """
    c = k - 1.0
    b_max = float(b.max())

    def G(tau: float) -> float:
        return k / c * float(np.sum(np.maximum(tau - b, 0.0) ** (1.0 / p))) ** p - tau

    g0 = G(b_max)
    if g0 >= 0:
        return None, g0 + b_max, b_max
    hi = 2.0 * b_max
    while G(hi) <= 0:
        hi *= 2.0
    tau = bisect_decreasing(lambda x: -G(x), b_max, hi, tol * max(1.0, hi))
    x = ((tau - b) / c) ** (1.0 / p)
    return (x, tau), None, None


def _residual(model: CompetitionModel, z: FloatArray) -> float:
    return float(np.max(np.abs(vector_field(model, z))))


def _embed(model: CompetitionModel, winners: tuple[int, ...], x) -> FloatArray:
    z = np.zeros(model.n)
    z[list(winners)] = x
    return z


def _normalize_set(model: CompetitionModel, D: Iterable[int]) -> tuple[int, ...]:
    winners = tuple(sorted(set(int(i) for i in D)))
    if not winners:
        raise ValueError("winner set must be nonempty")
    if winners[0] < 0 or winners[-1] >= model.n:
        raise ValueError(f"winner indices out of range for n={model.n}")
    return winners


def is_k_one(k: float) -> bool:
    return abs(k - 1.0) <= K_ONE_TOL


def solve_winner_set(model: CompetitionModel, D: Iterable[int],
                     cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """Equilibrium supported exactly on ``D`` (unclassified).

    ``k = 1`` is routed to :func:`solve_k1`.  For ``k > 1`` and ``|D| >= 2``
    the restricted system is solved with the increasing-map bracket.
    """
    winners = _normalize_set(model, D)
    if is_k_one(model.k):
        return solve_k1(model, winners)
    b = model.b[list(winners)]
    k, p = model.k, model.p
    if len(winners) == 1:
        x = b ** (1.0 / p)
        z = _embed(model, winners, x)
        if k < 1:
            return EquilibriumRecord(winner_set=winners, z_star=z, residual=_residual(model, z),
                                     tau=k * float(b[0]), tau_bounds=tau_bounds(b, k, 1.0 - k, p))
        return EquilibriumRecord(winner_set=winners, z_star=z, residual=_residual(model, z))
    if k < 1:
        sol = solve_restricted(b, k, p, cfg.bisection_tol)
        if sol is None:
            h_edge, edge = existence_margin(b, k, 1.0 - k, p)
            return NoSolution(winners, "fixed-point map has no crossing below b_min",
                              h_at_edge=h_edge, edge=edge)
        x, tau = sol
    else:
        sol, g_edge, edge = _solve_restricted_k_gt_1(b, k, p, cfg.bisection_tol)
        if sol is None:
            return NoSolution(winners, "fixed-point map has no crossing above b_max",
                              h_at_edge=g_edge, edge=edge)
        x, tau = sol
    z = _embed(model, winners, x)
    if np.any(x <= 0):
        return NoSolution(winners, "solution touches the orthant boundary")
    bounds = tau_bounds(b, k, 1.0 - k, p) if k < 1 else None
    return EquilibriumRecord(winner_set=winners, z_star=z, residual=_residual(model, z), tau=tau,
                             tau_bounds=bounds)


def solve_k1(model: CompetitionModel, D: Iterable[int]) -> SolveResult:
    """Winner-set equilibria when self- and lateral inhibition are equal."""
    if not is_k_one(model.k):
        raise ValueError(f"solve_k1 requires k == 1, got {model.k}")
    winners = _normalize_set(model, D)
    b = model.b[list(winners)]
    p = model.p
    if len(winners) == 1:
        z = _embed(model, winners, b ** (1.0 / p))
        return EquilibriumRecord(winner_set=winners, z_star=z, residual=_residual(model, z))
    if np.ptp(b) > K_ONE_TOL * float(b.max()):
        return NoSolution(winners, "k = 1 needs equal inputs on a multi-winner set")
    total = float(b[0]) ** (1.0 / p)
    z = _embed(model, winners, np.full(len(winners), total / len(winners)))
    rep = EquilibriumRecord(winner_set=winners, z_star=z, residual=_residual(model, z),
                            notes=("symmetric point of a continuum",))
    return ContinuumReport(winner_set=winners, total=total, representative=rep)


# -- stability --------------------------------------------------------------

def theory_verdict(model: CompetitionModel, rec: EquilibriumRecord,
                   margin: float = 1e-9) -> Stability:
    """Closed-form stability from the block structure.

    Winner block: Hurwitz for ``k < 1`` or a single winner; a positive
    eigenvalue for ``k > 1`` and ``d >= 2``; a zero eigenvalue for ``k = 1``
    and ``d >= 2``.  Losers: diagonal ``1 + w_i - k r^p`` must be negative.
    """
    d = rec.d
    if d == 0:
        return Stability.UNSTABLE
    k = model.k
    if d >= 2 and k > 1 + K_ONE_TOL:
        return Stability.UNSTABLE
    block_marginal = d >= 2 and is_k_one(k)
    r = float(rec.z_star[list(rec.winner_set)].sum())
    losers = [i for i in range(model.n) if i not in rec.winner_set]
    diags = model.b[losers] - k * r ** model.p
    if diags.size and diags.max() > margin:
        return Stability.UNSTABLE
    if block_marginal or (diags.size and diags.max() >= -margin):
        return Stability.MARGINAL
    return Stability.ASYMPTOTICALLY_STABLE


def classify_stability(model: CompetitionModel, rec: EquilibriumRecord,
                       cfg: SolverConfig = SolverConfig()) -> EquilibriumRecord:
    """Attach the spectral verdict and the closed-form cross-check."""
    if rec.residual >= cfg.residual_tol:
        raise ValueError(f"record residual {rec.residual:.3e} exceeds {cfg.residual_tol:.1e}")
    eigs = np.linalg.eigvals(jacobian(model, rec.z_star))
    top = float(np.max(eigs.real))
    eps = cfg.stability_margin
    if top < -eps:
        verdict = Stability.ASYMPTOTICALLY_STABLE
    elif top > eps:
        verdict = Stability.UNSTABLE
    else:
        verdict = Stability.MARGINAL
    return replace(rec, stability=verdict, max_real_part=top, eigenvalues=eigs,
                   theory_verdict=theory_verdict(model, rec, eps))


def block_spectrum(model: CompetitionModel, rec: EquilibriumRecord, residual_tol: float = 1e-8):
    """:func:`~hyperlv.model.winner_block_spectrum` for a solved record."""
    return winner_block_spectrum(model, rec.z_star, rec.winner_set, residual_tol)


def extinction_record(model: CompetitionModel) -> EquilibriumRecord:
    z = np.zeros(model.n)
    return EquilibriumRecord(winner_set=(), z_star=z, residual=0.0)


# -- enumeration --------------------------------------------------------------

@dataclass(frozen=True)
class EquilibriumCatalog:
    """Every classified equilibrium found, plus ``k = 1`` continua."""

    records: tuple[EquilibriumRecord, ...]
    continua: tuple[ContinuumReport, ...] = ()
    truncated: bool = False
    subsets_tried: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def stable(self) -> list[EquilibriumRecord]:
        return [r for r in self.records if r.stability is Stability.ASYMPTOTICALLY_STABLE]

    def find(self, winners: Iterable[int]) -> Optional[EquilibriumRecord]:
        key = tuple(sorted(winners))
        return next((r for r in self.records if r.winner_set == key), None)


def enumerate_equilibria(model: CompetitionModel,
                         cfg: SolverConfig = SolverConfig()) -> EquilibriumCatalog:
    """Solve and classify every winner set up to the configured size."""
    if model.n > 20:
        raise ValueError("enumeration is limited to n <= 20")
    ext = classify_stability(model, extinction_record(model), cfg)
    records = [ext]
    continua = []
    tried = 0
    truncated = False
    for d in range(1, cfg.effective_max_d(model) + 1):
        for D in itertools.combinations(range(model.n), d):
            if tried >= cfg.max_subsets:
                truncated = True
                break
            tried += 1
            res = solve_winner_set(model, D, cfg)
            if isinstance(res, NoSolution):
                continue
            if isinstance(res, ContinuumReport):
                rep = classify_stability(model, res.representative, cfg)
                continua.append(replace(res, representative=rep))
                continue
            if res.residual >= cfg.residual_tol:
                continue
            records.append(classify_stability(model, res, cfg))
        if truncated:
            break
    records.sort(key=lambda r: (r.d, r.winner_set))
    return EquilibriumCatalog(records=tuple(records), continua=tuple(continua),
                              truncated=truncated, subsets_tried=tried)


# -- certificates ----------------------------------------------------------------

@dataclass(frozen=True)
class ExistenceCertificate:
    """Sufficient conditions for an equilibrium with ``d`` winners.

    ``dominance_ok``: the ``d``-restricted tensor is strictly diagonally
    dominant, ``1 > k (d^p - 1)``.  ``spread_ok``: ``d`` lies below
    ``spread_bound = ((1 - k) b_min / (k (b_max - b_min)))^{1/p}``, which
    guarantees a solution on every ``d``-subset; ``None`` when ``k >= 1``
    (not applicable).  ``tau_bounds`` is ``None`` unless ``k < 1``.
    """

    d: int
    dominance_ok: bool
    spread_ok: Optional[bool]
    spread_bound: Optional[float]
    homogeneous_inputs: bool
    tau_bounds: Optional[tuple[float, float]]


def existence_certificates(model: CompetitionModel, d: int) -> ExistenceCertificate:
    if not 1 <= d <= model.n:
        raise ValueError(f"d must lie in [1, {model.n}]")
    k, p = model.k, model.p
    b_min, b_max = float(model.b.min()), float(model.b.max())
    homogeneous = b_max == b_min
    dominant = 1.0 > k * (d ** p - 1)
    if k < 1 and not is_k_one(k):
        bound = math.inf if homogeneous else ((1 - k) * b_min / (k * (b_max - b_min))) ** (1.0 / p)
        spread = d < bound
        c = k * d ** p
        bounds = (c * b_min / (1 - k + c), c * b_max / (1 - k + c))
    else:
        bound, spread, bounds = None, None, None
    return ExistenceCertificate(d=d, dominance_ok=dominant, spread_ok=spread, spread_bound=bound,
                                homogeneous_inputs=homogeneous, tau_bounds=bounds)


def winner_count_commentary(model: CompetitionModel) -> str:
    k = model.k
    if is_k_one(k):
        w = model.w
        top = np.sort(w)[::-1]
        if model.n > 1 and top[0] == top[1]:
            return "k = 1 with tied maximal inputs: no unique winner is declared."
        return "k = 1: exactly one winner, the neuron with the largest input."
    if k > 1:
        return "k > 1: every stable outcome has exactly one winner; multi-winner equilibria are unstable."
    return "k < 1: one or several winners may survive."

