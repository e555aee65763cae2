"""Gradient projection solver with stationarity certificates.

The solver iterates

    p_{t+1}  in  H(p_t - grad Q(p_t) / L),        L > lambda_1(S),

where H projects onto the feasible set (at most k changes, thresholds,
optional bounds).  Each step minimizes the quadratic upper model
``Q(p_t) + g^T (p - p_t) + L/2 ||p - p_t||^2`` over the feasible set, so the
objective never increases and drops by at least ``(L - lambda_1)/2`` times
the squared step.  Once steps shrink below ``delta_min^2 / 2`` the partition
of coordinates into unchanged / raised / lowered is frozen, and the run can
finish by solving the restricted convex QP on that piece exactly.

A point is first-order stationary when it is a fixed point of the map above;
``certify_stationary`` measures the distance to the projection set while
honoring its set-valued ties, so legitimate two-valued projections do not
fail certification.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize

from .errors import ContractError, NumericError, StructuralError
from .instance import (
    Instance,
    gradient_q,
    objective_q,
    profit_z,
    spectral_bounds,
    value_and_gradient,
)
from .projection import _member_candidates, is_feasible, project_feasible, score

__all__ = [
    "SolverParams",
    "Partition",
    "SolveReport",
    "RefineResult",
    "gpa_solve",
    "certify_stationary",
    "multi_start",
    "refine_on_partition",
    "performance_bound",
]

# Certification tolerance used for the stationarity flag in reports.
STATIONARITY_TOL = 1e-7

# Projected-gradient iterations attempted before the refinement falls back
# to a quasi-Newton box solve (see refine_on_partition).
_PG_BUDGET = 2000

_REFINE_MAX_ITERS = 100_000


@dataclass(frozen=True)
class SolverParams:
    """Tuning knobs for one solver run.

    eps is a relative stopping factor by default: the run stops when the
    per-iteration decrease falls below ``eps * max(1, |Q(p_1)|)``.  Set
    ``absolute_eps`` to interpret it as an absolute threshold instead.
    """

    L_mode: str = "gershgorin"
    eps: float = 1e-9
    absolute_eps: bool = False
    max_iters: int = 50_000
    refine: bool = True
    stab_window: int = 5
    long_step_factor: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.L_mode not in ("gershgorin", "power"):
            raise ContractError(f"L_mode must be 'gershgorin' or 'power', got {self.L_mode!r}")
        if not self.eps > 0:
            raise ContractError("eps must be positive")
        if not self.long_step_factor > 1:
            raise ContractError("long_step_factor must exceed 1")
        if self.max_iters < 1 or self.stab_window < 1:
            raise ContractError("max_iters and stab_window must be positive")


@dataclass(frozen=True, eq=False)
class Partition:
    """Index triple (alpha, beta, gamma): unchanged / raised / lowered."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            object.__setattr__(self, name, np.sort(arr))
        n = self.alpha.size + self.beta.size + self.gamma.size
        union = np.concatenate([self.alpha, self.beta, self.gamma])
        if np.unique(union).size != n or (n and (union.min() < 0 or union.max() >= n)):
            raise StructuralError("alpha, beta, gamma must be disjoint and cover 0..n-1")

    @property
    def n_changed(self) -> int:
        return int(self.beta.size + self.gamma.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return (
            np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.gamma, other.gamma)
        )

    def status_codes(self, n: int) -> np.ndarray:
        """Per-coordinate codes: 0 unchanged, 1 raised, 2 lowered."""
        codes = np.zeros(n, dtype=np.int8)
        codes[self.beta] = 1
        codes[self.gamma] = 2
        return codes

    @classmethod
    def from_status(cls, status: np.ndarray) -> "Partition":
        return cls(
            alpha=np.flatnonzero(status == 0),
            beta=np.flatnonzero(status == 1),
            gamma=np.flatnonzero(status == 2),
        )

    @classmethod
    def from_prices(cls, instance: Instance, p: np.ndarray) -> "Partition":
        """Classify a feasible price vector; rejects in-between coordinates."""
        p = np.asarray(p, dtype=np.float64)
        up = p >= instance.p0 + instance.delta
        down = p <= instance.p0 - instance.delta
        base = p == instance.p0
        if not np.all(up | down | base):
            bad = int(np.flatnonzero(~(up | down | base))[0])
            raise ContractError(f"price {p[bad]} at index {bad} is in no branch of its allowed set")
        part = cls(
            alpha=np.flatnonzero(base & ~up & ~down),
            beta=np.flatnonzero(up),
            gamma=np.flatnonzero(down),
        )
        if part.n_changed > instance.k:
            raise ContractError(f"partition changes {part.n_changed} coordinates, budget is {instance.k}")
        return part


@dataclass
class SolveReport:
    """Everything observable about one solver run."""

    final_p: np.ndarray
    final_q_obj: float
    final_profit: float
    iterations: int
    objective_trace: np.ndarray
    stationarity_residual: float
    stationary: bool
    partition: Partition
    kappa: int
    refined: bool
    converged: bool
    wall_time: float
    L: float
    n: int
    k: int
    base_profit: float
    delta_mode: str
    bounds_mode: str
    bound_i: Optional[float] = None
    bound_ii: Optional[float] = None
    instance_id: str = ""
    start_id: Optional[int] = None

    @property
    def improvement_pct(self) -> float:
        if self.base_profit == 0.0:
            return float("nan")
        return 100.0 * (self.final_profit - self.base_profit) / abs(self.base_profit)


class RefineResult(NamedTuple):
    p: np.ndarray
    converged: bool
    iterations: int


def _classify(instance: Instance, p: np.ndarray) -> np.ndarray:
    status = np.zeros(instance.n, dtype=np.int8)
    status[p >= instance.p0 + instance.delta] = 1
    status[p <= instance.p0 - instance.delta] = 2
    return status


def _delta_descriptor(instance: Instance) -> str:
    d = instance.delta
    if np.all(d == d[0]):
        return f"const:{d[0]:g}"
    return "varied"


def _bounds_descriptor(instance: Instance) -> str:
    return "none" if instance.bounds is None else "bounded"


def _partition_box(instance: Instance, partition: Partition) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate interval [lo, hi] of the piece F(alpha, beta, gamma)."""
    lo = instance.p0.copy()
    hi = instance.p0.copy()
    lo[partition.beta] = instance.p0[partition.beta] + instance.delta[partition.beta]
    hi[partition.beta] = np.inf if instance.bounds is None else instance.upper[partition.beta]
    hi[partition.gamma] = instance.p0[partition.gamma] - instance.delta[partition.gamma]
    lo[partition.gamma] = -np.inf if instance.bounds is None else instance.lower[partition.gamma]
    return lo, hi


def refine_on_partition(
    instance: Instance,
    partition: Partition,
    p: np.ndarray,
    tol: Optional[float] = None,
    L: Optional[float] = None,
    max_iters: int = _REFINE_MAX_ITERS,
) -> RefineResult:
    """Solve the restricted strongly convex QP over one polyhedral piece.

    Coordinates in alpha stay at the baseline; raised/lowered coordinates are
    confined to their per-coordinate interval.  Runs projected-gradient
    iterations with step 1/L, stopping when the projected-gradient infinity
    norm drops to tol.  If the plain iteration has not converged after a
    fixed budget (slowly when S is ill conditioned), the remaining work is
    handed to a bounded quasi-Newton solve with the same stopping rule, so
    large runs still finish with an accurate restricted optimum.  The output
    stays in the piece and never increases the objective.
    """
    p = np.asarray(p, dtype=np.float64)
    lo, hi = _partition_box(instance, partition)
    if np.any(p < lo - 1e-9) or np.any(p > hi + 1e-9):
        raise ContractError("p must lie in the piece identified by the partition")
    p = np.clip(p, lo, hi)

    if partition.n_changed == 0:
        return RefineResult(p=instance.p0.copy(), converged=True, iterations=0)

    if L is None:
        L = spectral_bounds(instance).L
    if tol is None:
        tol = 1e-9 * L * max(1.0, float(np.max(np.abs(instance.p0))))

    iterations = 0
    for _ in range(min(_PG_BUDGET, max_iters)):
        iterations += 1
        g = instance.s_matvec(p) - instance.f
        p_next = np.clip(p - g / L, lo, hi)
        pg_norm = L * float(np.max(np.abs(p_next - p)))
        p = p_next
        if pg_norm <= tol:
            return RefineResult(p=p, converged=True, iterations=iterations)

    # Quasi-Newton polish on the same box; objective and gradient reuse the
    # sparse products, and pgtol matches the projected-gradient stopping rule.
    def fun(x: np.ndarray) -> tuple[float, np.ndarray]:
        sx = instance.s_matvec(x)
        return 0.5 * float(x @ sx) - float(instance.f @ x), sx - instance.f

    box = [
        (a if np.isfinite(a) else None, b if np.isfinite(b) else None)
        for a, b in zip(lo, hi)
    ]
    res = minimize(
        fun,
        p,
        jac=True,
        method="L-BFGS-B",
        bounds=box,
        options={"maxiter": max_iters, "ftol": 1e-18, "gtol": tol, "maxcor": 20},
    )
    iterations += int(res.nit)
    p_ref = np.clip(np.asarray(res.x, dtype=np.float64), lo, hi)
    if objective_q(instance, p_ref) > objective_q(instance, p):
        p_ref = p
    g = instance.s_matvec(p_ref) - instance.f
    pg_norm = L * float(np.max(np.abs(np.clip(p_ref - g / L, lo, hi) - p_ref)))
    return RefineResult(p=p_ref, converged=bool(pg_norm <= tol), iterations=iterations)


def certify_stationary(
    instance: Instance,
    p: np.ndarray,
    L: float,
    tol: float = STATIONARITY_TOL,
) -> tuple[bool, float]:
    """Fixed-point residual of p under the projected-gradient map.

    Computes q = p - grad Q(p) / L and the smallest infinity-norm distance
    from p to a member of the projection set of q, minimized over admissible
    tie-break choices: both values of a two-valued coordinate projection are
    accepted when within tol of optimal, and coordinates whose gain scores
    are tied within a tol-scaled margin may swap in and out of the selected
    support.  Returns (residual <= tol, residual).
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (instance.n,):
        raise StructuralError(f"p must have length {instance.n}")
    if not L > 0:
        raise ContractError("L must be positive")

    n, k = instance.n, instance.k
    q = p - gradient_q(instance, p) / L

    c_up, c_dn, d_up, d_dn, d_base = _member_candidates(instance, q)
    d_best = np.minimum(np.minimum(d_up, d_dn), d_base)
    delta_score = d_base**2 - d_best**2

    in_cost = np.full(n, np.inf)
    for cand, d_cand in ((c_up, d_up), (c_dn, d_dn), (instance.p0, d_base)):
        admissible = d_cand <= d_best + tol
        in_cost = np.where(admissible, np.minimum(in_cost, np.abs(p - cand)), in_cost)
    out_cost = np.abs(p - instance.p0)

    tol_delta = 4.0 * tol * (1.0 + float(np.max(d_base)) + float(np.max(instance.delta)))

    if k >= n:
        cost = np.minimum(in_cost, np.where(delta_score <= tol_delta, out_cost, np.inf))
        residual = float(np.max(cost)) if n else 0.0
        return residual <= tol, residual

    theta = float(np.partition(delta_score, n - k)[n - k])

    if theta > tol_delta:
        must_in = delta_score > theta + tol_delta
        never_in = delta_score < theta - tol_delta
        tied = ~must_in & ~never_in
        slots = k - int(np.count_nonzero(must_in))

        def feasible(r: float) -> bool:
            if np.any(in_cost[must_in] > r) or np.any(out_cost[never_in] > r):
                return False
            t_in, t_out = in_cost[tied], out_cost[tied]
            if np.any(np.minimum(t_in, t_out) > r):
                return False
            forced_in = int(np.count_nonzero(t_out > r))
            can_be_in = int(np.count_nonzero(t_in <= r))
            return forced_in <= slots <= can_be_in

    else:
        must_in = delta_score > tol_delta
        free = ~must_in
        slots = k - int(np.count_nonzero(must_in))

        def feasible(r: float) -> bool:
            if np.any(in_cost[must_in] > r):
                return False
            f_in, f_out = in_cost[free], out_cost[free]
            if np.any(np.minimum(f_in, f_out) > r):
                return False
            return int(np.count_nonzero(f_out > r)) <= slots

    candidates = np.unique(np.concatenate([[0.0], in_cost[np.isfinite(in_cost)], out_cost]))
    lo_i, hi_i = 0, candidates.size - 1
    if feasible(float(candidates[lo_i])):
        residual = float(candidates[lo_i])
    else:
        while hi_i - lo_i > 1:
            mid = (lo_i + hi_i) // 2
            if feasible(float(candidates[mid])):
                hi_i = mid
            else:
                lo_i = mid
        residual = float(candidates[hi_i])
    return residual <= tol, residual


def gpa_solve(
    instance: Instance,
    start: np.ndarray,
    params: SolverParams,
    L: Optional[float] = None,
    on_iterate: Optional[Callable[[int, np.ndarray, np.ndarray, float, float, float], None]] = None,
) -> SolveReport:
    """Run the gradient projection iteration from one starting point.

    Infeasible starts are first projected onto the feasible set.  Iterates
    until the per-iteration decrease falls below the stopping threshold or
    the iteration budget runs out; when refinement is enabled and the
    partition has been stable for ``stab_window`` iterations while steps are
    below ``delta_min^2 / 2``, the run finishes by solving the restricted
    convex QP on the frozen piece.  ``on_iterate`` (if given) is called as
    ``(t, p_t, p_{t+1}, Q_t, Q_{t+1}, step_sq)`` for every projection step.

    An explicit ``L`` overrides the spectral-bound choice (useful for
    experiments with a prescribed step constant).
    """
    t0 = time.perf_counter()
    if L is None:
        L = spectral_bounds(instance, mode=params.L_mode).L
    if not np.isfinite(L) or L <= 0:
        raise NumericError(f"invalid step constant L={L}")

    p = np.asarray(start, dtype=np.float64)
    if p.shape != (instance.n,):
        raise StructuralError(f"start must have length {instance.n}")
    if not is_feasible(instance, p):
        p = project_feasible(instance, p)

    q_val, grad = value_and_gradient(instance, p)
    eps_abs = params.eps if params.absolute_eps else params.eps * max(1.0, abs(q_val))
    trace = [q_val]

    delta_min_sq_half = float(np.min(instance.delta)) ** 2 / 2.0
    status = _classify(instance, p)
    streak = 1
    stab_window = params.stab_window
    refine_attempts = 0
    refined = False
    converged = False
    iterations = 0

    while iterations < params.max_iters:
        iterations += 1
        p_next = project_feasible(instance, p - grad / L)
        q_next, grad_next = value_and_gradient(instance, p_next)
        step_sq = float(np.sum((p_next - p) ** 2))
        if on_iterate is not None:
            on_iterate(iterations, p, p_next, q_val, q_next, step_sq)
        trace.append(q_next)
        decrease = q_val - q_next

        status_next = _classify(instance, p_next)
        streak = streak + 1 if np.array_equal(status_next, status) else 1
        p, q_val, grad, status = p_next, q_next, grad_next, status_next

        if params.refine and step_sq <= delta_min_sq_half and streak >= stab_window:
            partition = Partition.from_status(status)
            result = refine_on_partition(instance, partition, p, L=L)
            q_ref = objective_q(instance, result.p)
            if q_ref <= q_val:
                p, q_val = result.p, q_ref
                grad = gradient_q(instance, p)
                trace.append(q_val)
            refined = True
            ok, _ = certify_stationary(instance, p, L, STATIONARITY_TOL)
            if ok or refine_attempts >= 2 or not result.converged:
                converged = ok or result.converged
                break
            # Premature stabilization: resume with a stricter window.
            refine_attempts += 1
            stab_window *= 2
            status = _classify(instance, p)
            streak = 1
            continue

        if decrease <= eps_abs:
            if params.refine:
                # final polish: solve the restricted QP on the current piece
                result = refine_on_partition(instance, Partition.from_status(status), p, L=L)
                q_ref = objective_q(instance, result.p)
                if q_ref <= q_val:
                    p, q_val = result.p, q_ref
                    trace.append(q_val)
                refined = True
            converged = True
            break

    ok, residual = certify_stationary(instance, p, L, STATIONARITY_TOL)
    partition = Partition.from_status(_classify(instance, p))
    kappa = int(np.count_nonzero(p != instance.p0))
    base_profit = profit_z(instance, instance.p0)

    return SolveReport(
        final_p=p,
        final_q_obj=q_val,
        final_profit=profit_z(instance, p),
        iterations=iterations,
        objective_trace=np.asarray(trace),
        stationarity_residual=residual,
        stationary=ok,
        partition=partition,
        kappa=kappa,
        refined=refined,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        L=L,
        n=instance.n,
        k=instance.k,
        base_profit=base_profit,
        delta_mode=_delta_descriptor(instance),
        bounds_mode=_bounds_descriptor(instance),
    )


def _random_feasible_start(instance: Instance, rng: np.random.Generator) -> np.ndarray:
    """Random support of size k, random side, magnitude delta * (1 + U[0,1])."""
    n, k = instance.n, instance.k
    support = rng.choice(n, size=k, replace=False)
    sides = rng.integers(0, 2, size=k) * 2 - 1
    moves = instance.delta[support] * (1.0 + rng.random(k))
    start = instance.p0.copy()
    start[support] = instance.p0[support] + sides * moves
    if instance.bounds is not None:
        start[support] = np.clip(start[support], instance.lower[support], instance.upper[support])
    return start


def build_starts(instance: Instance, params: SolverParams, L: float) -> list[np.ndarray]:
    """The five canonical starting points.

    (1) the baseline, (2)-(4) seeded random feasible vectors, (5) one
    long-step projection of the baseline (step long_step_factor / L), which
    often escapes the baseline's own basin.
    """
    rng = np.random.default_rng(params.seed)
    starts = [instance.p0.copy()]
    for _ in range(3):
        starts.append(_random_feasible_start(instance, rng))
    g0 = gradient_q(instance, instance.p0)
    starts.append(project_feasible(instance, instance.p0 - params.long_step_factor * g0 / L))
    return starts


def multi_start(
    instance: Instance,
    params: SolverParams,
    n_starts: int = 5,
    parallel: int = 1,
) -> tuple[SolveReport, list[SolveReport]]:
    """Run the solver from up to five canonical starts and keep the best.

    Starts run sequentially by default (single-thread comparability);
    ``parallel`` > 1 opts into a thread pool over the independent runs.
    Returns ``(best, all)`` with best = lowest final objective value, ties
    resolved toward the lower start id.
    """
    if not 1 <= n_starts <= 5:
        raise ContractError("n_starts must be between 1 and 5")
    L = spectral_bounds(instance, mode=params.L_mode).L
    starts = build_starts(instance, params, L)[:n_starts]

    def run(idx_start: tuple[int, np.ndarray]) -> SolveReport:
        idx, start = idx_start
        report = gpa_solve(instance, start, params, L=L)
        report.start_id = idx
        return report

    jobs = list(enumerate(starts, start=1))
    if parallel > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=parallel) as pool:
            reports = list(pool.map(run, jobs))
    else:
        reports = [run(j) for j in jobs]

    best = min(reports, key=lambda r: (r.final_q_obj, r.start_id))
    return best, reports


def performance_bound(
    instance: Instance,
    report: SolveReport,
    lambda_n: Optional[float],
    tol: Optional[float] = None,
) -> tuple[float, Optional[float]]:
    """Suboptimality bounds at a certified stationary point.

    With kappa changed coordinates and tail = sum of the gain scores beyond
    the kappa largest, evaluated at q = p - grad Q(p) / L:

        (i)   ||grad Q(p)||_2^2        <=  L^2 tail + L^2/4 sum_i delta_i^2
        (ii)  Q(p) - Q(global optimum) <=  L^2/(2 lambda_n) tail
                                           + L^2/(8 lambda_n) sum_i delta_i^2

    When kappa < k every unselected score must vanish at stationarity, so the
    tail is required to be below tol and the bounds reduce to their
    threshold-only form.  Bound (ii) is unavailable without lambda_n.

    Only valid for the unbounded model: with price bounds, a coordinate
    pressed against its bound can carry an arbitrarily large gradient and the
    per-coordinate case analysis behind both bounds fails.
    """
    if instance.bounds is not None:
        raise ContractError("suboptimality bounds apply to the unbounded model only")
    L = report.L
    p = report.final_p
    q = p - gradient_q(instance, p) / L
    scores = np.sort(score(instance, q).delta_score)[::-1]
    kappa = report.kappa
    tail = float(scores[kappa:].sum())
    if tol is None:
        # a point certified at STATIONARITY_TOL can carry a residual tail of
        # this order; anything larger means the point is not stationary
        scale = 1.0 + float(np.max(np.abs(q - instance.p0))) + float(np.max(instance.delta))
        tol = 4.0 * STATIONARITY_TOL * scale
    if kappa < instance.k:
        if tail > tol:
            raise ContractError(
                f"point is not stationary: slack change budget but positive tail gain {tail:g}"
            )
        tail = 0.0
    sum_delta_sq = float(np.sum(instance.delta**2))
    bound_i = L * L * tail + 0.25 * L * L * sum_delta_sq
    if lambda_n is None:
        return bound_i, None
    if lambda_n <= 0:
        raise ContractError("lambda_n must be positive")
    bound_ii = L * L / (2.0 * lambda_n) * tail + L * L / (8.0 * lambda_n) * sum_delta_sq
    return bound_i, bound_ii
