"""Seeded synthetic instance generation.

All randomness comes from NumPy's ``default_rng`` (the PCG64 bit generator),
so a fixed seed reproduces instances bit-for-bit across runs and platforms.
Reference outputs for seed 0 are frozen in the test suite.

Recipe per instance (draws happen in this order):

1. price-effect matrix: diagonal entries uniform on ``diag_range``; per row
   up to ``offdiag_max_count`` distinct off-diagonal positions with values
   ``-U(0, offdiag_rel_mag * d_ii)`` (sign flipped with probability 1/2 when
   mixed signs are allowed);
2. optional bounds ``l ~ U[l_lo, l_hi]``, ``u ~ U[u_lo, u_hi]``;
3. baseline ``p0 ~ U[1, 10]`` (or ``U[l, u]`` when bounds are active);
4. objective coefficient target ``f ~ U[f_range]`` and costs
   ``c ~ U[cost_range]``; the demand intercept is derived as
   ``a = f - D^T c``;
5. thresholds per ``delta_mode``; bound repair widens any violating bound to
   exactly ``p0 -/+ delta``;
6. if ``dominance_fix``, off-diagonal entries are damped so that every row
   of S = D + D^T is strictly diagonally dominant, which guarantees S is
   positive definite.  Turning the fix off reproduces the raw recipe, which
   does not guarantee definiteness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse

from .errors import ContractError
from .instance import Instance

__all__ = ["GenConfig", "generate", "generate_profitable", "benchmark_suite"]

_DOMINANCE_MARGIN = 1e-3


@dataclass(frozen=True)
class GenConfig:
    """Knobs of the synthetic recipe; see the module docstring for the order."""

    n: int
    k_fraction: float = 0.10
    delta_mode: tuple[str, float] = ("const", 1.0)
    bounds_mode: Optional[tuple[float, float, float, float]] = None
    f_range: tuple[float, float] = (1.0, 10.0)
    diag_range: tuple[float, float] = (1.0, 10.0)
    offdiag_max_count: int = 5
    offdiag_rel_mag: float = 0.2
    cost_range: tuple[float, float] = (1.0, 5.0)
    dominance_fix: bool = True
    allow_mixed_signs: bool = False
    literal_sign: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ContractError("n must be positive")
        if not 0.0 < self.k_fraction <= 1.0:
            raise ContractError("k_fraction must be in (0, 1]")
        mode, value = self.delta_mode
        if mode not in ("const", "fraction") or value <= 0.0:
            raise ContractError(f"delta_mode must be ('const', x>0) or ('fraction', r>0), got {self.delta_mode}")
        for name in ("f_range", "diag_range", "cost_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ContractError(f"{name} must be ordered")
        if self.bounds_mode is not None:
            l_lo, l_hi, u_lo, u_hi = self.bounds_mode
            if not (l_lo <= l_hi and u_lo <= u_hi):
                raise ContractError("bounds_mode ranges must be ordered")
        if self.offdiag_max_count < 0 or self.offdiag_rel_mag < 0:
            raise ContractError("off-diagonal settings must be nonnegative")

    @property
    def k(self) -> int:
        return max(1, round(self.k_fraction * self.n))


def _draw_offdiag_row(rng: np.random.Generator, i: int, n: int, m: int, cap: float, mixed: bool):
    """Distinct off-diagonal columns and nonzero values for one row."""
    while True:
        cols = rng.integers(0, n - 1, size=m)
        cols = np.where(cols >= i, cols + 1, cols)
        vals = -rng.uniform(0.0, cap, size=m)
        if mixed:
            flip = rng.random(m) < 0.5
            vals = np.where(flip, -vals, vals)
        if np.unique(cols).size == m and np.all(vals != 0.0):
            return cols, vals


def _build_matrix(rng: np.random.Generator, cfg: GenConfig) -> sparse.csr_array:
    n = cfg.n
    diag = rng.uniform(cfg.diag_range[0], cfg.diag_range[1], size=n)
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [diag]
    if n > 1 and cfg.offdiag_max_count > 0:
        counts = rng.integers(0, cfg.offdiag_max_count + 1, size=n)
        for i in range(n):
            m = min(int(counts[i]), n - 1)
            if m == 0:
                continue
            c, v = _draw_offdiag_row(rng, i, n, m, cfg.offdiag_rel_mag * diag[i], cfg.allow_mixed_signs)
            rows.append(np.full(m, i))
            cols.append(c)
            vals.append(v)
    coo = sparse.coo_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return sparse.csr_array(coo)


def _apply_dominance_fix(D: sparse.csr_array) -> sparse.csr_array:
    """Damp off-diagonal entries until every row of S is strictly dominant.

    Row i of S must satisfy sum_{j != i} |s_ij| < 2 d_ii (1 - margin).  Each
    off-diagonal s_ij is scaled by 1 / max(1, rho_i, rho_j), where rho is the
    row's violation ratio against a slightly tightened target, which fixes
    both of the rows an entry touches in a single pass.
    """
    n = D.shape[0]
    diag = D.diagonal()
    S = sparse.coo_array(D + sparse.csr_array(D.T))
    off = S.row != S.col
    if not np.any(off):
        return D
    row_sums = np.zeros(n)
    np.add.at(row_sums, S.row[off], np.abs(S.data[off]))
    target = 2.0 * diag * (1.0 - _DOMINANCE_MARGIN) * (1.0 - 1e-6)
    rho = row_sums / target
    if np.all(rho <= 1.0):
        return D
    coo = sparse.coo_array(D)
    keep = coo.row != coo.col
    scale = 1.0 / np.maximum(1.0, np.maximum(rho[coo.row], rho[coo.col]))
    data = np.where(keep, coo.data * scale, coo.data)
    fixed = sparse.coo_array((data, (coo.row, coo.col)), shape=(n, n))
    return sparse.csr_array(fixed)


def generate(config: GenConfig) -> Instance:
    """One synthetic instance from the seeded recipe."""
    rng = np.random.default_rng(config.seed)
    n = config.n

    D = _build_matrix(rng, config)

    bounds = None
    if config.bounds_mode is not None:
        l_lo, l_hi, u_lo, u_hi = config.bounds_mode
        lo = rng.uniform(l_lo, l_hi, size=n)
        hi = rng.uniform(u_lo, u_hi, size=n)
        bounds = (lo, hi)
        p0 = rng.uniform(lo, hi)
    else:
        p0 = rng.uniform(1.0, 10.0, size=n)

    f_target = rng.uniform(config.f_range[0], config.f_range[1], size=n)
    if config.literal_sign:
        f_target = -f_target
    c = rng.uniform(config.cost_range[0], config.cost_range[1], size=n)

    mode, value = config.delta_mode
    delta = np.full(n, value) if mode == "const" else value * p0
    if np.any(delta <= 0.0):
        raise ContractError("delta_mode produced non-positive thresholds (is p0 positive?)")

    if bounds is not None:
        lo, hi = bounds
        bounds = (np.minimum(lo, p0 - delta), np.maximum(hi, p0 + delta))

    if config.dominance_fix:
        D = _apply_dominance_fix(D)

    a = f_target - sparse.csr_array(D.T) @ c
    return Instance(n=n, k=config.k, a=a, D=D, c=c, p0=p0, delta=delta, bounds=bounds)


def generate_profitable(config: GenConfig) -> Instance:
    """Variant construction that satisfies the profitability assumptions.

    Keeps the matrix recipe but chooses the intercepts so demand stays
    nonnegative at cost prices (``a >= D c``, ``a > 0``) and the baseline so
    that ``p0 - delta >= c``.  Used for experiments about profitable optima;
    the plain recipe makes no such promise.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n

    D = _build_matrix(rng, config)
    if config.dominance_fix:
        D = _apply_dominance_fix(D)

    c = rng.uniform(config.cost_range[0], config.cost_range[1], size=n)
    a = np.maximum(D @ c, 0.0) + rng.uniform(0.5, 2.0, size=n)

    mode, value = config.delta_mode
    if mode == "const":
        delta = np.full(n, value)
        p0 = c + delta + rng.uniform(0.0, 3.0, size=n)
    else:
        # delta depends on p0: p0 = (c + slack) / (1 - r) keeps p0 - delta >= c
        if value >= 1.0:
            raise ContractError("fraction mode requires r < 1 for a profitable baseline")
        p0 = (c + rng.uniform(0.0, 3.0, size=n)) / (1.0 - value)
        delta = value * p0
    return Instance(n=n, k=config.k, a=a, D=D, c=c, p0=p0, delta=delta, bounds=None)


_DESK_SIZES = (200, 1_000, 5_000)
_FULL_SIZES = (10_000, 25_000, 50_000, 75_000, 100_000)
_DELTAS = (0.5, 1.0)
_BOUND_REGIMES = (
    None,
    (1.0, 5.0, 5.0, 10.0),
    (1.0, 5.0, 10.0, 15.0),
    (1.0, 5.0, 15.0, 20.0),
)


def benchmark_suite(scale: str, base_seed: int = 0) -> list[GenConfig]:
    """Benchmark grid: sizes x thresholds {0.5, 1.0} x four bound regimes.

    ``desk`` uses sizes (200, 1000, 5000) for a 24-config grid that runs on a
    workstation; ``full`` uses the five production sizes (10k..100k, 40
    configs).  Every config gets 10% change budget and a seed derived
    deterministically from ``base_seed``.
    """
    if scale not in ("desk", "full"):
        raise ContractError(f"scale must be 'desk' or 'full', got {scale!r}")
    sizes = _DESK_SIZES if scale == "desk" else _FULL_SIZES
    configs = []
    idx = 0
    for n in sizes:
        for d in _DELTAS:
            for regime in _BOUND_REGIMES:
                configs.append(
                    GenConfig(
                        n=n,
                        k_fraction=0.10,
                        delta_mode=("const", d),
                        bounds_mode=regime,
                        seed=base_seed + 7919 * idx,
                    )
                )
                idx += 1
    return configs
