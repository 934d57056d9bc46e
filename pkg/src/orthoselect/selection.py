"""The constructive selection pipeline and its exact oracles.

Given a direction v, the pipeline greedily collects the columns least
correlated with v (the outer set), then repeatedly draws uniform s-subsets of
the outer set until one is well conditioned (smallest singular value at least
rho_minus).  Certified estimates of the worst-direction selection value are
obtained by running the pipeline over an eps-net and adding eps, which lifts
the net supremum to the whole sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import BudgetExceeded, InvalidInput
from .linalg import ColumnMatrix, IndexSet, check_unit_vector, inf_norm_against, sigma_min, submatrix
from .analytic import KAPPA_BRANCH_CONSTANT
from .sphere import EpsNet, RngStream, _as_generator, sample_unit_vectors

DEFAULT_MAX_ATTEMPTS = 1000
DEFAULT_BRUTE_FORCE_LIMIT = 200_000


@dataclass(frozen=True)
class SelectionConfig:
    """Tunable scalars of the selection method."""

    s: int
    rho_minus: float = 0.5
    kappa: float = KAPPA_BRANCH_CONSTANT
    epsilon: float = 0.25
    c_kappa: float = 1.0
    c_subgauss: float = 0.5
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    brute_force_limit: int = DEFAULT_BRUTE_FORCE_LIMIT

    def __post_init__(self) -> None:
        if self.s < 1:
            raise InvalidInput("target cardinality s must be at least 1")
        if not 0.0 < self.rho_minus < 1.0:
            raise InvalidInput("rho_minus must lie in (0, 1)")
        if self.kappa < 1.0:
            raise InvalidInput("kappa must be at least 1")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidInput("epsilon must lie in (0, 1)")
        if self.max_attempts < 1:
            raise InvalidInput("max_attempts must be at least 1")

    def outer_size(self, p: int) -> int:
        """m = min(ceil(kappa*s), floor(p/2))."""
        return min(math.ceil(self.kappa * self.s), p // 2)


@dataclass(frozen=True)
class SelectionOutcome:
    """Result of one pipeline run for one direction.

    `attained_value` is +inf and `inner_set`/`sigma_min_achieved` are None
    when no well-conditioned subset was found within the attempt budget.
    """

    outer_set: IndexSet
    inner_set: IndexSet | None
    sigma_min_achieved: float | None
    attained_value: float
    attempts_used: int


def greedy_outer(matrix: ColumnMatrix, v: np.ndarray, m: int) -> IndexSet:
    """The m column indices with smallest |<X_j, v>|, ties to the smaller index.

    Equivalent to iterating argmin over the not-yet-selected columns m times.
    """
    if not 1 <= m <= matrix.p:
        raise InvalidInput(f"outer size m={m} must satisfy 1 <= m <= p={matrix.p}")
    vec = check_unit_vector(v)
    if vec.shape[0] != matrix.n:
        raise InvalidInput("direction dimension does not match matrix")
    vals = np.abs(matrix.data.T @ vec)
    order = np.argsort(vals, kind="stable")
    return IndexSet.from_iterable(order[:m])


def random_extract(
    matrix: ColumnMatrix,
    outer: IndexSet,
    s: int,
    rho_minus: float,
    rng: RngStream | np.random.Generator,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> tuple[IndexSet | None, int]:
    """Draw uniform s-subsets of `outer` until one has sigma_min >= rho_minus.

    Subsets come from a partial Fisher-Yates shuffle, so they are uniform over
    unordered s-subsets.  Returns (subset, attempts) on success and
    (None, max_attempts) when the budget is exhausted.
    """
    pool = list(outer.indices)
    m = len(pool)
    if s < 1 or s > m:
        raise InvalidInput(f"cannot draw s={s} columns from an outer set of size {m}")
    outer.validate_for(matrix)
    gen = _as_generator(rng)
    for attempt in range(1, max_attempts + 1):
        pos = list(range(m))
        for i in range(s):
            j = int(gen.integers(i, m))
            pos[i], pos[j] = pos[j], pos[i]
        chosen = IndexSet.from_iterable(pool[pos[i]] for i in range(s))
        if sigma_min(submatrix(matrix, chosen)) >= rho_minus:
            return chosen, attempt
    return None, max_attempts


def constrained_select(
    matrix: ColumnMatrix,
    v: np.ndarray,
    cfg: SelectionConfig,
    rng: RngStream | np.random.Generator,
) -> SelectionOutcome:
    """Full pipeline for one direction: greedy outer set, then random extraction."""
    if math.ceil(cfg.kappa * cfg.s) > matrix.p:
        raise InvalidInput(
            f"ceil(kappa*s)={math.ceil(cfg.kappa * cfg.s)} exceeds p={matrix.p}"
        )
    m = cfg.outer_size(matrix.p)
    outer = greedy_outer(matrix, v, m)
    gen = _as_generator(rng)
    inner, attempts = random_extract(matrix, outer, cfg.s, cfg.rho_minus, gen, cfg.max_attempts)
    if inner is None:
        return SelectionOutcome(outer, None, None, math.inf, attempts)
    return SelectionOutcome(
        outer_set=outer,
        inner_set=inner,
        sigma_min_achieved=sigma_min(submatrix(matrix, inner)),
        attained_value=inf_norm_against(matrix, inner, v),
        attempts_used=attempts,
    )


def attained_values(
    matrix: ColumnMatrix,
    directions: np.ndarray,
    cfg: SelectionConfig,
    rng: RngStream | np.random.Generator,
) -> np.ndarray:
    """Pipeline attained values for many directions at once (vectorized).

    Behaves like one `constrained_select` per direction row (uniform subsets,
    same attempt budget) but draws and conditions the candidate subsets in
    batched rounds, which is what makes certificate probing at 10^5 directions
    tractable.  Infeasible directions come back as +inf.
    """
    if math.ceil(cfg.kappa * cfg.s) > matrix.p:
        raise InvalidInput(
            f"ceil(kappa*s)={math.ceil(cfg.kappa * cfg.s)} exceeds p={matrix.p}"
        )
    dirs = np.asarray(directions, dtype=float)
    if dirs.ndim != 2 or dirs.shape[1] != matrix.n:
        raise InvalidInput("directions must be a (count, n) array")
    count = dirs.shape[0]
    m = cfg.outer_size(matrix.p)
    s = cfg.s
    if s > m:
        raise InvalidInput(f"cannot draw s={s} columns from an outer set of size {m}")
    gen = _as_generator(rng)

    b = np.abs(matrix.data.T @ dirs.T)  # (p, count)
    order = np.argsort(b, axis=0, kind="stable")
    outer_cols = order[:m, :].T  # (count, m) column indices per direction

    attained = np.full(count, math.inf)
    active = np.arange(count)
    if s > matrix.n:
        return attained  # rank-deficient subsets can never reach rho_minus > 0
    cols_t = matrix.data.T  # (p, n)
    for _ in range(cfg.max_attempts):
        if active.size == 0:
            break
        a = active.size
        pos = np.tile(np.arange(m), (a, 1))
        for i in range(s):
            j = gen.integers(i, m, size=a)
            rows = np.arange(a)
            pos[rows, i], pos[rows, j] = pos[rows, j], pos[rows, i]
        chosen_pos = pos[:, :s]  # positions into each outer list
        chosen_cols = outer_cols[active[:, None], chosen_pos]  # (a, s)
        vecs = cols_t[chosen_cols]  # (a, s, n)
        gram = vecs @ vecs.transpose(0, 2, 1)
        lam = np.linalg.eigvalsh(gram)
        smin = np.sqrt(np.maximum(lam[:, 0], 0.0))
        ok = smin >= cfg.rho_minus
        if np.any(ok):
            hit = active[ok]
            vals = b[chosen_cols[ok], hit[:, None]]
            attained[hit] = np.max(vals, axis=1)
            active = active[~ok]
    return attained


def feasible_subsets(
    matrix: ColumnMatrix, s: int, rho_minus: float, limit: int = DEFAULT_BRUTE_FORCE_LIMIT
) -> list[tuple[int, ...]]:
    """All s-subsets with sigma_min >= rho_minus, by exhaustive enumeration."""
    if s < 1 or s > matrix.p:
        raise InvalidInput(f"subset size s={s} invalid for p={matrix.p}")
    total = math.comb(matrix.p, s)
    if total > limit:
        raise BudgetExceeded(f"C({matrix.p},{s})={total} exceeds the budget {limit}")
    if s > matrix.n:
        return []
    if s == 1:
        return [(j,) for j in range(matrix.p)]
    gram = matrix.data.T @ matrix.data
    if s == 2:
        # 2-column Gram eigenvalues are 1 +- |<X_i, X_j>| in closed form
        cutoff = 1.0 - rho_minus * rho_minus
        rows, cols = np.triu_indices(matrix.p, k=1)
        keep = np.abs(gram[rows, cols]) <= cutoff
        return [(int(i), int(j)) for i, j in zip(rows[keep], cols[keep])]
    out: list[tuple[int, ...]] = []
    for subset in combinations(range(matrix.p), s):
        sub = gram[np.ix_(subset, subset)]
        lam_min = float(np.linalg.eigvalsh(sub)[0])
        if math.sqrt(max(lam_min, 0.0)) >= rho_minus:
            out.append(subset)
    return out


def brute_force_inf(
    matrix: ColumnMatrix,
    v: np.ndarray,
    s: int,
    rho_minus: float,
    limit: int = DEFAULT_BRUTE_FORCE_LIMIT,
) -> float:
    """Exact inf over well-conditioned s-subsets of max_j |<X_j, v>|.

    Returns +inf when the feasible family is empty.
    """
    feas = feasible_subsets(matrix, s, rho_minus, limit)
    if not feas:
        return math.inf
    vec = check_unit_vector(v)
    b = np.abs(matrix.data.T @ vec)
    return float(min(np.max(b[list(subset)]) for subset in feas))


def exact_inf_profile(
    matrix: ColumnMatrix,
    directions: np.ndarray,
    s: int,
    rho_minus: float,
    limit: int = DEFAULT_BRUTE_FORCE_LIMIT,
    chunk: int = 20_000,
) -> np.ndarray:
    """`brute_force_inf` for many directions, sharing one feasibility pass."""
    dirs = np.asarray(directions, dtype=float)
    if dirs.ndim != 2 or dirs.shape[1] != matrix.n:
        raise InvalidInput("directions must be a (count, n) array")
    feas = feasible_subsets(matrix, s, rho_minus, limit)
    count = dirs.shape[0]
    if not feas:
        return np.full(count, math.inf)
    fidx = np.asarray(feas)  # (F, s)
    out = np.empty(count)
    for start in range(0, count, chunk):
        block = dirs[start : start + chunk]
        b = np.abs(matrix.data.T @ block.T)  # (p, k)
        vals = b[fidx]  # (F, s, k)
        out[start : start + chunk] = np.min(np.max(vals, axis=1), axis=0)
    return out


@dataclass(frozen=True)
class GammaEstimate:
    """Two-sided view of the worst-direction selection value.

    certified_upper is sup over the net of pipeline values plus the net
    radius, valid for the whole sphere whenever the net covers it;
    heuristic_lower is the max over random probe directions of the exact
    per-direction inf (when the enumeration budget allows) or of pipeline
    values otherwise.
    """

    certified_upper: float
    heuristic_lower: float
    directions_tested: int
    net: dict
    feasibility_rate: float
    oracle_exact: bool


def estimate_gamma(
    matrix: ColumnMatrix,
    cfg: SelectionConfig,
    net: EpsNet,
    probe_count: int,
    rng: RngStream | np.random.Generator,
) -> GammaEstimate:
    """Certificate over an eps-net plus a random-probe lower estimate."""
    if net.dimension != matrix.n:
        raise InvalidInput(
            f"net dimension {net.dimension} does not match matrix n={matrix.n}"
        )
    if probe_count < 0:
        raise InvalidInput("probe_count must be nonnegative")
    gen = _as_generator(rng)
    finite = 0
    best_net = 0.0
    net_infeasible = False
    for v in net.points:
        out = constrained_select(matrix, v, cfg, gen)
        if math.isinf(out.attained_value):
            net_infeasible = True
        else:
            finite += 1
            best_net = max(best_net, out.attained_value)
    certified_upper = math.inf if net_infeasible else best_net + net.epsilon

    oracle_exact = math.comb(matrix.p, cfg.s) <= cfg.brute_force_limit
    heuristic_lower = 0.0
    if probe_count > 0:
        probes = sample_unit_vectors(matrix.n, probe_count, gen)
        if oracle_exact:
            vals = exact_inf_profile(
                matrix, probes, cfg.s, cfg.rho_minus, cfg.brute_force_limit
            )
        else:
            vals = attained_values(matrix, probes, cfg, gen)
        finite += int(np.sum(np.isfinite(vals)))
        finite_vals = vals[np.isfinite(vals)]
        heuristic_lower = float(np.max(finite_vals)) if finite_vals.size else math.inf
    total = len(net) + probe_count
    return GammaEstimate(
        certified_upper=certified_upper,
        heuristic_lower=heuristic_lower,
        directions_tested=total,
        net=net.descriptor(),
        feasibility_rate=finite / total if total else 0.0,
        oracle_exact=oracle_exact,
    )


@dataclass(frozen=True)
class MonotonicityResult:
    gamma_base: float
    gamma_concat: float
    satisfied: bool


def monotonicity_check(
    matrix: ColumnMatrix,
    extra: ColumnMatrix,
    cfg: SelectionConfig,
    directions: np.ndarray,
) -> MonotonicityResult:
    """Exact selection value over a fixed direction set, before and after
    appending columns; appending can only shrink it (inf over empty family
    counts as +inf)."""
    if extra.n != matrix.n:
        raise InvalidInput("appended columns must have the same row count")
    dirs = np.asarray(directions, dtype=float)
    base_vals = exact_inf_profile(matrix, dirs, cfg.s, cfg.rho_minus, cfg.brute_force_limit)
    combined = ColumnMatrix(np.hstack([matrix.data, extra.data]))
    concat_vals = exact_inf_profile(combined, dirs, cfg.s, cfg.rho_minus, cfg.brute_force_limit)
    gamma_base = float(np.max(base_vals))
    gamma_concat = float(np.max(concat_vals))
    satisfied = gamma_concat <= gamma_base + 1e-12 or math.isinf(gamma_base)
    return MonotonicityResult(gamma_base, gamma_concat, satisfied)
