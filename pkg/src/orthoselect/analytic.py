"""Closed-form distributions and bound formulas used by the selection method.

Two kinds of functions live here and must not be confused:

* exact numerics (densities, CDFs, quantiles, the regularized incomplete
  beta) that the rest of the package relies on, and
* ``claimed_*`` / ``*_claimed_*`` transcriptions of the method's analytic
  bounds, kept verbatim so the experiment harness can audit them.  Nothing
  in this package ever *trusts* a claimed formula.

The regularized incomplete beta is computed by a Lentz continued fraction
with the usual symmetry reduction, targeting 1e-10 relative error; tests
cross-check it against quadrature and an independent library implementation.
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

from .errors import DomainError, InvalidInput

_BETACF_MAX_ITER = 500
_BETACF_EPS = 3e-16
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Modified-Lentz evaluation of the incomplete-beta continued fraction."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise DomainError(f"incomplete beta continued fraction stalled at a={a}, b={b}, x={x}")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise DomainError("beta parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def binomial_cdf(k: int, count: int, q: float) -> float:
    """P(Bin(count, q) <= k), via the incomplete-beta identity."""
    if count < 0 or not 0.0 <= q <= 1.0:
        raise DomainError("count must be nonnegative and q in [0, 1]")
    if k < 0:
        return 0.0
    if k >= count:
        return 1.0
    return betainc_reg(count - k, k + 1.0, 1.0 - q)


def _check_z(z: float) -> None:
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"z={z} outside [0, 1]")


def gamma_ratio(n: int) -> float:
    """Exact Gamma(n/2) / Gamma((n-1)/2) via log-gamma."""
    if n < 2:
        raise DomainError("ratio defined for n >= 2")
    return math.exp(math.lgamma(n / 2.0) - math.lgamma((n - 1) / 2.0))


def gamma_ratio_claimed_bounds(n: int) -> tuple[float, float]:
    """The Stirling-based bracket for gamma_ratio, transcribed verbatim.

    These bounds scale like n while the exact ratio scales like sqrt(n); they
    are audited, never assumed (see tests for the measured validity range).
    """
    if n < 4:
        raise DomainError("claimed bounds stated for n >= 4")
    shape = (n - 3.0) ** 1.5 / math.sqrt(n - 2.0)
    lower = math.exp(2.0 * math.log(2.0)) / 2.0 * shape
    upper = math.exp(2.0) / 2.0 * shape
    return lower, upper


def inner_density(z: float, n: int) -> float:
    """Density g of |<X_j, v>| on [0, 1] for X_j uniform on S^{n-1}.

    g(z) = (1/sqrt(pi)) * Gamma(n/2)/Gamma((n-1)/2) * (1-z^2)^((n-3)/2);
    for n = 2 the endpoint z = 1 is an integrable singularity.
    """
    if n < 2:
        raise DomainError("dimension must be at least 2")
    _check_z(z)
    coeff = gamma_ratio(n) / math.sqrt(math.pi)
    expo = (n - 3) / 2.0
    base = 1.0 - z * z
    if base == 0.0:
        if expo < 0.0:
            return math.inf
        if expo == 0.0:
            return coeff
        return 0.0
    return coeff * base**expo


def inner_cdf(z: float, n: int) -> float:
    """G(z) = P(|<X_j, v>| <= z) = I_{z^2}(1/2, (n-1)/2)."""
    if n < 2:
        raise DomainError("dimension must be at least 2")
    _check_z(z)
    return betainc_reg(0.5, (n - 1) / 2.0, z * z)


@dataclass(frozen=True)
class OrderStatSpec:
    """Which order statistic: r-th smallest of p absolute inner products in R^n."""

    p: int
    r: int
    n: int

    def __post_init__(self) -> None:
        if not 1 <= self.r <= self.p:
            raise InvalidInput(f"order index r={self.r} must satisfy 1 <= r <= p={self.p}")
        if self.n < 2:
            raise InvalidInput("ambient dimension must be at least 2")


def order_stat_cdf(z: float, spec: OrderStatSpec) -> float:
    """F_{Z_(r)}(z) = P(Bin(p, G(z)) >= r) = I_{G(z)}(r, p - r + 1)."""
    _check_z(z)
    g = inner_cdf(z, spec.n)
    return betainc_reg(float(spec.r), float(spec.p - spec.r + 1), g)


def order_stat_sf(z: float, spec: OrderStatSpec) -> float:
    """P(Z_(r) > z) = P(Bin(p, G(z)) <= r - 1); accurate when tiny."""
    _check_z(z)
    g = inner_cdf(z, spec.n)
    return binomial_cdf(spec.r - 1, spec.p, g)


def order_stat_quantile(alpha: float, spec: OrderStatSpec, tol: float = 1e-12) -> float:
    """Smallest z with F_{Z_(r)}(z) >= 1 - alpha, by bisection.

    Extreme levels (alpha below float granularity near 1) bisect on the
    survival function instead, which is the same condition but stays
    resolvable down to alpha = p^-n.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    if alpha >= 1e-9:
        target = 1.0 - alpha
        hit = lambda z: order_stat_cdf(z, spec) >= target
    else:
        hit = lambda z: order_stat_sf(z, spec) <= alpha
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if hit(mid):
            hi = mid
        else:
            lo = mid
    return hi


def chernoff_lower(eps: float, mean: float) -> float:
    """The lower-tail bound exp(-eps^2 * mean / 2) for Bin deviations."""
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    if mean < 0.0:
        raise DomainError("mean must be nonnegative")
    return math.exp(-0.5 * eps * eps * mean)


def cap_probability(h: float, n: int) -> float:
    """True probability that a uniform w on S^{n-1} has <v, w> >= h.

    Equals (1/2) I_{1-h^2}((n-1)/2, 1/2); satisfies the exact identity
    2 * cap_probability(h, n) = 1 - inner_cdf(h, n).
    """
    if n < 2:
        raise DomainError("dimension must be at least 2")
    _check_z(h)
    return 0.5 * betainc_reg((n - 1) / 2.0, 0.5, 1.0 - h * h)


def cap_probability_claimed(h: float, n: int) -> float:
    """The claimed cap formula, verbatim: the normalized incomplete integral
    of t^((n-1)/2) (1-t)^(1/2) up to 2h - h^2.

    This disagrees with `cap_probability` (the exponents match a different
    Beta law and the limit 2h - h^2 parameterizes caps by height, not by
    inner-product threshold); both are exposed so the disagreement can be
    audited instead of silently resolved.
    """
    if n < 2:
        raise DomainError("dimension must be at least 2")
    _check_z(h)
    return betainc_reg((n + 1) / 2.0, 1.5, 2.0 * h - h * h)


def coherence_threshold_h(p: int, n: int) -> float:
    """The claimed coherence cap threshold h(p, n), for auditing only.

    h = (1/2) exp(-2 (log p + (log p - log 2)/(n+1))), the parenthesization
    reconstructed from the requirement (p^2/2) (2h)^((n+1)/2) <= p^-n, which
    this h satisfies with equality.
    """
    if p < 2:
        raise DomainError("p must be at least 2")
    if n < 1:
        raise DomainError("n must be at least 1")
    lp = math.log(p)
    return 0.5 * math.exp(-2.0 * (lp + (lp - math.log(2.0)) / (n + 1)))


def claimed_gamma_bound(p: float) -> float:
    """The headline bound 80 log(p) / p on the selection value."""
    if p < 2:
        raise DomainError("p must be at least 2")
    return 80.0 * math.log(p) / p


def k_epsilon(eps: float, c_kappa: float) -> float:
    """K_eps = (sqrt(2 pi)/6) ((1+C_k) log(1+2/eps) + C_k + log(C_k/4))."""
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    if c_kappa <= 0.0:
        raise DomainError("c_kappa must be positive")
    return (
        math.sqrt(2.0 * math.pi)
        / 6.0
        * ((1.0 + c_kappa) * math.log(1.0 + 2.0 / eps) + c_kappa + math.log(c_kappa / 4.0))
    )


#: First branch of the kappa formula, the constant 4 e^{-2(ln 2 - 1)}.
KAPPA_BRANCH_CONSTANT = 4.0 * math.exp(-2.0 * (math.log(2.0) - 1.0))


def kappa_branches(
    rho_minus: float, eps: float, c_kappa: float, p: int, n: int, c_subgauss: float
) -> tuple[float, float]:
    """Both branches of the kappa formula: the constant 4 e^{-2(ln2-1)} and
    the log^2(p) log(C_k n) branch."""
    if not 0.0 < rho_minus < 1.0:
        raise DomainError("rho_minus must lie in (0, 1)")
    if c_subgauss <= 0.0:
        raise DomainError("c_subgauss must be positive")
    if p < 2:
        raise DomainError("p must be at least 2")
    if c_kappa * n <= 0.0:
        raise DomainError("c_kappa * n must be positive")
    k_eps = k_epsilon(eps, c_kappa)
    branch2 = (
        4.0
        * math.exp(3.0)
        / (1.0 - rho_minus) ** 2
        * ((1.0 + k_eps) * (1.0 + c_kappa) / (c_subgauss * (1.0 - eps) ** 4)) ** 2
        * math.log(p) ** 2
        * math.log(c_kappa * n)
    )
    return KAPPA_BRANCH_CONSTANT, branch2


def kappa_theorem(
    rho_minus: float, eps: float, c_kappa: float, p: int, n: int, c_subgauss: float
) -> float:
    """The two-branch kappa formula: max over `kappa_branches`."""
    return max(kappa_branches(rho_minus, eps, c_kappa, p, n, c_subgauss))


def c_s_constant(rho_minus: float, eps: float, c_kappa: float, c_subgauss: float) -> float:
    """C_s = c^2 (1-rho)^2 (1-eps)^8 / (4 e^3) * C_k / ((1+K_eps)^2 (1+C_k)^2)."""
    k_eps = k_epsilon(eps, c_kappa)
    return (
        c_subgauss**2
        * (1.0 - rho_minus) ** 2
        * (1.0 - eps) ** 8
        / (4.0 * math.exp(3.0))
        * c_kappa
        / ((1.0 + k_eps) ** 2 * (1.0 + c_kappa) ** 2)
    )


def s_max(
    n: int, p: int, rho_minus: float, eps: float, c_kappa: float, c_subgauss: float
) -> int:
    """floor(C_s n / (log^2(p) log(C_k n))), the claimed largest admissible s.

    At desk scale this is typically 0 or 1; that is reported, not hidden.
    """
    if p < 2:
        raise DomainError("p must be at least 2")
    if c_kappa * n <= 1.0:
        raise DomainError("c_kappa * n must exceed 1 so log(c_kappa * n) is positive")
    cs = c_s_constant(rho_minus, eps, c_kappa, c_subgauss)
    return math.floor(cs * n / (math.log(p) ** 2 * math.log(c_kappa * n)))


def norm_threshold_u(
    n: int, kappa_s: float, eps: float, c_subgauss: float, k_eps: float, p: int
) -> float:
    """The operator-norm threshold (1+K_eps)/(c (1-eps)^4) (n+ks)/n log(p)."""
    if p < 2:
        raise DomainError("p must be at least 2")
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    if c_subgauss <= 0.0:
        raise DomainError("c_subgauss must be positive")
    return (1.0 + k_eps) / (c_subgauss * (1.0 - eps) ** 4) * (n + kappa_s) / n * math.log(p)


class Z0Window(NamedTuple):
    z_lower: float
    z_upper: float
    compatible: bool


def z0_window(n: int, p: int, eps: float, kappa: float, s: int) -> Z0Window:
    """Verbatim evaluation of the claimed quantile window [z_lower, z_upper].

    The compatibility flag is the claimed sufficient condition
    kappa >= (4/e^{2(ln2-1)}) (1-eps)/eps^2 (n/s) log(p).  The flag implies
    z_lower <= z_upper (it is a factor 2 stronger than the exact threshold,
    so the converse can fail).
    """
    if n < 4:
        raise DomainError("window stated for n >= 4")
    if p < 2:
        raise DomainError("p must be at least 2")
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    shape = math.sqrt(n - 2.0) / (n - 3.0) ** 1.5
    z_lower = (
        2.0
        * math.sqrt(math.pi)
        / math.exp(2.0 * math.log(2.0))
        * shape
        * (1.0 / (0.5 * eps * eps))
        * (n / p)
        * math.log(p)
    )
    z_upper = (
        2.0 * math.sqrt(math.pi) / math.exp(2.0) * shape * (kappa * s / ((1.0 - eps) * p))
    )
    compatible = kappa >= KAPPA_BRANCH_CONSTANT * ((1.0 - eps) / eps**2) * (n / s) * math.log(p)
    return Z0Window(z_lower, z_upper, compatible)


@dataclass(frozen=True)
class VFunctionResult:
    value: float
    terms: tuple[float, float, float]
    precondition_u: bool
    precondition_v: bool


def v_function(
    s: int,
    r_prime: float,
    u_norm: float,
    v_split: float,
    kappa: float,
    norm_m: float,
    mu_m: float,
) -> VFunctionResult:
    """The three-term tail function for randomly restricted Gram deviations.

    V = (e u^2 / (k r'^2))^(r'^2/v^2) + (e |M|^4 / (k u^2))^(u^2/|M|^2)
        + (e |M|^2 / (k v^2))^(v^2/mu(M)^2)

    `s` is carried for bookkeeping only; the sum itself does not use it.  The
    claimed applicability preconditions (k r'^2 / e >= u^2 >= |M|^4 / k and
    v^2 >= |M|^2 / k) are reported as flags, and the value is returned either
    way so out-of-domain evaluations can still be audited.
    """
    for name, val in [
        ("r_prime", r_prime),
        ("u_norm", u_norm),
        ("v_split", v_split),
        ("kappa", kappa),
        ("norm_m", norm_m),
        ("mu_m", mu_m),
    ]:
        if val <= 0.0:
            raise DomainError(f"{name} must be positive")

    def power(base: float, expo: float) -> float:
        # log-space keeps out-of-domain audits finite-or-inf instead of raising
        val = expo * math.log(base)
        return math.inf if val > 709.0 else math.exp(val)

    t1 = power(math.e / kappa * u_norm**2 / r_prime**2, r_prime**2 / v_split**2)
    t2 = power(math.e / kappa * norm_m**4 / u_norm**2, u_norm**2 / norm_m**2)
    t3 = power(math.e / kappa * norm_m**2 / v_split**2, v_split**2 / mu_m**2)
    pre_u = kappa * r_prime**2 / math.e >= u_norm**2 >= norm_m**4 / kappa
    pre_v = v_split**2 >= norm_m**2 / kappa
    return VFunctionResult(
        value=t1 + t2 + t3, terms=(t1, t2, t3), precondition_u=pre_u, precondition_v=pre_v
    )


@dataclass(frozen=True)
class BoundConstants:
    """All scalars of the method for one (n, p, s) context.

    Derived fields are always recomputed from the four inputs by
    `derive_constants`; they are never hand-set.
    """

    n: int
    p: int
    s: int
    rho_minus: float
    epsilon: float
    c_kappa: float
    c_subgauss: float
    k_epsilon: float
    kappa: float
    kappa_branch1: float
    kappa_branch2: float
    c_s: float
    c_v: float
    u_norm: float
    v_split: float
    r_prime: float
    h_cap: float
    z0: float | None
    s_max: int | None
    gamma_bound: float


def derive_constants(
    n: int,
    p: int,
    s: int,
    rho_minus: float = 0.5,
    epsilon: float = 0.5,
    c_kappa: float = 1.0,
    c_subgauss: float = 0.5,
) -> BoundConstants:
    """Recompute every derived constant for the given context."""
    k_eps = k_epsilon(epsilon, c_kappa)
    branch1, branch2 = kappa_branches(rho_minus, epsilon, c_kappa, p, n, c_subgauss)
    kappa = max(branch1, branch2)
    r_prime = (1.0 - rho_minus) / 2.0
    u_norm = norm_threshold_u(n, kappa * s, epsilon, c_subgauss, k_eps, p)
    c_v = math.log(c_kappa * n) if c_kappa * n > 0 else math.nan
    v_split = (
        math.sqrt(r_prime**2 / c_v) if c_v > 0.0 else math.nan
    )
    try:
        smax = s_max(n, p, rho_minus, epsilon, c_kappa, c_subgauss)
    except DomainError:
        smax = None
    z0: float | None = None
    r_order = math.ceil(kappa * s)
    alpha = math.exp(-n * math.log(p)) if n * math.log(p) < 700 else 0.0
    if n >= 2 and 1 <= r_order <= p and 0.0 < alpha < 1.0:
        z0 = order_stat_quantile(alpha, OrderStatSpec(p=p, r=r_order, n=n))
    return BoundConstants(
        n=n,
        p=p,
        s=s,
        rho_minus=rho_minus,
        epsilon=epsilon,
        c_kappa=c_kappa,
        c_subgauss=c_subgauss,
        k_epsilon=k_eps,
        kappa=kappa,
        kappa_branch1=branch1,
        kappa_branch2=branch2,
        c_s=c_s_constant(rho_minus, epsilon, c_kappa, c_subgauss),
        c_v=c_v,
        u_norm=u_norm,
        v_split=v_split,
        r_prime=r_prime,
        h_cap=coherence_threshold_h(p, n),
        z0=z0,
        s_max=smax,
        gamma_bound=claimed_gamma_bound(p),
    )


@dataclass(frozen=True)
class ConstraintResult:
    constraint: str
    lhs: float
    rhs: float
    satisfied: bool


#: p lower bound of the main guarantee: ceil(e^{6/sqrt(2 pi)}) = 11.
P_MINIMUM = math.ceil(math.exp(6.0 / math.sqrt(2.0 * math.pi)))


def constraint_check(n: int, p: int, s: int, cfg: BoundConstants) -> list[ConstraintResult]:
    """Evaluate every displayed hypothesis of the main guarantee as a ledger."""
    rows: list[ConstraintResult] = []
    rows.append(
        ConstraintResult("p >= ceil(exp(6/sqrt(2*pi)))", float(p), float(P_MINIMUM), p >= P_MINIMUM)
    )
    rows.append(ConstraintResult("n >= 6", float(n), 6.0, n >= 6))
    numerator = max(cfg.kappa * s, 2.0 * 36.0 * 3.0 * 3.0, math.exp((1.0 - cfg.rho_minus) / 2.0))
    lower_n = numerator / cfg.c_kappa
    rows.append(
        ConstraintResult(
            "n >= max(kappa*s, 2*36*3*3, exp((1-rho)/2)) / c_kappa", float(n), lower_n, n >= lower_n
        )
    )
    upper1 = (p / math.log(p)) ** 2
    rows.append(ConstraintResult("n <= (p/log(p))^2", float(n), upper1, n <= upper1))
    expo = (1.0 - cfg.rho_minus) / math.sqrt(2.0) * p
    upper2 = math.exp(expo) / cfg.c_kappa if expo < 700 else math.inf
    rows.append(
        ConstraintResult("n <= exp((1-rho)/sqrt(2)*p) / c_kappa", float(n), upper2, n <= upper2)
    )
    return rows


def search_admissible(
    n_grid: Sequence[int],
    p_grid: Sequence[int],
    s_grid: Sequence[int],
    rho_minus: float = 0.5,
    epsilon: float = 0.5,
    c_kappa_grid: Sequence[float] = (0.5, 1.0, 2.0, 10.0, 100.0),
    c_subgauss: float = 0.5,
) -> dict | None:
    """First grid point satisfying every hypothesis, or None if the probed
    grid contains no admissible point."""
    for c_kappa in c_kappa_grid:
        for n in n_grid:
            for p in p_grid:
                for s in s_grid:
                    cfg = derive_constants(n, p, s, rho_minus, epsilon, c_kappa, c_subgauss)
                    rows = constraint_check(n, p, s, cfg)
                    if all(r.satisfied for r in rows):
                        return {"n": n, "p": p, "s": s, "c_kappa": c_kappa}
    return None
