"""Uniform sampling on the unit sphere, eps-net construction, net norm bounds.

Randomness is drawn from counter-based Philox streams keyed by a
(master seed, stream index) pair, so any consumer can be replayed exactly and
distinct stream indices can be consumed concurrently without coordination.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .linalg import ColumnMatrix

DEFAULT_NET_DIMENSION_CAP = 8
_CANDIDATE_CHUNK = 512


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream: same (seed, index) -> same sequence."""

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array(
            [self.master_seed & 0xFFFFFFFFFFFFFFFF, self.stream_index & 0xFFFFFFFFFFFFFFFF],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, offset: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_index + offset)


def _as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def sample_unit_vector(n: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Uniform point on S^{n-1}: a standard Gaussian vector, normalized."""
    if n < 1:
        raise InvalidInput("dimension must be at least 1")
    gen = _as_generator(rng)
    while True:
        g = gen.standard_normal(n)
        norm = float(np.linalg.norm(g))
        if norm > 1e-12:
            return g / norm


def sample_unit_vectors(n: int, count: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """`count` independent uniform sphere points, one per row."""
    if n < 1:
        raise InvalidInput("dimension must be at least 1")
    gen = _as_generator(rng)
    out = gen.standard_normal((count, n))
    norms = np.linalg.norm(out, axis=1)
    bad = norms <= 1e-12
    while np.any(bad):
        out[bad] = gen.standard_normal((int(np.sum(bad)), n))
        norms = np.linalg.norm(out, axis=1)
        bad = norms <= 1e-12
    return out / norms[:, None]


def sample_sphere_matrix(n: int, p: int, rng: RngStream | np.random.Generator) -> ColumnMatrix:
    """Matrix with p i.i.d. columns uniform on S^{n-1}."""
    if n < 1 or p < 1:
        raise InvalidInput("n and p must be at least 1")
    return ColumnMatrix(sample_unit_vectors(n, p, rng).T)


@dataclass(frozen=True)
class EpsNet:
    """A finite eps-separated set of unit vectors in R^d.

    Maximal eps-separated sets cover the sphere to radius eps, so a net built
    to (approximate) maximality doubles as an eps-net.  `mode` records whether
    maximality is exact (d = 1) or stall-budget heuristic.
    """

    dimension: int
    epsilon: float
    points: np.ndarray
    mode: str = field(default="heuristic")

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise InvalidInput("net points must be a (count, dimension) array")
        norms = np.linalg.norm(pts, axis=1)
        if pts.shape[0] and float(np.max(np.abs(norms - 1.0))) > 1e-9:
            raise InvalidInput("net points must be unit vectors")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def separation_ok(self) -> bool:
        """O(|N|^2) check that pairwise distances exceed epsilon."""
        pts = self.points
        if len(self) < 2:
            return True
        gram = pts @ pts.T
        d2 = 2.0 - 2.0 * gram
        np.fill_diagonal(d2, np.inf)
        return bool(np.min(d2) > self.epsilon * self.epsilon)

    def covering_radius_of(self, probes: np.ndarray) -> float:
        """Largest distance from any probe row to its nearest net point."""
        dots = probes @ self.points.T
        best = np.max(dots, axis=1)
        return float(np.sqrt(np.max(np.maximum(2.0 - 2.0 * best, 0.0))))

    def descriptor(self) -> dict:
        return {
            "dimension": self.dimension,
            "epsilon": self.epsilon,
            "size": len(self),
            "mode": self.mode,
        }


def net_cardinality_bound(d: int, eps: float) -> float:
    """The existence bound 2d(1+2/eps)^(d-1); reported, never enforced."""
    return 2.0 * d * (1.0 + 2.0 / eps) ** (d - 1)


def build_eps_net(
    d: int,
    eps: float,
    rng: RngStream | np.random.Generator,
    stall_budget: int = 1000,
    dimension_cap: int = DEFAULT_NET_DIMENSION_CAP,
) -> EpsNet:
    """Grow a maximal-by-construction eps-separated set on S^{d-1}.

    Uniform candidates are accepted iff they lie more than eps from every
    accepted point; construction stops after `stall_budget` consecutive
    rejections.  Maximality (hence covering) is therefore approximate, so the
    result is flagged heuristic except for the exact d = 1 net {-1, +1}.
    Cardinality explodes with d; dimensions above `dimension_cap` are refused
    unless the caller raises the cap.
    """
    if d < 1:
        raise InvalidInput("dimension must be at least 1")
    if not 0.0 < eps < 2.0:
        raise InvalidInput("epsilon must lie in (0, 2), the sphere's diameter")
    if stall_budget < 1:
        raise InvalidInput("stall budget must be at least 1")
    if d > dimension_cap:
        raise InvalidInput(
            f"net construction capped at d={dimension_cap}; pass dimension_cap to raise"
        )
    if d == 1:
        return EpsNet(1, eps, np.array([[-1.0], [1.0]]), mode="exact")

    gen = _as_generator(rng)
    accepted: list[np.ndarray] = []
    pts = np.zeros((0, d))
    rejections = 0
    threshold = eps * eps
    while rejections < stall_budget:
        chunk = sample_unit_vectors(d, _CANDIDATE_CHUNK, gen)
        if len(accepted):
            pts = np.asarray(accepted)
            d2_old = 2.0 - 2.0 * (chunk @ pts.T)
            far_old = np.min(d2_old, axis=1) > threshold
        else:
            far_old = np.ones(_CANDIDATE_CHUNK, dtype=bool)
        fresh: list[np.ndarray] = []
        for i in range(_CANDIDATE_CHUNK):
            if rejections >= stall_budget:
                break
            cand = chunk[i]
            ok = bool(far_old[i])
            if ok and fresh:
                d2_new = 2.0 - 2.0 * (np.asarray(fresh) @ cand)
                ok = bool(np.min(d2_new) > threshold)
            if ok:
                fresh.append(cand)
                rejections = 0
            else:
                rejections += 1
        accepted.extend(fresh)
    return EpsNet(d, eps, np.asarray(accepted), mode="heuristic")


def net_norm_estimate(a: np.ndarray, left_net: EpsNet, right_net: EpsNet) -> float:
    """Upper estimate of the operator norm of A from two nets.

    `left_net` lives on the sphere of R^{rows(A)} and `right_net` on the
    sphere of R^{cols(A)}.  Returns sup over net pairs of |v^T A w| divided by
    (1-eps)(1-eps'); when both nets truly cover, the result dominates the
    exact operator norm.
    """
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidInput("expected a nonempty 2-d matrix")
    rows, cols = arr.shape
    if left_net.dimension != rows or right_net.dimension != cols:
        raise InvalidInput(
            f"net dimensions ({left_net.dimension}, {right_net.dimension}) "
            f"do not match matrix shape {arr.shape}"
        )
    sup = float(np.max(np.abs(left_net.points @ arr @ right_net.points.T)))
    return sup / ((1.0 - left_net.epsilon) * (1.0 - right_net.epsilon))
