"""Convex-valued correspondences over sampled metric spaces.

A :class:`Correspondence` materializes a set-valued map as a table: one
:class:`~lipselect.convex.ConvexBody` per sampled point, all in a common
ambient dimension.  The quantitative hypothesis the selection engine relies
on is the lower pointwise Lipschitz property: for an anchor ``b`` and a
member ``y`` of its value, every other value must meet the closed ball of
radius ``rate * d(b, a)`` around ``y``.  When it holds, projecting the
anchor value onto each body yields a selection that is anchored at ``y``
and strongly pointwise Lipschitz at ``b`` -- the constructive substitute
for an abstract selection theorem, exact for the supported body classes.

The inverse-image correspondence of a full-row-rank linear map realizes
this structure with parallel affine flats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping

import numpy as np

from .convex import AffineFlat, ConvexBody
from .errors import (
    PreconditionError,
    RankDeficiencyError,
    RateError,
    SchemaError,
    ShapeError,
)
from .metric import PointId, SampledMetricSpace

RANK_TOLERANCE = 1e-12


class LinearSurjection:
    """Full-row-rank matrix ``m x n`` (``m <= n``) viewed as a surjection.

    The smallest singular value is the rank certificate; construction fails
    if it is not safely positive.
    """

    def __init__(self, matrix, rank_tol: float = RANK_TOLERANCE):
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise ShapeError("a linear surjection is given by a 2-d matrix")
        m, n = self.matrix.shape
        if m > n:
            raise ShapeError(
                f"matrix has more rows ({m}) than columns ({n}); cannot be surjective"
            )
        u, s, vt = np.linalg.svd(self.matrix)
        self.sigma_min = float(s[-1])
        self.sigma_max = float(s[0])
        if not self.sigma_min > rank_tol:
            raise RankDeficiencyError(
                f"smallest singular value {self.sigma_min:.3e} is below {rank_tol:.0e}"
            )
        self._pinv = np.linalg.pinv(self.matrix)
        # rows m..n-1 of V^T span the kernel and are orthonormal
        self._kernel_basis = vt[m:].copy()

    @property
    def codomain_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def domain_dim(self) -> int:
        return self.matrix.shape[1]

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def minimum_norm_solution(self, y) -> np.ndarray:
        """The least-norm ``x`` with ``matrix @ x = y`` (pseudoinverse)."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.codomain_dim,):
            raise ShapeError(
                f"right-hand side must live in dimension {self.codomain_dim}"
            )
        return self._pinv @ y

    def kernel_basis(self) -> np.ndarray:
        return self._kernel_basis

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LinearSurjection":
        if not isinstance(doc, dict) or "matrix" not in doc:
            raise SchemaError("surjection document must carry a 'matrix'")
        return cls(doc["matrix"])

    def to_json_dict(self) -> dict:
        return {"matrix": [[float(x) for x in row] for row in self.matrix]}


class Correspondence:
    """Table-valued correspondence: one convex body per sampled point."""

    def __init__(self, space: SampledMetricSpace, bodies: Mapping[PointId, ConvexBody], ambient_dim: int):
        missing = [a for a in space.point_ids if a not in bodies]
        if missing:
            raise PreconditionError(f"no body for point(s) {missing[:3]!r}")
        for a in space.point_ids:
            if bodies[a].dim != ambient_dim:
                raise ShapeError(
                    f"body at {a!r} has dimension {bodies[a].dim}, expected {ambient_dim}"
                )
        self.space = space
        self.bodies: Dict[PointId, ConvexBody] = {a: bodies[a] for a in space.point_ids}
        self.ambient_dim = int(ambient_dim)

    def body(self, a) -> ConvexBody:
        self.space.index(a)  # raises IdentifierError for unknown ids
        return self.bodies[a]

    def to_json_dict(self) -> dict:
        # the space schema carries no ids, so bodies are keyed by position
        return {
            "space": self.space.to_json_dict(),
            "bodies": {
                str(i): self.bodies[a].to_json_dict()
                for i, a in enumerate(self.space.point_ids)
            },
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Correspondence":
        if not isinstance(doc, dict) or "space" not in doc or "bodies" not in doc:
            raise SchemaError("correspondence document needs 'space' and 'bodies'")
        space = SampledMetricSpace.from_json_dict(doc["space"])
        table = {}
        for a in space.point_ids:
            key = str(a)
            if key not in doc["bodies"]:
                raise SchemaError(f"bodies table is missing point {key}")
            table[a] = ConvexBody.from_json_dict(doc["bodies"][key])
        dims = {b.dim for b in table.values()}
        if len(dims) != 1:
            raise SchemaError("bodies do not share one ambient dimension")
        return cls(space, table, ambient_dim=dims.pop())


def inverse_image_correspondence(T: LinearSurjection, sample: SampledMetricSpace) -> Correspondence:
    """Correspondence ``y -> {x : T x = y}`` over a coordinate sample of the
    codomain.  Each value is the affine flat through the least-norm solution
    with the kernel of ``T`` as direction subspace."""
    if sample.coords is None:
        raise ShapeError("inverse images need a coordinate sample of the codomain")
    if sample.ambient_dim != T.codomain_dim:
        raise ShapeError(
            f"sample lives in dimension {sample.ambient_dim}, codomain is "
            f"{T.codomain_dim}"
        )
    kernel = T.kernel_basis()
    bodies = {
        a: AffineFlat(T.minimum_norm_solution(sample.coordinate(a)), kernel)
        for a in sample.point_ids
    }
    return Correspondence(sample, bodies, ambient_dim=T.domain_dim)


@dataclass(frozen=True)
class LowerPtlipCheck:
    """Outcome of a lower pointwise Lipschitz verification at one anchor.

    ``slack`` is the worst value of ``dist(phi(a), y) - rate * d(b, a)``
    over the sample, attained at ``witness``; the check passes when it does
    not exceed the tolerance.
    """

    passed: bool
    rate: float
    anchor: PointId
    witness: PointId
    slack: float


def check_lower_ptlip(
    phi: Correspondence,
    b: PointId,
    y,
    rate: float,
    tol: float = 1e-9,
) -> LowerPtlipCheck:
    """Check ``dist(phi(a), y) <= rate * d(b, a) + tol`` for every sampled a.

    ``y`` must belong to ``phi(b)`` within ``tol``.
    """
    if rate < 0:
        raise PreconditionError("rate must be nonnegative")
    y = np.asarray(y, dtype=float)
    if not phi.body(b).contains(y, tol):
        raise PreconditionError(f"anchor value is not in the body at {b!r}")
    dist_row = phi.space.distance_row(b)
    worst_slack = -np.inf
    witness = b
    for i, a in enumerate(phi.space.point_ids):
        slack = phi.body(a).distance_to(y) - rate * float(dist_row[i])
        if slack > worst_slack:
            worst_slack = slack
            witness = a
    return LowerPtlipCheck(
        passed=bool(worst_slack <= tol),
        rate=float(rate),
        anchor=b,
        witness=witness,
        slack=float(worst_slack),
    )


def local_strong_selection(
    phi: Correspondence,
    b: PointId,
    y,
    rate: float,
    tol: float = 1e-9,
) -> Dict[PointId, np.ndarray]:
    """Selection table anchored at ``(b, y)``: ``g(a) = project(phi(a), y)``.

    Because projection realizes the distance, ``||g(a) - y||`` equals
    ``dist(phi(a), y)``, so the table is strongly pointwise Lipschitz at
    ``b`` with the given rate exactly when the lower pointwise Lipschitz
    inequality holds; a violation raises :class:`RateError` with the worst
    sample point.  The anchor entry is pinned to ``y`` itself.
    """
    y = np.asarray(y, dtype=float)
    if not phi.body(b).contains(y, tol):
        raise PreconditionError(f"anchor value is not in the body at {b!r}")
    dist_row = phi.space.distance_row(b)
    table: Dict[PointId, np.ndarray] = {}
    worst_excess = -np.inf
    worst_point = b
    for i, a in enumerate(phi.space.point_ids):
        g = phi.body(a).project(y)
        table[a] = g
        excess = float(np.linalg.norm(g - y)) - rate * float(dist_row[i])
        if excess > worst_excess:
            worst_excess = excess
            worst_point = a
    if worst_excess > tol:
        raise RateError(
            f"strong pointwise bound at rate {rate} fails at {worst_point!r} "
            f"by {worst_excess:.3e}",
            witness=worst_point,
            excess=worst_excess,
        )
    table[b] = y.copy()
    return table
