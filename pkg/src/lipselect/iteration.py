"""The inductive selection-improvement engine.

Starting from any selection ``f_0`` of a convex-valued correspondence, each
round ``n`` adjusts the previous selection near the new members of a nested
maximal separation hierarchy so that the result is anchored-Lipschitz at
those members, while moving nowhere by more than ``2^-n * epsilon``:

1. ``B_n`` is the greedy maximal ``2^-(n-1)``-separation containing
   ``B_{n-1}``.
2. For each new anchor ``b``, an anchored selection ``g_b`` is built by
   projecting ``f_{n-1}(b)`` onto every value (strongly pointwise
   ``alpha``-Lipschitz at ``b``).
3. A radius ``delta_b < min(2^-(n+1), r_b)`` is found by halving so that
   ``f_{n-1}`` and ``g_b`` differ by less than ``2^-n * epsilon`` on the
   open ``2 delta_b``-ball.
4. ``f_n`` blends ``f_{n-1}`` with ``g_b`` through a trapezoid bump that is
   identically 1 on the closed ``delta_b``-ball and 0 outside the open
   ``2 delta_b``-ball.  The separation spacing makes the supports pairwise
   disjoint, so each point mixes with at most one anchor and the blend is a
   convex combination of two members of the same value.

The per-round displacement bound makes the sequence uniformly Cauchy with
geometric tail ``2^-N * epsilon``; equality of consecutive tables on
``2^-n``-balls around earlier anchors is exact by construction and is
checked bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from .correspondence import Correspondence, local_strong_selection
from .errors import (
    DegenerateRadiusError,
    InvariantViolationError,
    ParameterError,
    PreconditionError,
    RateError,
)
from .metric import (
    PointId,
    SampledMetricSpace,
    SeparationHierarchy,
    build_separation_hierarchy,
)

# strict "< 2^-n eps" acceptance, kept provable under roundoff
STRICTNESS_MARGIN = 1e-12


@dataclass
class Selection:
    """A table-valued map: one vector of the target space per sampled point."""

    values: Dict[PointId, np.ndarray]
    round_index: int = 0

    def __getitem__(self, a) -> np.ndarray:
        return self.values[a]

    def vector(self, a) -> np.ndarray:
        return self.values[a]

    def sup_distance(self, other: Union["Selection", Mapping]) -> float:
        other_values = other.values if isinstance(other, Selection) else other
        return max(
            float(np.linalg.norm(v - other_values[a])) for a, v in self.values.items()
        )

    def to_json_dict(self) -> dict:
        return {
            "round": self.round_index,
            "values": {str(a): [float(x) for x in v] for a, v in self.values.items()},
        }


@dataclass
class RoundRecord:
    """Evidence retained for one adjustment round."""

    n: int
    members: Tuple[PointId, ...]
    new_points: Tuple[PointId, ...]
    deltas: Dict[PointId, float]
    local_selections: Dict[PointId, Selection]
    sup_change: float = 0.0


@dataclass
class IterationConfig:
    """Numeric parameters of the engine.

    ``epsilon`` defaults to ``(beta - alpha) / 3``, the largest value for
    which the final pointwise rate stays below ``beta``; callers may pass a
    smaller one but never a larger one.  ``locality_radii`` bounds the
    anchored-adjustment radius per anchor (default: unbounded).
    """

    alpha: float
    beta: float
    epsilon: Optional[float] = None
    rounds: int = 4
    delta_min: float = 1e-9
    tol: float = 1e-9
    locality_radii: Union[float, Mapping[PointId, float]] = math.inf

    def __post_init__(self):
        if self.alpha < 0:
            raise ParameterError("alpha must be nonnegative")
        if not self.beta > self.alpha:
            raise ParameterError("beta must exceed alpha")
        cap = (self.beta - self.alpha) / 3.0
        if self.epsilon is None:
            self.epsilon = cap
        if not 0.0 < self.epsilon <= cap:
            raise ParameterError(
                f"epsilon must lie in (0, (beta - alpha)/3 = {cap}]"
            )
        if self.rounds < 1:
            raise ParameterError("rounds must be at least 1")
        if not self.delta_min > 0:
            raise ParameterError("delta_min must be positive")
        if self.tol < 0:
            raise ParameterError("tol must be nonnegative")

    def locality_radius(self, b) -> float:
        if isinstance(self.locality_radii, Mapping):
            return float(self.locality_radii.get(b, math.inf))
        return float(self.locality_radii)

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "rounds": self.rounds,
            "delta_min": self.delta_min,
            "tol": self.tol,
        }


@dataclass
class SelectionSequence:
    """The full output of a run: ``f_0 .. f_N`` plus per-round evidence."""

    correspondence: Correspondence
    config: IterationConfig
    hierarchy: SeparationHierarchy
    selections: List[Selection]
    rounds: List[RoundRecord]

    @property
    def space(self) -> SampledMetricSpace:
        return self.correspondence.space

    @property
    def final(self) -> Selection:
        return self.selections[-1]

    def entry_round(self, b) -> int:
        """First round whose separation contains ``b``."""
        for record in self.rounds:
            if b in record.members:
                return record.n
        raise PreconditionError(f"{b!r} never entered the separation hierarchy")

    def entry_delta(self, b) -> float:
        """Adjustment radius recorded when ``b`` entered the hierarchy."""
        record = self.rounds[self.entry_round(b) - 1]
        return record.deltas[b]


def bump_weight(b, delta: float, a, space: SampledMetricSpace) -> float:
    """Trapezoid bump ``clamp((2 delta - d(a, b)) / delta, 0, 1)``.

    Equals 1 on the closed ``delta``-ball, 0 outside the open ``2 delta``-
    ball, and is affine in the distance in between.
    """
    if delta <= 0:
        raise PreconditionError("bump radius must be positive")
    w = (2.0 * delta - space.distance(b, a)) / delta
    return min(1.0, max(0.0, w))


def compute_delta(
    f_prev: Union[Selection, Mapping],
    g_b: Union[Selection, Mapping],
    b,
    n: int,
    epsilon: float,
    r_b: float,
    space: SampledMetricSpace,
    delta_min: float = 1e-9,
    tol: float = 1e-9,
) -> float:
    """First radius in the halving schedule that confines the adjustment.

    Starting at ``min(2^-(n+1), r_b) / 2`` and halving, accept the first
    ``delta`` with ``max ||f_prev - g_b|| < 2^-n * epsilon`` over the open
    ``2 delta``-ball around ``b`` (strictness realized by a fixed margin).
    Radii below ``delta_min`` abort: the sample is too coarse or ``g_b``
    strayed too far from ``f_prev``.
    """
    f_values = f_prev.values if isinstance(f_prev, Selection) else f_prev
    g_values = g_b.values if isinstance(g_b, Selection) else g_b
    anchor_gap = float(np.linalg.norm(np.asarray(f_values[b]) - np.asarray(g_values[b])))
    if anchor_gap > tol:
        raise PreconditionError(
            f"anchored selection must coincide with the previous selection at "
            f"{b!r} (gap {anchor_gap:.3e})"
        )
    diffs = np.array(
        [np.linalg.norm(f_values[a] - g_values[a]) for a in space.point_ids]
    )
    dist_row = space.distance_row(b)
    threshold = 2.0 ** (-n) * epsilon - STRICTNESS_MARGIN
    delta = min(2.0 ** (-(n + 1)), r_b) / 2.0
    while delta >= delta_min:
        sup = float(diffs[dist_row < 2.0 * delta].max())
        if sup <= threshold:
            return delta
        delta /= 2.0
    raise DegenerateRadiusError(
        f"no admissible radius above {delta_min} at anchor {b!r} (round {n})"
    )


def blend_round(
    f_prev: Selection,
    record: RoundRecord,
    space: SampledMetricSpace,
) -> Selection:
    """One blending step: mix ``f_prev`` with the anchored selections.

    Points inside the closed ``delta_b``-ball of a new anchor take the
    anchored value exactly; points outside every open ``2 delta_b``-ball
    keep the previous value (same array, so later equality checks are
    bitwise); in between, a convex combination.  A point covered by two
    supports violates the disjointness invariant and raises.
    """
    new_values: Dict[PointId, np.ndarray] = {}
    covers = {
        b: space.distance_row(b) for b in record.new_points
    }
    for i, a in enumerate(space.point_ids):
        owners = [b for b in record.new_points if covers[b][i] < 2.0 * record.deltas[b]]
        if len(owners) > 1:
            raise InvariantViolationError(
                f"adjustment supports overlap at {a!r}: anchors {owners!r}"
            )
        if not owners:
            new_values[a] = f_prev.values[a]
            continue
        b = owners[0]
        w = bump_weight(b, record.deltas[b], a, space)
        g = record.local_selections[b].values[a]
        if np.array_equal(g, f_prev.values[a]):
            # mixing equal endpoints is the identity; keep the table entry
            new_values[a] = f_prev.values[a]
        elif w >= 1.0:
            new_values[a] = g.copy()
        else:
            new_values[a] = (1.0 - w) * f_prev.values[a] + w * g
    return Selection(values=new_values, round_index=record.n)


def run_iteration(
    phi: Correspondence,
    f0: Union[Selection, Mapping],
    config: IterationConfig,
) -> SelectionSequence:
    """Execute all rounds and retain the evidence.

    ``f0`` must be a selection of ``phi`` at the configured tolerance.  Per
    round, every new separation member gets an anchored selection at rate
    ``alpha`` (failures name the anchor and round), a confinement radius,
    and the blend; the recorded ``sup_change`` is the realized displacement.
    """
    space = phi.space
    if not isinstance(f0, Selection):
        f0 = Selection(values={a: np.asarray(f0[a], dtype=float) for a in space.point_ids}, round_index=0)
    missing = [a for a in space.point_ids if a not in f0.values]
    if missing:
        raise PreconditionError(f"f0 is not defined at {missing[:3]!r}")
    for a in space.point_ids:
        if not phi.body(a).contains(f0.values[a], max(config.tol, 1e-9)):
            raise PreconditionError(f"f0 is not a selection of the correspondence at {a!r}")

    hierarchy = build_separation_hierarchy(space, config.rounds)
    selections = [f0]
    rounds: List[RoundRecord] = []
    prev_members: Tuple[PointId, ...] = ()
    f_prev = f0
    for sep_round in hierarchy.rounds:
        n = sep_round.n
        new_points = tuple(b for b in sep_round.members if b not in prev_members)
        deltas: Dict[PointId, float] = {}
        locals_: Dict[PointId, Selection] = {}
        for b in new_points:
            try:
                g_table = local_strong_selection(
                    phi, b, f_prev.values[b], rate=config.alpha, tol=config.tol
                )
                deltas[b] = compute_delta(
                    f_prev,
                    g_table,
                    b,
                    n,
                    config.epsilon,
                    config.locality_radius(b),
                    space,
                    delta_min=config.delta_min,
                    tol=config.tol,
                )
            except DegenerateRadiusError as exc:
                raise DegenerateRadiusError(f"round {n}, anchor {b!r}: {exc}") from exc
            except RateError as exc:
                raise RateError(
                    f"round {n}, anchor {b!r}: {exc}",
                    witness=exc.witness,
                    excess=exc.excess,
                ) from exc
            locals_[b] = Selection(values=g_table, round_index=n)
        record = RoundRecord(
            n=n,
            members=sep_round.members,
            new_points=new_points,
            deltas=deltas,
            local_selections=locals_,
        )
        f_next = blend_round(f_prev, record, space)
        record.sup_change = f_next.sup_distance(f_prev)
        rounds.append(record)
        selections.append(f_next)
        prev_members = sep_round.members
        f_prev = f_next
    return SelectionSequence(
        correspondence=phi,
        config=config,
        hierarchy=hierarchy,
        selections=selections,
        rounds=rounds,
    )


@dataclass(frozen=True)
class LimitSelection:
    """Final selection together with its certified geometric tail bound."""

    selection: Selection
    tail_bound: float


def limit_selection(seq: SelectionSequence, config: Optional[IterationConfig] = None) -> LimitSelection:
    """Treat ``f_N`` as the limit: continuing the construction could move it
    by at most ``sum_{j>N} 2^-j eps = 2^-N eps``."""
    if not seq.rounds:
        raise PreconditionError("sequence has no completed rounds")
    cfg = config or seq.config
    n_rounds = seq.rounds[-1].n
    return LimitSelection(
        selection=seq.final,
        tail_bound=2.0 ** (-n_rounds) * cfg.epsilon,
    )


@dataclass
class CheckOutcome:
    passed: bool
    worst: float
    detail: str = ""


@dataclass
class RoundPropertiesReport:
    n: int
    checks: Dict[str, CheckOutcome] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())


def verify_round_properties(
    seq: SelectionSequence,
    n: int,
    membership_tol: float = 1e-8,
    bound_slack: float = 1e-9,
) -> RoundPropertiesReport:
    """Re-check the guarantees of round ``n`` against the stored tables.

    * selection membership of ``f_n`` at every point,
    * the ``2^-n eps`` sup-displacement bound,
    * the anchored ``alpha`` bound on each new anchor's closed delta-ball,
    * bitwise coincidence of ``f_n, ..., f_k`` on the open ``2^-n``-ball
      around every anchor of an earlier round ``k``.

    Failures are reported, never thrown.
    """
    if not 1 <= n <= len(seq.rounds):
        raise PreconditionError(f"round {n} was never executed")
    record = seq.rounds[n - 1]
    space = seq.space
    phi = seq.correspondence
    f_n = seq.selections[n]
    f_prev = seq.selections[n - 1]
    report = RoundPropertiesReport(n=n)

    worst_member = 0.0
    worst_point = None
    for a in space.point_ids:
        dist = phi.body(a).distance_to(f_n.values[a])
        if dist > worst_member:
            worst_member, worst_point = dist, a
    report.checks["selection_membership"] = CheckOutcome(
        passed=worst_member <= membership_tol,
        worst=worst_member,
        detail=f"max body distance {worst_member:.3e} at {worst_point!r}",
    )

    sup_change = f_n.sup_distance(f_prev)
    bound = 2.0 ** (-n) * seq.config.epsilon
    report.checks["sup_change_bound"] = CheckOutcome(
        passed=sup_change <= bound + bound_slack,
        worst=sup_change,
        detail=f"sup displacement {sup_change:.3e} vs bound {bound:.3e}",
    )

    worst_excess = 0.0
    worst_anchor = None
    for b in record.new_points:
        row = space.distance_row(b)
        fb = f_n.values[b]
        for i, a in enumerate(space.point_ids):
            if row[i] <= record.deltas[b]:
                excess = float(np.linalg.norm(fb - f_n.values[a])) - seq.config.alpha * float(row[i])
                if excess > worst_excess:
                    worst_excess, worst_anchor = excess, b
    report.checks["anchored_strong_bound"] = CheckOutcome(
        passed=worst_excess <= bound_slack,
        worst=worst_excess,
        detail=f"worst excess {worst_excess:.3e} (anchor {worst_anchor!r})",
    )

    mismatches = 0
    radius = 2.0 ** (-n)
    for k in range(1, n):
        for b in seq.rounds[k - 1].members:
            row = space.distance_row(b)
            for i, a in enumerate(space.point_ids):
                if row[i] < radius:
                    reference = f_n.values[a]
                    for j in range(k, n):
                        if not np.array_equal(seq.selections[j].values[a], reference):
                            mismatches += 1
                            break
    report.checks["earlier_anchor_coincidence"] = CheckOutcome(
        passed=mismatches == 0,
        worst=float(mismatches),
        detail=f"{mismatches} table entries differ on protected balls",
    )
    return report


@dataclass
class SequenceReport:
    round_reports: List[RoundPropertiesReport]
    checks: Dict[str, CheckOutcome]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.round_reports) and all(
            c.passed for c in self.checks.values()
        )


def verify_sequence(
    seq: SelectionSequence,
    membership_tol: float = 1e-8,
    bound_slack: float = 1e-9,
) -> SequenceReport:
    """Whole-run audit: per-round properties plus the cross-round invariants
    (selection closure including ``f_0``, telescoped Cauchy bounds, anchors
    frozen after entry, disjoint supports)."""
    space = seq.space
    phi = seq.correspondence
    round_reports = [verify_round_properties(seq, r.n, membership_tol, bound_slack) for r in seq.rounds]
    checks: Dict[str, CheckOutcome] = {}

    worst = 0.0
    for sel in seq.selections:
        for a in space.point_ids:
            worst = max(worst, phi.body(a).distance_to(sel.values[a]))
    checks["selection_closure"] = CheckOutcome(
        passed=worst <= membership_tol,
        worst=worst,
        detail=f"max body distance over all rounds {worst:.3e}",
    )

    worst_gap = 0.0
    for n in range(len(seq.selections)):
        for m in range(n + 1, len(seq.selections)):
            direct = seq.selections[m].sup_distance(seq.selections[n])
            budget = sum(seq.rounds[j - 1].sup_change for j in range(n + 1, m + 1))
            worst_gap = max(worst_gap, direct - budget)
    checks["telescoping"] = CheckOutcome(
        passed=worst_gap <= 1e-12,
        worst=worst_gap,
        detail=f"max excess of direct sup over telescoped sum {worst_gap:.3e}",
    )

    frozen_violations = 0
    for record in seq.rounds:
        for b in record.new_points:
            entry_value = seq.selections[record.n].values[b]
            for m in range(record.n + 1, len(seq.selections)):
                if not np.array_equal(seq.selections[m].values[b], entry_value):
                    frozen_violations += 1
    checks["eventually_constant_anchors"] = CheckOutcome(
        passed=frozen_violations == 0,
        worst=float(frozen_violations),
        detail=f"{frozen_violations} anchor values moved after entry",
    )

    min_margin = math.inf
    for record in seq.rounds:
        pts = record.new_points
        for i, b in enumerate(pts):
            for c in pts[i + 1 :]:
                margin = space.distance(b, c) - 2.0 * (record.deltas[b] + record.deltas[c])
                min_margin = min(min_margin, margin)
    checks["support_disjointness"] = CheckOutcome(
        passed=(min_margin is math.inf) or min_margin >= 0.0,
        worst=0.0 if min_margin is math.inf else float(min_margin),
        detail="min separation margin between adjustment supports",
    )
    return SequenceReport(round_reports=round_reports, checks=checks)
