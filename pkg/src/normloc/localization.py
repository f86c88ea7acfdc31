"""Ball compression and operator norm localization searches.

The compression map at radius S cuts an operator into the family of its
restrictions to closed S-balls, one per point.  Its sup-block norm is
compared against the operator norm through three quantities, all normalized
by the operator norm:

- ``sigma_sq``: largest norm of a two-sided ball restriction,
- ``sigma_col``: largest norm of a one-sided (column) ball restriction,
- ``sigma_sq`` at the widened radius S + R, where R is the propagation.

For any operator of propagation R these obey
``sigma_sq(S) <= sigma_col(S) <= sigma_sq(S + R)``, which the report
records.  The power trick upgrades a localized vector for a power of a a*
into a localized vector for a itself with a guaranteed norm ratio; geometric
reductions (fiberwise compression of amplified operators, weighted-space
flattening) round out the toolbox.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllWeightsZero,
    DegenerateWitness,
    InvalidParams,
    InvalidRadii,
    ZeroOperator,
)
from .operators import (
    DENSE_NORM_LIMIT,
    BandedOperator,
    operator_norm,
    propagation,
    random_banded,
)
from .space import FiniteMetricSpace, ball, restrict

# Slack allowed when verifying chain inequalities that hold exactly in
# arithmetic but pass through floating-point norms.
CHAIN_TOL = 1e-10


def expand_indices(points: np.ndarray, m: int) -> np.ndarray:
    """Point indices -> flat (point, slot) indices, slots contiguous."""
    points = np.asarray(points, dtype=np.int64)
    return (points[:, None] * m + np.arange(m)).ravel()


def vector_point_support(vec: np.ndarray, m: int) -> np.ndarray:
    """Points whose slot block of the vector is not exactly zero."""
    vec = np.asarray(vec)
    return np.flatnonzero((vec.reshape(-1, m) != 0).any(axis=1))


def support_diameter(space: FiniteMetricSpace, points) -> float | int:
    points = np.asarray(points, dtype=np.int64)
    if points.size <= 1:
        return 0
    val = space.dist[np.ix_(points, points)].max()
    return float(val) if space.dist.dtype.kind == "f" else int(val)


@dataclass(frozen=True, eq=False)
class BlockCompression:
    """The family of two-sided ball restrictions of one operator.

    Every block is a literal subread of the source matrix, so identities
    that compare blocks with source entries hold exactly.
    """

    source: BandedOperator
    radius: float
    balls: tuple

    @property
    def space(self) -> FiniteMetricSpace:
        return self.source.space

    def block(self, x: int) -> np.ndarray:
        idx = expand_indices(self.balls[x], self.source.m)
        return self.source.data[np.ix_(idx, idx)]

    def norm(self) -> float:
        """Sup over points of the spectral norm of the ball restriction."""
        return float(max(self.block_norms(), default=0.0))

    def block_norms(self) -> np.ndarray:
        """Spectral norm of every block, indexed by point."""
        n = self.space.n
        out = np.zeros(n)
        by_size: dict[int, list[int]] = defaultdict(list)
        for x, b in enumerate(self.balls):
            if len(b):
                by_size[len(b)].append(x)
        for xs in by_size.values():
            stack = np.stack([self.block(x) for x in xs])
            svals = np.linalg.svd(stack, compute_uv=False)
            out[xs] = svals[:, 0]
        return out

    def is_zero(self) -> bool:
        return not any(self.block(x).any() for x in range(self.space.n))


def compress(
    a: BandedOperator, radius: float, balls: tuple | None = None
) -> BlockCompression:
    """Restrict an operator to every closed ball of the given radius.

    ``balls`` can carry precomputed ball index arrays to amortize repeated
    compressions over one space.
    """
    if radius < 0:
        raise InvalidParams(f"localization radius must be >= 0, got {radius}")
    if balls is None:
        balls = tuple(ball(a.space, x, radius) for x in range(a.space.n))
    return BlockCompression(source=a, radius=radius, balls=balls)


@dataclass(frozen=True, eq=False)
class ColumnWitness:
    """A unit vector supported in one ball, with its amplification norm."""

    center: int
    points: np.ndarray
    vector: np.ndarray
    column_norm: float


def best_localized_vector(
    a: BandedOperator, radius: float, balls: tuple | None = None
) -> ColumnWitness:
    """Unit vector supported in a single ball maximizing ||a v||.

    Scans every ball through a batched singular value pass and solves the
    winner (smallest center index on ties) for its top right singular
    vector.  Raises :class:`ZeroOperator` when the operator kills every
    ball, which happens exactly when it is zero.
    """
    n, m = a.n, a.m
    if balls is None:
        balls = tuple(ball(a.space, x, radius) for x in range(n))
    norms = np.zeros(n)
    by_size: dict[int, list[int]] = defaultdict(list)
    for x, b in enumerate(balls):
        if len(b):
            by_size[len(b)].append(x)
    for xs in by_size.values():
        stack = np.stack(
            [a.data[:, expand_indices(balls[x], m)] for x in xs]
        )
        svals = np.linalg.svd(stack, compute_uv=False)
        norms[xs] = svals[:, 0]
    if norms.max() == 0.0:
        raise ZeroOperator("operator vanishes on every ball")
    center = int(np.argmax(norms))
    cols = expand_indices(balls[center], m)
    _, _, vh = np.linalg.svd(a.data[:, cols])
    local = vh[0].conj()
    vec = np.zeros(n * m, dtype=np.complex128)
    vec[cols] = local
    return ColumnWitness(
        center=center,
        points=np.asarray(balls[center], dtype=np.int64),
        vector=vec,
        column_norm=float(norms[center]),
    )


CSV_HEADER = ("space", "n", "R", "S", "sigma_sq", "sigma_col", "sigma_sq_wide")


@dataclass(frozen=True, eq=False)
class LocalizationReport:
    """Normalized localization profile of one operator at one radius."""

    space_name: str
    n: int
    m: int
    propagation: float
    loc_radius: float
    operator_norm: float
    compressed_norm: float
    column_norm: float
    wide_norm: float
    sigma_sq: float
    sigma_col: float
    sigma_sq_wide: float
    witness_center: int
    chain_ok: bool
    chain_slack: float

    def to_json(self) -> dict:
        return {
            "space": self.space_name,
            "n": self.n,
            "m": self.m,
            "propagation": self.propagation,
            "loc_radius": self.loc_radius,
            "operator_norm": self.operator_norm,
            "compressed_norm": self.compressed_norm,
            "column_norm": self.column_norm,
            "wide_norm": self.wide_norm,
            "sigma_sq": self.sigma_sq,
            "sigma_col": self.sigma_col,
            "sigma_sq_wide": self.sigma_sq_wide,
            "witness_center": self.witness_center,
            "chain_ok": self.chain_ok,
            "chain_slack": self.chain_slack,
        }

    def csv_row(self) -> tuple:
        return (
            self.space_name,
            self.n,
            self.propagation,
            self.loc_radius,
            self.sigma_sq,
            self.sigma_col,
            self.sigma_sq_wide,
        )


def localization_report(
    a: BandedOperator, radius: float, norm_method: str = "auto"
) -> LocalizationReport:
    """Compare ball compressions of an operator against its norm.

    The widened radius is the localization radius plus the measured
    propagation of the operator.  The chain inequalities are verified with
    ``CHAIN_TOL`` slack and the worst violation is recorded, not raised.
    """
    norm_a = operator_norm(a, method=norm_method)
    if norm_a == 0.0:
        raise ZeroOperator("cannot profile the zero operator")
    prop = propagation(a)
    sq = compress(a, radius).norm()
    col_witness = best_localized_vector(a, radius)
    col = col_witness.column_norm
    wide = compress(a, radius + prop).norm()
    sigma_sq = sq / norm_a
    sigma_col = col / norm_a
    sigma_wide = wide / norm_a
    slack = max(sigma_sq - sigma_col, sigma_col - sigma_wide, 0.0)
    return LocalizationReport(
        space_name=a.space.name,
        n=a.n,
        m=a.m,
        propagation=prop,
        loc_radius=radius,
        operator_norm=norm_a,
        compressed_norm=sq,
        column_norm=col,
        wide_norm=wide,
        sigma_sq=sigma_sq,
        sigma_col=sigma_col,
        sigma_sq_wide=sigma_wide,
        witness_center=col_witness.center,
        chain_ok=bool(
            sigma_sq <= sigma_col + CHAIN_TOL
            and sigma_col <= sigma_wide + CHAIN_TOL
        ),
        chain_slack=float(slack),
    )


@dataclass(frozen=True, eq=False)
class PowerWitness:
    """A localized vector extracted from a power of a a*.

    ``vector`` is the final unit witness; ``measured_ratio`` is
    ``||a vector|| / ||a||``, guaranteed to reach ``threshold`` (the power-th
    root of the localized contraction of the power).  The support provably
    sits in the ball of radius ``support_radius_bound`` around ``center``;
    ``diameter_bound_proved`` doubles that.  ``diameter_bound`` is the
    tighter target figure ``(2 power - 1) R + 2 S`` whose status is recorded
    in ``within_diameter_bound`` but never enforced here.
    """

    power: int
    stage: int
    center: int
    loc_radius: float
    propagation: float
    contraction: float
    threshold: float
    ratios: tuple
    measured_ratio: float
    vector: np.ndarray
    support_points: tuple
    support_diameter: float
    support_radius_bound: float
    diameter_bound: float
    diameter_bound_proved: float
    within_diameter_bound: bool
    within_proved_bound: bool

    def to_json(self) -> dict:
        return {
            "power": self.power,
            "stage": self.stage,
            "center": self.center,
            "loc_radius": self.loc_radius,
            "propagation": self.propagation,
            "contraction": self.contraction,
            "threshold": self.threshold,
            "ratios": list(self.ratios),
            "measured_ratio": self.measured_ratio,
            "support_points": list(self.support_points),
            "support_diameter": self.support_diameter,
            "support_radius_bound": self.support_radius_bound,
            "diameter_bound": self.diameter_bound,
            "diameter_bound_proved": self.diameter_bound_proved,
            "within_diameter_bound": self.within_diameter_bound,
            "within_proved_bound": self.within_proved_bound,
        }


def power_trick_witness(
    a: BandedOperator, radius: float, power: int, norm_method: str = "auto"
) -> PowerWitness:
    """Localized vector with norm ratio at least the power-th root.

    Normalize a, form b = a a*, and take the best ball-localized unit
    vector z for b^power with contraction c.  The ratios
    ``||b^(j+1) z|| / ||b^j z||`` multiply to c, so some stage j reaches
    c^(1/power); the witness ``a* b^j z`` then amplifies under a by at
    least that much while staying supported near the original ball.
    """
    power = int(power)
    if power < 1:
        raise InvalidParams(f"power must be >= 1, got {power}")
    norm_a = operator_norm(a, method=norm_method)
    if norm_a == 0.0:
        raise ZeroOperator("power trick needs a nonzero operator")
    unit = a * (1.0 / norm_a)
    b = unit @ unit.adjoint()
    bn = b
    for _ in range(power - 1):
        bn = bn @ b
    seed_witness = best_localized_vector(bn, radius)
    contraction = seed_witness.column_norm
    if contraction == 0.0:
        raise DegenerateWitness("every localized vector dies under the power")
    threshold = contraction ** (1.0 / power)
    stages = [seed_witness.vector]
    ratios = []
    for _ in range(power):
        nxt = b.apply(stages[-1])
        denom = float(np.linalg.norm(stages[-1]))
        if denom == 0.0:
            raise DegenerateWitness("intermediate power stage vanished")
        ratios.append(float(np.linalg.norm(nxt)) / denom)
        stages.append(nxt)
    stage = next(
        (j for j, r in enumerate(ratios) if r >= threshold - 1e-12),
        int(np.argmax(ratios)),
    )
    raw = unit.adjoint().apply(stages[stage])
    nrm = float(np.linalg.norm(raw))
    if nrm == 0.0:
        raise DegenerateWitness("witness vector vanished under the adjoint")
    witness = raw / nrm
    measured = float(np.linalg.norm(unit.apply(witness)))
    prop = propagation(a)
    points = vector_point_support(witness, a.m)
    diam = support_diameter(a.space, points)
    radius_bound = radius + (2 * stage + 1) * prop
    bound = (2 * power - 1) * prop + 2 * radius
    return PowerWitness(
        power=power,
        stage=stage,
        center=seed_witness.center,
        loc_radius=radius,
        propagation=prop,
        contraction=contraction,
        threshold=threshold,
        ratios=tuple(ratios),
        measured_ratio=measured,
        vector=witness,
        support_points=tuple(int(p) for p in points),
        support_diameter=diam,
        support_radius_bound=radius_bound,
        diameter_bound=bound,
        diameter_bound_proved=2 * radius_bound,
        within_diameter_bound=bool(diam <= bound),
        within_proved_bound=bool(diam <= 2 * radius_bound),
    )


@dataclass(frozen=True, eq=False)
class ReductionResult:
    """Fiberwise compression of a multi-slot operator to a single slot.

    ``v_fibers``/``w_fibers`` hold one unit slot-vector per point; the
    compressed operator is their two-sided contraction of the source and
    satisfies ``||compressed|| <= ||source||`` while capturing the top
    singular pair, so ``achieved_fraction`` is 1 up to rounding.
    """

    v_fibers: np.ndarray
    w_fibers: np.ndarray
    compressed: BandedOperator
    input_norm: float
    compressed_norm: float
    achieved_fraction: float


def _top_right_vector(mat: np.ndarray) -> tuple[float, np.ndarray]:
    # (largest singular value, attaining unit right vector)
    if mat.shape[0] <= DENSE_NORM_LIMIT:
        _, svals, vh = np.linalg.svd(mat)
        return float(svals[0]), vh[0].conj()
    rng = np.random.default_rng(0)
    x = rng.standard_normal(mat.shape[1]) + 1j * rng.standard_normal(mat.shape[1])
    x /= np.linalg.norm(x)
    adj = mat.conj().T
    lam_prev = -1.0
    for _ in range(10_000):
        w = mat @ x
        lam = float(np.linalg.norm(w) ** 2)
        if lam == 0.0 or abs(lam - lam_prev) <= 1e-12 * lam:
            return float(np.sqrt(lam)), x
        lam_prev = lam
        x = adj @ w
        x /= np.linalg.norm(x)
    return float(np.sqrt(lam_prev)), x


def _unit_fibers(flat: np.ndarray, n: int, m: int) -> np.ndarray:
    fibers = flat.reshape(n, m).copy()
    norms = np.linalg.norm(fibers, axis=1)
    for x in range(n):
        if norms[x] == 0.0:
            fibers[x] = 0.0
            fibers[x, 0] = 1.0
        else:
            fibers[x] /= norms[x]
    return fibers


def vector_amplification_reduction(a: BandedOperator) -> ReductionResult:
    """Compress an amplified operator to one slot without losing its norm.

    Splits the top right singular vector into per-point fibers, normalizes
    them into an isometric slot assignment V (and W from the image vector),
    and forms the scalar operator with entries w(y)* A[y, z] v(z).  Both
    ball restrictions and the global norm can only shrink under this
    compression, while the top singular pair survives by construction.
    """
    n, m = a.n, a.m
    sigma, right = _top_right_vector(a.data)
    if sigma == 0.0:
        raise ZeroOperator("cannot reduce the zero operator")
    image = a.data @ right
    v_fibers = _unit_fibers(right, n, m)
    w_fibers = _unit_fibers(image, n, m)
    blocks = a.data.reshape(n, m, n, m)
    data = np.einsum(
        "yi,yizj,zj->yz", w_fibers.conj(), blocks, v_fibers, optimize=True
    )
    compressed = BandedOperator(a.space, 1, data, a.support)
    compressed_norm = operator_norm(compressed)
    return ReductionResult(
        v_fibers=v_fibers,
        w_fibers=w_fibers,
        compressed=compressed,
        input_norm=sigma,
        compressed_norm=compressed_norm,
        achieved_fraction=compressed_norm / sigma,
    )


def weighted_reduction(a: BandedOperator, weights) -> BandedOperator:
    """Flatten an operator on a weighted space onto the plain one.

    ``weights`` are nonnegative point masses; points of zero mass carry no
    vectors and are dropped.  The returned operator acts on the restricted
    unweighted space and represents the same operator under the isometry
    that rescales coordinates by the square roots of the weights, so its
    operator norm equals the weighted-space norm of the input.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (a.n,):
        raise InvalidParams(
            f"weights shape {weights.shape} does not match n = {a.n}"
        )
    if (weights < 0).any():
        raise InvalidParams("weights must be nonnegative")
    keep = np.flatnonzero(weights > 0)
    if keep.size == 0:
        raise AllWeightsZero("no point carries positive weight")
    sub_space = restrict(a.space, keep, name=f"{a.space.name}_weighted")
    idx = expand_indices(keep, a.m)
    block = a.data[np.ix_(idx, idx)]
    scale = np.repeat(np.sqrt(weights[keep]), a.m)
    data = (scale[:, None] * block) / scale[None, :]
    support = a.support[np.ix_(keep, keep)]
    return BandedOperator(sub_space, a.m, data, support)


@dataclass(frozen=True, eq=False)
class OnlProfile:
    """Empirical localization constant of a space at one radius pair.

    ``worst_ratio`` is the smallest ``sigma_sq`` found over seeded samples,
    probes and a greedy adversarial refinement; when a certificate is
    supplied, ``certified_lower_bound`` is its guaranteed floor and
    ``consistent`` records that the search never undercut it (up to slack).
    """

    space_name: str
    n: int
    band_radius: float
    loc_radius: float
    samples: int
    seed: int
    search_budget: int
    sample_reports: tuple
    sample_seeds: tuple
    probe_reports: tuple
    worst_sample_ratio: float
    adversarial_ratio: float
    worst_ratio: float
    epsilon: float | None
    certified_lower_bound: float | None
    vacuous: bool | None
    consistent: bool | None

    def to_json(self) -> dict:
        return {
            "space": self.space_name,
            "n": self.n,
            "band_radius": self.band_radius,
            "loc_radius": self.loc_radius,
            "samples": self.samples,
            "seed": self.seed,
            "search_budget": self.search_budget,
            "sample_seeds": [int(s) for s in self.sample_seeds],
            "sample_sigma_sq": [r.sigma_sq for r in self.sample_reports],
            "probes": [
                {"name": name, **rep.to_json()}
                for name, rep in self.probe_reports
            ],
            "worst_sample_ratio": self.worst_sample_ratio,
            "adversarial_ratio": self.adversarial_ratio,
            "worst_ratio": self.worst_ratio,
            "epsilon": self.epsilon,
            "certified_lower_bound": self.certified_lower_bound,
            "vacuous": self.vacuous,
            "consistent": self.consistent,
        }


def _refine_ratio(
    space: FiniteMetricSpace,
    band_radius: float,
    loc_radius: float,
    start: BandedOperator,
    budget: int,
    rng: np.random.Generator,
) -> float:
    """Greedy coordinate descent pushing sigma_sq down from a start point."""
    balls = tuple(ball(space, x, loc_radius) for x in range(space.n))
    positions = np.argwhere(space.dist <= band_radius)
    data = start.data.copy()
    mask = space.dist <= band_radius

    def ratio_of(d: np.ndarray) -> float:
        op = BandedOperator(space, 1, d, mask)
        norm_a = operator_norm(op)
        if norm_a == 0.0:
            return np.inf
        return compress(op, loc_radius, balls).norm() / norm_a

    best = ratio_of(data)
    scale = float(np.abs(data).max()) or 1.0
    step = 0.25 * scale
    evals = 0
    while evals < budget and step > 1e-7 * scale:
        improved = False
        order = rng.permutation(len(positions))
        for p in order:
            if evals >= budget:
                break
            y, z = positions[p]
            for delta in (step, -step, 1j * step, -1j * step):
                trial = data.copy()
                trial[y, z] += delta
                cand = ratio_of(trial)
                evals += 1
                if cand < best - 1e-14:
                    best, data = cand, trial
                    improved = True
                    break
                if evals >= budget:
                    break
        if not improved:
            step /= 2
    return best


def onl_profile(
    space: FiniteMetricSpace,
    band_radius: float,
    loc_radius: float,
    samples: int = 50,
    seed: int = 0,
    search_budget: int = 200,
    certificate=None,
    probes: tuple = (),
) -> OnlProfile:
    """Search for the worst localization ratio of band-limited operators.

    Draws seeded Gaussian operators in the band, profiles each, then runs a
    greedy adversarial refinement from the worst few starts.  ``probes``
    are (name, operator) pairs profiled alongside.  A vector certificate
    adds the guaranteed lower bound from its Schur-multiplier argument.
    Requires 0 < band radius <= localization radius.
    """
    if not 0 < band_radius <= loc_radius:
        raise InvalidRadii(
            f"need 0 < band radius <= localization radius, got "
            f"{band_radius} and {loc_radius}"
        )
    if samples < 1:
        raise InvalidParams("need at least one sample")
    rng = np.random.default_rng(seed)
    sample_seeds = rng.integers(0, 2**63 - 1, size=samples)
    reports = []
    ops = []
    for s in sample_seeds:
        op = random_banded(space, band_radius, int(s))
        ops.append(op)
        reports.append(localization_report(op, loc_radius))
    ratios = np.array([r.sigma_sq for r in reports])
    worst_sample = float(ratios.min())
    adversarial = worst_sample
    if search_budget > 0:
        starts = np.argsort(ratios)[: min(3, samples)]
        share = max(1, search_budget // len(starts))
        for i in starts:
            adversarial = min(
                adversarial,
                _refine_ratio(
                    space, band_radius, loc_radius, ops[int(i)], share, rng
                ),
            )
    probe_reports = tuple(
        (name, localization_report(op, loc_radius)) for name, op in probes
    )
    worst = min(
        [adversarial] + [rep.sigma_sq for _, rep in probe_reports]
    )
    epsilon = lower = vacuous = consistent = None
    if certificate is not None:
        if certificate.radius != loc_radius:
            raise InvalidParams(
                f"certificate radius {certificate.radius} does not match "
                f"localization radius {loc_radius}"
            )
        from .duality import a_implies_onl_bound

        bound = a_implies_onl_bound(certificate, band_radius)
        epsilon = bound.epsilon
        vacuous = bound.vacuous
        lower = max(0.0, 1.0 - bound.epsilon)
        consistent = bool(lower <= worst + 1e-9)
    return OnlProfile(
        space_name=space.name,
        n=space.n,
        band_radius=band_radius,
        loc_radius=loc_radius,
        samples=samples,
        seed=seed,
        search_budget=search_budget,
        sample_reports=tuple(reports),
        sample_seeds=tuple(int(s) for s in sample_seeds),
        probe_reports=probe_reports,
        worst_sample_ratio=worst_sample,
        adversarial_ratio=adversarial,
        worst_ratio=worst,
        epsilon=epsilon,
        certified_lower_bound=lower,
        vacuous=vacuous,
        consistent=consistent,
    )
