"""Simultaneous two-projector analysis and Born-rule projective measurement.

Two orthogonal projectors decompose simultaneously into one- and
two-dimensional blocks; the squared cosines of the principal angles between
their ranges are the block overlaps ``d_k``.  They are computed here as the
squared singular values of the cross-Gram matrix of the orthonormal bases,
clamped to [0, 1].

Exact zero overlaps correspond to orthogonal sectors; they are excluded
from ``d_min`` and surfaced through ``n_zero_overlaps`` so callers can flag
them instead of silently reporting 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundViolation, DimensionMismatch
from .lattice import GroundProjector, StateVector

ZERO_OVERLAP_TOL = 1e-12
BOUND_SLACK = 1e-9
PROB_EXACT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class JordanSpectrum:
    """Principal overlaps between two projector ranges, with paired vectors.

    ``r_vectors[:, k]`` spans the k-th principal direction inside range(P),
    ``q_vectors[:, k]`` the matching direction inside range(Q), and
    ``overlaps[k] = |<r_k|q_k>|**2``, sorted descending.
    """

    overlaps: np.ndarray
    r_vectors: np.ndarray
    q_vectors: np.ndarray
    rank_p: int
    rank_q: int
    zero_tol: float = ZERO_OVERLAP_TOL

    @property
    def d_min(self) -> float:
        """Minimum overlap over blocks with nonzero overlap (0.0 if none)."""
        nonzero = self.overlaps[self.overlaps > self.zero_tol]
        return float(nonzero.min()) if nonzero.size else 0.0

    @property
    def n_zero_overlaps(self) -> int:
        """Orthogonal blocks, counting the rank mismatch as structural zeros."""
        return abs(self.rank_p - self.rank_q) + int(
            np.count_nonzero(self.overlaps <= self.zero_tol)
        )

    def d_min_occupied(self, weights: np.ndarray, weight_tol: float = 1e-12) -> float:
        """Minimum overlap over the blocks carrying initial-state weight."""
        occupied = np.asarray(weights) > weight_tol
        if not occupied.any():
            return 0.0
        return float(self.overlaps[occupied].min())


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    """Result of one binary projective measurement."""

    inside: bool
    state: StateVector
    probability: float


@dataclass(frozen=True)
class OverlapBoundReport:
    d_min: float
    kappa: float
    bound: float
    margin: float
    passed: bool


def jordan_decompose(p: GroundProjector, q: GroundProjector) -> JordanSpectrum:
    """Principal overlaps and paired principal vectors of two projectors."""
    if p.dim != q.dim:
        raise DimensionMismatch(f"ambient dimensions differ: {p.dim} vs {q.dim}")
    cross = p.basis.conj().T @ q.basis
    u, s, vh = np.linalg.svd(cross)
    k = min(p.rank, q.rank)
    overlaps = np.clip(s[:k] ** 2, 0.0, 1.0)
    r_vectors = p.basis @ u[:, :k]
    q_vectors = q.basis @ vh.conj().T[:, :k]
    return JordanSpectrum(
        overlaps=overlaps,
        r_vectors=r_vectors,
        q_vectors=q_vectors,
        rank_p=p.rank,
        rank_q=q.rank,
    )


def verify_overlap_bound(spectrum: JordanSpectrum, kappa_sym: float) -> OverlapBoundReport:
    """Check d_min >= kappa**-2 (within slack); a violation is a bug signal."""
    bound = kappa_sym**-2
    d_min = spectrum.d_min
    margin = d_min - bound
    report = OverlapBoundReport(
        d_min=d_min,
        kappa=float(kappa_sym),
        bound=bound,
        margin=margin,
        passed=margin >= -BOUND_SLACK,
    )
    if not report.passed:
        raise BoundViolation(
            f"overlap bound violated: d_min = {d_min:.6e} < kappa^-2 = {bound:.6e}"
        )
    return report


def born_measure(
    state: StateVector, projector: GroundProjector, rng: np.random.Generator
) -> MeasurementOutcome:
    """Measure {P, 1-P} on a normalized state.

    Consumes exactly one uniform draw per call (also in the deterministic
    cases, to keep replay streams aligned); outcomes with probability
    within ``PROB_EXACT_TOL`` of 0 or 1 are forced exactly.
    """
    if projector.dim != state.dim:
        raise DimensionMismatch(
            f"projector dim {projector.dim} vs state dim {state.dim}"
        )
    coeff = projector.coefficients(state.amplitudes)
    inside_component = projector.basis @ coeff
    p_inside = min(float(np.linalg.norm(coeff) ** 2), 1.0)
    draw = rng.random()
    if p_inside >= 1.0 - PROB_EXACT_TOL:
        inside = True
    elif p_inside <= PROB_EXACT_TOL:
        inside = False
    else:
        inside = draw < p_inside
    if inside:
        post = inside_component / np.sqrt(p_inside)
        probability = p_inside
    else:
        outside_component = state.amplitudes - inside_component
        post = outside_component / np.linalg.norm(outside_component)
        probability = 1.0 - p_inside
    new_state = StateVector(
        lattice=state.lattice, site_dim=state.site_dim, amplitudes=post
    )
    return MeasurementOutcome(inside=inside, state=new_state, probability=probability)


def spectrum_csv_rows(spectrum: JordanSpectrum, kappa_sym: float) -> list[dict]:
    """Per-block rows for the spectrum CSV dump: index, d_k, margin vs kappa^-2."""
    bound = kappa_sym**-2
    return [
        {"block": k, "d_k": float(d), "margin": float(d - bound)}
        for k, d in enumerate(spectrum.overlaps)
    ]
