"""Vertex-by-vertex measure/rewind preparation of deformed symmetric PEPS.

Starting from the exactly contracted symmetric (undeformed) state, the
protocol grows one vertex per step: it measures the next ground-space
projector, and on failure alternates rewind measurements of the previous
projector with fresh forward attempts, up to ``m`` forward attempts per
step.  The per-step failure probability after ``m`` attempts obeys the
exact closed form

    p_fail(m) = sum_k |c_k|^2 (1 - d_k) (1 - 2 d_k (1 - d_k))**m

over the principal-overlap blocks occupied by the entering state, and is
bounded by ``1 / (2 d_min m)``.  Choosing ``m = ceil(N kappa^2 / 2 eps)``
makes the full run succeed with probability at least ``1 - eps``.

Monte Carlo trials use independent counter-based random streams derived
from the configured seed, so traces replay bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    BoundViolation,
    InvalidEpsilon,
    StateOutsideProjector,
    StepExhausted,
    UnnormalizedWeights,
)
from .groups import SemiRegularRep
from .lattice import (
    BoundaryTwist,
    GroundProjector,
    StateVector,
    TorusLattice,
    contract_isometric_state,
    ground_projector,
    partial_peps_state,
    projector_from_columns,
)
from .spectral import JordanSpectrum, born_measure, jordan_decompose
from .tensors import Deformation, SiteTensor, build_site_tensor, condition_number_on_symmetric

WEIGHT_SUM_TOL = 1e-10
SUCCESS_FIDELITY_TOL = 1e-8
OCCUPATION_TOL = 1e-12
CONTAINMENT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    """Everything needed to replay a protocol run."""

    lattice: TorusLattice
    rep: SemiRegularRep
    deformations: tuple[Deformation, ...]
    epsilon: float
    m_policy: int | str = "auto"  # explicit per-step cap, or the repetition rule
    seed: int = 0
    check_invariants: bool = False


@dataclass(frozen=True)
class StepRecord:
    """One grown vertex: outcome bits in measurement order.

    ``bits[0]`` is the first forward attempt; afterwards bits alternate
    (rewind, forward).  1 means the measured projector fired.
    """

    step: int
    bits: tuple[int, ...]
    forward_count: int
    success: bool


@dataclass(frozen=True, eq=False)
class ProtocolTrace:
    seed: int
    trial: int
    m: int
    steps: tuple[StepRecord, ...]
    total_measurements: int
    success: bool
    failed_step: int | None
    final_fidelity: float
    final_block_weights: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class FailureCurve:
    """Exact per-step failure law for one entering state."""

    overlaps: np.ndarray
    weights: np.ndarray
    m_values: np.ndarray
    pfail: np.ndarray
    bound: np.ndarray
    d_min: float


@dataclass(eq=False)
class PreparedProtocol:
    """Projectors, spectra and the initial state shared by all trials."""

    config: ProtocolConfig
    tensor: SiteTensor
    projectors: list[GroundProjector]
    spectra: list[JordanSpectrum]
    initial_state: StateVector
    m: int
    kappa_max: float
    kappas: list[float] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return self.config.lattice.n_vertices

    def step_d_min(self, step_index: int) -> float:
        return self.spectra[step_index].d_min


def estimate_repetitions(n_vertices: int, kappa: float, epsilon: float) -> int:
    """Per-step forward-measurement budget: ceil(N kappa^2 / (2 eps))."""
    if not 0.0 < epsilon < 1.0:
        raise InvalidEpsilon(f"epsilon must be in (0, 1), got {epsilon}")
    if n_vertices < 1:
        raise ValueError("vertex count must be >= 1")
    if kappa < 1.0:
        raise ValueError("condition number must be >= 1")
    raw = n_vertices * kappa**2 / (2.0 * epsilon)
    # absorb float roundoff so exact integer targets are not bumped up
    return max(1, math.ceil(raw - 1e-12 * max(raw, 1.0)))


def analytic_pfail(overlaps: Sequence[float], weights: Sequence[float], m: int) -> float:
    """Exact probability that m forward attempts of one step all fail."""
    d = np.asarray(overlaps, dtype=float)
    w = np.asarray(weights, dtype=float)
    if d.shape != w.shape:
        raise ValueError("overlaps and weights must have matching shapes")
    if np.any(d < -1e-12) or np.any(d > 1.0 + 1e-12):
        raise ValueError(f"overlaps must lie in [0, 1], got range [{d.min()}, {d.max()}]")
    total = float(w.sum())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise UnnormalizedWeights(f"weights sum to {total!r}, expected 1")
    d = np.clip(d, 0.0, 1.0)
    return float(np.sum(w * (1.0 - d) * (1.0 - 2.0 * d * (1.0 - d)) ** m))


def pfail_bound(d_min: float, m: int) -> float:
    """Lemma-style upper bound 1 / (2 d_min m); infinite when d_min == 0."""
    if d_min <= 0.0:
        return math.inf
    return 1.0 / (2.0 * d_min * m)


def measurement_stream(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent counter-based stream for one trial (replayable)."""
    return np.random.Generator(np.random.Philox(seed).jumped(trial))


# ---------------------------------------------------------------------------
# preparation (shared across trials)


def prepare_protocol(config: ProtocolConfig) -> PreparedProtocol:
    """Validate the configuration and precompute projectors and spectra."""
    if not 0.0 < config.epsilon < 1.0:
        raise InvalidEpsilon(f"epsilon must be in (0, 1), got {config.epsilon}")
    lattice = config.lattice
    n = lattice.n_vertices
    if len(config.deformations) != n:
        raise ValueError(
            f"need one deformation per vertex ({n}), got {len(config.deformations)}"
        )
    tensor = build_site_tensor(config.rep)
    kappas = [
        condition_number_on_symmetric(deformation, tensor)
        for deformation in config.deformations
    ]
    kappa_max = max(kappas)

    # contract each twisted symmetric state once; every projector reuses them
    twisted = {
        (g, h): contract_isometric_state(
            lattice, config.rep, BoundaryTwist(g=g, h=h), tensor=tensor
        )
        for (g, h) in config.rep.group.commuting_pairs()
    }
    projectors = [
        ground_projector(
            lattice, config.rep, config.deformations, t,
            tensor=tensor, twisted_states=twisted,
        )
        for t in range(n + 1)
    ]
    spectra = [
        jordan_decompose(projectors[t], projectors[t + 1]) for t in range(n)
    ]

    if config.m_policy == "auto":
        m = estimate_repetitions(n, kappa_max, config.epsilon)
    else:
        m = int(config.m_policy)
        if m < 1:
            raise ValueError(f"per-step cap must be >= 1, got {m}")

    e = config.rep.group.identity
    initial = twisted[(e, e)]
    return PreparedProtocol(
        config=config,
        tensor=tensor,
        projectors=projectors,
        spectra=spectra,
        initial_state=initial,
        m=m,
        kappa_max=kappa_max,
        kappas=kappas,
    )


# ---------------------------------------------------------------------------
# running


def _block_monitor(spectrum: JordanSpectrum, entering: StateVector):
    """Invariant checks used in traced runs.

    The measurement sequence can never leave the two-dimensional blocks
    occupied by the entering state, and whenever the state is back inside
    the previous ground space its forward-success probability is at least
    the minimum occupied overlap.
    """
    weights = np.abs(spectrum.r_vectors.conj().T @ entering.amplitudes) ** 2
    occupied = weights > OCCUPATION_TOL
    block_vectors = np.concatenate(
        [spectrum.r_vectors[:, occupied], spectrum.q_vectors[:, occupied]], axis=1
    )
    q = projector_from_columns(block_vectors).basis  # rank-revealing: d_k = 1 blocks are 1-dim
    d_min_occ = spectrum.d_min_occupied(weights)

    def check(state: StateVector, forward_probability: float | None) -> None:
        outside = state.amplitudes - q @ (q.conj().T @ state.amplitudes)
        leak = float(np.linalg.norm(outside))
        if leak > CONTAINMENT_TOL:
            raise BoundViolation(
                f"state left its principal blocks (leak {leak:.3e})"
            )
        if forward_probability is not None and forward_probability < d_min_occ - 1e-9:
            raise BoundViolation(
                f"forward probability {forward_probability:.6e} fell below "
                f"occupied d_min {d_min_occ:.6e}"
            )

    return check


def run_step(
    state: StateVector,
    previous: GroundProjector,
    target: GroundProjector,
    m: int,
    rng: np.random.Generator,
    monitor=None,
) -> tuple[bool, list[int], int, StateVector, int]:
    """One growth step: forward attempt, then rewind/forward pairs.

    Returns (success, outcome bits, forward attempts used, final state,
    total measurements).
    """
    bits: list[int] = []
    measurements = 0
    outcome = born_measure(state, target, rng)
    measurements += 1
    bits.append(int(outcome.inside))
    state = outcome.state
    if monitor is not None:
        monitor(state, None)
    forward_used = 1
    while not outcome.inside and forward_used < m:
        rewind = born_measure(state, previous, rng)
        measurements += 1
        bits.append(int(rewind.inside))
        state = rewind.state
        if monitor is not None:
            forward_prob = target.weight(state) if rewind.inside else None
            monitor(state, forward_prob)
        outcome = born_measure(state, target, rng)
        measurements += 1
        bits.append(int(outcome.inside))
        state = outcome.state
        if monitor is not None:
            monitor(state, None)
        forward_used += 1
    return outcome.inside, bits, forward_used, state, measurements


def run_protocol(
    config_or_prepared: ProtocolConfig | PreparedProtocol,
    trial: int = 0,
    strict: bool = False,
) -> ProtocolTrace:
    """Run one full preparation trial.

    Per-step exhaustion marks the trace as failed (and raises
    :class:`StepExhausted` when ``strict``); successful runs are verified
    to end inside the final ground space.
    """
    prepared = (
        config_or_prepared
        if isinstance(config_or_prepared, PreparedProtocol)
        else prepare_protocol(config_or_prepared)
    )
    config = prepared.config
    rng = measurement_stream(config.seed, trial)
    state = prepared.initial_state
    steps: list[StepRecord] = []
    total = 0
    failed_step: int | None = None
    for t in range(prepared.n_steps):
        monitor = None
        if config.check_invariants:
            monitor = _block_monitor(prepared.spectra[t], state)
        success, bits, used, state, measurements = run_step(
            state, prepared.projectors[t], prepared.projectors[t + 1], prepared.m, rng,
            monitor=monitor,
        )
        total += measurements
        steps.append(
            StepRecord(step=t + 1, bits=tuple(bits), forward_count=used, success=success)
        )
        if not success:
            failed_step = t + 1
            if strict:
                raise StepExhausted(t + 1)
            break
    final_projector = prepared.projectors[prepared.n_steps]
    fidelity = final_projector.weight(state)
    success = failed_step is None
    if success and fidelity < 1.0 - SUCCESS_FIDELITY_TOL:
        raise BoundViolation(
            f"successful run ended outside the target space (fidelity {fidelity!r})"
        )
    block_weights = tuple(
        float(x) for x in np.abs(final_projector.coefficients(state.amplitudes)) ** 2
    )
    return ProtocolTrace(
        seed=config.seed,
        trial=trial,
        m=prepared.m,
        steps=tuple(steps),
        total_measurements=total,
        success=success,
        failed_step=failed_step,
        final_fidelity=float(fidelity),
        final_block_weights=block_weights,
    )


def run_many(
    config: ProtocolConfig, trials: int, prepared: PreparedProtocol | None = None
) -> list[ProtocolTrace]:
    if prepared is None:
        prepared = prepare_protocol(config)
    return [run_protocol(prepared, trial=k) for k in range(trials)]


# ---------------------------------------------------------------------------
# failure statistics


def failure_curve(
    lattice: TorusLattice,
    rep: SemiRegularRep,
    deformations: Sequence[Deformation],
    t: int,
    initial_state: StateVector,
    m_max: int = 100,
    tensor: SiteTensor | None = None,
    twisted_states=None,
) -> FailureCurve:
    """Exact failure law for growing vertex ``t+1`` from a given state.

    The state must lie in the step-``t`` ground space; its decomposition
    over the principal directions supplies the block weights.
    """
    if tensor is None:
        tensor = build_site_tensor(rep)
    p_t = ground_projector(lattice, rep, deformations, t, tensor=tensor,
                           twisted_states=twisted_states)
    p_next = ground_projector(lattice, rep, deformations, t + 1, tensor=tensor,
                              twisted_states=twisted_states)
    inside = p_t.weight(initial_state)
    if inside < 1.0 - 1e-10:
        raise StateOutsideProjector(
            f"initial state has weight {inside!r} in the step-{t} ground space"
        )
    spectrum = jordan_decompose(p_t, p_next)
    return curve_from_spectrum(spectrum, initial_state, m_max)


def curve_from_spectrum(
    spectrum: JordanSpectrum, initial_state: StateVector, m_max: int = 100
) -> FailureCurve:
    weights = np.abs(spectrum.r_vectors.conj().T @ initial_state.amplitudes) ** 2
    occupied = weights > OCCUPATION_TOL
    if np.any(spectrum.overlaps[occupied] <= spectrum.zero_tol):
        # cannot happen for invertible deformations started from the
        # symmetric state; an orthogonal occupied sector is a bug signal
        raise BoundViolation("occupied principal block with zero overlap")
    d_min = spectrum.d_min_occupied(weights, OCCUPATION_TOL)
    m_values = np.arange(1, m_max + 1)
    pfail = np.array(
        [analytic_pfail(spectrum.overlaps, weights, int(m)) for m in m_values]
    )
    bound = np.array([pfail_bound(d_min, int(m)) for m in m_values])
    return FailureCurve(
        overlaps=spectrum.overlaps.copy(),
        weights=weights,
        m_values=m_values,
        pfail=pfail,
        bound=bound,
        d_min=d_min,
    )


def empirical_step_failures(
    prepared: PreparedProtocol,
    step_index: int,
    m: int,
    trials: int,
    entering_state: StateVector | None = None,
    stream_offset: int = 1_000_000,
) -> int:
    """Monte Carlo failures of one isolated step from a fixed entering state.

    The default entering state is the canonical (untwisted) partial PEPS
    with ``step_index`` deformations applied, which is what the analytic
    curve describes.  Returns the number of failed chains out of ``trials``.
    """
    if entering_state is None:
        entering_state = canonical_entering_state(prepared, step_index)
    failures = 0
    for k in range(trials):
        rng = measurement_stream(prepared.config.seed, stream_offset + k)
        success, _, _, _, _ = run_step(
            entering_state,
            prepared.projectors[step_index],
            prepared.projectors[step_index + 1],
            m,
            rng,
        )
        failures += 0 if success else 1
    return failures


def canonical_entering_state(prepared: PreparedProtocol, step_index: int) -> StateVector:
    """Untwisted partial PEPS entering step ``step_index`` (0-based)."""
    config = prepared.config
    return partial_peps_state(
        config.lattice,
        config.rep,
        config.deformations,
        t=step_index,
        tensor=prepared.tensor,
        base_state=prepared.initial_state,
    )


def aggregate_step_stats(prepared: PreparedProtocol, traces: Sequence[ProtocolTrace]) -> list[dict]:
    """Per-step summary rows for the aggregate CSV.

    ``empirical_fail`` is the fraction of trials that reached the step and
    exhausted it; ``analytic_fail`` is the exact failure law evaluated for
    the canonical entering state.
    """
    rows = []
    for t in range(prepared.n_steps):
        reached = [tr for tr in traces if len(tr.steps) > t]
        failed = [tr for tr in reached if tr.failed_step == t + 1]
        curve = curve_from_spectrum(
            prepared.spectra[t], canonical_entering_state(prepared, t), m_max=1
        )
        analytic = analytic_pfail(curve.overlaps, curve.weights, prepared.m)
        d_min_all = prepared.spectra[t].d_min
        rows.append(
            {
                "step": t + 1,
                "m": prepared.m,
                "empirical_fail": len(failed) / len(reached) if reached else 0.0,
                "analytic_fail": analytic,
                "bound": pfail_bound(d_min_all, prepared.m),
                "d_min": d_min_all,
                "kappa": prepared.kappas[t],
                "trials_reached": len(reached),
            }
        )
    return rows


def trace_to_dict(trace: ProtocolTrace) -> dict:
    return {
        "seed": trace.seed,
        "trial": trace.trial,
        "m": trace.m,
        "success": trace.success,
        "failed_step": trace.failed_step,
        "total_measurements": trace.total_measurements,
        "final_fidelity": trace.final_fidelity,
        "final_block_weights": list(trace.final_block_weights),
        "steps": [
            {
                "step": s.step,
                "bits": list(s.bits),
                "forward_count": s.forward_count,
                "success": s.success,
            }
            for s in trace.steps
        ],
    }
