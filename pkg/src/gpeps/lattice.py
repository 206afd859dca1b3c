"""Square torus lattices and exact contraction of (partial) PEPS into
dense state vectors.

Vertices are indexed row-major; each carries virtual legs ``(l, t, r, b)``.
Every edge joins the plain-representation leg of one vertex (``r`` or ``b``)
to the conjugated-representation leg of its neighbour (``l`` or ``t``), with
a maximally entangled pair of bond dimension ``D`` across it.  A boundary
twist ``K = (g, h)`` inserts ``U_g`` on every horizontal bond crossing one
vertical cut and ``U_h`` on every vertical bond crossing one horizontal cut;
the twist unitary acts on the conjugated-side half of the bond.

Physical indices are stored in the compressed symmetric-subspace basis of
the site tensor (dimension ``sym_dim`` per vertex), so a state on an
``N``-vertex lattice has ``sym_dim**N`` amplitudes, site-major.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .caps import max_amplitudes
from .errors import DimensionOverflow, NonCommutingTwist, ZeroState
from .groups import GroupTable, SemiRegularRep
from .tensors import Deformation, SiteTensor, build_site_tensor, deformation_to_dict

LEG_L, LEG_T, LEG_R, LEG_B = range(4)
LEG_NAMES = ("l", "t", "r", "b")

ZERO_STATE_TOL = 1e-14
PROJECTOR_RANK_TOL = 1e-10


@dataclass(frozen=True)
class Edge:
    """One bond: plain-side (site, leg) to conjugated-side (site, leg)."""

    plain_site: int
    plain_leg: int
    conj_site: int
    conj_leg: int
    orientation: str  # "h" or "v"
    position: int     # column (h) / row (v) the bond crosses into


@dataclass(frozen=True, eq=False)
class TorusLattice:
    width: int
    height: int
    edges: tuple[Edge, ...]

    @classmethod
    def build(cls, width: int, height: int) -> "TorusLattice":
        if width < 1 or height < 1:
            raise ValueError("lattice dimensions must be >= 1")
        edges = []
        for row in range(height):
            for col in range(width):
                v = row * width + col
                right = row * width + (col + 1) % width
                below = ((row + 1) % height) * width + col
                edges.append(Edge(v, LEG_R, right, LEG_L, "h", (col + 1) % width))
                edges.append(Edge(v, LEG_B, below, LEG_T, "v", (row + 1) % height))
        return cls(width=width, height=height, edges=tuple(edges))

    @property
    def n_vertices(self) -> int:
        return self.width * self.height

    def vertex(self, row: int, col: int) -> int:
        return (row % self.height) * self.width + (col % self.width)

    def coords(self, v: int) -> tuple[int, int]:
        return divmod(v, self.width)


@dataclass(frozen=True)
class BoundaryTwist:
    """Commuting pair (g, h) with the cut coordinates of both strips."""

    g: int
    h: int
    cut_col: int = 0
    cut_row: int = 0


def boundary_twist(
    group: GroupTable, g: int, h: int, cut_col: int = 0, cut_row: int = 0
) -> BoundaryTwist:
    twist = BoundaryTwist(g=g, h=h, cut_col=cut_col, cut_row=cut_row)
    validate_twist(group, twist)
    return twist


def validate_twist(group: GroupTable, twist: BoundaryTwist) -> None:
    if not (0 <= twist.g < group.order and 0 <= twist.h < group.order):
        raise NonCommutingTwist(f"twist elements out of range: {twist}")
    if not group.commutes(twist.g, twist.h):
        raise NonCommutingTwist(
            f"twist requires a commuting pair, got ({twist.g}, {twist.h})"
        )


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized dense state over the lattice physical space."""

    lattice: TorusLattice
    site_dim: int
    amplitudes: np.ndarray

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class GroundProjector:
    """Orthonormal-basis representation of a ground-space projector."""

    step: int
    basis: np.ndarray  # (dim, rank), orthonormal columns
    rank: int
    tol: float

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def coefficients(self, vector: np.ndarray) -> np.ndarray:
        return self.basis.conj().T @ vector

    def project(self, vector: np.ndarray) -> np.ndarray:
        return self.basis @ self.coefficients(vector)

    def weight(self, state: StateVector | np.ndarray) -> float:
        """Squared norm of the component inside the subspace."""
        vec = state.amplitudes if isinstance(state, StateVector) else state
        return float(np.linalg.norm(self.coefficients(vec)) ** 2)


def projector_from_columns(
    columns: np.ndarray, step: int = 0, tol: float = PROJECTOR_RANK_TOL
) -> GroundProjector:
    """Rank-revealing orthonormalization of a (dim, m) column stack."""
    u, s, _ = np.linalg.svd(columns, full_matrices=False)
    keep = s > tol * (s[0] if s.size else 0.0)
    return GroundProjector(
        step=step, basis=np.ascontiguousarray(u[:, keep]), rank=int(keep.sum()), tol=tol
    )


# ---------------------------------------------------------------------------
# contraction


def contract_isometric_state(
    lattice: TorusLattice,
    rep: SemiRegularRep,
    twist: BoundaryTwist | None = None,
    tensor: SiteTensor | None = None,
    cap: int | None = None,
) -> StateVector:
    """Exact contraction of the group-symmetric PEPS with a boundary twist.

    Places maximally entangled bond pairs on every edge, inserts the twist
    unitaries on the bonds crossing the cuts, applies the compressed site
    map at every vertex and contracts the whole network in one einsum.
    Deterministic for a fixed lattice, representation and twist.
    """
    if twist is None:
        e = rep.group.identity
        twist = BoundaryTwist(g=e, h=e)
    validate_twist(rep.group, twist)
    if tensor is None:
        tensor = build_site_tensor(rep, cap=cap)
    n_sites = lattice.n_vertices
    d = tensor.sym_dim
    if d**n_sites > max_amplitudes(cap):
        raise DimensionOverflow(
            f"state needs {d**n_sites} amplitudes (cap {max_amplitudes(cap)})"
        )

    leg_tensor = tensor.leg_tensor()
    site_labels: list[list[int | None]] = [
        [v, None, None, None, None] for v in range(n_sites)
    ]
    extra_ops: list[tuple[np.ndarray, list[int]]] = []
    next_label = n_sites
    identity_el = rep.group.identity
    for edge in lattice.edges:
        if edge.orientation == "h":
            element = twist.g
            twisted = edge.position == twist.cut_col % lattice.width
        else:
            element = twist.h
            twisted = edge.position == twist.cut_row % lattice.height
        if twisted and element != identity_el:
            plain_label, conj_label = next_label, next_label + 1
            next_label += 2
            extra_ops.append((rep.matrices[element], [conj_label, plain_label]))
        else:
            plain_label = conj_label = next_label
            next_label += 1
        site_labels[edge.plain_site][1 + edge.plain_leg] = plain_label
        site_labels[edge.conj_site][1 + edge.conj_leg] = conj_label

    operands: list = []
    for v in range(n_sites):
        operands.extend((leg_tensor, site_labels[v]))
    for op, labels in extra_ops:
        operands.extend((op, labels))
    amplitudes = np.einsum(*operands, list(range(n_sites)), optimize="greedy").reshape(-1)
    norm = np.linalg.norm(amplitudes)
    if norm <= ZERO_STATE_TOL:
        raise ZeroState("isometric contraction produced the zero vector")
    return StateVector(lattice=lattice, site_dim=d, amplitudes=amplitudes / norm)


def _apply_site(arr: np.ndarray, n_sites: int, site_dim: int, site: int, matrix: np.ndarray) -> np.ndarray:
    shaped = arr.reshape((site_dim,) * n_sites)
    out = np.tensordot(matrix, shaped, axes=([1], [site]))
    return np.moveaxis(out, 0, site).reshape(-1)


def apply_site_operator(state: StateVector, site: int, matrix: np.ndarray) -> np.ndarray:
    """Apply a (d, d) operator on one site; returns raw (unnormalized) amplitudes."""
    return _apply_site(
        state.amplitudes, state.lattice.n_vertices, state.site_dim, site, matrix
    )


def partial_peps_state(
    lattice: TorusLattice,
    rep: SemiRegularRep,
    deformations: Sequence[Deformation],
    twist: BoundaryTwist | None = None,
    t: int | None = None,
    tensor: SiteTensor | None = None,
    base_state: StateVector | None = None,
    cap: int | None = None,
) -> StateVector:
    """Twisted PEPS with deformations applied on vertices ``0 .. t-1``.

    Vertex order is row-major from the top-left.  ``base_state`` can pass a
    pre-contracted isometric state for the same twist to avoid recontraction.
    """
    if t is None:
        t = len(deformations)
    if t > lattice.n_vertices:
        raise ValueError(f"t = {t} exceeds vertex count {lattice.n_vertices}")
    if base_state is None:
        base_state = contract_isometric_state(lattice, rep, twist, tensor=tensor, cap=cap)
    arr = base_state.amplitudes
    for v in range(t):
        # list position is authoritative for the vertex order (row-major)
        arr = _apply_site(arr, lattice.n_vertices, base_state.site_dim, v, deformations[v].matrix)
    norm = np.linalg.norm(arr)
    if norm <= ZERO_STATE_TOL:
        raise ZeroState(f"partial PEPS with t = {t} deformations is the zero vector")
    return StateVector(lattice=lattice, site_dim=base_state.site_dim, amplitudes=arr / norm)


def ground_projector(
    lattice: TorusLattice,
    rep: SemiRegularRep,
    deformations: Sequence[Deformation],
    t: int,
    tensor: SiteTensor | None = None,
    twisted_states: Mapping[tuple[int, int], StateVector] | None = None,
    tol: float = PROJECTOR_RANK_TOL,
    cap: int | None = None,
) -> GroundProjector:
    """Orthonormal basis of span{ partial PEPS over all commuting twists }.

    Linear dependence among the twisted states ("over-spanning") is
    expected and absorbed by the rank-revealing orthogonalization.
    """
    if tensor is None:
        tensor = build_site_tensor(rep, cap=cap)
    pairs = rep.group.commuting_pairs()
    columns = np.empty((tensor.sym_dim**lattice.n_vertices, len(pairs)), dtype=complex)
    for k, (g, h) in enumerate(pairs):
        base = twisted_states.get((g, h)) if twisted_states is not None else None
        state = partial_peps_state(
            lattice,
            rep,
            deformations,
            twist=BoundaryTwist(g=g, h=h),
            t=t,
            tensor=tensor,
            base_state=base,
            cap=cap,
        )
        columns[:, k] = state.amplitudes
    projector = projector_from_columns(columns, step=t, tol=tol)
    return projector


def decompress_state(state: StateVector, tensor: SiteTensor) -> np.ndarray:
    """Embed a compressed state back into the ambient virtual-leg space.

    Applies the symmetric-subspace isometry at every vertex; the result has
    ``(D**4)**N`` amplitudes.  Intended for small cross-checks.
    """
    n_sites = state.lattice.n_vertices
    ambient = tensor.sym_basis.shape[0]
    if ambient**n_sites > max_amplitudes():
        raise DimensionOverflow("ambient embedding exceeds the amplitude cap")
    arr = state.amplitudes
    dims = [state.site_dim] * n_sites
    for v in range(n_sites):
        shaped = arr.reshape(dims)
        arr = np.moveaxis(
            np.tensordot(tensor.sym_basis, shaped, axes=([1], [v])), 0, v
        ).reshape(-1)
        dims[v] = ambient
    return arr


# ---------------------------------------------------------------------------
# state export


def save_state(
    state: StateVector,
    base_path: str,
    rep: SemiRegularRep | None = None,
    twist: BoundaryTwist | None = None,
    deformations: Sequence[Deformation] | None = None,
) -> None:
    """Write amplitudes as little-endian interleaved re/im doubles plus a
    JSON sidecar describing how the state was produced."""
    data = np.ascontiguousarray(state.amplitudes, dtype="<c16")
    data.view("<f8").tofile(base_path + ".bin")
    sidecar: dict = {
        "format": "interleaved-float64-little-endian",
        "dim": state.dim,
        "site_dim": state.site_dim,
        "lattice": {"width": state.lattice.width, "height": state.lattice.height},
    }
    if rep is not None:
        sidecar["rep"] = {
            "group": rep.group.name,
            "multiplicities": rep.multiplicities(),
        }
    if twist is not None:
        sidecar["twist"] = {
            "g": twist.g, "h": twist.h,
            "cut_col": twist.cut_col, "cut_row": twist.cut_row,
        }
    if deformations is not None:
        blob = json.dumps(
            [deformation_to_dict(d) for d in deformations], sort_keys=True
        ).encode()
        sidecar["deformation_hash"] = hashlib.sha256(blob).hexdigest()
    with open(base_path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def load_state(base_path: str) -> StateVector:
    with open(base_path + ".json", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    raw = np.fromfile(base_path + ".bin", dtype="<f8").view("<c16")
    lattice = TorusLattice.build(sidecar["lattice"]["width"], sidecar["lattice"]["height"])
    return StateVector(
        lattice=lattice,
        site_dim=int(sidecar["site_dim"]),
        amplitudes=raw.astype(complex),
    )
