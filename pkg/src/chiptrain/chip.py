"""Interferometer geometries, physical parameters, and thermo-optic control models.

Mode indices are 1-based throughout the public interfaces, matching the usual
waveguide numbering; array storage is 0-based internally.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

BETA_RANGE = (0.7, 1.3)  # mm^-1, thermo-optic tuning range of a propagation constant
COUPLING_RANGE = (0.1, 0.3)  # mm^-1, fabrication range of the coupling coefficients
MESH_CONTROL_RANGE = (0.0, 0.6)  # mm^-1, resistor control strength
MESH_BETA_BASE = 0.7  # mm^-1, unheated propagation constant in the mesh model

ROW_PITCH = np.sqrt(3.0) / 2.0  # vertical spacing of close-packed rows, in pitch units

TRIANGULAR_MODES = 32
TRIANGULAR_ROWS = 4
TRIANGULAR_COLS = 8
TRIANGULAR_LENGTH_MM = 36.0
TRIANGULAR_SEGMENTS = 18
# Resistors sit above these top-row columns (1-based) of every active segment.
RESISTOR_COLUMNS = (3, 6)


class GeometryError(ValueError):
    """Raised for geometries that cannot be built as requested."""


class InvariantError(ValueError):
    """Raised when an input violates a structural invariant."""


@dataclass(frozen=True)
class SegmentSpec:
    """A longitudinal slice of the chip with constant parameters."""

    length_mm: float
    active: bool = False


@dataclass(frozen=True)
class ResistorSpec:
    """A surface resistor: which segment it heats and where it sits on the lattice."""

    segment: int  # 0-based segment index
    position: tuple[float, float]  # (x, y) in lattice-pitch units


@dataclass(frozen=True)
class ChipGeometry:
    """Static layout of an interferometer."""

    layout: str  # "planar" | "triangular3d"
    m: int
    edges: tuple[tuple[int, int], ...]  # unordered coupled pairs, stored (i, j), i < j, 1-based
    total_length_mm: float
    segments: tuple[SegmentSpec, ...]
    resistors: tuple[ResistorSpec, ...] = ()
    coords: tuple[tuple[float, float], ...] = ()  # mode cross-section positions, pitch units

    def __post_init__(self):
        seg_total = sum(s.length_mm for s in self.segments)
        if not np.isclose(seg_total, self.total_length_mm):
            raise InvariantError(
                f"segment lengths sum to {seg_total}, expected {self.total_length_mm}"
            )
        for r in self.resistors:
            if not self.segments[r.segment].active:
                raise InvariantError(f"resistor on passive segment {r.segment}")
        for s_idx, seg in enumerate(self.segments):
            if seg.active:
                n = sum(1 for r in self.resistors if r.segment == s_idx)
                if n != 2:
                    raise InvariantError(f"active segment {s_idx} has {n} resistors, expected 2")

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def active_segments(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.segments) if s.active)

    @property
    def edge_set(self) -> frozenset:
        return frozenset(self.edges)


@dataclass
class ChipParameters:
    """Physical Hamiltonian parameters: per-segment propagation constants and couplings."""

    beta: np.ndarray  # shape (n_segments, m), mm^-1
    couplings: dict  # {(i, j): C_ij} with i < j, 1-based, mm^-1

    def copy(self) -> "ChipParameters":
        return ChipParameters(self.beta.copy(), dict(self.couplings))


@dataclass(frozen=True)
class ControlModel:
    """How an external control vector maps onto propagation constants."""

    kind: str  # "direct" | "multiplicative_mesh"
    control_bounds: tuple[float, float]
    beta_base: float = MESH_BETA_BASE
    weights: np.ndarray | None = None  # (m, n_resistors) cross-talk weights, mesh only

    def n_controls(self, geom: ChipGeometry) -> int:
        if self.kind == "direct":
            return geom.m
        return len(geom.resistors)


def build_planar_geometry(m: int) -> ChipGeometry:
    """Planar array of m waveguides with first-neighbour coupling, length 2m mm."""
    if m < 2:
        raise GeometryError(f"planar geometry needs m >= 2, got {m}")
    edges = tuple((i, i + 1) for i in range(1, m))
    coords = tuple((float(i), 0.0) for i in range(m))
    return ChipGeometry(
        layout="planar",
        m=m,
        edges=edges,
        total_length_mm=2.0 * m,
        segments=(SegmentSpec(length_mm=2.0 * m),),
        coords=coords,
    )


def _triangular_coords() -> tuple[tuple[float, float], ...]:
    """32 modes as 4 offset rows of 8 (triangular close packing), row-major, bottom up."""
    coords = []
    for r in range(TRIANGULAR_ROWS):
        x_off = 0.5 * (r % 2)
        for c in range(TRIANGULAR_COLS):
            coords.append((c + x_off, r * ROW_PITCH))
    return tuple(coords)


def _edges_from_coords(coords, tol: float = 0.01) -> tuple[tuple[int, int], ...]:
    """All unordered pairs at unit lattice distance (1-based indices)."""
    pts = np.asarray(coords)
    edges = []
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if abs(np.hypot(*(pts[i] - pts[j])) - 1.0) < tol:
                edges.append((i + 1, j + 1))
    return tuple(edges)


def build_triangular_geometry(control: str = "direct") -> ChipGeometry:
    """Fixed 32-mode 3D triangular mesh, 36 mm long.

    control="direct": one segment, every propagation constant is its own knob.
    control="multi_phase": 18 segments of 2 mm; every second segment (2nd, 4th,
    ..., 16th) carries two surface resistors, for 16 control parameters total.
    """
    if control not in ("direct", "multi_phase"):
        raise GeometryError(f"unknown control layout {control!r}")
    coords = _triangular_coords()
    edges = _edges_from_coords(coords)
    if control == "direct":
        return ChipGeometry(
            layout="triangular3d",
            m=TRIANGULAR_MODES,
            edges=edges,
            total_length_mm=TRIANGULAR_LENGTH_MM,
            segments=(SegmentSpec(length_mm=TRIANGULAR_LENGTH_MM),),
            coords=coords,
        )
    seg_len = TRIANGULAR_LENGTH_MM / TRIANGULAR_SEGMENTS
    active_positions = {1, 3, 5, 7, 9, 11, 13, 15}  # 0-based: the 2nd, 4th, ..., 16th
    segments = tuple(
        SegmentSpec(length_mm=seg_len, active=(s in active_positions))
        for s in range(TRIANGULAR_SEGMENTS)
    )
    # Resistors hover one pitch above the top row, over the chosen columns.
    top_y = (TRIANGULAR_ROWS - 1) * ROW_PITCH
    top_xoff = 0.5 * ((TRIANGULAR_ROWS - 1) % 2)
    resistors = tuple(
        ResistorSpec(segment=s, position=(col - 1 + top_xoff, top_y + 1.0))
        for s in sorted(active_positions)
        for col in RESISTOR_COLUMNS
    )
    return ChipGeometry(
        layout="triangular3d",
        m=TRIANGULAR_MODES,
        edges=edges,
        total_length_mm=TRIANGULAR_LENGTH_MM,
        segments=segments,
        resistors=resistors,
        coords=coords,
    )


def sample_target_parameters(geom: ChipGeometry, rng: np.random.Generator) -> ChipParameters:
    """Draw fabrication-like parameters: beta ~ U[0.7, 1.3], C ~ U[0.1, 0.3] per edge.

    The same beta row is used for every segment (direct-control targets).
    """
    beta_row = rng.uniform(*BETA_RANGE, size=geom.m)
    beta = np.tile(beta_row, (geom.n_segments, 1))
    couplings = {e: float(c) for e, c in zip(geom.edges, rng.uniform(*COUPLING_RANGE, size=len(geom.edges)))}
    return ChipParameters(beta=beta, couplings=couplings)


def crosstalk_weights(geom: ChipGeometry) -> np.ndarray:
    """Cross-talk weight matrix W[mode, resistor] = 1/d, nearest mode at d = 1.

    Distances are Euclidean on the lattice (unit pitch), rescaled per resistor so
    the closest mode sits at exactly d = 1 and therefore weight exactly 1.
    """
    if not geom.resistors:
        raise GeometryError("geometry carries no resistors")
    pts = np.asarray(geom.coords)
    w = np.empty((geom.m, len(geom.resistors)))
    for r_idx, res in enumerate(geom.resistors):
        d = np.hypot(pts[:, 0] - res.position[0], pts[:, 1] - res.position[1])
        d = d / d.min()
        w[:, r_idx] = 1.0 / d
    return w


def direct_control_model() -> ControlModel:
    return ControlModel(kind="direct", control_bounds=BETA_RANGE)


def mesh_control_model(geom: ChipGeometry) -> ControlModel:
    return ControlModel(
        kind="multiplicative_mesh",
        control_bounds=MESH_CONTROL_RANGE,
        beta_base=MESH_BETA_BASE,
        weights=crosstalk_weights(geom),
    )


def apply_control(geom: ChipGeometry, model: ControlModel, x: np.ndarray) -> np.ndarray:
    """Map a control vector to per-segment propagation constants, shape (n_segments, m).

    Out-of-bounds controls (and mesh betas pushed past the physical range) are
    clamped, mirroring the finite range of thermo-optic resistors.
    """
    x = np.asarray(x, dtype=float)
    n = model.n_controls(geom)
    if x.shape != (n,):
        raise InvariantError(f"control vector has shape {x.shape}, expected ({n},)")
    lo, hi = model.control_bounds
    if np.any(x < lo) or np.any(x > hi):
        logger.warning("control vector clamped to bounds [%g, %g]", lo, hi)
        x = np.clip(x, lo, hi)
    if model.kind == "direct":
        return np.tile(x, (geom.n_segments, 1))
    beta = np.full((geom.n_segments, geom.m), model.beta_base)
    for r_idx, res in enumerate(geom.resistors):
        beta[res.segment] += model.weights[:, r_idx] * x[r_idx]
    b_lo, b_hi = BETA_RANGE
    if np.any(beta > b_hi) or np.any(beta < b_lo):
        logger.debug("mesh betas clamped to physical range [%g, %g]", b_lo, b_hi)
        beta = np.clip(beta, b_lo, b_hi)
    return beta


def perturb_parameters(
    params: ChipParameters, shift_range: float, rng: np.random.Generator
) -> ChipParameters:
    """Shift every beta by an independent U[-range, +range] draw, clamped to [0.7, 1.3]."""
    if shift_range < 0:
        raise InvariantError("perturbation range must be >= 0")
    shifted = params.beta + rng.uniform(-shift_range, shift_range, size=params.beta.shape)
    shifted = np.clip(shifted, *BETA_RANGE)
    return ChipParameters(beta=shifted, couplings=dict(params.couplings))


def shift_couplings(
    params: ChipParameters, delta_c: float, rng: np.random.Generator
) -> ChipParameters:
    """Shift every coupling by an independent U[-dC, +dC] draw, clamped positive."""
    if delta_c < 0:
        raise InvariantError("coupling shift must be >= 0")
    new = {
        e: max(c + float(rng.uniform(-delta_c, delta_c)), 0.0)
        for e, c in params.couplings.items()
    }
    return ChipParameters(beta=params.beta.copy(), couplings=new)


def assemble_hamiltonian(beta: np.ndarray, couplings: dict) -> np.ndarray:
    """Real-symmetric Hamiltonian: beta on the diagonal, couplings on the edges."""
    beta = np.asarray(beta, dtype=float)
    m = beta.shape[0]
    h = np.diag(beta)
    seen = {}
    for (i, j), c in couplings.items():
        if i == j or not (1 <= i <= m and 1 <= j <= m):
            raise InvariantError(f"bad coupling edge ({i}, {j}) for m={m}")
        key = (min(i, j), max(i, j))
        if key in seen and not np.isclose(seen[key], c):
            raise InvariantError(f"asymmetric coupling on edge {key}: {seen[key]} vs {c}")
        seen[key] = c
        h[i - 1, j - 1] = c
        h[j - 1, i - 1] = c
    return h
