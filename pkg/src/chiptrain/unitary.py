"""Unitary evolution, fidelity, geodesic interpolation, and unitary noise.

Sign convention: a segment of length dz implements U = exp(-i H dz). All
observable probabilities are invariant under the global conjugation that flips
this sign, so it only matters that it is fixed once, here.
"""

from __future__ import annotations

from functools import reduce

import numpy as np
import scipy.linalg

from chiptrain.chip import ChipGeometry, ChipParameters, ControlModel, InvariantError, apply_control, assemble_hamiltonian

UNITARITY_TOL = 1e-10
SYMMETRY_TOL = 1e-12


class BranchCutError(ValueError):
    """Geodesic eigenphase sits on the -pi branch cut; the caller may perturb."""


def unitarity_defect(u: np.ndarray) -> float:
    """max |U^dag U - I|."""
    m = u.shape[0]
    return float(np.max(np.abs(u.conj().T @ u - np.eye(m))))


def evolve(h: np.ndarray, dz: float) -> np.ndarray:
    """U = exp(-i H dz) for real-symmetric H, via eigendecomposition."""
    h = np.asarray(h, dtype=float)
    if np.max(np.abs(h - h.T)) > SYMMETRY_TOL:
        raise InvariantError("Hamiltonian is not symmetric")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dz)) @ v.T


def compose_segments(segment_unitaries) -> np.ndarray:
    """Ordered product: the first segment in the list is applied first."""
    mats = list(segment_unitaries)
    if not mats:
        raise InvariantError("no segments to compose")
    m = mats[0].shape
    for u in mats:
        if u.shape != m:
            raise InvariantError("segment unitaries have mismatched dimensions")
    return reduce(lambda acc, u: u @ acc, mats)


def fidelity(u_target: np.ndarray, u: np.ndarray) -> float:
    """|Tr(U_target^dag U)| / m; phase-insensitive similarity in [0, 1]."""
    if u_target.shape != u.shape:
        raise InvariantError("fidelity needs same-dimension unitaries")
    m = u.shape[0]
    return float(np.abs(np.trace(u_target.conj().T @ u)) / m)


def geodesic_path(u1: np.ndarray, u2: np.ndarray, steps: int) -> list:
    """Interpolating unitaries U1 exp(t log(U1^dag U2)) at t = j/steps, j = 1..steps.

    The matrix log uses principal-branch eigenphases in (-pi, pi]; an eigenphase
    on the -pi cut is ambiguous and raises BranchCutError.
    """
    if steps < 1:
        raise InvariantError("steps must be >= 1")
    if u1.shape != u2.shape:
        raise InvariantError("geodesic endpoints have mismatched dimensions")
    gamma = u1.conj().T @ u2
    # gamma is unitary, hence normal: its Schur form is diagonal and Q unitary.
    t_mat, q = scipy.linalg.schur(gamma, output="complex")
    phases = np.angle(np.diag(t_mat))
    if np.any(phases <= -np.pi + 1e-12):
        raise BranchCutError("eigenphase at -pi: geodesic branch is ambiguous")
    path = []
    for j in range(1, steps + 1):
        t = j / steps
        path.append(u1 @ (q * np.exp(1j * t * phases)) @ q.conj().T)
    return path


def random_unitary_noise(m: int, eps: float, rng: np.random.Generator) -> np.ndarray:
    """exp(i eps H) for a random Hermitian H = (A + A^dag)/2, A complex standard normal."""
    if eps < 0:
        raise InvariantError("noise strength must be >= 0")
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    h = (a + a.conj().T) / 2.0
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * eps * w)) @ v.conj().T


def unitary_from_parameters(geom: ChipGeometry, params: ChipParameters) -> np.ndarray:
    """Overall unitary of the chip: ordered product of per-segment evolutions."""
    mats = [
        evolve(assemble_hamiltonian(params.beta[s], params.couplings), seg.length_mm)
        for s, seg in enumerate(geom.segments)
    ]
    return compose_segments(mats)


def unitary_from_control(
    geom: ChipGeometry, model: ControlModel, couplings: dict, x: np.ndarray
) -> np.ndarray:
    """Unitary realized by a control vector, given fixed coupling coefficients."""
    beta = apply_control(geom, model, x)
    return unitary_from_parameters(geom, ChipParameters(beta=beta, couplings=couplings))
