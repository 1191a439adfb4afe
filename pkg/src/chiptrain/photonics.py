"""Single- and two-photon output statistics and finite-sample measurement simulation.

Inputs and outcomes use 1-based mode indices. Two-photon outcomes are unordered
pairs (j, l) with j <= l; j == l is a bunched (collision) event and carries the
bosonic multiplicity factor so that each distribution sums to one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from chiptrain.chip import ChipGeometry, InvariantError


@dataclass
class OutputDistribution:
    """Exact outcome probabilities for one input state."""

    input: tuple  # (i,) or (i, k) with i < k
    outcomes: dict  # {outcome tuple: probability}

    def total(self) -> float:
        return float(sum(self.outcomes.values()))


@dataclass
class SampleCounts:
    """Finite-shot multinomial counts for one input state."""

    input: tuple
    counts: dict  # {outcome tuple: int}
    n_shots: int


@dataclass
class InputSet:
    """The input states probed in one training epoch."""

    singles: list  # [(i,), ...] all m of them
    pairs: list  # [(i, k), ...]


def _check_mode(i: int, m: int):
    if not 1 <= i <= m:
        raise InvariantError(f"mode index {i} out of range 1..{m}")


def single_photon_distribution(u: np.ndarray, i: int) -> OutputDistribution:
    """p_j = |U_{j,i}|^2 for a photon injected in mode i."""
    m = u.shape[0]
    _check_mode(i, m)
    p = np.abs(u[:, i - 1]) ** 2
    return OutputDistribution(input=(i,), outcomes={(j + 1,): float(p[j]) for j in range(m)})


def two_photon_distribution(u: np.ndarray, pair) -> OutputDistribution:
    """Two-photon output distribution for input modes (i, k), i != k.

    p({j, l}) = |U_{j,i} U_{l,k} + U_{l,i} U_{j,k}|^2 for j != l and
    p({j, j}) = 2 |U_{j,i} U_{j,k}|^2 for bunched events.
    """
    i, k = pair
    m = u.shape[0]
    _check_mode(i, m)
    _check_mode(k, m)
    if i == k:
        raise InvariantError("two-photon inputs must use distinct modes")
    amp = np.outer(u[:, i - 1], u[:, k - 1])
    sym = amp + amp.T  # sym[j, l] = U_{j,i} U_{l,k} + U_{l,i} U_{j,k}
    outcomes = {}
    for j in range(m):
        outcomes[(j + 1, j + 1)] = float(np.abs(sym[j, j]) ** 2 / 2.0)
        for l in range(j + 1, m):
            outcomes[(j + 1, l + 1)] = float(np.abs(sym[j, l]) ** 2)
    key = (min(i, k), max(i, k))
    return OutputDistribution(input=key, outcomes=outcomes)


def brute_force_two_photon_oracle(u: np.ndarray, pair) -> OutputDistribution:
    """Test-only oracle: full Fock-space amplitudes via creation-operator expansion.

    Expands (sum_j U_{j,i} a_j^dag)(sum_l U_{l,k} a_l^dag)|0> term by term,
    collects the monomial coefficients in the two-photon Fock basis, and converts
    them to normalized Fock amplitudes (a (a_j^dag)^2 monomial picks up sqrt(2!)).
    Refuses m > 6.
    """
    m = u.shape[0]
    if m > 6:
        raise InvariantError("oracle limited to m <= 6")
    i, k = pair
    if i == k:
        raise InvariantError("two-photon inputs must use distinct modes")
    monomials: dict = {}  # {(j, l) sorted: coefficient of a_j^dag a_l^dag}
    for j, l in itertools.product(range(1, m + 1), repeat=2):
        key = (min(j, l), max(j, l))
        monomials[key] = monomials.get(key, 0.0) + u[j - 1, i - 1] * u[l - 1, k - 1]
    outcomes = {}
    for j in range(1, m + 1):
        for l in range(j, m + 1):
            coeff = monomials.get((j, l), 0.0)
            norm = math.sqrt(math.factorial(2)) if j == l else 1.0
            outcomes[(j, l)] = float(np.abs(coeff * norm) ** 2)
    return OutputDistribution(input=(min(i, k), max(i, k)), outcomes=outcomes)


def sample_counts(
    dist: OutputDistribution, n_shots: int, rng: np.random.Generator
) -> SampleCounts:
    """Multinomial draw of n_shots events from an output distribution."""
    if n_shots < 1:
        raise InvariantError("n_shots must be >= 1")
    keys = sorted(dist.outcomes)
    p = np.array([dist.outcomes[k] for k in keys])
    p = np.clip(p, 0.0, None)
    draws = rng.multinomial(n_shots, p / p.sum())
    return SampleCounts(
        input=dist.input,
        counts={k: int(n) for k, n in zip(keys, draws)},
        n_shots=n_shots,
    )


def estimate_distribution(counts: SampleCounts) -> OutputDistribution:
    """Empirical probabilities n/N_s."""
    return OutputDistribution(
        input=counts.input,
        outcomes={k: n / counts.n_shots for k, n in counts.counts.items()},
    )


def available_pairs(geom: ChipGeometry) -> list:
    """All two-photon input pairs a training run may draw from.

    Planar: first neighbours plus the (1, m) pair. Triangular: every coupled edge.
    """
    if geom.layout == "planar":
        return [(i, i + 1) for i in range(1, geom.m)] + [(1, geom.m)]
    return list(geom.edges)


def select_input_set(
    geom: ChipGeometry, subset_size: int | None, rng: np.random.Generator
) -> InputSet:
    """Inputs for one epoch: all m single-photon states plus a two-photon pair set.

    The planar pair set is fixed (subset_size is ignored); the triangular set is
    a uniform without-replacement subset of the coupled edges, redrawn per epoch.
    """
    singles = [(i,) for i in range(1, geom.m + 1)]
    pairs = available_pairs(geom)
    if geom.layout == "planar" or subset_size is None or subset_size >= len(pairs):
        return InputSet(singles=singles, pairs=pairs)
    if subset_size < 0:
        raise InvariantError("subset size must be >= 0")
    idx = rng.choice(len(pairs), size=subset_size, replace=False)
    return InputSet(singles=singles, pairs=[pairs[int(t)] for t in idx])
