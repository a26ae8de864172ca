"""Collective basis of N three-level Rydberg atoms (plus the ground level).

Level labels: 0 = ground 5S, 1 = 37S, 2 = 37P, 3 = 38S. A collective state is
a tuple of labels, one per atom. Only states with equal numbers of |1> and
|3> labels are admitted, since the Foerster process creates them in pairs.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import IntEnum
from math import factorial

import numpy as np

MAX_ATOMS = 6

FOERSTER = "foerster"
BLOCKADE = "blockade"
MODES = (FOERSTER, BLOCKADE)


class Level(IntEnum):
    GROUND = 0
    LOWER = 1
    MIDDLE = 2
    UPPER = 3


class CapacityError(ValueError):
    """Atom count outside the supported range."""


@dataclass(frozen=True)
class Basis:
    mode: str
    atom_count: int
    states: tuple[tuple[int, ...], ...]
    index: dict[tuple[int, ...], int] = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.states)

    def label(self, i: int) -> str:
        return "|" + "".join(str(x) for x in self.states[i]) + ">"

    @property
    def labels(self) -> np.ndarray:
        """(size, N) integer array of level labels."""
        return np.array(self.states, dtype=np.int8).reshape(len(self.states), self.atom_count)

    @property
    def pair_counts(self) -> np.ndarray:
        return 2 * np.count_nonzero(self.labels == Level.LOWER, axis=1)

    @property
    def excited_counts(self) -> np.ndarray:
        """Number of atoms outside the ground level, per state."""
        return np.count_nonzero(self.labels != Level.GROUND, axis=1)

    def initial_index(self) -> int:
        """Index of |22..2> (Foerster) or |00..0> (blockade)."""
        start = Level.MIDDLE if self.mode == FOERSTER else Level.GROUND
        return self.index[(int(start),) * self.atom_count]


def enumerate_basis(mode: str, n_atoms: int, max_atoms: int = MAX_ATOMS) -> Basis:
    """All label strings with #|1> == #|3>, sorted lexicographically.

    Foerster mode uses the alphabet {1, 2, 3}; blockade mode adds the ground
    level 0.
    """
    if mode not in MODES:
        raise ValueError(f"unknown basis mode {mode!r}; expected one of {MODES}")
    if not 1 <= n_atoms <= max_atoms:
        raise CapacityError(f"atom count {n_atoms} outside supported range 1..{max_atoms}")
    alphabet = (1, 2, 3) if mode == FOERSTER else (0, 1, 2, 3)
    # itertools.product over a sorted alphabet is already lexicographic
    states = tuple(
        s for s in itertools.product(alphabet, repeat=n_atoms) if s.count(1) == s.count(3)
    )
    return Basis(mode, n_atoms, states, {s: i for i, s in enumerate(states)})


def state_pair_count(state) -> int:
    """Number of atoms that left |2> through Foerster flips (always even)."""
    ones = sum(1 for x in state if x == Level.LOWER)
    threes = sum(1 for x in state if x == Level.UPPER)
    if ones != threes:
        raise ValueError(f"state {tuple(state)} violates the #1 == #3 constraint")
    return 2 * ones


def count_states_with_k(n_atoms: int, k: int) -> int:
    """Closed form N! / ((N-k)! ((k/2)!)^2) for the number of Foerster states with pair count k."""
    if k % 2:
        raise ValueError(f"pair count k must be even, got {k}")
    if not 0 <= k <= n_atoms:
        raise ValueError(f"pair count k={k} outside 0..{n_atoms}")
    return factorial(n_atoms) // (factorial(n_atoms - k) * factorial(k // 2) ** 2)


def blockade_basis_size(n_atoms: int) -> int:
    return sum(
        factorial(n_atoms) // (factorial(m) ** 2 * factorial(n_atoms - 2 * m)) * 2 ** (n_atoms - 2 * m)
        for m in range(n_atoms // 2 + 1)
    )
