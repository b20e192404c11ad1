"""Decision grids: declared decisions, universe enumeration, ids and seeds.

A decision space is an ordered list of named decisions, each with a finite
set of option tokens.  The cross product of the option sets is the grid; one
cell of the grid is a universe.  Universe identity is content-addressed so it
never depends on enumeration order, worker count, or insertion order of the
assignment mapping.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, GridCapError

__all__ = [
    "CATEGORIES",
    "DEFAULT_GRID_CAP",
    "Decision",
    "DecisionSpace",
    "Universe",
    "canonical_assignment_text",
    "universe_id",
    "universe_seed",
    "parse_space",
    "enumerate_universes",
    "sample_universes",
]

CATEGORIES = ("data-selection", "preprocessing", "modeling", "post-hoc", "evaluation")
KINDS = ("design", "evaluation")

# Enumeration materializes every universe; refuse grids that would not fit
# comfortably in memory and point the caller at sampling instead.
DEFAULT_GRID_CAP = 10_000_000

ID_HEX_CHARS = 16
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class Decision:
    """One named decision and its finite option set."""

    name: str
    category: str
    options: tuple[str, ...]

    def __post_init__(self):
        if not self.name:
            raise ConfigError("decision name must be non-empty")
        if self.category not in CATEGORIES:
            raise ConfigError(
                f"decision {self.name!r}: unknown category {self.category!r}"
            )
        if not self.options:
            raise ConfigError(f"decision {self.name!r}: empty option set")
        if len(set(self.options)) != len(self.options):
            raise ConfigError(f"decision {self.name!r}: duplicate options")
        if any(not opt for opt in self.options):
            raise ConfigError(f"decision {self.name!r}: empty option token")


@dataclass(frozen=True)
class DecisionSpace:
    """An ordered collection of decisions of one kind (design or evaluation)."""

    decisions: tuple[Decision, ...]
    kind: str = "design"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown space kind {self.kind!r}")
        names = [d.name for d in self.decisions]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate decision names in space")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.decisions)

    @property
    def grid_size(self) -> int:
        return math.prod(len(d.options) for d in self.decisions)

    def decision(self, name: str) -> Decision:
        for d in self.decisions:
            if d.name == name:
                return d
        raise ConfigError(f"no decision named {name!r} in space")


@dataclass(frozen=True)
class Universe:
    """One grid cell: a full assignment of options plus derived id and seed."""

    assignments: Mapping[str, str]
    id: str
    seed: int


def canonical_assignment_text(assignments: Mapping[str, str]) -> str:
    """Serialize an assignment mapping independent of insertion order."""
    return "\n".join(f"{k}={assignments[k]}" for k in sorted(assignments))


def universe_id(assignments: Mapping[str, str]) -> str:
    digest = hashlib.sha256(canonical_assignment_text(assignments).encode("utf-8"))
    return digest.hexdigest()[:ID_HEX_CHARS]


def universe_seed(global_seed: int, uid: str) -> int:
    """Per-universe seed: low 64 bits of a hash of the global seed and the id."""
    digest = hashlib.sha256(
        struct.pack(">Q", global_seed & _SEED_MASK) + uid.encode("ascii")
    ).digest()
    return int.from_bytes(digest[-8:], "big")


def _universe(assignments: dict[str, str], global_seed: int) -> Universe:
    uid = universe_id(assignments)
    return Universe(assignments=assignments, id=uid, seed=universe_seed(global_seed, uid))


def parse_space(doc: str | Mapping) -> DecisionSpace:
    """Parse a decision-space document (JSON text or already-decoded mapping).

    Expected shape::

        {"kind": "design", "decisions": [
            {"name": "...", "category": "...", "options": ["...", ...]}, ...]}
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"space document is not valid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ConfigError("space document must be a JSON object")
    kind = doc.get("kind", "design")
    raw = doc.get("decisions")
    if not isinstance(raw, Sequence) or not raw:
        raise ConfigError("space document needs a non-empty 'decisions' list")
    decisions = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, Mapping):
            raise ConfigError(f"decision #{i} is not an object")
        missing = {"name", "category", "options"} - set(entry)
        if missing:
            raise ConfigError(f"decision #{i}: missing fields {sorted(missing)}")
        options = entry["options"]
        if not isinstance(options, Sequence) or isinstance(options, str):
            raise ConfigError(f"decision #{i}: 'options' must be a list")
        decisions.append(
            Decision(
                name=str(entry["name"]),
                category=str(entry["category"]),
                options=tuple(str(o) for o in options),
            )
        )
    return DecisionSpace(decisions=tuple(decisions), kind=str(kind))


def _assignments_from_indices(space: DecisionSpace, idx: Sequence[int]) -> dict[str, str]:
    return {d.name: d.options[i] for d, i in zip(space.decisions, idx)}


def enumerate_universes(
    space: DecisionSpace, global_seed: int, cap: int = DEFAULT_GRID_CAP
) -> list[Universe]:
    """Materialize the full grid in deterministic order.

    Order is the lexicographic product of option indices: the first declared
    decision varies slowest.
    """
    size = space.grid_size
    if size > cap:
        raise GridCapError(
            f"grid has {size} universes, above the cap of {cap}; "
            "use sample_universes for spaces this large"
        )
    option_ranges = [range(len(d.options)) for d in space.decisions]
    out = []
    for idx in itertools.product(*option_ranges):
        out.append(_universe(_assignments_from_indices(space, idx), global_seed))
    return out


def _decode_index(flat: int, counts: Sequence[int]) -> tuple[int, ...]:
    # Mixed-radix decode matching enumeration order (first decision slowest).
    out = []
    for c in reversed(counts):
        out.append(flat % c)
        flat //= c
    return tuple(reversed(out))


def sample_universes(
    space: DecisionSpace,
    fraction: float,
    sample_seed: int,
    global_seed: int,
) -> list[Universe]:
    """Uniform sample of the grid without replacement.

    Sample size is round(fraction * grid_size).  fraction = 1.0 yields a
    permutation of the full grid.  Deterministic given both seeds.
    """
    if not (0.0 < fraction <= 1.0):
        raise ConfigError(f"sample fraction must be in (0, 1], got {fraction}")
    size = space.grid_size
    k = int(math.floor(fraction * size + 0.5))
    if k < 1:
        raise ConfigError(
            f"fraction {fraction} of a {size}-universe grid rounds to zero universes"
        )
    rng = np.random.default_rng(sample_seed)
    if size <= DEFAULT_GRID_CAP or 3 * k >= size:
        flat = rng.permutation(size)[:k]
    else:
        # Grid too large to permute; rejection-sample distinct cells.
        seen: set[int] = set()
        picked: list[int] = []
        while len(picked) < k:
            for v in rng.integers(0, size, size=2 * (k - len(picked))):
                v = int(v)
                if v not in seen:
                    seen.add(v)
                    picked.append(v)
                    if len(picked) == k:
                        break
        flat = np.asarray(picked)
    counts = [len(d.options) for d in space.decisions]
    return [
        _universe(_assignments_from_indices(space, _decode_index(int(f), counts)), global_seed)
        for f in flat
    ]
