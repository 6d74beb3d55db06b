"""Immutable balanced-panel containers and group-assignment structures.

A panel holds an outcome array ``y`` of shape (n, T) and covariates ``x`` of
shape (n, T, K) with K possibly zero.  Group structures are stored with
contiguous zero-based codes internally; one-based labels appear only in
reports.  Everything is frozen after validation and safe to share between
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGroup, NonFinite, OutOfRange, TooSmall


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PanelData:
    """Balanced n x T panel of outcome and covariates."""

    y: np.ndarray                  # (n, T)
    x: np.ndarray                  # (n, T, K), K may be 0
    validated: bool = field(default=False, compare=False)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def T(self) -> int:
        return self.y.shape[1]

    @property
    def K(self) -> int:
        return self.x.shape[2]


def make_panel(y, x=None) -> PanelData:
    """Assemble and validate a panel from raw arrays.

    Parameters
    ----------
    y : array-like, shape (n, T)
        Outcome for every (unit, time) cell.
    x : array-like, shape (n, T, K), optional
        Covariates; omit for a pure fixed-effects panel (K = 0).
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise TooSmall(f"y must be a 2-d (n, T) array, got shape {y.shape}")
    n, T = y.shape
    if x is None:
        x = np.zeros((n, T, 0))
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[:2] != (n, T):
        raise TooSmall(f"x must have shape (n, T, K) = ({n}, {T}, K), got {x.shape}")
    return validate_panel(PanelData(y=_frozen(y), x=_frozen(x)))


def validate_panel(raw: PanelData) -> PanelData:
    """Check all panel invariants; idempotent on an already-valid panel."""
    if raw.validated:
        return raw
    n, T = raw.y.shape
    if n < 2 or T < 2:
        raise TooSmall(f"panel needs n >= 2 and T >= 2, got n={n}, T={T}")
    if not np.all(np.isfinite(raw.y)):
        i, t = np.argwhere(~np.isfinite(raw.y))[0]
        raise NonFinite(f"y[{i + 1}][{t + 1}] is not finite")
    if raw.x.size and not np.all(np.isfinite(raw.x)):
        i, t, k = np.argwhere(~np.isfinite(raw.x))[0]
        raise NonFinite(f"x[{i + 1}][{t + 1}][{k + 1}] is not finite")
    return PanelData(y=raw.y, x=raw.x, validated=True)


@dataclass(frozen=True)
class GroupMap:
    """Known assignment of units to groups 1..G (stored zero-based)."""

    codes: np.ndarray              # (n,) ints in [0, G)
    G: int

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64)
        if self.G < 1:
            raise OutOfRange(f"G must be >= 1, got {self.G}")
        if codes.ndim != 1:
            raise OutOfRange("group codes must be a 1-d array")
        if codes.size and (codes.min() < 0 or codes.max() >= self.G):
            raise OutOfRange(f"group codes must lie in [0, {self.G})")
        sizes = np.bincount(codes, minlength=self.G)
        if np.any(sizes == 0):
            g = int(np.argmin(sizes))
            raise EmptyGroup(f"group {g + 1} of {self.G} has no members")
        codes.flags.writeable = False
        object.__setattr__(self, "codes", codes)

    @property
    def n(self) -> int:
        return self.codes.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.codes, minlength=self.G)

    def members(self, g: int) -> np.ndarray:
        return np.where(self.codes == g)[0]


def individual_groups(n: int) -> GroupMap:
    """One group per unit (G = n)."""
    return GroupMap(codes=np.arange(n), G=n)


def pooled_groups(n: int) -> GroupMap:
    """A single group containing every unit."""
    return GroupMap(codes=np.zeros(n, dtype=np.int64), G=1)


def groups_from_labels(labels) -> tuple[GroupMap, dict]:
    """Map arbitrary labels to contiguous codes by first appearance."""
    order: dict = {}
    codes = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab not in order:
            order[lab] = len(order)
        codes[i] = order[lab]
    return GroupMap(codes=codes, G=len(order)), order


def group_partition(gmap: GroupMap, n: int) -> tuple[list, np.ndarray]:
    """Partition {1..n} induced by the assignment.

    Returns the member index arrays I_g and the sizes n_g.  The arrays are
    pairwise disjoint, their union is {1..n}, and every size is >= 1.
    """
    if gmap.n != n:
        raise OutOfRange(f"assignment covers {gmap.n} units, panel has {n}")
    members = [gmap.members(g) for g in range(gmap.G)]
    return members, gmap.sizes


@dataclass(frozen=True)
class TimeGroupMap:
    """Nondecreasing assignment of periods to contiguous blocks 1..M."""

    codes: np.ndarray              # (T,) ints in [0, M), nondecreasing
    M: int

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64)
        if self.M < 1:
            raise OutOfRange(f"M must be >= 1, got {self.M}")
        if codes.ndim != 1 or codes.size == 0:
            raise OutOfRange("time codes must be a nonempty 1-d array")
        if codes[0] != 0 or codes[-1] != self.M - 1 or np.any(np.diff(codes) < 0) \
                or np.any(np.diff(codes) > 1):
            raise OutOfRange("time blocks must be contiguous intervals covering 1..T")
        codes.flags.writeable = False
        object.__setattr__(self, "codes", codes)

    @property
    def T(self) -> int:
        return self.codes.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.codes, minlength=self.M)

    def blocks(self) -> list:
        return [np.where(self.codes == m)[0] for m in range(self.M)]


def single_block(T: int) -> TimeGroupMap:
    """All periods in one block (M = 1)."""
    return TimeGroupMap(codes=np.zeros(T, dtype=np.int64), M=1)


def blocks_from_sizes(sizes) -> TimeGroupMap:
    """Build contiguous time blocks from their lengths."""
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise EmptyGroup("every time block needs at least one period")
    codes = np.repeat(np.arange(len(sizes)), sizes)
    return TimeGroupMap(codes=codes, M=len(sizes))
