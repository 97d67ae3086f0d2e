"""Explicit transition matrices for the two-block sweep family.

Every kernel is a dense row-stochastic matrix over an enumerated product
state space. Rows index the current state, columns the next state, and a
codec fixes the tuple ordering per chain:

  block          codec (X, Y, Z):
      P[(x,y,z), (x',y',z')] = P(x',y' | z) * P(z' | x',y')
  rotated block  codec (Z, X, Y):
      P[(z,x,y), (z',x',y')] = P(z' | x,y) * P(x',y' | z')
  out-of-order   codec (Y, Z, X):
      P[(y,z,x), (y',z',x')] = P(y' | x,z) * P(z' | x,y') * P(x' | z')
  xy-marginal    codec (X, Y):
      P[(x,y), (x',y')] = sum_z P(z | x,y) * P(x',y' | z)
  z-marginal     codec (Z,):
      P[z, z'] = sum_{x',y'} P(x',y' | z) * P(z' | x',y')

plus single-site sweeps in any of the six update orders (``gibbs_kernel``).
The block, rotated, and out-of-order sweeps compose the same three
single-coordinate update operators in cyclically shifted orders, which is
why their nonzero spectra coincide.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .finite_model import AXES, JointPmf3, conditional, marginal

#: Row-stochasticity tolerance for kernels and initial measures.
ROW_SUM_TOL = 1e-12

# einsum letters: current state coordinates and next state coordinates
_CUR = {"X": "x", "Y": "y", "Z": "z"}
_NXT = {"X": "a", "Y": "b", "Z": "c"}


@dataclass(frozen=True)
class StateCodec:
    """Bijection between variable tuples (in a fixed label order) and flat
    row/column indices, mixed-radix with the last label varying fastest."""

    labels: tuple[str, ...]
    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.sizes) or not self.labels:
            raise ValueError("labels and sizes must be nonempty and equal length")
        if len(set(self.labels)) != len(self.labels) or not set(self.labels) <= set(AXES):
            raise ValueError(f"labels must be distinct members of {AXES}")
        if any(s < 1 for s in self.sizes):
            raise ValueError("all sizes must be >= 1")

    @classmethod
    def for_labels(cls, pmf: JointPmf3, labels: Sequence[str]) -> "StateCodec":
        by_label = dict(zip(AXES, pmf.dims.shape))
        return cls(tuple(labels), tuple(by_label[lab] for lab in labels))

    @property
    def size(self) -> int:
        return int(np.prod(self.sizes))

    def encode(self, state: Sequence[int]) -> int:
        if len(state) != len(self.sizes):
            raise ValueError("state tuple has wrong length")
        flat = 0
        for i, n in zip(state, self.sizes):
            if not 0 <= i < n:
                raise ValueError(f"coordinate {i} out of range [0, {n})")
            flat = flat * n + i
        return flat

    def decode(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.size:
            raise ValueError(f"flat index {flat} out of range [0, {self.size})")
        out = []
        for n in reversed(self.sizes):
            flat, i = divmod(flat, n)
            out.append(i)
        return tuple(reversed(out))

    def state_label(self, flat: int) -> str:
        """Human-readable column label, e.g. "x0_y1_z2"."""
        return "_".join(
            f"{lab.lower()}{i}" for lab, i in zip(self.labels, self.decode(flat))
        )

    def flatten_canonical(self, table: np.ndarray) -> np.ndarray:
        """Ravel a table whose axes follow canonical (X, Y, Z) order into
        this codec's state order."""
        canon = sorted(self.labels, key=AXES.index)
        perm = [canon.index(lab) for lab in self.labels]
        return np.transpose(np.asarray(table, dtype=float), perm).ravel()


@dataclass(frozen=True, eq=False)
class Kernel:
    """Row-stochastic transition matrix plus the codec describing its rows."""

    codec: StateCodec
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        n = self.codec.size
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match codec size {n}")
        if (m < 0).any():
            raise ValueError("kernel entries must be nonnegative")
        if np.abs(m.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise ValueError("every kernel row must sum to 1")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def to_csv(self, path) -> None:
        """Dense dump with state labels on the header row and first column."""
        labels = [self.codec.state_label(j) for j in range(self.codec.size)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["state"] + labels)
            for i, row in enumerate(self.matrix):
                writer.writerow([labels[i]] + [format(v, ".17g") for v in row])


@dataclass(frozen=True, eq=False)
class InitialMeasure:
    """Probability vector over a codec's state space."""

    codec: StateCodec
    vector: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vector, dtype=float)
        if v.shape != (self.codec.size,):
            raise ValueError("vector length does not match codec size")
        if (v < 0).any() or abs(float(v.sum()) - 1.0) > ROW_SUM_TOL:
            raise ValueError("initial measure must be a probability vector")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)


class NuXZ(NamedTuple):
    """Pinned-(x, z) start measure in both of its working forms."""

    flat: InitialMeasure  # over codec (X, Y)
    lifted: InitialMeasure  # over codec (Z, X, Y); the Z slot is a dummy


def flatten_to_codec(pmf: JointPmf3, codec: StateCodec) -> np.ndarray:
    """Marginal of the pmf on the codec's variables, flattened to its state
    order. For a three-variable codec this is the full joint."""
    table = marginal(pmf, codec.labels).table
    return codec.flatten_canonical(table)


def _kernel_from_einsum(
    codec: StateCodec, subscripts: str, operands: Iterable[np.ndarray]
) -> Kernel:
    t = np.einsum(subscripts, *operands)
    n = codec.size
    return Kernel(codec, t.reshape(n, n))


def gibbs_kernel(pmf: JointPmf3, ordering: Sequence[str]) -> Kernel:
    """Single-site sweep updating each coordinate from its full conditional,
    in the given order, always conditioning on the freshest values.

    The codec is (X, Y, Z) regardless of the update order; any of the six
    orders leaves the input pmf invariant.
    """
    order = tuple(ordering)
    if sorted(order) != sorted(AXES):
        raise ValueError(f"ordering must be a permutation of {AXES}, got {order!r}")
    ones = np.ones(pmf.dims.shape)
    operands = [ones]
    subs = ["xyz"]
    drawn: set[str] = set()
    for label in order:
        others = tuple(a for a in AXES if a != label)
        cond = conditional(pmf, (label,), others)
        subs.append(
            "".join(_NXT[u] if u in drawn else _CUR[u] for u in others) + _NXT[label]
        )
        operands.append(cond.table)
        drawn.add(label)
    codec = StateCodec.for_labels(pmf, ("X", "Y", "Z"))
    return _kernel_from_einsum(codec, ",".join(subs) + "->xyzabc", operands)


def block_kernel(pmf: JointPmf3) -> Kernel:
    """Joint (X, Y) refresh given Z, then Z refresh. Rows depend only on z."""
    c_xy = conditional(pmf, ("X", "Y"), ("Z",)).table  # (z, x', y')
    c_z = conditional(pmf, ("Z",), ("X", "Y")).table  # (x', y', z')
    codec = StateCodec.for_labels(pmf, ("X", "Y", "Z"))
    ones = np.ones(pmf.dims.shape)
    return _kernel_from_einsum(codec, "xyz,zab,abc->xyzabc", [ones, c_xy, c_z])


def rotated_block_kernel(pmf: JointPmf3) -> Kernel:
    """Z refresh first, then the joint (X, Y) refresh given the new z.

    This is the one reordering of the block sweep that stays valid; rows
    depend only on (x, y).
    """
    c_z = conditional(pmf, ("Z",), ("X", "Y")).table  # (x, y, z')
    c_xy = conditional(pmf, ("X", "Y"), ("Z",)).table  # (z', x', y')
    codec = StateCodec.for_labels(pmf, ("Z", "X", "Y"))
    ones = np.ones((pmf.dims.nz, pmf.dims.nx, pmf.dims.ny))
    return _kernel_from_einsum(codec, "zxy,xyc,cab->zxycab", [ones, c_z, c_xy])


def ooo_kernel(pmf: JointPmf3) -> Kernel:
    """Out-of-order sweep: Y given (x, z), then Z given (x, y'), then X
    given z'. Splitting the joint (X, Y) refresh across iterations is what
    changes the invariant distribution.

    Rows never read the current y, so rows with equal (z, x) are identical.
    """
    c_y = conditional(pmf, ("Y",), ("X", "Z")).table  # (x, z, y')
    c_z = conditional(pmf, ("Z",), ("X", "Y")).table  # (x, y', z')
    c_x = conditional(pmf, ("X",), ("Z",)).table  # (z', x')
    codec = StateCodec.for_labels(pmf, ("Y", "Z", "X"))
    ones = np.ones((pmf.dims.ny, pmf.dims.nz, pmf.dims.nx))
    return _kernel_from_einsum(codec, "yzx,xzb,xbc,ca->yzxbca", [ones, c_y, c_z, c_x])


def marginal_xy_kernel(pmf: JointPmf3) -> Kernel:
    """Projection of the block sweep onto (X, Y); reversible with respect to
    the (X, Y)-marginal of the pmf."""
    c_z = conditional(pmf, ("Z",), ("X", "Y")).table  # (x, y, z)
    c_xy = conditional(pmf, ("X", "Y"), ("Z",)).table  # (z, x', y')
    codec = StateCodec.for_labels(pmf, ("X", "Y"))
    m = np.einsum("xyz,zab->xyab", c_z, c_xy)
    n = codec.size
    return Kernel(codec, m.reshape(n, n))


def marginal_z_kernel(pmf: JointPmf3) -> Kernel:
    """Projection of the block sweep onto Z; reversible with respect to the
    Z-marginal of the pmf."""
    c_xy = conditional(pmf, ("X", "Y"), ("Z",)).table  # (z, x', y')
    c_z = conditional(pmf, ("Z",), ("X", "Y")).table  # (x', y', z')
    codec = StateCodec.for_labels(pmf, ("Z",))
    m = np.einsum("zab,abc->zc", c_xy, c_z)
    return Kernel(codec, m)


def nu_z(pmf: JointPmf3, z: int) -> InitialMeasure:
    """Start measure pinning Z = z with X drawn from P(X | Z=z).

    Lives on the out-of-order codec (Y, Z, X). The Y slot is a dummy fixed
    at index 0: the out-of-order kernel never reads it, so any choice gives
    the same distribution after one step.
    """
    codec = StateCodec.for_labels(pmf, ("Y", "Z", "X"))
    if not 0 <= z < pmf.dims.nz:
        raise ValueError(f"z index {z} out of range [0, {pmf.dims.nz})")
    c_x = conditional(pmf, ("X",), ("Z",)).table  # (z, x)
    v = np.zeros(codec.size)
    for x in range(pmf.dims.nx):
        v[codec.encode((0, z, x))] = c_x[z, x]
    return InitialMeasure(codec, v)


def nu_xz(pmf: JointPmf3, x: int, z: int) -> NuXZ:
    """Start measure pinning X = x with Y drawn from P(Y | X=x, Z=z).

    Returned both flat on codec (X, Y) and lifted to the rotated codec
    (Z, X, Y) with a dummy Z slot at index 0 (the rotated kernel never reads
    the current z). One rotated step from the lift has the same (X, Y)
    distribution as one xy-marginal step from the flat form, exactly.
    """
    if not 0 <= x < pmf.dims.nx:
        raise ValueError(f"x index {x} out of range [0, {pmf.dims.nx})")
    if not 0 <= z < pmf.dims.nz:
        raise ValueError(f"z index {z} out of range [0, {pmf.dims.nz})")
    c_y = conditional(pmf, ("Y",), ("X", "Z")).table  # (x, z, y)

    flat_codec = StateCodec.for_labels(pmf, ("X", "Y"))
    flat = np.zeros(flat_codec.size)
    lift_codec = StateCodec.for_labels(pmf, ("Z", "X", "Y"))
    lifted = np.zeros(lift_codec.size)
    for y in range(pmf.dims.ny):
        mass = c_y[x, z, y]
        flat[flat_codec.encode((x, y))] = mass
        lifted[lift_codec.encode((0, x, y))] = mass
    return NuXZ(InitialMeasure(flat_codec, flat), InitialMeasure(lift_codec, lifted))
