"""Block upper triangular matrices with a nested partition structure.

A partition splits the index range into contiguous blocks.  A block upper
triangular matrix is dense below the surface but guarantees exact zeros
strictly below the block diagonal.  Values are immutable: growing a matrix
by one block column produces a new value, and accessors hand out copies.

The block-column stream text format is defined at the bottom; it is how a
sequence of growing matrices is described on disk, one new block column at
a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import as_matrix, format_matrix, parse_matrix


@dataclass(frozen=True)
class Partition:
    """Sizes of the contiguous diagonal blocks; all sizes are >= 1."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(b) for b in self.sizes)
        if any(b < 1 for b in sizes):
            raise ValueError(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def nblocks(self) -> int:
        return len(self.sizes)

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        # offsets[l] is the first index of block l; offsets[-1] == dim
        out = [0]
        for b in self.sizes:
            out.append(out[-1] + b)
        return tuple(out)

    def index_range(self, l: int) -> tuple[int, int]:
        if not 0 <= l < self.nblocks:
            raise IndexError(f"block index {l} out of range for {self.nblocks} blocks")
        off = self.offsets
        return off[l], off[l + 1]

    def merge_leading(self, l: int) -> "Partition":
        """Fuse blocks 0..l into a single block."""
        if not 0 <= l < self.nblocks:
            raise IndexError(f"block index {l} out of range for {self.nblocks} blocks")
        off = self.offsets
        return Partition((off[l + 1],) + self.sizes[l + 1 :])

    def append(self, b: int) -> "Partition":
        return Partition(self.sizes + (int(b),))


class BlockColumn:
    """One new block column: the part above the diagonal and the new
    diagonal block.

    ``top`` has shape (previous dimension, b) and ``diag`` shape (b, b).
    Both are copied and frozen on construction.
    """

    __slots__ = ("top", "diag")

    def __init__(self, top, diag, check_finite: bool = True):
        top = as_matrix(top, check_finite=check_finite).copy()
        diag = as_matrix(diag, check_finite=check_finite).copy()
        if diag.shape[0] != diag.shape[1]:
            raise ValueError(f"diagonal block must be square, got {diag.shape}")
        if top.shape[1] != diag.shape[0]:
            raise ValueError(
                f"column width mismatch: top {top.shape}, diag {diag.shape}"
            )
        top.setflags(write=False)
        diag.setflags(write=False)
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "diag", diag)

    def __setattr__(self, name, value):
        raise AttributeError("BlockColumn is immutable")

    @property
    def rows(self) -> int:
        return self.top.shape[0]

    @property
    def block_size(self) -> int:
        return self.diag.shape[0]

    def stacked(self) -> np.ndarray:
        """The full new column, top part over diagonal block."""
        return np.vstack([self.top, self.diag])

    def scaled(self, factor: float) -> "BlockColumn":
        return BlockColumn(self.top * factor, self.diag * factor, check_finite=False)


def extend_square(old: np.ndarray, top: np.ndarray, diag: np.ndarray) -> np.ndarray:
    """Grow a square array by one block column/row.

    The new strictly-lower band is set to exact zeros; existing entries are
    copied bitwise.
    """
    d = old.shape[0]
    b = diag.shape[0]
    new = np.empty((d + b, d + b))
    new[:d, :d] = old
    new[:d, d:] = top
    new[d:, :d] = 0.0
    new[d:, d:] = diag
    return new


class BlockTriangularMatrix:
    """Immutable block upper triangular matrix value.

    Construction validates squareness, the partition dimension, finiteness,
    and that everything strictly below the block diagonal is exactly zero.
    """

    __slots__ = ("_data", "partition")

    def __init__(self, data, partition):
        if not isinstance(partition, Partition):
            partition = Partition(tuple(partition))
        data = as_matrix(data).copy()
        if data.shape[0] != data.shape[1]:
            raise ValueError(f"matrix must be square, got {data.shape}")
        if data.shape[0] != partition.dim:
            raise ValueError(
                f"dimension {data.shape[0]} does not match partition dim {partition.dim}"
            )
        off = partition.offsets
        for l in range(1, partition.nblocks):
            r0, r1 = off[l], off[l + 1]
            if np.any(data[r0:r1, :r0] != 0.0):
                raise ValueError(
                    f"entries below the block diagonal are not zero (block row {l})"
                )
        data.setflags(write=False)
        object.__setattr__(self, "_data", data)
        object.__setattr__(self, "partition", partition)

    def __setattr__(self, name, value):
        raise AttributeError("BlockTriangularMatrix is immutable")

    @classmethod
    def empty(cls) -> "BlockTriangularMatrix":
        return cls._wrap(np.empty((0, 0)), Partition(()))

    @classmethod
    def _wrap(cls, data: np.ndarray, partition: Partition) -> "BlockTriangularMatrix":
        # trusted constructor: data already validated and owned by the caller
        obj = object.__new__(cls)
        data.setflags(write=False)
        object.__setattr__(obj, "_data", data)
        object.__setattr__(obj, "partition", partition)
        return obj

    @property
    def data(self) -> np.ndarray:
        """The backing array, read-only.  Copy before mutating."""
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    @property
    def nblocks(self) -> int:
        return self.partition.nblocks

    def block(self, i: int, j: int) -> np.ndarray:
        """Copy of block (i, j); blocks below the diagonal are zero."""
        r0, r1 = self.partition.index_range(i)
        c0, c1 = self.partition.index_range(j)
        return self._data[r0:r1, c0:c1].copy()

    def leading(self, l: int) -> "BlockTriangularMatrix":
        """The sub-matrix made of blocks 0..l (inclusive)."""
        if not 0 <= l < self.nblocks:
            raise IndexError(f"block index {l} out of range for {self.nblocks} blocks")
        d = self.partition.offsets[l + 1]
        return BlockTriangularMatrix._wrap(
            self._data[:d, :d].copy(), Partition(self.partition.sizes[: l + 1])
        )

    def append_block_column(self, col: BlockColumn) -> "BlockTriangularMatrix":
        """New matrix with one more block column/row at the trailing end."""
        if col.rows != self.dim:
            raise ValueError(
                f"column top has {col.rows} rows, matrix dimension is {self.dim}"
            )
        data = extend_square(self._data, col.top, col.diag)
        return BlockTriangularMatrix._wrap(data, self.partition.append(col.block_size))

    def merge_leading_blocks(self, l: int) -> "BlockTriangularMatrix":
        """Same entries, with blocks 0..l fused into one partition block."""
        return BlockTriangularMatrix._wrap(self._data, self.partition.merge_leading(l))

    def block_column(self, l: int) -> BlockColumn:
        """Block column l as a BlockColumn (top part and diagonal block)."""
        c0, c1 = self.partition.index_range(l)
        return BlockColumn(self._data[:c0, c0:c1], self._data[c0:c1, c0:c1],
                           check_finite=False)

    def block_columns(self) -> list[BlockColumn]:
        return [self.block_column(l) for l in range(self.nblocks)]


def matrix_from_columns(columns) -> BlockTriangularMatrix:
    """Assemble a block triangular matrix by appending each column in turn."""
    m = BlockTriangularMatrix.empty()
    for col in columns:
        m = m.append_block_column(col)
    return m


# ---------------------------------------------------------------------------
# Block-column stream text format.
#
# Line 1: the number of block columns.
# Then for each block column: a line with its block size b, followed by the
# full new column (top part stacked over the diagonal block) in the matrix
# text format of the dense module, i.e. a "rows cols" header plus rows.
# Row counts must be consistent: column j has prior-dimension + b_j rows.
# ---------------------------------------------------------------------------


def write_column_stream(path, columns) -> None:
    columns = list(columns)
    chunks = [f"{len(columns)}\n"]
    for col in columns:
        chunks.append(f"{col.block_size}\n")
        chunks.append(format_matrix(col.stacked()))
    with open(path, "w") as fh:
        fh.write("".join(chunks))


def read_column_stream(path) -> list[BlockColumn]:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty block-column stream file")
    pos = 0
    nblocks = int(lines[pos])
    pos += 1
    columns: list[BlockColumn] = []
    dim = 0
    for j in range(nblocks):
        if pos >= len(lines):
            raise ValueError(f"stream truncated before block column {j}")
        b = int(lines[pos])
        pos += 1
        if b < 1:
            raise ValueError(f"block column {j}: block size must be positive, got {b}")
        if pos >= len(lines):
            raise ValueError(f"stream truncated in block column {j}")
        header = lines[pos].split()
        if len(header) != 2:
            raise ValueError(f"block column {j}: bad matrix header {lines[pos]!r}")
        rows = int(header[0])
        stacked = parse_matrix("\n".join(lines[pos : pos + 1 + rows]))
        pos += 1 + rows
        if stacked.shape != (dim + b, b):
            raise ValueError(
                f"block column {j}: expected shape {(dim + b, b)}, got {stacked.shape}"
            )
        columns.append(BlockColumn(stacked[:dim], stacked[dim:]))
        dim += b
    if pos != len(lines):
        raise ValueError(f"trailing content after {nblocks} block columns")
    return columns
