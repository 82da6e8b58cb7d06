"""Sparse symmetric matrices from Matrix Market files and the quadratic
``f(x) = x'Ax/2 - b'x`` with ``b = Ae``.

Only the ``coordinate real {symmetric|general}`` subset of the exchange
format is accepted.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from ._kernels import csr_matvec, jit
from .core import Problem, SpectralBounds


class MatrixMarketError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class MalformedHeader(MatrixMarketError):
    pass


class IndexOutOfRange(MatrixMarketError):
    pass


class NonSquare(MatrixMarketError):
    pass


class UnsupportedField(MatrixMarketError):
    pass


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Square matrix in compressed-row form with sorted column indices."""

    n: int
    row_offsets: np.ndarray
    column_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        indices = np.ascontiguousarray(self.column_indices, dtype=np.int64)
        data = np.ascontiguousarray(self.values, dtype=float)
        if indptr.shape != (self.n + 1,) or indptr[0] != 0 or indptr[-1] != data.shape[0]:
            raise ValueError("inconsistent row offsets")
        if indices.shape != data.shape:
            raise ValueError("column indices and values differ in length")
        for arr in (indptr, indices, data):
            arr.setflags(write=False)
        object.__setattr__(self, "row_offsets", indptr)
        object.__setattr__(self, "column_indices", indices)
        object.__setattr__(self, "values", data)

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def from_coo(cls, n, rows, cols, vals) -> "SparseMatrix":
        """Build from 0-based triplets; duplicates are summed in input order."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            new = np.ones(rows.size, dtype=bool)
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(new)
            # stable sort keeps file order inside each duplicate group
            summed = np.add.reduceat(vals, starts) if starts.size < vals.size else vals
            rows, cols, vals = rows[starts], cols[starts], summed
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n, indptr, cols, vals)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("need a square 2-D array")
        rows, cols = np.nonzero(a)
        return cls.from_coo(a.shape[0], rows, cols, a[rows, cols])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.row_offsets))
        out[rows, self.column_indices] = self.values
        return out

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.n)
        rows = np.repeat(np.arange(self.n), np.diff(self.row_offsets))
        on = rows == self.column_indices
        d[rows[on]] = self.values[on]
        return d

    def is_symmetric(self) -> bool:
        t = self.transpose()
        return (
            np.array_equal(self.row_offsets, t.row_offsets)
            and np.array_equal(self.column_indices, t.column_indices)
            and np.array_equal(self.values, t.values)
        )

    def transpose(self) -> "SparseMatrix":
        rows = np.repeat(np.arange(self.n), np.diff(self.row_offsets))
        return SparseMatrix.from_coo(self.n, self.column_indices, rows, self.values)

    def structurally_equal(self, other: "SparseMatrix") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.column_indices, other.column_indices)
            and np.array_equal(self.values, other.values)
        )


def identity(n: int) -> SparseMatrix:
    return SparseMatrix(n, np.arange(n + 1), np.arange(n), np.ones(n))


# ---------------------------------------------------------------------------
# Matrix Market


def parse_matrix_market(source) -> SparseMatrix:
    """Parse a Matrix Market coordinate file.

    ``source`` may be a path, text, bytes, or an open text/binary stream.
    Symmetric files store one triangle; the other is mirrored here.
    """
    lines = _lines(source)
    lineno = 0
    header = None
    for lineno, raw in enumerate(lines, start=1):
        header = raw.strip()
        break
    if not header or not header.lower().startswith("%%matrixmarket"):
        raise MalformedHeader("missing %%MatrixMarket banner", lineno or 1)
    tokens = header.split()
    if len(tokens) != 5:
        raise MalformedHeader(f"expected 5 banner fields, got {len(tokens)}", lineno)
    obj, fmt, fld, sym = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise MalformedHeader(f"unsupported object {tokens[1]!r}", lineno)
    if fmt != "coordinate":
        raise UnsupportedField(f"unsupported format {tokens[2]!r}; only coordinate", lineno)
    if fld not in ("real", "double", "integer"):
        raise UnsupportedField(f"unsupported field {tokens[3]!r}", lineno)
    if sym not in ("symmetric", "general"):
        raise UnsupportedField(f"unsupported symmetry {tokens[4]!r}", lineno)

    size = None
    rows, cols, vals = [], [], []
    for lineno, raw in enumerate(lines, start=lineno + 1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if size is None:
            if len(parts) != 3:
                raise MalformedHeader("size line must be 'nrows ncols nnz'", lineno)
            try:
                nrows, ncols, nnz = (int(p) for p in parts)
            except ValueError:
                raise MalformedHeader(f"bad size line {line!r}", lineno) from None
            if nrows != ncols:
                raise NonSquare(f"matrix is {nrows}x{ncols}", lineno)
            if nrows < 1 or nnz < 0:
                raise MalformedHeader(f"bad dimensions {line!r}", lineno)
            size = (nrows, nnz)
            continue
        if len(parts) != 3:
            raise MalformedHeader(f"expected 'i j value', got {line!r}", lineno)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MalformedHeader(f"bad entry {line!r}", lineno) from None
        n = size[0]
        if not (1 <= i <= n and 1 <= j <= n):
            raise IndexOutOfRange(f"entry ({i}, {j}) outside {n}x{n}", lineno)
        if sym == "symmetric" and j > i:
            raise IndexOutOfRange(f"symmetric file stores upper entry ({i}, {j})", lineno)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if size is None:
        raise MalformedHeader("missing size line", lineno + 1)
    n, nnz = size
    if len(vals) != nnz:
        raise MalformedHeader(f"size line promises {nnz} entries, found {len(vals)}", lineno)

    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if sym == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    return SparseMatrix.from_coo(n, rows, cols, vals)


def read_matrix_market(path) -> SparseMatrix:
    with open(path, "r", encoding="ascii") as fh:
        return parse_matrix_market(fh)


def write_matrix_market(matrix: SparseMatrix, target, symmetric=None, comment=None) -> None:
    """Write coordinate format; symmetric matrices store the lower triangle."""
    if symmetric is None:
        symmetric = matrix.is_symmetric()
    rows = np.repeat(np.arange(matrix.n), np.diff(matrix.row_offsets))
    cols, vals = matrix.column_indices, matrix.values
    if symmetric:
        keep = cols <= rows
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    out = io.StringIO()
    out.write(f"%%MatrixMarket matrix coordinate real {'symmetric' if symmetric else 'general'}\n")
    for c in (comment or "").splitlines():
        out.write(f"% {c}\n")
    out.write(f"{matrix.n} {matrix.n} {vals.shape[0]}\n")
    for i, j, v in zip(rows, cols, vals):
        out.write(f"{i + 1} {j + 1} {float(v)!r}\n")
    text = out.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="ascii") as fh:
            fh.write(text)


def _lines(source):
    if hasattr(source, "read"):
        data = source.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, os.PathLike) or (
        isinstance(source, str) and "\n" not in source and os.path.exists(source)
    ):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("ascii")
    return iter(data.splitlines())


# ---------------------------------------------------------------------------
# quadratic objective


def matvec(a: SparseMatrix, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float).ravel()
    if x.shape[0] != a.n:
        raise ValueError(f"dimension mismatch: matrix is {a.n}x{a.n}, vector has {x.shape[0]}")
    return csr_matvec(a.row_offsets, a.column_indices, a.values, x)


@jit
def _quadratic_grad(x, args):
    indptr, indices, data, b = args
    return csr_matvec(indptr, indices, data, x) - b


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    matrix: SparseMatrix
    rhs: np.ndarray
    problem: Problem = field(repr=False)

    @property
    def minimizer(self) -> np.ndarray:
        return np.ones(self.matrix.n)


def build_quadratic(a: SparseMatrix, name="quadratic", spectral_bounds=None) -> QuadraticProblem:
    if not a.is_symmetric():
        raise ValueError("quadratic objective needs a symmetric matrix")
    b = matvec(a, np.ones(a.n))
    args = (a.row_offsets, a.column_indices, a.values, b)

    def value(x):
        x = np.ascontiguousarray(x, dtype=float).ravel()
        return 0.5 * K.dot(x, matvec(a, x)) - K.dot(b, x)

    problem = Problem(
        dimension=a.n,
        value_at=value,
        gradient_at=lambda x: _quadratic_grad(np.ascontiguousarray(x, dtype=float).ravel(), args),
        minimizer=np.ones(a.n),
        spectral_bounds=spectral_bounds,
        name=name,
        kernel=(_quadratic_grad, args),
    )
    return QuadraticProblem(a, b, problem)


# ---------------------------------------------------------------------------
# spectral bounds


def _power(apply, n, max_iters, tol, rng):
    v = rng.standard_normal(n)
    v /= K.norm(v)
    mu = math.nan
    for _ in range(max_iters):
        w = apply(v)
        new_mu = K.dot(v, w)
        w_norm = K.norm(w)
        if w_norm == 0:
            return 0.0
        v = w / w_norm
        if abs(new_mu - mu) <= tol * abs(new_mu):
            return new_mu
        mu = new_mu
    raise NoConvergence(f"power iteration did not settle within {max_iters} iterations")


def estimate_spectral_bounds(
    a: SparseMatrix, max_iters: int = 20_000, tol: float = 1e-10, seed: int = 0, widen: float = 1.05
) -> SpectralBounds:
    """Bracket the spectrum of a symmetric positive definite matrix.

    The largest eigenvalue comes from power iteration on ``A``, the smallest
    from power iteration on ``sigma I - A`` with ``sigma = 1.01 * lambda_max``.
    The results are widened by ``widen`` on each side.  Not certified.
    """
    rng = np.random.default_rng(seed)
    if a.n == 1:
        lam = float(a.values[0]) if a.nnz else 0.0
        if lam <= 0:
            raise ValueError("matrix is not positive definite")
        return SpectralBounds(lam / widen, lam * widen)
    hi = _power(lambda v: matvec(a, v), a.n, max_iters, tol, rng)
    if hi <= 0:
        raise ValueError("matrix is not positive definite")
    sigma = 1.01 * hi
    top = _power(lambda v: sigma * v - matvec(a, v), a.n, max_iters, tol, rng)
    lo = sigma - top
    if not lo > 0:
        raise ValueError(f"matrix does not look positive definite (lambda_min estimate {lo})")
    return SpectralBounds(lo / widen, hi * widen)
