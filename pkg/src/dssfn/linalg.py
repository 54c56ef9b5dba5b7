"""Dense linear-algebra kernel shared by every other module.

Matrices are plain two-dimensional ``float64`` numpy arrays. The helpers here
add shape checking with readable errors, a Cholesky factorization that reports
the failing pivot, and a seeded random-matrix stream that is reproducible
across platforms.
"""
from __future__ import annotations

import io
import math
from typing import TextIO

import numpy as np
from scipy.linalg import lapack
from scipy.linalg import solve_triangular

__all__ = [
    "ShapeError",
    "NotPositiveDefiniteError",
    "as_matrix",
    "mat_mul",
    "transpose",
    "frobenius_norm_sq",
    "SPDFactor",
    "cholesky",
    "solve_spd",
    "SeededRng",
    "random_matrix",
    "spectral_norm",
    "GramSystem",
    "format_matrix",
    "dump_matrix",
]

SYMMETRY_RTOL = 1e-10


class ShapeError(ValueError):
    """Raised when matrix dimensions do not conform."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization hit a non-positive pivot.

    ``pivot`` is the zero-based index of the leading minor that failed.
    """

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(
            message
            or f"matrix is not positive definite (pivot {pivot} is non-positive); "
            "increase the regularization (gamma or mu)"
        )


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array, raising on anything else."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must have positive dimensions, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf")
    return m


def mat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def transpose(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.T)


def frobenius_norm_sq(a: np.ndarray) -> float:
    # correctly rounded sum: independent of memory order, so a and a.T agree exactly
    return math.fsum(np.square(a).ravel().tolist())


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value."""
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


class SPDFactor:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    Built once and reused for many right-hand sides; the explicit inverse is
    never formed.
    """

    def __init__(self, lower: np.ndarray):
        self.lower = lower

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if rhs.shape[0] != self.dim:
            raise ShapeError(f"cannot solve {self.dim}x{self.dim} system with rhs {rhs.shape[0]}x{rhs.shape[1]}")
        z = solve_triangular(self.lower, rhs, lower=True, check_finite=False)
        return solve_triangular(self.lower, z, lower=True, trans="T", check_finite=False)


def cholesky(s: np.ndarray) -> SPDFactor:
    """Factor ``s = L Lᵀ``.

    Raises :class:`ShapeError` for non-square or asymmetric input and
    :class:`NotPositiveDefiniteError` carrying the failing pivot index.
    """
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeError(f"SPD system must be square, got {s.shape}")
    scale = max(float(np.max(np.abs(s))), np.finfo(float).tiny)
    if np.max(np.abs(s - s.T)) > SYMMETRY_RTOL * scale:
        raise ShapeError("SPD system is not symmetric within tolerance")
    lower, info = lapack.dpotrf(s, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:  # pragma: no cover - argument error inside LAPACK
        raise ValueError(f"dpotrf rejected argument {-info}")
    return SPDFactor(lower)


def solve_spd(s: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``s @ z = rhs`` for symmetric positive-definite ``s``."""
    if rhs.shape[0] != s.shape[0]:
        raise ShapeError(f"cannot solve {s.shape[0]}x{s.shape[1]} system with rhs {rhs.shape[0]}x{rhs.shape[1]}")
    return cholesky(s).solve(rhs)


DUAL_MIN_SHIFT = 1e-6


class GramSystem:
    """Cached solver for ``X (Y Yᵀ + shift·I) = rhs`` with ``Y`` of shape ``d x J``.

    When ``J < d`` and ``shift`` is not negligible the factorization is done on
    the smaller ``J x J`` matrix ``YᵀY + shift·I`` (push-through/Woodbury
    identities); otherwise on the ``d x d`` Gram matrix directly. Either way a
    single Cholesky factor is built once and reused.
    """

    def __init__(self, y: np.ndarray, shift: float):
        if shift < 0:
            raise ValueError(f"shift must be non-negative, got {shift}")
        self.y = y
        self.shift = float(shift)
        d, j = y.shape
        # the Woodbury form divides by shift, so a tiny shift loses precision
        top = float(np.einsum("ij,ij->j", y, y).max()) if y.size else 0.0
        self.dual = j < d and self.shift > DUAL_MIN_SHIFT * top
        if self.dual:
            self.factor = cholesky(y.T @ y + self.shift * np.eye(j))
        else:
            self.factor = cholesky(y @ y.T + self.shift * np.eye(d))

    @property
    def dim(self) -> int:
        return self.y.shape[0]

    def ridge(self, t: np.ndarray) -> np.ndarray:
        """Return ``t Yᵀ (Y Yᵀ + shift·I)^-1``; ``t`` has one column per sample."""
        if t.shape[1] != self.y.shape[1]:
            raise ShapeError(f"targets have {t.shape[1]} samples, features have {self.y.shape[1]}")
        if self.dual:
            # push-through: t Yᵀ (YYᵀ + cI)^-1 = t (YᵀY + cI)^-1 Yᵀ
            return self.factor.solve(t.T).T @ self.y.T
        return self.factor.solve((t @ self.y.T).T).T

    def apply_inverse(self, b: np.ndarray) -> np.ndarray:
        """Return ``b (Y Yᵀ + shift·I)^-1`` for ``b`` with ``dim`` columns."""
        if b.shape[1] != self.dim:
            raise ShapeError(f"expected {self.dim} columns, got {b.shape[1]}")
        if self.dual:
            # Woodbury: b (YYᵀ + cI)^-1 = (b - b Y (YᵀY + cI)^-1 Yᵀ) / c
            inner = self.factor.solve((b @ self.y).T).T @ self.y.T
            return (b - inner) / self.shift
        return self.factor.solve(b.T).T


class SeededRng:
    """Deterministic matrix stream.

    Uses numpy's PCG64 bit generator (a permuted linear congruential
    generator). ``Generator.random`` consumes one 64-bit draw per double, so
    the stream is the same on every platform for a given seed. Sub-streams are
    derived with :class:`numpy.random.SeedSequence` spawn keys, which lets all
    simulated nodes regenerate the same random block without communicating.
    """

    algorithm = "PCG64"

    def __init__(self, seed: int, stream: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.stream)))

    def substream(self, *key: int) -> "SeededRng":
        return SeededRng(self.seed, self.stream + tuple(key))

    def uniform(self, rows: int, cols: int) -> np.ndarray:
        """i.i.d. uniform entries on [-1, 1)."""
        return 2.0 * self._gen.random((rows, cols)) - 1.0

    def integers(self, high: int, size: int | None = None):
        return self._gen.integers(0, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def random_matrix(rng: SeededRng, rows: int, cols: int, scale: float | None = None) -> np.ndarray:
    """Draw a ``rows x cols`` matrix uniform on ``[-scale, scale]``.

    ``scale`` defaults to ``1/sqrt(cols)`` (the fan-in of the layer the matrix
    feeds).
    """
    if rows < 1 or cols < 1:
        raise ShapeError(f"random matrix needs positive dimensions, got {rows}x{cols}")
    if scale is None:
        scale = 1.0 / np.sqrt(cols)
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return scale * rng.uniform(rows, cols)


def format_matrix(a: np.ndarray) -> str:
    """Debug dump: one row per line, single spaces, round-trippable decimals."""
    buf = io.StringIO()
    dump_matrix(a, buf)
    return buf.getvalue()


def dump_matrix(a: np.ndarray, fh: TextIO) -> None:
    for row in np.atleast_2d(a):
        fh.write(" ".join(repr(float(x)) for x in row))
        fh.write("\n")
