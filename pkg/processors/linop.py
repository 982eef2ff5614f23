"""
Module đại số tuyến tính hữu hạn: sparse complex matrix, ước lượng operator
norm (largest singular value) bằng power iteration, và phép nhân hữu tỉ chính xác.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from sympy import Rational
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from config.settings import DEFAULT_SEED, OP_NORM_MAX_ITER, OP_NORM_TOL
from utils.errors import DimensionMismatchError, InvalidParameterError
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Complex matrix dạng CSR; không có tọa độ trùng, không có explicit zero"""
    csr: sp.csr_matrix

    @classmethod
    def from_entries(cls, rows, cols, values, shape: Tuple[int, int]) -> 'SparseMatrix':
        """
        Build từ coordinate format; tọa độ trùng được cộng dồn

        Args:
            rows, cols: Chỉ số hàng/cột
            values: Giá trị complex
            shape: (số hàng, số cột)
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=complex)
        nrows, ncols = int(shape[0]), int(shape[1])
        if not (len(rows) == len(cols) == len(values)):
            raise DimensionMismatchError("rows, cols and values must have equal length")
        if len(rows) and (rows.min() < 0 or cols.min() < 0 or rows.max() >= nrows or cols.max() >= ncols):
            raise DimensionMismatchError(f"entry index out of range for shape {shape}")
        coo = sp.coo_matrix((values, (rows, cols)), shape=(nrows, ncols), dtype=complex)
        csr = coo.tocsr()
        csr.sum_duplicates()
        csr.eliminate_zeros()
        return cls(csr)

    @classmethod
    def from_dense(cls, array) -> 'SparseMatrix':
        csr = sp.csr_matrix(np.asarray(array, dtype=complex))
        csr.eliminate_zeros()
        return cls(csr)

    @classmethod
    def zeros(cls, shape: Tuple[int, int]) -> 'SparseMatrix':
        return cls(sp.csr_matrix(tuple(int(s) for s in shape), dtype=complex))

    @classmethod
    def identity(cls, n: int) -> 'SparseMatrix':
        return cls(sp.identity(n, dtype=complex, format='csr'))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.csr.shape

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.csr @ v

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        return self.csr.conj().T @ v

    def adjoint(self) -> 'SparseMatrix':
        return SparseMatrix(self.csr.conj().T.tocsr())

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def entries(self) -> Dict[Tuple[int, int], complex]:
        coo = self.csr.tocoo()
        return {(int(i), int(j)): complex(v) for i, j, v in zip(coo.row, coo.col, coo.data)}

    def submatrix(self, rows: slice, cols: slice) -> 'SparseMatrix':
        block = self.csr[rows, cols].tocsr()
        block.eliminate_zeros()
        return SparseMatrix(block)

    def norm_1(self) -> float:
        if self.nnz == 0:
            return 0.0
        return float(abs(self.csr).sum(axis=0).max())

    def norm_inf(self) -> float:
        if self.nnz == 0:
            return 0.0
        return float(abs(self.csr).sum(axis=1).max())

    def frobenius(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.csr.data) ** 2)))

    def upper_bound(self) -> float:
        """√(‖A‖₁‖A‖_∞) >= ‖A‖"""
        return float(np.sqrt(self.norm_1() * self.norm_inf()))

    def max_abs_difference(self, other: 'SparseMatrix') -> float:
        if self.shape != other.shape:
            raise DimensionMismatchError(f"shape {self.shape} != {other.shape}")
        diff = (self.csr - other.csr)
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    def __add__(self, other: 'SparseMatrix') -> 'SparseMatrix':
        if self.shape != other.shape:
            raise DimensionMismatchError(f"shape {self.shape} != {other.shape}")
        out = (self.csr + other.csr).tocsr()
        out.eliminate_zeros()
        return SparseMatrix(out)

    def __sub__(self, other: 'SparseMatrix') -> 'SparseMatrix':
        return self + other.scaled(-1.0)

    def scaled(self, c: complex) -> 'SparseMatrix':
        out = (self.csr * complex(c)).tocsr()
        out.eliminate_zeros()
        return SparseMatrix(out)


@dataclass
class NormEstimate:
    value: float
    left: np.ndarray
    right: np.ndarray
    iterations: int
    residual: float
    upper_bound: float
    converged: bool
    seed: int

    def __float__(self):
        return self.value


def _power_iteration(A: SparseMatrix, tol: float, max_iter: int, seed: int) -> NormEstimate:
    nrows, ncols = A.shape
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(ncols) + 1j * rng.standard_normal(ncols)
    v /= np.linalg.norm(v)

    value, prev = 0.0, -1.0
    w = A.matvec(v)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        value = float(np.linalg.norm(w))
        if value == 0.0:
            break
        u = A.rmatvec(w)
        unorm = np.linalg.norm(u)
        if abs(value - prev) < tol * value:
            converged = True
            break
        prev = value
        v = u / unorm
        w = A.matvec(v)

    if value == 0.0:
        return NormEstimate(0.0, np.zeros(nrows, dtype=complex), v, iterations,
                            0.0, A.upper_bound(), A.nnz == 0, seed)

    left = w / value
    residual = float(np.linalg.norm(A.rmatvec(left) - value * v))
    return NormEstimate(value, left, v, iterations, residual, A.upper_bound(), converged, seed)


def op_norm(A: SparseMatrix, tol: float = OP_NORM_TOL, max_iter: int = OP_NORM_MAX_ITER,
            seed: int = DEFAULT_SEED) -> NormEstimate:
    """
    Ước lượng ‖A‖ bằng power iteration trên A*A

    value = ‖A v‖ với v là right witness (unit), nên luôn là lower bound
    được chứng nhận; upper_bound = √(‖A‖₁‖A‖_∞).

    Args:
        A: Sparse matrix
        tol: Tolerance tương đối giữa hai lần lặp
        max_iter: Số vòng lặp tối đa
        seed: Seed cho vector khởi tạo

    Returns:
        NormEstimate
    """
    if tol <= 0:
        raise InvalidParameterError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise InvalidParameterError(f"max_iter must be >= 1, got {max_iter}")

    nrows, ncols = A.shape
    if nrows == 0 or ncols == 0 or A.nnz == 0:
        return NormEstimate(0.0, np.zeros(nrows, dtype=complex), np.zeros(ncols, dtype=complex),
                            0, 0.0, 0.0, True, seed)

    estimate = _power_iteration(A, tol, max_iter, seed)
    if not estimate.converged:
        logger.debug(f"op_norm: no convergence after {max_iter} iterations, restarting with seed {seed + 1}")
        retry = _power_iteration(A, tol, max_iter, seed + 1)
        if retry.value > estimate.value:
            estimate = retry
        if not estimate.converged:
            logger.warning(
                f"op_norm unconverged on {A.shape} matrix: value {estimate.value:.6g}, "
                f"residual {estimate.residual:.2e}"
            )
    return estimate


def to_rational(value) -> Rational:
    return Rational(value)


def rational_matrix(entries: Dict[Tuple[int, int], object], shape: Tuple[int, int]) -> DomainMatrix:
    """
    Build sparse DomainMatrix trên QQ từ dict {(i, j): rational}

    Args:
        entries: Giá trị hữu tỉ (int, Fraction, Rational, chuỗi 'p/q')
        shape: Kích thước
    """
    dod: Dict[int, Dict[int, object]] = {}
    for (i, j), value in entries.items():
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise DimensionMismatchError(f"entry ({i}, {j}) out of range for shape {shape}")
        q = QQ.from_sympy(to_rational(value))
        if q:
            dod.setdefault(i, {})[j] = q
    return DomainMatrix(dod, tuple(shape), QQ)


def exact_apply(A: DomainMatrix, v: Sequence) -> List[Rational]:
    """
    Tính A·v chính xác (không làm tròn)

    Args:
        A: Rational matrix (DomainMatrix trên QQ)
        v: Vector hữu tỉ

    Returns:
        List sympy Rational
    """
    nrows, ncols = A.shape
    if len(v) != ncols:
        raise DimensionMismatchError(f"matrix has {ncols} columns but vector has length {len(v)}")
    column = rational_matrix({(i, 0): x for i, x in enumerate(v)}, (ncols, 1))
    result = A.convert_to(QQ) * column
    return [Rational(x) for x in result.to_Matrix()]
