"""
Module block operator trên reduced free product: ξ ↦ P_m(a*·ξ) từ E_n vào E_m,
tách theo cell, kiểm tra cận √5·C và đối chiếu với group algebra của
dihedral-infinity.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from config.settings import (
    DEFAULT_SEED, HAAGERUP_ITERS, HAAGERUP_STARTS, OP_NORM_TOL, RATIO_SLACK, SHOW_PROGRESS,
)
from freeprod.cells import CellLabel, cell_memberships
from freeprod.components import ComponentAlgebra, component_from_cyclic
from freeprod.words import FreeProduct, FreeWord, get_free_product
from groups.models import make_model
from groups.spheres import sphere
from processors.filtration import FilteredVector, conv_block
from processors.linop import SparseMatrix, op_norm
from utils.errors import DimensionMismatchError, InvalidParameterError
from utils.logger import get_logger, log_banner

logger = get_logger(__name__)

FreeCoefficients = Union[Dict[FreeWord, complex], np.ndarray]


@dataclass
class FreeBlockStructure:
    """Entry (row, col) của P_m(y*·z) = coef, với y = 𝓑_k[left]"""
    rows: np.ndarray
    cols: np.ndarray
    left: np.ndarray
    coefs: np.ndarray
    shape: Tuple[int, int]


def free_block_structure(fp: FreeProduct, k: int, m: int, n: int) -> FreeBlockStructure:
    """
    Khai triển y*z cho mọi y ∈ 𝓑_k, z ∈ 𝓑_n và giữ phần degree m (cached trên fp)
    """
    key = ('block', k, m, n)
    cached = fp.tables.get(key)
    if cached is not None:
        return cached

    bk, bn = fp.basis(k), fp.basis(n)
    index_m = fp.index(m)
    rows, cols, left, coefs = [], [], [], []
    if abs(m - n) <= k:
        for j, z in enumerate(bn):
            for i, y in enumerate(bk):
                for word, coef in fp.reduce_product(y, z).items():
                    if word.length != m:
                        continue
                    rows.append(index_m[word])
                    cols.append(j)
                    left.append(i)
                    coefs.append(coef)

    structure = FreeBlockStructure(
        rows=np.asarray(rows, dtype=np.int64),
        cols=np.asarray(cols, dtype=np.int64),
        left=np.asarray(left, dtype=np.int64),
        coefs=np.asarray(coefs, dtype=complex),
        shape=(len(index_m), len(bn)),
    )
    fp.tables[key] = structure
    logger.debug(f"{fp.name}: block structure (k={k}, m={m}, n={n}) has {len(rows)} entries")
    return structure


def _coefficient_vector(fp: FreeProduct, a: FreeCoefficients, k: Optional[int]) -> Tuple[int, np.ndarray]:
    if isinstance(a, dict):
        degrees = {w.length for w in a}
        if len(degrees) > 1:
            raise InvalidParameterError(f"a must be supported on a single 𝓑_k, got degrees {sorted(degrees)}")
        if degrees:
            k_a = degrees.pop()
            if k is not None and k != k_a:
                raise InvalidParameterError(f"a is supported on 𝓑_{k_a}, not 𝓑_{k}")
            k = k_a
        if k is None:
            raise InvalidParameterError("k is required when a is empty")
        index = fp.index(k)
        vec = np.zeros(len(index), dtype=complex)
        for word, coef in a.items():
            vec[index[word]] += complex(coef)
        return k, vec

    if k is None:
        raise InvalidParameterError("k is required when a is given as a vector")
    vec = np.asarray(a, dtype=complex)
    expected = len(fp.basis(k))
    if vec.shape != (expected,):
        raise DimensionMismatchError(f"a has shape {vec.shape}, expected ({expected},)")
    return k, vec


def free_block_matrix(fp: FreeProduct, a: FreeCoefficients, m: int, n: int,
                      k: Optional[int] = None) -> SparseMatrix:
    k, vec = _coefficient_vector(fp, a, k)
    structure = free_block_structure(fp, k, m, n)
    values = np.conj(vec[structure.left]) * structure.coefs
    return SparseMatrix.from_entries(structure.rows, structure.cols, values, structure.shape)


def fp_block(a: FreeCoefficients, m: int, n: int, A1: ComponentAlgebra, A2: ComponentAlgebra,
             k: Optional[int] = None) -> SparseMatrix:
    """
    Ma trận của ξ ↦ P_m(a*·ξ) trên basis 𝓑_n → 𝓑_m

    Args:
        a: Dict {FreeWord: hệ số} trên 𝓑_k, hoặc vector theo thứ tự của 𝓑_k
        m: Degree hàng
        n: Degree cột
        A1, A2: Component algebra
        k: Degree của a (bắt buộc khi a là vector)

    Returns:
        SparseMatrix kích thước |𝓑_m| x |𝓑_n|
    """
    return free_block_matrix(get_free_product(A1, A2), a, m, n, k)


# ----------------------------------------------------------------------
# Cell decomposition
# ----------------------------------------------------------------------
# ‖P_cell(a*ξ)‖ <= factor·C‖a‖₂‖ξ‖₂ cho từng họ cell; 1 + 2² = 5
FAMILY_FACTORS = {'P': 1.0, 'Q': 2.0, 'PT': 1.0, 'PS': 1.0}

CellAssigner = Callable[[FreeWord, int, int], List[CellLabel]]


def _ends_with(word: FreeWord, suffix: FreeWord) -> bool:
    if suffix.is_identity():
        return True
    return len(suffix) <= len(word) and word.letters[len(word) - len(suffix):] == suffix.letters


def _entry_fits_cell(cell: CellLabel, y: FreeWord, z: FreeWord) -> bool:
    """y = w*·u·s và z = w*·v·t: y kết thúc bằng s, z kết thúc bằng t"""
    if cell.variant in ('P', 'Q', 'PS') and not _ends_with(y, cell.s):
        return False
    if cell.variant in ('P', 'Q', 'PT') and not _ends_with(z, cell.t):
        return False
    return True


@dataclass
class CellBlockReport:
    k: int
    m: int
    n: int
    norm: float
    a_norm: float = 0.0
    constant: Optional[float] = None
    cell_norms: Dict[str, float] = field(default_factory=dict)
    family_norms: Dict[str, float] = field(default_factory=dict)
    overlapping_rows: int = 0
    uncovered_rows: int = 0
    shared_support_pairs: int = 0
    structure_violations: int = 0
    tol: float = 1e-6

    @property
    def max_cell_norm(self) -> float:
        return max(self.cell_norms.values(), default=0.0)

    def family_bound(self, variant: str) -> Optional[float]:
        if self.constant is None:
            return None
        return FAMILY_FACTORS[variant] * self.constant * self.a_norm

    @property
    def bound_violations(self) -> List[str]:
        """Cell / họ cell có norm vượt factor·C‖a‖₂"""
        if self.constant is None:
            return []
        out = []
        for label, value in list(self.cell_norms.items()) + list(self.family_norms.items()):
            variant = label.split('(', 1)[0]
            if variant in FAMILY_FACTORS and value > self.family_bound(variant) + self.tol:
                out.append(label)
        return out

    @property
    def within_bounds(self) -> Optional[bool]:
        if self.constant is None:
            return None
        return not self.bound_violations

    @property
    def consistent(self) -> bool:
        """Range các cell trực giao, phủ hết hàng và khớp dạng y, z; max ‖cell‖ <= ‖B‖ <= √(Σ ‖cell‖²)"""
        upper = math.sqrt(sum(v * v for v in self.cell_norms.values()))
        return (self.overlapping_rows == 0
                and self.uncovered_rows == 0
                and self.shared_support_pairs == 0
                and self.structure_violations == 0
                and self.max_cell_norm <= self.norm + self.tol
                and self.norm <= upper + self.tol)

    def to_record(self) -> Dict:
        return {
            'k': self.k,
            'm': self.m,
            'n': self.n,
            'norm': self.norm,
            'cells': len(self.cell_norms),
            'overlapping_rows': self.overlapping_rows,
            'uncovered_rows': self.uncovered_rows,
            'structure_violations': self.structure_violations,
            'bound_violations': self.bound_violations,
            'consistent': self.consistent,
        }


def block_by_cell(fp: FreeProduct, a: FreeCoefficients, k: int, m: int, n: int,
                  tol: float = OP_NORM_TOL, seed: int = DEFAULT_SEED,
                  C: Optional[float] = None, assign: Optional[CellAssigner] = None) -> CellBlockReport:
    """
    Tách P_m(a*·) theo cell của hàng và kiểm tra phân tích đó

    Hàng được gán cell theo định nghĩa trực tiếp (cell_memberships), không
    qua classify_cell. Report đếm hàng thuộc nhiều cell / không thuộc cell nào,
    cặp cell có row support chung, các entry (y, z) không có dạng của cell,
    và so norm từng cell / từng họ với factor·C‖a‖₂.

    Args:
        fp: FreeProduct
        a: Hệ số trên 𝓑_k
        k, m, n: Các degree
        tol: Tolerance của op_norm
        seed: Seed của op_norm
        C: Hằng số của các component (mặc định fp.constant nếu đã khai báo)
        assign: Hàm gán cell cho một hàng (mặc định cell_memberships)

    Returns:
        CellBlockReport
    """
    k, vec = _coefficient_vector(fp, a, k)
    B = free_block_matrix(fp, vec, m, n, k)
    norm = op_norm(B, tol=tol, seed=seed).value
    a_norm = float(np.linalg.norm(vec))
    if C is None:
        try:
            C = fp.constant
        except InvalidParameterError:
            C = None

    if m == 0 or B.nnz == 0:
        return CellBlockReport(k, m, n, norm, a_norm, C, {'all': norm} if B.nnz else {})

    assign = assign or cell_memberships
    basis_m = fp.basis(m)
    row_cells: Dict[int, List[CellLabel]] = {i: assign(x, k, n) for i, x in enumerate(basis_m)}
    overlapping = sum(1 for cells in row_cells.values() if len(cells) > 1)
    uncovered = sum(1 for cells in row_cells.values() if not cells)

    structure = free_block_structure(fp, k, m, n)
    bk, bn = fp.basis(k), fp.basis(n)
    violations = 0
    for row, col, left, coef in zip(structure.rows, structure.cols, structure.left, structure.coefs):
        if abs(coef) <= 1e-12:
            continue
        for cell in row_cells[int(row)]:
            if not _entry_fits_cell(cell, bk[left], bn[col]):
                violations += 1

    coo = B.csr.tocoo()
    cell_rows: Dict[CellLabel, List[int]] = {}
    for i, cells in row_cells.items():
        for cell in cells:
            cell_rows.setdefault(cell, []).append(i)

    cell_norms: Dict[str, float] = {}
    supports: List[set] = []
    family_rows: Dict[str, List[int]] = {}
    for cell, rows in cell_rows.items():
        mask = np.isin(coo.row, rows)
        if not mask.any():
            continue
        part = SparseMatrix.from_entries(coo.row[mask], coo.col[mask], coo.data[mask], B.shape)
        cell_norms[str(cell)] = op_norm(part, tol=tol, seed=seed).value
        supports.append(set(np.flatnonzero(part.csr.getnnz(axis=1)).tolist()))
        family_rows.setdefault(cell.variant, []).extend(rows)

    shared = sum(1 for i in range(len(supports)) for j in range(i + 1, len(supports))
                 if supports[i] & supports[j])

    family_norms: Dict[str, float] = {}
    for variant, rows in family_rows.items():
        mask = np.isin(coo.row, rows)
        part = SparseMatrix.from_entries(coo.row[mask], coo.col[mask], coo.data[mask], B.shape)
        family_norms[variant] = op_norm(part, tol=tol, seed=seed).value

    report = CellBlockReport(
        k, m, n, norm, a_norm, C, cell_norms, family_norms,
        overlapping_rows=overlapping, uncovered_rows=uncovered,
        shared_support_pairs=shared, structure_violations=violations,
    )
    if not report.consistent:
        logger.warning(f"{fp.name}: cell decomposition of (k={k}, m={m}, n={n}) is inconsistent: "
                       f"{report.to_record()}")
    elif report.bound_violations:
        logger.warning(f"{fp.name}: cells {report.bound_violations} exceed their bound at (k={k}, m={m}, n={n})")
    return report


# ----------------------------------------------------------------------
# √5·C bound
# ----------------------------------------------------------------------
@dataclass
class FreeProductBoundReport:
    algebra: str
    k: int
    m: int
    n: int
    ratio: float
    witness: Optional[np.ndarray]
    ceiling: float
    seed: int
    trials: int
    starts: int

    @property
    def margin(self) -> float:
        return self.ceiling - self.ratio

    @property
    def holds(self) -> bool:
        return self.ratio <= self.ceiling + RATIO_SLACK

    def to_record(self) -> Dict:
        return {
            'algebra': self.algebra,
            'k': self.k,
            'm': self.m,
            'n': self.n,
            'ratio': self.ratio,
            'ceiling': self.ceiling,
            'margin': self.margin,
            'holds': self.holds,
            'seed': self.seed,
            'trials': self.trials,
            'starts': self.starts,
        }


def _alternating_step(structure: FreeBlockStructure, B: SparseMatrix, size: int,
                      tol: float, seed: int) -> Optional[np.ndarray]:
    estimate = op_norm(B, tol=tol, seed=seed)
    if estimate.value == 0:
        return None
    u, v = estimate.left, estimate.right
    g = np.zeros(size, dtype=complex)
    np.add.at(g, structure.left, np.conj(u[structure.rows]) * structure.coefs * v[structure.cols])
    g_norm = np.linalg.norm(g)
    return g / g_norm if g_norm > 0 else None


def free_product_bound_check(A1: ComponentAlgebra, A2: ComponentAlgebra, k: int, m: int, n: int,
                             trials: int = 50, seed: int = DEFAULT_SEED, starts: int = HAAGERUP_STARTS,
                             iters: int = HAAGERUP_ITERS, tol: float = OP_NORM_TOL) -> FreeProductBoundReport:
    """
    Max của ‖P_m(a*·)|E_n‖/‖a‖₂ trên a ∈ E_k (random + alternating),
    so với cận √5·max(C₁, C₂)

    Args:
        A1, A2: Component algebra đã có constant
        k, m, n: Các degree
        trials: Số vector ngẫu nhiên
        seed: Seed
        starts: Số điểm khởi đầu cho alternating maximization
        iters: Số vòng luân phiên

    Returns:
        FreeProductBoundReport
    """
    if min(k, m, n) < 0:
        raise InvalidParameterError(f"degrees must be >= 0, got (k, m, n) = {(k, m, n)}")
    fp = get_free_product(A1, A2)
    ceiling = math.sqrt(5) * fp.constant
    size = len(fp.basis(k))
    structure = free_block_structure(fp, k, m, n)

    rng = np.random.default_rng([seed, k, m, n])
    best, witness = 0.0, None

    def consider(vec):
        nonlocal best, witness
        value = op_norm(free_block_matrix(fp, vec, m, n, k), tol=tol, seed=seed).value
        if value > best:
            best, witness = value, vec

    if structure.rows.size and size:
        for _ in range(trials):
            vec = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            consider(vec / np.linalg.norm(vec))
        for _ in range(starts):
            vec = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            vec /= np.linalg.norm(vec)
            for _ in range(iters):
                nxt = _alternating_step(structure, free_block_matrix(fp, vec, m, n, k), size, tol, seed)
                if nxt is None:
                    break
                vec = nxt
            consider(vec)

    report = FreeProductBoundReport(fp.name, k, m, n, best, witness, ceiling, seed, trials, starts)
    if not report.holds:
        logger.warning(
            f"{fp.name}: ratio {best:.10f} exceeds sqrt(5)*C = {ceiling:.10f} at (k={k}, m={m}, n={n})"
        )
    return report


def free_product_bound_scan(A1: ComponentAlgebra, A2: ComponentAlgebra, max_degree: int,
                            trials: int = 20, seed: int = DEFAULT_SEED, starts: int = 3,
                            iters: int = HAAGERUP_ITERS) -> List[FreeProductBoundReport]:
    """Chạy free_product_bound_check cho mọi (k, m, n) <= max_degree với |m − n| <= k"""
    fp = get_free_product(A1, A2)
    triples = [
        (k, m, n)
        for k in range(max_degree + 1)
        for m in range(max_degree + 1)
        for n in range(max_degree + 1)
        if abs(m - n) <= k
    ]
    log_banner(logger, f"Free product bound scan: {fp.name}, degrees <= {max_degree}, {len(triples)} triples")
    reports = [
        free_product_bound_check(A1, A2, k, m, n, trials=trials, seed=seed, starts=starts, iters=iters)
        for k, m, n in tqdm(triples, desc="Free product blocks", disable=not SHOW_PROGRESS)
    ]
    worst = max(reports, key=lambda r: r.ratio / r.ceiling)
    logger.info(
        f"Max ratio {worst.ratio:.10f} at (k={worst.k}, m={worst.m}, n={worst.n}), "
        f"ceiling {worst.ceiling:.10f}, margin {worst.margin:.3e}"
    )
    return reports


def bound_frame(reports: List[FreeProductBoundReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_record() for r in reports])


# ----------------------------------------------------------------------
# Dihedral-infinity oracle
# ----------------------------------------------------------------------
@lru_cache(maxsize=1)
def _involution_components() -> Tuple[ComponentAlgebra, ComponentAlgebra]:
    A = component_from_cyclic(2)
    return A, A


@dataclass
class CrossValidationReport:
    k: int
    m: int
    n: int
    max_entry_difference: float
    free_norm: float
    group_norm: float
    entry_tol: float = 1e-12
    norm_tol: float = 1e-9

    @property
    def norm_difference(self) -> float:
        return abs(self.free_norm - self.group_norm)

    @property
    def equal(self) -> bool:
        return self.max_entry_difference <= self.entry_tol and self.norm_difference <= self.norm_tol

    def to_record(self) -> Dict:
        return {
            'k': self.k,
            'm': self.m,
            'n': self.n,
            'max_entry_difference': self.max_entry_difference,
            'norm_difference': self.norm_difference,
            'free_norm': self.free_norm,
            'group_norm': self.group_norm,
            'equal': self.equal,
        }


def cross_validate_group(m: int, k: int, n: int, seed: int = DEFAULT_SEED) -> CrossValidationReport:
    """
    So sánh fp_block trên C[Z/2] * C[Z/2] với conv_block của dihedral-infinity
    qua song ánh word (1,1)(2,1)... ↔ normal form (1, 2, ...), dùng f(g) = conj(a(g⁻¹))

    Args:
        m, k, n: Các degree
        seed: Seed cho a ngẫu nhiên

    Returns:
        CrossValidationReport
    """
    A1, A2 = _involution_components()
    fp = get_free_product(A1, A2)
    model = make_model('dihedral-infinity')

    words_k = fp.basis(k)
    rng = np.random.default_rng([seed, k, m, n])
    a = rng.standard_normal(len(words_k)) + 1j * rng.standard_normal(len(words_k))

    def form(word: FreeWord) -> Tuple[int, ...]:
        return tuple(tag for tag, _ in word.letters)

    f = FilteredVector.from_values(
        model, {form(y.star()): np.conj(c) for y, c in zip(words_k, a)}
    )
    free = free_block_matrix(fp, a, m, n, k).to_dense()
    group = conv_block(model, f, m, n).to_dense()

    row_index = sphere(model, m).index
    col_index = sphere(model, n).index
    rows = [row_index[form(x)] for x in fp.basis(m)]
    cols = [col_index[form(z)] for z in fp.basis(n)]
    if len(rows) != group.shape[0] or len(cols) != group.shape[1]:
        raise DimensionMismatchError(
            f"basis sizes {(len(rows), len(cols))} do not match sphere sizes {group.shape}"
        )
    aligned = group[np.ix_(rows, cols)]

    difference = float(np.abs(free - aligned).max()) if free.size else 0.0
    free_norm = float(np.linalg.norm(free, 2)) if free.size else 0.0
    group_norm = float(np.linalg.norm(group, 2)) if group.size else 0.0
    report = CrossValidationReport(k, m, n, difference, free_norm, group_norm)
    if not report.equal:
        logger.warning(
            f"Cross-validation mismatch at (k={k}, m={m}, n={n}): entry diff {difference:.3e}, "
            f"norm diff {report.norm_difference:.3e}"
        )
    return report
