"""
Module filtration: phần tử của group algebra lưu theo sphere component a_k = P_k(a),
các block P_m a P_n, phân tích band của [D, a], smoothing operator f^(N),
truncation budget (N, K) và các bất đẳng thức tăng trưởng.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from config.settings import DEFAULT_SEED, OP_NORM_MAX_ITER, OP_NORM_TOL
from groups.models import Form, GroupElement, GroupModel
from groups.spheres import ball_index, ball_structure, block_structure, sphere
from processors.linop import SparseMatrix, op_norm
from utils.errors import DimensionMismatchError, InvalidParameterError
from utils.logger import get_logger

logger = get_logger(__name__)

ZETA2 = math.pi ** 2 / 6


def _inverse_permutation(model: GroupModel, k: int) -> np.ndarray:
    key = ('inv-perm', k)
    perm = model.tables.get(key)
    if perm is None:
        sk = sphere(model, k)
        perm = np.asarray([sk.index[model._inv(f)] for f in sk.forms], dtype=np.int64)
        model.tables[key] = perm
    return perm


@dataclass(frozen=True, eq=False)
class FilteredVector:
    """
    a = Σ_k a_k với a_k là vector hệ số complex trên E_k (thứ tự của SphereIndex).
    Component bằng 0 không được lưu.
    """
    model: GroupModel
    components: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, vec in self.components.items():
            k = int(k)
            if k < 0:
                raise InvalidParameterError(f"negative degree {k}")
            arr = np.array(vec, dtype=complex)
            expected = len(sphere(self.model, k))
            if arr.shape != (expected,):
                raise DimensionMismatchError(
                    f"component {k} has shape {arr.shape}, expected ({expected},)"
                )
            if np.any(arr != 0):
                arr.setflags(write=False)
                clean[k] = arr
        object.__setattr__(self, 'components', dict(sorted(clean.items())))

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------
    @classmethod
    def zeros(cls, model: GroupModel) -> 'FilteredVector':
        return cls(model, {})

    @classmethod
    def from_values(cls, model: GroupModel,
                    values: Mapping[Union[GroupElement, Form], complex]) -> 'FilteredVector':
        """
        Build từ dict {element hoặc normal form: hệ số}

        Args:
            model: Group model
            values: Hệ số theo phần tử
        """
        components: Dict[int, np.ndarray] = {}
        for g, coeff in values.items():
            form = g.form if isinstance(g, GroupElement) else tuple(g)
            k = model.form_length(form)
            sk = sphere(model, k)
            if k not in components:
                components[k] = np.zeros(len(sk), dtype=complex)
            components[k][sk.index[form]] += complex(coeff)
        return cls(model, components)

    @classmethod
    def delta(cls, model: GroupModel, g, coeff: complex = 1.0) -> 'FilteredVector':
        return cls.from_values(model, {g: coeff})

    @classmethod
    def constant(cls, model: GroupModel, c: complex = 1.0) -> 'FilteredVector':
        return cls.from_values(model, {model.identity: c})

    @classmethod
    def random(cls, model: GroupModel, radius: int, rng: np.random.Generator,
               self_adjoint: bool = False, degrees=None, trace_free: bool = False) -> 'FilteredVector':
        """
        Phần tử ngẫu nhiên (Gaussian complex) trên B_radius

        Args:
            model: Group model
            radius: Bán kính support
            rng: numpy Generator
            self_adjoint: Chiếu lên phần self-adjoint (f + f*)/2
            degrees: Chỉ sinh các component trong list này
            trace_free: Bỏ component a_0
        """
        components = {}
        for k in (degrees if degrees is not None else range(radius + 1)):
            if trace_free and k == 0:
                continue
            size = len(sphere(model, k))
            components[k] = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        f = cls(model, components)
        if self_adjoint:
            f = (f + f.adjoint()) * 0.5
        return f

    # ------------------------------------------------------------------
    @property
    def degrees(self) -> List[int]:
        return list(self.components)

    @property
    def top_degree(self) -> int:
        return max(self.components) if self.components else 0

    def is_zero(self) -> bool:
        return not self.components

    def coefficient(self, g) -> complex:
        form = g.form if isinstance(g, GroupElement) else tuple(g)
        k = self.model.form_length(form)
        vec = self.components.get(k)
        if vec is None:
            return 0j
        return complex(vec[sphere(self.model, k).index[form]])

    def trace(self) -> complex:
        """σ(a) = a(e)"""
        return self.coefficient(self.model.identity)

    def values(self) -> Dict[Form, complex]:
        out = {}
        for k, vec in self.components.items():
            forms = sphere(self.model, k).forms
            for i in np.flatnonzero(vec):
                out[forms[i]] = complex(vec[i])
        return out

    def component(self, k: int) -> 'FilteredVector':
        if k in self.components:
            return FilteredVector(self.model, {k: self.components[k]})
        return FilteredVector.zeros(self.model)

    def truncate(self, K: int) -> 'FilteredVector':
        """Q_K(a): giữ các component k <= K"""
        return FilteredVector(self.model, {k: v for k, v in self.components.items() if k <= K})

    def component_norms(self) -> Dict[int, float]:
        return {k: float(np.linalg.norm(v)) for k, v in self.components.items()}

    def norm2(self) -> float:
        """‖a‖₂ trong GNS của trace (chuẩn ℓ² của hệ số)"""
        return float(math.sqrt(sum(float(np.vdot(v, v).real) for v in self.components.values())))

    def norm1(self) -> float:
        return float(sum(np.abs(v).sum() for v in self.components.values()))

    def adjoint(self) -> 'FilteredVector':
        """a*(x) = conj(a(x⁻¹)); ℓ(x⁻¹) = ℓ(x) nên mỗi component giữ nguyên sphere"""
        return FilteredVector(
            self.model,
            {k: np.conj(v[_inverse_permutation(self.model, k)]) for k, v in self.components.items()},
        )

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        adj = self.adjoint()
        return (self - adj).norm2() <= tol * max(1.0, self.norm2())

    def ball_vector(self, radius: int) -> np.ndarray:
        """Vector hệ số trên B_radius (thứ tự BallIndex)"""
        if self.components and self.top_degree > radius:
            raise InvalidParameterError(f"top degree {self.top_degree} exceeds radius {radius}")
        ball = ball_index(self.model, radius)
        out = np.zeros(len(ball), dtype=complex)
        for k, vec in self.components.items():
            out[ball.sphere_slice(k)] = vec
        return out

    @classmethod
    def from_ball_vector(cls, model: GroupModel, radius: int, vec: np.ndarray) -> 'FilteredVector':
        ball = ball_index(model, radius)
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (len(ball),):
            raise DimensionMismatchError(f"expected vector of length {len(ball)}, got {vec.shape}")
        return cls(model, {k: vec[ball.sphere_slice(k)] for k in range(radius + 1)})

    # ------------------------------------------------------------------
    def _check_same_model(self, other: 'FilteredVector'):
        if other.model.fingerprint != self.model.fingerprint:
            raise InvalidParameterError(f"model mismatch: {self.model.name} vs {other.model.name}")

    def __add__(self, other: 'FilteredVector') -> 'FilteredVector':
        self._check_same_model(other)
        out = {k: v.copy() for k, v in self.components.items()}
        for k, v in other.components.items():
            out[k] = out[k] + v if k in out else v.copy()
        return FilteredVector(self.model, out)

    def __neg__(self) -> 'FilteredVector':
        return self * -1.0

    def __sub__(self, other: 'FilteredVector') -> 'FilteredVector':
        return self + (-other)

    def __mul__(self, c) -> 'FilteredVector':
        c = complex(c)
        return FilteredVector(self.model, {k: v * c for k, v in self.components.items()})

    __rmul__ = __mul__

    # ------------------------------------------------------------------
    # Text format
    # ------------------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"fingerprint {self.model.fingerprint} model {self.model.name}"]
        for k, vec in self.components.items():
            forms = sphere(self.model, k).forms
            for i in np.flatnonzero(vec):
                lines.append(f"{self.model.encode_form(forms[i])} {float(vec[i].real)!r} {float(vec[i].imag)!r}")
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_text(cls, model: GroupModel, text: str) -> 'FilteredVector':
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise InvalidParameterError("empty FilteredVector text")
        header = lines[0].split()
        if len(header) < 4 or header[0] != 'fingerprint' or header[2] != 'model':
            raise InvalidParameterError(f"malformed FilteredVector header: {lines[0]!r}")
        if header[1] != model.fingerprint:
            raise InvalidParameterError(
                f"FilteredVector was written for {header[3]} ({header[1]}), not {model.name}"
            )
        values = {}
        for line in lines[1:]:
            try:
                form_text, real, imag = line.rsplit(None, 2)
                values[model.decode_form(form_text)] = complex(float(real), float(imag))
            except ValueError:
                raise InvalidParameterError(f"malformed FilteredVector line: {line!r}")
        return cls.from_values(model, values)


# ----------------------------------------------------------------------
# Block operators
# ----------------------------------------------------------------------
def conv_block(model: GroupModel, f: FilteredVector, m: int, n: int) -> SparseMatrix:
    """
    Ma trận của P_m ∘ (left convolution bởi f) ∘ P_n trong basis của E_m, E_n

    Entry (x, z) = Σ{ f(y) : y ∈ E_k, yz = x }

    Args:
        model: Group model
        f: FilteredVector chỉ có một component k
        m: Degree hàng
        n: Degree cột

    Returns:
        SparseMatrix kích thước |E_m| x |E_n|
    """
    if len(f.components) > 1:
        raise InvalidParameterError(
            f"conv_block needs a single sphere component, got degrees {f.degrees}"
        )
    shape = (len(sphere(model, m)), len(sphere(model, n)))
    if f.is_zero():
        return SparseMatrix.zeros(shape)
    k = f.degrees[0]
    if abs(m - n) > k:
        return SparseMatrix.zeros(shape)
    structure = block_structure(model, k, m, n)
    values = f.components[k][structure.left]
    return SparseMatrix.from_entries(structure.rows, structure.cols, values, structure.shape)


def truncated_operator(model: GroupModel, f: FilteredVector, R: int) -> SparseMatrix:
    """Q_R (left convolution bởi f) Q_R trên ℓ²(B_R)"""
    ball = ball_index(model, R)
    if f.is_zero():
        return SparseMatrix.zeros((len(ball), len(ball)))
    p = f.top_degree
    structure = ball_structure(model, p, R)
    values = f.ball_vector(p)[structure.left]
    return SparseMatrix.from_entries(structure.rows, structure.cols, values, structure.shape)


def commutator_matrix(model: GroupModel, f: FilteredVector, R: int) -> SparseMatrix:
    """[D_R, f] với D_R = Σ_{n<=R} n P_n"""
    F = truncated_operator(model, f, R)
    coo = F.csr.tocoo()
    degrees = ball_index(model, R).degrees
    weights = (degrees[coo.row] - degrees[coo.col]).astype(float)
    return SparseMatrix.from_entries(coo.row, coo.col, coo.data * weights, F.shape)


@dataclass
class DiracBand:
    j: int
    radius: int
    matrix: SparseMatrix
    block_norms: Dict[int, float] = field(default_factory=dict)
    edge_affected: Dict[int, bool] = field(default_factory=dict)

    @property
    def norm_lower(self) -> float:
        """max_m ‖P_m a P_{m-j}‖ trên các block m <= R (không khẳng định là sup)"""
        return max(self.block_norms.values(), default=0.0)

    @property
    def interior_norm_lower(self) -> float:
        return max((v for m, v in self.block_norms.items() if not self.edge_affected[m]), default=0.0)


@dataclass
class DiracBandReport:
    radius: int
    top_degree: int
    bands: Dict[int, DiracBand]
    commutator: SparseMatrix
    identity_deviation: float
    decomposition_deviation: float

    @property
    def identity_holds(self) -> bool:
        return self.identity_deviation == 0.0 and self.decomposition_deviation == 0.0


def dirac_bands(model: GroupModel, f: FilteredVector, R: int, block_norms: bool = True,
                tol: float = OP_NORM_TOL, seed: int = DEFAULT_SEED) -> DiracBandReport:
    """
    Phân tích truncated operator của f thành các band T_j = Σ_m P_m f P_{m-j}
    và kiểm tra [D_R, f] = Σ_j j·T_j entrywise

    Args:
        model: Group model
        f: FilteredVector với top degree p
        R: Bán kính truncation (R >= p)
        block_norms: Có tính ‖P_m f P_{m-j}‖ cho từng m hay không

    Returns:
        DiracBandReport
    """
    p = f.top_degree
    if R < p:
        raise InvalidParameterError(f"R = {R} must be >= top degree {p}")

    ball = ball_index(model, R)
    F = truncated_operator(model, f, R)
    commutator = commutator_matrix(model, f, R)
    coo = F.csr.tocoo()
    diff = ball.degrees[coo.row] - ball.degrees[coo.col]

    bands: Dict[int, DiracBand] = {}
    assembled = SparseMatrix.zeros(F.shape)
    reassembled = SparseMatrix.zeros(F.shape)
    for j in range(-p, p + 1):
        mask = diff == j
        band = SparseMatrix.from_entries(coo.row[mask], coo.col[mask], coo.data[mask], F.shape)
        entry = DiracBand(j=j, radius=R, matrix=band)
        if block_norms:
            for m in range(max(0, j), R + 1):
                n = m - j
                if n > R:
                    continue
                block = band.submatrix(ball.sphere_slice(m), ball.sphere_slice(n))
                entry.block_norms[m] = op_norm(block, tol=tol, seed=seed).value if block.nnz else 0.0
                entry.edge_affected[m] = m > R - p or n > R - p
        bands[j] = entry
        reassembled = reassembled + band
        if j:
            assembled = assembled + band.scaled(j)

    report = DiracBandReport(
        radius=R,
        top_degree=p,
        bands=bands,
        commutator=commutator,
        identity_deviation=assembled.max_abs_difference(commutator),
        decomposition_deviation=reassembled.max_abs_difference(F),
    )
    logger.debug(
        f"{model.name}: dirac bands at R={R}, identity deviation {report.identity_deviation:.3g}"
    )
    return report


def seminorm_lower(model: GroupModel, f: FilteredVector, R: int,
                   tol: float = OP_NORM_TOL, seed: int = DEFAULT_SEED) -> float:
    """
    L_R(f) = ‖[D_R, f]‖ trên ℓ²(B_R); lower bound được chứng nhận cho L(f)
    """
    if R < f.top_degree:
        raise InvalidParameterError(f"R = {R} must be >= top degree {f.top_degree}")
    return op_norm(commutator_matrix(model, f, R), tol=tol, seed=seed).value


def seminorm_upper(f: FilteredVector, C: float) -> float:
    """
    Upper bound C·K(K+1)·Σ_k ‖f_k‖₂ cho L(f), hợp lệ khi C là Haagerup constant của model
    """
    if C <= 0:
        raise InvalidParameterError(f"Haagerup constant must be > 0, got {C}")
    K = f.top_degree
    return float(C * K * (K + 1) * sum(f.component_norms().values()))


# ----------------------------------------------------------------------
# Smoothing và truncation budget
# ----------------------------------------------------------------------
def zeta2_tail(N: int) -> float:
    """Σ_{k>N} k⁻²"""
    if N < 0:
        raise InvalidParameterError(f"N must be >= 0, got {N}")
    if N <= 1000:
        return ZETA2 - math.fsum(1.0 / (k * k) for k in range(1, N + 1))
    # Euler-Maclaurin
    x = float(N)
    return 1 / x - 1 / (2 * x ** 2) + 1 / (6 * x ** 3) - 1 / (30 * x ** 5) + 1 / (42 * x ** 7)


def phi_norm_sq(N: int) -> float:
    """‖φ_N‖₂² = 2 Σ_{k>N} k⁻² với φ_N(k) = −1/k khi |k| > N"""
    return 2.0 * zeta2_tail(N)


@dataclass
class SmoothingReport:
    N: int
    radius: int
    matrix: SparseMatrix
    low_part: SparseMatrix
    norm: float
    phi_norm: float
    commutator_upper: float
    identity_deviation: float
    interior_identity_deviation: float

    @property
    def bound(self) -> float:
        return 2 * math.pi * self.phi_norm * self.commutator_upper

    @property
    def holds(self) -> bool:
        return self.norm <= self.bound * (1 + 1e-12) + 1e-12


def smoothing(model: GroupModel, f: FilteredVector, N: int, R: int, C: Optional[float] = None,
              tol: float = OP_NORM_TOL, seed: int = DEFAULT_SEED) -> SmoothingReport:
    """
    f^(N) = Σ_{|m-n|>N} P_m f P_n trên ℓ²(B_R) và kiểm tra
    ‖f^(N)‖ <= 2π‖φ_N‖₂·‖[D_R, f]‖

    Args:
        model: Group model
        f: FilteredVector
        N: Độ rộng band bị loại bỏ
        R: Bán kính truncation
        C: Haagerup constant (optional, làm chặt upper bound của commutator)

    Returns:
        SmoothingReport
    """
    if N < 0:
        raise InvalidParameterError(f"N must be >= 0, got {N}")
    p = f.top_degree
    if R < p:
        raise InvalidParameterError(f"R = {R} must be >= top degree {p}")

    ball = ball_index(model, R)
    F = truncated_operator(model, f, R)
    coo = F.csr.tocoo()
    gap = np.abs(ball.degrees[coo.row] - ball.degrees[coo.col])
    high = gap > N
    smoothed = SparseMatrix.from_entries(coo.row[high], coo.col[high], coo.data[high], F.shape)
    low = SparseMatrix.from_entries(coo.row[~high], coo.col[~high], coo.data[~high], F.shape)

    deviation = (low + smoothed).max_abs_difference(F)
    interior = slice(0, ball.offsets[max(0, R - p) + 1])
    interior_deviation = (low + smoothed).submatrix(interior, interior).max_abs_difference(
        F.submatrix(interior, interior)
    )

    commutator = commutator_matrix(model, f, R)
    commutator_upper = min(commutator.frobenius(), commutator.upper_bound())
    if C is not None:
        commutator_upper = min(commutator_upper, seminorm_upper(f, C))

    report = SmoothingReport(
        N=N,
        radius=R,
        matrix=smoothed,
        low_part=low,
        norm=op_norm(smoothed, tol=tol, seed=seed).value,
        phi_norm=math.sqrt(phi_norm_sq(N)),
        commutator_upper=commutator_upper,
        identity_deviation=deviation,
        interior_identity_deviation=interior_deviation,
    )
    if not report.holds:
        logger.warning(
            f"{model.name}: smoothing bound violated at N={N}, R={R}: "
            f"{report.norm:.6g} > {report.bound:.6g}"
        )
    return report


@dataclass(frozen=True)
class TruncationBudget:
    N: int
    K: int
    eps: float
    C: float

    def as_tuple(self) -> Tuple[int, int]:
        return self.N, self.K


def _smallest_index(threshold: float) -> int:
    """N nhỏ nhất với Σ_{k>N} k⁻² < threshold"""
    if threshold > ZETA2:
        return 0
    # 1/(N+1) < tail < 1/N: N + 1 <= 1/threshold thì chưa đạt
    N = max(0, int(math.floor(1.0 / threshold)) - 2)
    while zeta2_tail(N) >= threshold:
        N += 1
    return N


def truncation_budget(eps: float, C: float) -> TruncationBudget:
    """
    Chọn N nhỏ nhất với 2π‖φ_N‖₂ < ε, rồi K nhỏ nhất với
    (Σ_{n>K} n⁻²)^{1/2} < ε / (C(2N+1))

    Args:
        eps: ε > 0
        C: Haagerup constant > 0

    Returns:
        TruncationBudget (N, K)
    """
    if eps <= 0:
        raise InvalidParameterError(f"eps must be > 0, got {eps}")
    if C <= 0:
        raise InvalidParameterError(f"C must be > 0, got {C}")

    N = _smallest_index(eps ** 2 / (8 * math.pi ** 2))
    K = _smallest_index((eps / (C * (2 * N + 1))) ** 2)
    logger.info(f"Truncation budget for eps={eps}, C={C}: N={N}, K={K}")
    return TruncationBudget(N=N, K=K, eps=eps, C=C)


# ----------------------------------------------------------------------
# Growth inequalities
# ----------------------------------------------------------------------
@dataclass
class InequalityCheck:
    name: str
    degree: Optional[int]
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-9) + 1e-12


@dataclass
class GrowthInequalityReport:
    model: str
    C: float
    radius: int
    rows: List[InequalityCheck]

    @property
    def violations(self) -> List[InequalityCheck]:
        return [r for r in self.rows if not r.holds]

    @property
    def all_hold(self) -> bool:
        return not self.violations

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                'model': self.model,
                'inequality': r.name,
                'degree': r.degree,
                'lhs': r.lhs,
                'rhs': r.rhs,
                'margin': r.margin,
                'holds': r.holds,
            }
            for r in self.rows
        ])


def check_growth_inequalities(model: GroupModel, f: FilteredVector, C: float, R: int,
                              tol: float = OP_NORM_TOL, seed: int = DEFAULT_SEED,
                              block_check: bool = True) -> GrowthInequalityReport:
    """
    So sánh truncated norms (lower bounds) với vế phải của:
      - ‖a_k‖ <= C(2k+1)‖a_k‖₂
      - ‖a‖ <= C'(Σ (1+k)⁴‖a_k‖₂²)^{1/2}, C' = 2Cπ/√6
      - ‖a‖ <= 2C(Σ_{k<=p} (k+1)²)^{1/2}‖a‖₂
      - block condition ‖P_m a_k P_n‖ <= C‖a_k‖₂ với m, n <= R

    Vi phạm nghĩa là C được cung cấp không phải Haagerup constant của model.
    """
    if C <= 0:
        raise InvalidParameterError(f"C must be > 0, got {C}")

    rows: List[InequalityCheck] = []
    norms2 = f.component_norms()

    for k, a_norm in norms2.items():
        comp = f.component(k)
        lhs = op_norm(truncated_operator(model, comp, R), tol=tol, seed=seed).value
        rows.append(InequalityCheck('sphere_growth', k, lhs, C * (2 * k + 1) * a_norm))

    full_norm = op_norm(truncated_operator(model, f, R), tol=tol, seed=seed).value
    c_prime = 2 * C * math.pi / math.sqrt(6)
    weighted = math.sqrt(sum((1 + k) ** 4 * v ** 2 for k, v in norms2.items()))
    rows.append(InequalityCheck('sobolev_bound', None, full_norm, c_prime * weighted))

    p = f.top_degree
    degree_sum = math.sqrt(sum((k + 1) ** 2 for k in range(p + 1)))
    rows.append(InequalityCheck('polynomial_bound', None, full_norm, 2 * C * degree_sum * f.norm2()))

    if block_check:
        for k, a_norm in norms2.items():
            comp = f.component(k)
            best = 0.0
            for m in range(R + 1):
                for n in range(max(0, m - k), min(R, m + k) + 1):
                    block = conv_block(model, comp, m, n)
                    if block.nnz:
                        best = max(best, op_norm(block, tol=tol, seed=seed).value)
            rows.append(InequalityCheck('sphere_block', k, best, C * a_norm))

    report = GrowthInequalityReport(model=model.name, C=C, radius=R, rows=rows)
    for row in report.violations:
        logger.warning(
            f"{model.name}: {row.name} (degree {row.degree}) violated with C={C}: "
            f"{row.lhs:.6g} > {row.rhs:.6g}"
        )
    return report
