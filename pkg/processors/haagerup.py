"""
Module ước lượng Haagerup-type constant: best ratio ‖P_m f P_n‖/‖f‖₂,
phản ví dụ trên Z², growth obstruction cho nhóm amenable và audit hằng số
dự đoán từ geodesic splitting.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sympy import Rational
from tqdm import tqdm

from config.settings import (
    DEFAULT_SEED,
    HAAGERUP_ITERS,
    HAAGERUP_STARTS,
    HAAGERUP_TRIALS,
    OBSTRUCTION_FACTOR,
    OP_NORM_TOL,
    RATIO_SLACK,
    SHOW_PROGRESS,
)
from groups.geometry import DeltaEstimate, four_point_delta
from groups.models import (
    CyclicModel,
    DihedralInfinityModel,
    FreeGroupModel,
    FreeProductCyclicModel,
    GroupModel,
    ZdModel,
)
from groups.spheres import ball_sizes, block_structure, sphere
from processors.filtration import FilteredVector, conv_block, truncated_operator
from processors.linop import op_norm, rational_matrix, exact_apply
from utils.errors import InvalidParameterError, NotAmenableError
from utils.logger import get_logger, log_banner

logger = get_logger(__name__)

STRATEGIES = ('random', 'alternating', 'combined')


def known_ceiling(model: GroupModel) -> Optional[float]:
    """
    Hằng số lý thuyết đã biết: free groups có C = 1; model với |E_k| <= 2
    có C = √2 từ ‖f‖ <= ‖f‖₁ <= √|E_k|·‖f‖₂
    """
    if isinstance(model, FreeGroupModel):
        return 1.0
    if isinstance(model, (CyclicModel, DihedralInfinityModel)):
        return math.sqrt(2.0)
    if isinstance(model, ZdModel) and model.d == 1:
        return math.sqrt(2.0)
    if isinstance(model, FreeProductCyclicModel) and model.params == (2, 2):
        return math.sqrt(2.0)
    return None


@dataclass
class HaagerupReport:
    model: str
    k: int
    m: int
    n: int
    ratio: float
    witness: FilteredVector
    strategy: str
    seed: int
    eval_seed: int
    tol: float
    ceiling: Optional[float] = None
    starts: int = 0
    iters: int = 0
    trials: int = 0

    @property
    def triple(self) -> Tuple[int, int, int]:
        return self.k, self.m, self.n

    def exceeds_ceiling(self, slack: float = RATIO_SLACK) -> bool:
        return self.ceiling is not None and self.ratio > self.ceiling + slack

    def reevaluate(self) -> float:
        """Tính lại ratio từ witness đã lưu"""
        return block_ratio(self.witness.model, self.witness, self.m, self.n,
                           tol=self.tol, seed=self.eval_seed)

    def to_record(self) -> Dict:
        return {
            'model': self.model,
            'k': self.k,
            'm': self.m,
            'n': self.n,
            'ratio': self.ratio,
            'ceiling': self.ceiling,
            'strategy': self.strategy,
            'seed': self.seed,
            'starts': self.starts,
            'iters': self.iters,
            'trials': self.trials,
            'witness_nnz': sum(int(np.count_nonzero(v)) for v in self.witness.components.values()),
        }


def block_ratio(model: GroupModel, f: FilteredVector, m: int, n: int,
                tol: float = OP_NORM_TOL, seed: int = DEFAULT_SEED) -> float:
    """‖P_m f P_n‖ / ‖f‖₂ (0 khi f = 0)"""
    norm = f.norm2()
    if norm == 0.0:
        return 0.0
    return op_norm(conv_block(model, f, m, n), tol=tol, seed=seed).value / norm


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _random_unit(rng: np.random.Generator, size: int) -> np.ndarray:
    return _unit(rng.standard_normal(size) + 1j * rng.standard_normal(size))


def _alternating_improve(model: GroupModel, k: int, m: int, n: int, vec: np.ndarray,
                         iters: int, tol: float, seed: int) -> np.ndarray:
    """
    Tối đa hóa trilinear form Σ f(y)ξ(z)conj(η(x)) trên {yz = x}: luân phiên
    (η, ξ) = top singular pair của block, rồi f = conj(g)/‖g‖ với
    g(y) = Σ ξ(z)conj(η(x))
    """
    structure = block_structure(model, k, m, n)
    inner_tol = max(tol, 1e-9)
    value = 0.0
    for _ in range(iters):
        f = FilteredVector(model, {k: vec})
        estimate = op_norm(conv_block(model, f, m, n), tol=inner_tol, seed=seed)
        if estimate.value == 0.0:
            break
        g = np.zeros(len(vec), dtype=complex)
        np.add.at(g, structure.left, estimate.right[structure.cols] * np.conj(estimate.left[structure.rows]))
        g_norm = float(np.linalg.norm(g))
        if g_norm == 0.0:
            break
        vec = np.conj(g) / g_norm
        if g_norm - value <= 1e-12 * g_norm:
            break
        value = g_norm
    return vec


def best_ratio(model: GroupModel, k: int, m: int, n: int, strategy: str = 'alternating',
               starts: int = HAAGERUP_STARTS, iters: int = HAAGERUP_ITERS,
               trials: int = HAAGERUP_TRIALS, seed: int = DEFAULT_SEED,
               tol: float = OP_NORM_TOL) -> HaagerupReport:
    """
    Tìm f đơn vị trên E_k làm ‖P_m f P_n‖ lớn nhất (lower bound cho C(k,m,n))

    Args:
        model: Group model
        k, m, n: Các degree
        strategy: 'random', 'alternating' hoặc 'combined'
        starts: Số điểm khởi đầu (alternating)
        iters: Số vòng luân phiên tối đa mỗi start
        trials: Số f ngẫu nhiên (random)
        seed: Seed
        tol: Tolerance cho op_norm

    Returns:
        HaagerupReport
    """
    if min(k, m, n) < 0:
        raise InvalidParameterError(f"degrees must be >= 0, got ({k}, {m}, {n})")
    if strategy not in STRATEGIES:
        raise InvalidParameterError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")

    report_kwargs = dict(
        model=model.name, k=k, m=m, n=n, strategy=strategy, seed=seed, eval_seed=seed, tol=tol,
        ceiling=known_ceiling(model),
        starts=starts if strategy != 'random' else 0,
        iters=iters if strategy != 'random' else 0,
        trials=trials if strategy != 'alternating' else 0,
    )

    size_k = len(sphere(model, k))
    empty = size_k == 0 or len(sphere(model, m)) == 0 or len(sphere(model, n)) == 0
    if abs(m - n) > k or empty:
        witness = FilteredVector.zeros(model)
        if size_k:
            witness = FilteredVector(model, {k: np.eye(size_k, 1).ravel()})
        return HaagerupReport(ratio=0.0, witness=witness, **report_kwargs)

    rng = np.random.default_rng([seed, k, m, n])
    best_vec, best = None, -1.0

    def consider(vec):
        nonlocal best_vec, best
        f = FilteredVector(model, {k: vec})
        ratio = block_ratio(model, f, m, n, tol=tol, seed=seed)
        if ratio > best:
            best, best_vec = ratio, f.components[k]

    if strategy in ('random', 'combined'):
        for _ in range(trials):
            consider(_random_unit(rng, size_k))

    if strategy in ('alternating', 'combined'):
        initial = [best_vec] if best_vec is not None else []
        initial.extend(_random_unit(rng, size_k) for _ in range(max(0, starts - len(initial))))
        for vec in initial:
            consider(_alternating_improve(model, k, m, n, np.array(vec), iters, tol, seed))

    if best_vec is None:
        raise InvalidParameterError(f"strategy {strategy!r} needs trials >= 1 or starts >= 1")
    witness = FilteredVector(model, {k: best_vec})
    report = HaagerupReport(ratio=best, witness=witness, **report_kwargs)
    logger.debug(f"{model.name} (k={k}, m={m}, n={n}): best ratio {best:.10f} [{strategy}]")
    return report


def admissible_triples(max_degree: int) -> List[Tuple[int, int, int]]:
    """Các (k, m, n) với |m − n| <= k và |n − k| <= m"""
    triples = []
    for k in range(max_degree + 1):
        for m in range(max_degree + 1):
            for n in range(max_degree + 1):
                if abs(m - n) <= k and abs(n - k) <= m:
                    triples.append((k, m, n))
    return triples


def scan(model: GroupModel, max_degree: int, strategy: str = 'combined',
         starts: int = HAAGERUP_STARTS, iters: int = HAAGERUP_ITERS,
         trials: int = HAAGERUP_TRIALS, seed: int = DEFAULT_SEED,
         tol: float = OP_NORM_TOL) -> List[HaagerupReport]:
    """
    Chạy best_ratio trên mọi triple hợp lệ với k, m, n <= max_degree

    Returns:
        List HaagerupReport theo thứ tự (k, m, n)
    """
    triples = admissible_triples(max_degree)
    log_banner(logger, f"Haagerup scan on {model.name}: {len(triples)} triples, strategy={strategy}")

    reports = []
    for k, m, n in tqdm(triples, desc=f"scan {model.name}", disable=not SHOW_PROGRESS):
        reports.append(best_ratio(model, k, m, n, strategy=strategy, starts=starts,
                                  iters=iters, trials=trials, seed=seed, tol=tol))

    worst = max(reports, key=lambda r: r.ratio)
    logger.info(f"Max ratio {worst.ratio:.10f} at (k, m, n) = {worst.triple}")
    for r in reports:
        if r.exceeds_ceiling():
            logger.warning(f"Ratio {r.ratio:.10f} at {r.triple} exceeds ceiling {r.ceiling}")
    return reports


def reports_frame(reports: Sequence[HaagerupReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_record() for r in reports])


# ----------------------------------------------------------------------
# Z² witness
# ----------------------------------------------------------------------
@dataclass
class Z2Witness:
    k: int
    n: int
    m: int
    f_values: Dict[Tuple[int, int], Rational]
    xi_squared: Dict[Tuple[int, int], Rational]
    bound_squared: Rational
    verification: Dict = field(default_factory=dict)

    @property
    def ratio_bound(self) -> float:
        return math.sqrt(float(self.bound_squared))

    @property
    def image_bound(self) -> float:
        """√((n−k)/n)"""
        return math.sqrt((self.n - self.k) / self.n)

    @property
    def verified(self) -> bool:
        return bool(self.verification.get('all_exact'))


def z2_witness(k: int, n: int, numeric_check: bool = False) -> Z2Witness:
    """
    Phản ví dụ trên Z²: f = 1/k trên (p, k−p), 1 <= p <= k; ξ = 1/√n trên
    (q, n−q), 1 <= q <= n. Kiểm tra chính xác (số hữu tỉ) rằng
    |(f*ξ)(r, m−r)|² = 1/n trên các hàng đầy đủ r ∈ [k+1, n+1].

    Args:
        k: Degree của f (>= 1)
        n: Degree của ξ (> k)
        numeric_check: So sánh thêm với conv_block dạng float trên zd(2)

    Returns:
        Z2Witness kèm verification record
    """
    if k < 1:
        raise InvalidParameterError(f"z2_witness requires k >= 1, got {k}")
    if n <= k:
        raise InvalidParameterError(f"z2_witness requires n > k, got n={n}, k={k}")

    m = n + k
    f_values = {(p, k - p): Rational(1, k) for p in range(1, k + 1)}
    xi_squared = {(q, n - q): Rational(1, n) for q in range(1, n + 1)}

    # Rows r = 1..m (điểm (r, m−r)), cols q = 1..n; ξ = (1/√n)·𝟙 nên nhân với 𝟙
    entries = {}
    for r in range(1, m + 1):
        for q in range(1, n + 1):
            p = r - q
            if (p, k - p) in f_values:
                entries[(r - 1, q - 1)] = f_values[(p, k - p)]
    A = rational_matrix(entries, (m, n))
    unscaled = exact_apply(A, [1] * n)
    squared = {r: unscaled[r - 1] ** 2 * Rational(1, n) for r in range(1, m + 1)}

    full_rows = list(range(k + 1, n + 2))
    rows_exact = all(squared[r] == Rational(1, n) for r in full_rows)
    image_norm_sq = sum(squared.values(), Rational(0))
    norm1 = sum(f_values.values(), Rational(0))
    norm2_sq = sum((v ** 2 for v in f_values.values()), Rational(0))
    xi_norm_sq = sum(xi_squared.values(), Rational(0))
    target = Rational(n - k, n)
    bound_squared = target / norm2_sq

    verification = {
        'full_rows': [full_rows[0], full_rows[-1]],
        'rows_exact': rows_exact,
        'f_norm1': str(norm1),
        'f_norm2_squared': str(norm2_sq),
        'xi_norm2_squared': str(xi_norm_sq),
        'image_norm2_squared': str(image_norm_sq),
        'image_lower_bound': str(target),
        'ratio_bound_squared': str(bound_squared),
    }
    verification['all_exact'] = bool(
        rows_exact
        and norm1 == 1
        and norm2_sq == Rational(1, k)
        and xi_norm_sq == 1
        and image_norm_sq >= target
    )

    if numeric_check:
        model = ZdModel(2)
        f = FilteredVector.from_values(model, {key: float(v) for key, v in f_values.items()})
        xi = np.zeros(len(sphere(model, n)), dtype=complex)
        index = sphere(model, n).index
        for key in xi_squared:
            xi[index[key]] = 1.0 / math.sqrt(n)
        image = conv_block(model, f, m, n).matvec(xi)
        numeric = float(np.vdot(image, image).real)
        verification['numeric_image_norm2_squared'] = numeric
        verification['numeric_agrees'] = abs(numeric - float(image_norm_sq)) < 1e-12
        verification['all_exact'] = verification['all_exact'] and verification['numeric_agrees']

    witness = Z2Witness(k=k, n=n, m=m, f_values=f_values, xi_squared=xi_squared,
                        bound_squared=bound_squared, verification=verification)
    if not witness.verified:
        logger.error(f"Z2 witness (k={k}, n={n}) failed exact verification: {verification}")
    else:
        logger.info(f"Z2 witness (k={k}, n={n}) verified; ratio bound {witness.ratio_bound:.6f}")
    return witness


def z2_bound_sequence(ks: Iterable[int]) -> List[Z2Witness]:
    """Dãy witness (k, k²) với bound √(k−1) không bị chặn"""
    return [z2_witness(k, k * k) for k in ks if k >= 2]


# ----------------------------------------------------------------------
# Growth obstruction
# ----------------------------------------------------------------------
@dataclass
class ObstructionReport:
    model: str
    sizes: List[int]
    ratios: List[float]
    window: int
    factor: float
    verdict: str

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'p': list(range(len(self.sizes))),
            'ball_size': self.sizes,
            'ratio': self.ratios,
        })


def _require_amenable(model: GroupModel, what: str):
    if not model.amenable:
        raise NotAmenableError(
            f"{what} requires an amenable model; {model.name} is not declared amenable "
            f"(the polynomial growth bound only follows from the condition in the amenable case)"
        )


def growth_obstruction(model: GroupModel, p_max: int, store=None) -> ObstructionReport:
    """
    Dãy |B_p|/(p+1)³ và kết luận 'bounded' / 'increasing'

    Args:
        model: Model amenable
        p_max: Bán kính lớn nhất

    Returns:
        ObstructionReport
    """
    _require_amenable(model, 'growth_obstruction')
    if p_max < 2:
        raise InvalidParameterError(f"p_max must be >= 2, got {p_max}")

    sizes = ball_sizes(model, p_max, store=store)
    ratios = [s / (p + 1) ** 3 for p, s in enumerate(sizes)]
    window = math.ceil(p_max / 2)
    tail = ratios[-window:]
    factor = tail[-1] / tail[0] if tail[0] > 0 else float('inf')
    increasing = factor >= OBSTRUCTION_FACTOR and tail[-1] == max(tail)
    verdict = 'increasing' if increasing else 'bounded'

    logger.info(f"{model.name}: |B_p|/(p+1)^3 factor {factor:.3f} over last {window} points -> {verdict}")
    return ObstructionReport(model=model.name, sizes=sizes, ratios=ratios,
                             window=window, factor=factor, verdict=verdict)


@dataclass
class ChiNormReport:
    model: str
    p: int
    ball_size: int
    radii: List[int]
    norms: List[float]
    amenable: bool

    @property
    def monotone(self) -> bool:
        return all(b >= a - 1e-9 for a, b in zip(self.norms, self.norms[1:]))


def amenable_chi_norm(model: GroupModel, p: int, R_list: Sequence[int],
                      tol: float = OP_NORM_TOL, seed: int = DEFAULT_SEED) -> ChiNormReport:
    """
    Truncated norms của χ_p (indicator của B_p) trên ℓ²(B_R); với model
    amenable các giá trị tiến tới ‖χ_p‖ = ‖χ_p‖₁ = |B_p|
    """
    if not model.amenable:
        logger.warning(
            f"{model.name} is not amenable: truncated norms of chi_{p} are lower bounds only, "
            f"and need not approach |B_{p}|"
        )
    components = {k: np.ones(len(sphere(model, k))) for k in range(p + 1)}
    chi = FilteredVector(model, components)
    radii = sorted(R_list)
    norms = [op_norm(truncated_operator(model, chi, R), tol=tol, seed=seed).value for R in radii]
    return ChiNormReport(model=model.name, p=p, ball_size=ball_sizes(model, p)[-1],
                         radii=radii, norms=norms, amenable=model.amenable)


# ----------------------------------------------------------------------
# Audit hằng số từ geodesic splitting
# ----------------------------------------------------------------------
@dataclass
class SplitAudit:
    model: str
    delta: DeltaEstimate
    predicted_C: int
    reports: List[HaagerupReport]

    @property
    def predicted_C_squared(self) -> int:
        return self.predicted_C ** 2

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.reports), default=0.0)

    @property
    def within_prediction(self) -> bool:
        return self.max_ratio <= self.predicted_C + RATIO_SLACK


def split_constant_audit(model: GroupModel, R_delta: int, triples: Iterable[Tuple[int, int, int]],
                         delta: Optional[DeltaEstimate] = None, strategy: str = 'alternating',
                         starts: int = 5, iters: int = HAAGERUP_ITERS, trials: int = 50,
                         seed: int = DEFAULT_SEED) -> SplitAudit:
    """
    So sánh best ratio quan sát được với hằng số dự đoán C = |B_{1+2δ}|
    (ghi cả C² của ước lượng cuối cùng)
    """
    if delta is None:
        delta = four_point_delta(model, R_delta)
    predicted = ball_sizes(model, 1 + 2 * delta.value)[-1]
    reports = [
        best_ratio(model, k, m, n, strategy=strategy, starts=starts, iters=iters,
                   trials=trials, seed=seed)
        for k, m, n in triples
    ]
    audit = SplitAudit(model=model.name, delta=delta, predicted_C=predicted, reports=reports)
    logger.info(
        f"{model.name}: delta={delta.value}, predicted C={predicted} (C^2={audit.predicted_C_squared}), "
        f"max observed ratio {audit.max_ratio:.6f}"
    )
    return audit
