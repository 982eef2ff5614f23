"""
Module tính các đại lượng hình học của group: four-point defect δ,
geodesic splitting x = x̄x̃ và growth exponent.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from sklearn.linear_model import LinearRegression

from config.settings import DEFAULT_SEED, DELTA_EXHAUSTIVE_BUDGET, GROWTH_RESIDUAL_TOL
from groups.models import GroupElement, GroupModel
from groups.spheres import ball_index, ball_sizes
from utils.errors import InvalidParameterError, LengthConstraintError, ResourceBudgetError
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class DeltaEstimate:
    value: int
    radius: int
    mode: str
    witness: Optional[Tuple[GroupElement, ...]] = None
    trials: Optional[int] = None
    seed: Optional[int] = None

    @property
    def is_lower_bound_only(self) -> bool:
        return self.mode == 'sampled'

    def to_record(self, model: GroupModel) -> Dict:
        return {
            'radius': self.radius,
            'mode': self.mode,
            'delta': self.value,
            'witness': [model.encode_form(g.form) for g in self.witness] if self.witness else None,
            'trials': self.trials,
            'seed': self.seed,
        }


@dataclass
class GrowthReport:
    sizes: List[int]
    fit_range: Tuple[int, int]
    loglog_slope: float
    loglog_residual: float
    semilog_slope: float
    semilog_residual: float
    classification: str
    extra: Dict = field(default_factory=dict)

    @property
    def exponential_base(self) -> float:
        return math.exp(self.semilog_slope)


def quadruple_defect(model: GroupModel, x: GroupElement, y: GroupElement,
                     z: GroupElement, w: GroupElement) -> int:
    """
    Defect của một bộ bốn:
    ρ(x,y) + ρ(z,w) − max{ρ(x,z) + ρ(y,w), ρ(x,w) + ρ(y,z)}
    (có thể âm; δ là max của đại lượng này, chặn dưới bởi 0)
    """
    d = model.distance
    return d(x, y) + d(z, w) - max(d(x, z) + d(y, w), d(x, w) + d(y, z))


def _distance_matrix(model: GroupModel, forms) -> np.ndarray:
    n = len(forms)
    inverses = [model._inv(f) for f in forms]
    dist = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = model.form_length(model._mul(inverses[i], forms[j]))
    return dist


def four_point_delta(model: GroupModel, radius: int, mode: str = 'exhaustive',
                     trials: int = 100000, seed: int = DEFAULT_SEED) -> DeltaEstimate:
    """
    Tính δ_R: max trên các bộ bốn trong B_R của four-point defect

    Dùng defect đầy đủ ρ(x,y) + ρ(z,w) − max{ρ(x,z) + ρ(y,w), ρ(x,w) + ρ(y,z)},
    không chia đôi như Gromov product. Ví dụ zd(2) với R = 4 cho 8 (bộ
    (2,2), (−2,−2), (2,−2), (−2,2)); bộ (0,0), (2,2), (2,0), (0,2) chỉ cho 4.

    Args:
        model: Group model
        radius: Bán kính R
        mode: 'exhaustive' hoặc 'sampled'
        trials: Số bộ bốn lấy mẫu (sampled mode)
        seed: Seed cho sampled mode

    Returns:
        DeltaEstimate (sampled mode chỉ là lower bound)
    """
    if radius < 0:
        raise InvalidParameterError(f"radius must be >= 0, got {radius}")
    ball = ball_index(model, radius)
    forms = ball.forms
    n = len(forms)

    if mode == 'exhaustive':
        if float(n) ** 4 > DELTA_EXHAUSTIVE_BUDGET:
            raise ResourceBudgetError(
                f"|B_{radius}|^4 = {float(n) ** 4:.3g} exceeds DELTA_EXHAUSTIVE_BUDGET={DELTA_EXHAUSTIVE_BUDGET:.3g}"
            )
        logger.info(f"Exhaustive four-point delta for {model.name}, R={radius}, |B_R|={n}")
        dist = _distance_matrix(model, forms)
        best, witness = 0, (0, 0, 0, 0)
        for i in range(n):
            row = dist[i]
            # Trục (y, z, w)
            lhs = row[:, None, None] + dist[None, :, :]
            cross1 = row[None, :, None] + dist[:, None, :]
            cross2 = row[None, None, :] + dist[:, :, None]
            defect = lhs - np.maximum(cross1, cross2)
            flat = int(np.argmax(defect))
            value = int(defect.flat[flat])
            if value > best:
                best = value
                witness = (i,) + tuple(int(v) for v in np.unravel_index(flat, defect.shape))
        return DeltaEstimate(
            value=best,
            radius=radius,
            mode='exhaustive',
            witness=tuple(model.element(forms[i]) for i in witness),
        )

    if mode == 'sampled':
        if trials < 1:
            raise InvalidParameterError(f"trials must be >= 1, got {trials}")
        rng = np.random.default_rng(seed)
        picks = rng.integers(0, n, size=(trials, 4))
        best, witness = 0, (0, 0, 0, 0)
        for quad in picks:
            elems = [model.element(forms[i]) for i in quad]
            value = quadruple_defect(model, *elems)
            if value > best:
                best = value
                witness = tuple(int(i) for i in quad)
        logger.info(f"Sampled four-point delta for {model.name}, R={radius}: {best} ({trials} trials)")
        return DeltaEstimate(
            value=best,
            radius=radius,
            mode='sampled',
            witness=tuple(model.element(forms[i]) for i in witness),
            trials=trials,
            seed=seed,
        )

    raise InvalidParameterError(f"unknown delta mode {mode!r}")


def geodesic_split(model: GroupModel, x: GroupElement, k: int, n: int, m: int
                   ) -> Tuple[GroupElement, GroupElement]:
    """
    Tách x ∈ E_m thành x = x̄·x̃ với ℓ(x̄) = k − q, ℓ(x̃) = n − q̃,
    trong đó p = k + n − m, q = ⌊p/2⌋, q̃ = p − q.

    Args:
        model: Group model
        x: Phần tử có độ dài m
        k, n, m: Các độ dài

    Returns:
        Tuple (x̄, x̃)
    """
    length = model.length(x)
    if length != m:
        raise LengthConstraintError(f"l(x) = {length} but m = {m}")
    if abs(m - n) > k:
        raise LengthConstraintError(f"|m - n| <= k violated: |{m} - {n}| > {k}")
    if abs(n - k) > m:
        raise LengthConstraintError(f"|n - k| <= m violated: |{n} - {k}| > {m}")

    p = k + n - m
    q = p // 2
    q_tilde = p - q

    word = model.geodesic_word(x)
    cut = k - q
    x_bar = model.identity
    for s in word[:cut]:
        x_bar = model.multiply(x_bar, s)
    x_tilde = model.identity
    for s in word[cut:]:
        x_tilde = model.multiply(x_tilde, s)

    if model.multiply(x_bar, x_tilde) != x:
        raise LengthConstraintError(f"split of {x} does not multiply back")
    if model.length(x_bar) != k - q or model.length(x_tilde) != n - q_tilde:
        raise LengthConstraintError(
            f"split lengths ({model.length(x_bar)}, {model.length(x_tilde)}) != ({k - q}, {n - q_tilde})"
        )
    return x_bar, x_tilde


def _relative_residual(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    reg = LinearRegression().fit(x.reshape(-1, 1), y)
    residual = y - reg.predict(x.reshape(-1, 1))
    rms = float(np.sqrt(np.mean(residual ** 2)))
    spread = float(np.std(y))
    return float(reg.coef_[0]), (rms / spread if spread > 0 else 0.0)


def growth_exponent(model: GroupModel, p_max: int, store=None) -> GrowthReport:
    """
    Ước lượng growth: slope của log|B_p| theo log p trên [p_max/2, p_max]

    Args:
        model: Group model
        p_max: Bán kính lớn nhất (>= 4)

    Returns:
        GrowthReport với classification 'polynomial' hoặc 'exponential'
    """
    if p_max < 4:
        raise InvalidParameterError(f"growth_exponent requires p_max >= 4, got {p_max}")

    sizes = ball_sizes(model, p_max, store=store)
    start = max(1, math.ceil(p_max / 2))
    ps = np.arange(start, p_max + 1, dtype=float)
    log_sizes = np.log(np.asarray(sizes[start:], dtype=float))

    loglog_slope, loglog_res = _relative_residual(np.log(ps), log_sizes)
    semilog_slope, semilog_res = _relative_residual(ps, log_sizes)

    if semilog_res <= GROWTH_RESIDUAL_TOL and semilog_res < loglog_res:
        classification = 'exponential'
    else:
        classification = 'polynomial'

    logger.info(
        f"{model.name}: growth slope {loglog_slope:.3f} over p in [{start}, {p_max}] "
        f"-> {classification} (semilog residual {semilog_res:.4f}, loglog residual {loglog_res:.4f})"
    )
    return GrowthReport(
        sizes=sizes,
        fit_range=(start, p_max),
        loglog_slope=loglog_slope,
        loglog_residual=loglog_res,
        semilog_slope=semilog_slope,
        semilog_residual=semilog_res,
        classification=classification,
    )
