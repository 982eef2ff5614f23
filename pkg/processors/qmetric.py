"""
Module state và metric ρ_L(μ, ν) = sup{ |μ(a) − ν(a)| : L(a) <= 1 } trên
truncation A_K, với L thay bằng L_R(a) = ‖[D_R, a]‖ (lower bound của L).
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import DEFAULT_SEED, METRIC_MAX_ITER, METRIC_STARTS, METRIC_TOL
from groups.models import GroupModel
from groups.spheres import sphere
from processors.filtration import (
    FilteredVector, _inverse_permutation, commutator_matrix, seminorm_upper, truncated_operator,
)
from processors.linop import SparseMatrix, op_norm
from utils.errors import InvalidParameterError, NotAmenableError
from utils.logger import get_logger, log_banner

logger = get_logger(__name__)

STATE_KINDS = ('trace', 'vector', 'character')


# ----------------------------------------------------------------------
# States
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class StateSpec:
    """
    State trên group algebra: canonical trace, vector state của ξ ∈ ℓ²(B_R)
    (‖ξ‖₂ = 1), hoặc character (phase trên mỗi base generator).
    """
    kind: str
    label: str = ''
    vector: Optional[FilteredVector] = field(default=None, repr=False)
    phases: Tuple[complex, ...] = ()

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise InvalidParameterError(f"unknown state kind '{self.kind}'")
        if not self.label:
            object.__setattr__(self, 'label', self.kind)

    @classmethod
    def trace(cls) -> 'StateSpec':
        return cls('trace', 'trace')

    @classmethod
    def vector_state(cls, model: GroupModel, values: Dict, normalize: bool = True,
                     label: str = '') -> 'StateSpec':
        """
        Vector state ω_ξ(f) = ⟨ξ, f·ξ⟩

        Args:
            model: Group model
            values: {element hoặc normal form: hệ số} của ξ
            normalize: Chuẩn hóa ‖ξ‖₂ = 1 (nếu False thì ‖ξ‖₂ phải đã bằng 1)
            label: Tên hiển thị
        """
        xi = FilteredVector.from_values(model, values)
        norm = xi.norm2()
        if norm == 0:
            raise InvalidParameterError("vector state needs a nonzero vector")
        if normalize:
            xi = xi * (1.0 / norm)
        elif abs(norm - 1.0) > 1e-12:
            raise InvalidParameterError(f"vector state has norm {norm}, expected 1")
        if not label:
            label = 'vector:' + '|'.join(model.encode_form(f) for f in sorted(xi.values()))
        return cls('vector', label, vector=xi)

    @classmethod
    def character(cls, model: GroupModel, phases: Sequence[complex], label: str = '') -> 'StateSpec':
        if not model.amenable:
            raise NotAmenableError(
                f"{model.name} is not amenable; its characters need not be states of the reduced algebra"
            )
        phases = tuple(complex(p) for p in phases)
        model.check_phases(phases)
        if not label:
            label = 'character:' + ','.join(f"{math.atan2(p.imag, p.real):.6g}" for p in phases)
        return cls('character', label, phases=phases)

    @property
    def radius(self) -> int:
        if self.kind == 'vector':
            return self.vector.top_degree
        return 0


def parse_state(model: GroupModel, text: str) -> StateSpec:
    """
    Parse state từ chuỗi: 'trace', 'vector:<form>|<form>|...' (trọng số bằng nhau),
    'character:<góc>,<góc>,...' (radian, mỗi base generator một góc)
    """
    text = text.strip()
    if text == 'trace':
        return StateSpec.trace()
    kind, _, body = text.partition(':')
    if kind == 'vector' and body:
        forms = [model.decode_form(part) for part in body.split('|')]
        return StateSpec.vector_state(model, {f: 1.0 for f in forms}, label=text)
    if kind == 'character' and body:
        angles = [float(x) for x in body.split(',')]
        return StateSpec.character(model, [complex(math.cos(t), math.sin(t)) for t in angles], label=text)
    raise InvalidParameterError(f"cannot parse state '{text}'")


def state_eval(model: GroupModel, state: StateSpec, f: FilteredVector) -> complex:
    """
    Giá trị của state trên f

    Args:
        model: Group model
        state: StateSpec
        f: FilteredVector

    Returns:
        trace: f(e); vector: ⟨ξ, f·ξ⟩; character: Σ_x f(x)χ(x)
    """
    if state.kind == 'trace':
        return f.trace()
    if state.kind == 'vector':
        R = max(state.radius, f.top_degree)
        xi = state.vector.ball_vector(R)
        return complex(np.vdot(xi, truncated_operator(model, f, R).matvec(xi)))
    if not model.amenable:
        raise NotAmenableError(f"character state on nonamenable model {model.name}")
    return complex(sum(
        coeff * model.character_value(state.phases, model.element(form))
        for form, coeff in f.values().items()
    ))


# ----------------------------------------------------------------------
# Metric estimate
# ----------------------------------------------------------------------
@dataclass
class MetricEstimate:
    mu: str
    nu: str
    upper_estimate: float
    certified_lower: float
    certified: bool
    witness: FilteredVector = field(repr=False)
    K: int = 0
    R: int = 0
    tol: float = METRIC_TOL
    seed: int = DEFAULT_SEED
    iterations: int = 0
    tail_energy: float = 0.0
    converged: bool = True

    def to_record(self) -> Dict:
        return {
            'mu': self.mu,
            'nu': self.nu,
            'K': self.K,
            'R': self.R,
            'upper_estimate': self.upper_estimate,
            'certified_lower': self.certified_lower,
            'certified': self.certified,
            'tail_energy': self.tail_energy,
            'iterations': self.iterations,
            'converged': self.converged,
            'tol': self.tol,
            'seed': self.seed,
        }


class _SelfAdjointChart:
    """
    Tọa độ thực θ ↦ a(θ) của phần tử self-adjoint, trace-free trên B_K:
    mỗi cặp {x, x⁻¹} cho hai tham số (Re, Im của a(x)), mỗi involution một tham số.
    """

    def __init__(self, model: GroupModel, K: int, R: int):
        self.model = model
        self.K = K
        self.R = R
        self.coords: List[Tuple[int, int, int, bool]] = []  # (k, i, j, imaginary)
        for k in range(1, K + 1):
            perm = _inverse_permutation(model, k)
            for i, j in enumerate(perm):
                if i == j:
                    self.coords.append((k, i, j, False))
                elif i < j:
                    self.coords.append((k, i, j, False))
                    self.coords.append((k, i, j, True))
        self.basis = [self._basis_vector(c) for c in self.coords]
        self.matrices: List[SparseMatrix] = [commutator_matrix(model, e, R) for e in self.basis]

    def _basis_vector(self, coord) -> FilteredVector:
        k, i, j, imaginary = coord
        vec = np.zeros(len(sphere(self.model, k)), dtype=complex)
        if i == j:
            vec[i] = 1.0
        elif imaginary:
            vec[i], vec[j] = 1j, -1j
        else:
            vec[i], vec[j] = 1.0, 1.0
        return FilteredVector(self.model, {k: vec})

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def element(self, theta: np.ndarray) -> FilteredVector:
        components = {k: np.zeros(len(sphere(self.model, k)), dtype=complex) for k in range(1, self.K + 1)}
        for t, (k, i, j, imaginary) in zip(theta, self.coords):
            if i == j:
                components[k][i] += t
            elif imaginary:
                components[k][i] += 1j * t
                components[k][j] -= 1j * t
            else:
                components[k][i] += t
                components[k][j] += t
        return FilteredVector(self.model, components)

    def coordinates(self, a: FilteredVector) -> np.ndarray:
        """Tọa độ của phần self-adjoint, trace-free của Q_K(a)"""
        theta = np.zeros(self.dimension)
        for n, (k, i, j, imaginary) in enumerate(self.coords):
            vec = a.components.get(k)
            if vec is None:
                continue
            if i == j:
                theta[n] = vec[i].real
            elif imaginary:
                theta[n] = (vec[i].imag - vec[j].imag) / 2
            else:
                theta[n] = (vec[i].real + vec[j].real) / 2
        return theta

    def matrix(self, theta: np.ndarray) -> SparseMatrix:
        total = SparseMatrix.zeros(self.matrices[0].shape)
        for t, M in zip(theta, self.matrices):
            if t != 0:
                total = total + M.scaled(t)
        return total

    def subgradient(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """G_j = Re(uᴴ M_j v): subgradient của θ ↦ ‖M(θ)‖ tại cặp singular (u, v)"""
        return np.asarray([np.vdot(left, M.matvec(right)).real for M in self.matrices])


def _ascend(chart: _SelfAdjointChart, c: np.ndarray, theta: np.ndarray, tol: float,
            max_iter: int, seed: int) -> Tuple[np.ndarray, float, int, bool]:
    """
    Tăng c·θ trên mặt {L_R(θ) = 1}: đi theo thành phần tiếp tuyến của c,
    bước 1/√t có backtracking, rồi rescale về L_R = 1
    """
    def normalized(th):
        estimate = op_norm(chart.matrix(th), seed=seed)
        return th / estimate.value, estimate

    theta, estimate = normalized(theta)
    value = float(c @ theta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        # left/right của M(θ) trùng với của M(θ/L)
        G = chart.subgradient(estimate.left, estimate.right)
        gg = float(G @ G)
        d = c - (float(c @ G) / gg) * G if gg > 0 else c
        d_norm = float(np.linalg.norm(d))
        if d_norm <= tol * float(np.linalg.norm(c)):
            converged = True
            break

        step = 0.5 * float(np.linalg.norm(theta)) / (d_norm * math.sqrt(iterations))
        accepted = False
        for _ in range(12):
            candidate, cand_est = normalized(theta + step * d)
            cand_value = float(c @ candidate)
            if cand_value > value:
                accepted = True
                break
            step /= 2
        if not accepted:
            converged = True
            break
        gain = cand_value - value
        theta, estimate, value = candidate, cand_est, cand_value
        if gain <= tol * max(1.0, abs(value)):
            converged = True
            break
    return theta, value, iterations, converged


def metric_estimate(model: GroupModel, mu: StateSpec, nu: StateSpec, K: int, R: int,
                    tol: float = METRIC_TOL, seed: int = DEFAULT_SEED, C: Optional[float] = None,
                    starts: int = METRIC_STARTS, max_iter: int = METRIC_MAX_ITER,
                    warm_start: Optional[FilteredVector] = None) -> MetricEstimate:
    """
    Ước lượng ρ_L(μ, ν) trên A_K với ràng buộc L_R(a) <= 1

    Args:
        model: Group model
        mu, nu: Hai state
        K: Bậc truncation của a
        R: Bán kính của ℓ²(B_R) dùng cho L_R (R >= K)
        tol: Tolerance dừng
        seed: Seed cho multistart
        C: Haagerup constant (cho certified lower bound qua seminorm_upper)
        starts: Số điểm khởi đầu
        max_iter: Số vòng lặp tối đa mỗi start
        warm_start: Điểm khởi đầu bổ sung (ví dụ witness của K nhỏ hơn)

    Returns:
        MetricEstimate
    """
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    if R < K:
        raise InvalidParameterError(f"R = {R} must be >= K = {K}")
    if tol <= 0:
        raise InvalidParameterError(f"tol must be > 0, got {tol}")
    if C is not None and C <= 0:
        raise InvalidParameterError(f"Haagerup constant must be > 0, got {C}")
    for state in (mu, nu):
        if state.kind == 'character' and not model.amenable:
            raise NotAmenableError(f"character state on nonamenable model {model.name}")

    chart = _SelfAdjointChart(model, K, R)
    c = np.asarray([(state_eval(model, mu, e) - state_eval(model, nu, e)).real for e in chart.basis])
    zero = FilteredVector.zeros(model)
    if not np.any(np.abs(c) > 1e-15):
        logger.debug(f"{mu.label} and {nu.label} agree on A_{K}")
        return MetricEstimate(mu.label, nu.label, 0.0, 0.0, C is not None, zero, K, R, tol, seed)

    rng = np.random.default_rng([seed, K, R])
    initial = [c.copy()]
    if warm_start is not None:
        warm = chart.coordinates(warm_start)
        if np.any(warm != 0):
            initial.append(warm)
    while len(initial) < starts + (warm_start is not None):
        initial.append(rng.standard_normal(chart.dimension))

    best_theta, best_value = None, -math.inf
    total_iterations, all_converged = 0, True
    for theta in initial:
        if c @ theta < 0:
            theta = -theta
        if not np.any(theta):
            continue
        theta, value, iterations, converged = _ascend(chart, c, theta, tol, max_iter, seed)
        total_iterations += iterations
        all_converged &= converged
        if value > best_value:
            best_theta, best_value = theta, value

    witness = chart.element(best_theta)
    gap = abs(state_eval(model, mu, witness) - state_eval(model, nu, witness))
    if C is not None:
        certified_lower = gap / seminorm_upper(witness, C)
    else:
        certified_lower = gap
    tail = float(sum(k * k * v * v for k, v in witness.component_norms().items()))

    if not all_converged:
        logger.warning(f"metric_estimate({mu.label}, {nu.label}) at K={K}, R={R}: some starts did not converge")
    logger.debug(
        f"rho({mu.label}, {nu.label}) at K={K}, R={R}: upper estimate {best_value:.8f}, "
        f"certified lower {certified_lower:.8f}"
    )
    return MetricEstimate(
        mu=mu.label, nu=nu.label, upper_estimate=float(best_value),
        certified_lower=float(certified_lower), certified=C is not None, witness=witness,
        K=K, R=R, tol=tol, seed=seed, iterations=total_iterations, tail_energy=tail,
        converged=all_converged,
    )


# ----------------------------------------------------------------------
# Metric table
# ----------------------------------------------------------------------
@dataclass
class MetricTable:
    labels: List[str]
    estimates: Dict[Tuple[int, int], MetricEstimate]
    tol: float

    @property
    def values(self) -> np.ndarray:
        n = len(self.labels)
        out = np.zeros((n, n))
        for (i, j), est in self.estimates.items():
            out[i, j] = est.upper_estimate
        return out

    @property
    def zero_diagonal(self) -> bool:
        return bool(np.all(np.abs(np.diag(self.values)) <= self.tol))

    @property
    def symmetry_defect(self) -> float:
        v = self.values
        return float(np.abs(v - v.T).max()) if v.size else 0.0

    @property
    def symmetric(self) -> bool:
        return self.symmetry_defect <= 2 * self.tol

    @property
    def triangle_violations(self) -> List[Tuple[int, int, int, float]]:
        v = self.values
        n = len(self.labels)
        out = []
        for i in range(n):
            for j in range(n):
                for q in range(n):
                    excess = v[i, q] - v[i, j] - v[j, q]
                    if excess > 3 * self.tol:
                        out.append((i, j, q, float(excess)))
        return out

    @property
    def consistent(self) -> bool:
        return self.zero_diagonal and self.symmetric and not self.triangle_violations

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for (i, j), est in sorted(self.estimates.items()):
            record = est.to_record()
            record.update({'i': i, 'j': j})
            rows.append(record)
        return pd.DataFrame(rows)


def metric_table(model: GroupModel, states: Sequence[StateSpec], K: int, R: int,
                 tol: float = METRIC_TOL, seed: int = DEFAULT_SEED, C: Optional[float] = None,
                 starts: int = METRIC_STARTS) -> MetricTable:
    """
    Ma trận ρ_L(μ_i, μ_j) cho mọi cặp state, kèm kiểm tra đường chéo 0,
    đối xứng (2·tol) và bất đẳng thức tam giác (3·tol)
    """
    log_banner(logger, f"Metric table on {model.name}: {len(states)} states, K={K}, R={R}")

    estimates: Dict[Tuple[int, int], MetricEstimate] = {}
    for i, mu in enumerate(states):
        for j, nu in enumerate(states):
            estimates[(i, j)] = metric_estimate(model, mu, nu, K, R, tol=tol, seed=seed, C=C, starts=starts)
            logger.info(f"  rho({mu.label}, {nu.label}) ~ {estimates[(i, j)].upper_estimate:.8f}")

    table = MetricTable([s.label for s in states], estimates, tol)
    if not table.consistent:
        logger.warning(
            f"Metric table is not a metric within tolerance: symmetry defect {table.symmetry_defect:.3e}, "
            f"{len(table.triangle_violations)} triangle violations"
        )
    return table


def metric_grid(model: GroupModel, mu: StateSpec, nu: StateSpec, Ks: Sequence[int], Rs: Sequence[int],
                tol: float = METRIC_TOL, seed: int = DEFAULT_SEED,
                starts: int = METRIC_STARTS) -> Dict[Tuple[int, int], MetricEstimate]:
    """
    metric_estimate trên lưới (K, R); witness của K trước là warm start cho K sau
    (cùng R), nên upper estimate không giảm theo K
    """
    out: Dict[Tuple[int, int], MetricEstimate] = {}
    for R in sorted(Rs):
        previous = None
        for K in sorted(Ks):
            if K > R:
                continue
            est = metric_estimate(model, mu, nu, K, R, tol=tol, seed=seed, starts=starts,
                                  warm_start=previous.witness if previous else None)
            out[(K, R)] = est
            previous = est
    return out
