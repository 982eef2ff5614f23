"""
Module định nghĩa component algebra: *-algebra hữu hạn chiều có filtration,
trace trung thực và basis trực chuẩn self-adjoint b_0 = 1, b_1, ..., b_{d-1}.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.settings import COMPONENT_DIM_BUDGET, DEFAULT_SEED, HAAGERUP_ITERS, HAAGERUP_STARTS
from utils.errors import InvalidParameterError, InvariantViolation, ResourceBudgetError
from utils.logger import get_logger

logger = get_logger(__name__)

STRUCTURE_TOL = 1e-12


@dataclass(eq=False)
class ComponentAlgebra:
    """
    b_i·b_j = Σ_k tensor[i, j, k]·b_k; trace là hệ số tại b_0.
    Mọi invariant được kiểm tra khi khởi tạo.
    """
    name: str
    lengths: Tuple[int, ...]
    tensor: np.ndarray = field(repr=False)
    constant: Optional[float] = None
    provenance: str = 'undeclared'

    def __post_init__(self):
        self.lengths = tuple(int(x) for x in self.lengths)
        self.tensor = np.asarray(self.tensor, dtype=complex)
        self.tensor.setflags(write=False)
        self.validate()

    @property
    def dimension(self) -> int:
        return len(self.lengths)

    @property
    def max_length(self) -> int:
        return max(self.lengths)

    def grade(self, k: int) -> List[int]:
        """Chỉ số các basis element có độ dài k"""
        return [i for i, L in enumerate(self.lengths) if L == k]

    def left_multiplication(self, i: int) -> np.ndarray:
        """Ma trận của b_i· trên ℓ²(A, trace): L[r, j] = tensor[i, j, r]"""
        return self.tensor[i].T

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.einsum('i,j,ijk->k', a, b, self.tensor)

    def validate(self):
        d = self.dimension
        c = self.tensor
        if c.shape != (d, d, d):
            raise InvalidParameterError(f"{self.name}: tensor shape {c.shape}, expected {(d, d, d)}")
        if d == 0 or self.lengths[0] != 0:
            raise InvalidParameterError(f"{self.name}: b_0 must be the unit with length 0")
        if any(L < 1 for L in self.lengths[1:]):
            raise InvalidParameterError(f"{self.name}: non-unit basis elements need length >= 1")

        eye = np.eye(d)
        checks = {
            'unit (left)': np.abs(c[0] - eye).max(),
            'unit (right)': np.abs(c[:, 0, :] - eye).max(),
            'orthonormality': np.abs(c[:, :, 0] - eye).max(),
            'tracial symmetry': np.abs(c[:, :, 0] - c[:, :, 0].T).max(),
            # (b_i b_j)* = b_j b_i với b_k self-adjoint
            'self-adjoint basis': np.abs(np.conj(c) - c.transpose(1, 0, 2)).max(),
            'associativity': np.abs(
                np.einsum('ijk,klr->ijlr', c, c) - np.einsum('jlk,ikr->ijlr', c, c)
            ).max(),
        }
        for name, deviation in checks.items():
            if deviation > STRUCTURE_TOL:
                raise InvariantViolation(f"{self.name}: {name} fails (deviation {deviation:.3g})")

        L = np.asarray(self.lengths)
        too_long = L[None, None, :] > L[:, None, None] + L[None, :, None]
        if np.any(np.abs(c[too_long]) > STRUCTURE_TOL):
            raise InvariantViolation(f"{self.name}: grading compatibility fails")

        # Gram matrix τ(b_i* b_j) phải positive definite (trace trung thực)
        gram = c[:, :, 0]
        if np.linalg.eigvalsh((gram + gram.conj().T) / 2).min() <= 0:
            raise InvariantViolation(f"{self.name}: trace is not faithful")

    def with_constant(self, constant: float, provenance: str) -> 'ComponentAlgebra':
        return ComponentAlgebra(self.name, self.lengths, self.tensor, float(constant), provenance)

    # ------------------------------------------------------------------
    def to_json(self) -> str:
        payload = {
            'name': self.name,
            'dimension': self.dimension,
            'lengths': list(self.lengths),
            'tensor_real': self.tensor.real.tolist(),
            'tensor_imag': self.tensor.imag.tolist(),
            'constant': self.constant,
            'provenance': self.provenance,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> 'ComponentAlgebra':
        try:
            data = json.loads(text)
            tensor = np.asarray(data['tensor_real'], dtype=float) + 1j * np.asarray(data['tensor_imag'], dtype=float)
            if int(data['dimension']) != len(data['lengths']):
                raise InvalidParameterError("dimension does not match lengths")
            return cls(
                name=data['name'],
                lengths=tuple(data['lengths']),
                tensor=tensor,
                constant=data.get('constant'),
                provenance=data.get('provenance', 'undeclared'),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidParameterError(f"malformed ComponentAlgebra JSON: {e}")


def trivial_component() -> ComponentAlgebra:
    """ℂ với basis {1}"""
    return ComponentAlgebra('C', (0,), np.ones((1, 1, 1)), 1.0, 'trivial')


def component_from_cyclic(p: int) -> ComponentAlgebra:
    """
    Group algebra của Z/p với grading theo word length của generator u.
    Basis: 1, (u^a + u^-a)/√2, (u^a − u^-a)/(i√2) với 1 <= a < p/2,
    và u^{p/2} khi p chẵn.

    Args:
        p: Bậc của nhóm cyclic (>= 2)

    Returns:
        ComponentAlgebra
    """
    if p < 2:
        raise InvalidParameterError(f"component_from_cyclic requires p >= 2, got {p}")

    rows, lengths = [], []
    unit = np.zeros(p, dtype=complex)
    unit[0] = 1.0
    rows.append(unit)
    lengths.append(0)
    for a in range(1, (p + 1) // 2):
        plus = np.zeros(p, dtype=complex)
        plus[a] += 1 / math.sqrt(2)
        plus[p - a] += 1 / math.sqrt(2)
        minus = np.zeros(p, dtype=complex)
        minus[a] += 1 / (1j * math.sqrt(2))
        minus[p - a] -= 1 / (1j * math.sqrt(2))
        rows.extend([plus, minus])
        lengths.extend([a, a])
    if p % 2 == 0:
        middle = np.zeros(p, dtype=complex)
        middle[p // 2] = 1.0
        rows.append(middle)
        lengths.append(p // 2)

    B = np.asarray(rows)
    d = len(rows)
    tensor = np.zeros((d, d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            # convolution trên Z/p
            product = np.zeros(p, dtype=complex)
            for g in np.flatnonzero(B[i]):
                product += B[i, g] * np.roll(B[j], g)
            tensor[i, j] = B.conj() @ product

    tensor[np.abs(tensor) < 1e-15] = 0
    return ComponentAlgebra(f"C[Z/{p}]", tuple(lengths), tensor)


@dataclass
class ComponentConstantReport:
    algebra: str
    value: float
    witnesses: Dict[Tuple[int, int, int], Tuple[float, np.ndarray]]
    lower_bound_certified: bool = True

    @property
    def argmax(self) -> Tuple[int, int, int]:
        return max(self.witnesses, key=lambda t: self.witnesses[t][0])


def component_haagerup_constant(A: ComponentAlgebra, starts: int = HAAGERUP_STARTS,
                                iters: int = HAAGERUP_ITERS, seed: int = DEFAULT_SEED
                                ) -> ComponentConstantReport:
    """
    Max của ‖P_m L(b) P_n‖/‖b‖₂ trên b đơn vị ở grade k, cho mọi (k, m, n)
    (multistart alternating maximization, lower bound được chứng nhận)

    Args:
        A: Component algebra (dimension <= COMPONENT_DIM_BUDGET)
        starts: Số điểm khởi đầu cho mỗi triple
        iters: Số vòng luân phiên

    Returns:
        ComponentConstantReport
    """
    if A.dimension > COMPONENT_DIM_BUDGET:
        raise ResourceBudgetError(
            f"{A.name}: dimension {A.dimension} exceeds COMPONENT_DIM_BUDGET={COMPONENT_DIM_BUDGET}"
        )

    rng = np.random.default_rng(seed)
    top = A.max_length
    witnesses: Dict[Tuple[int, int, int], Tuple[float, np.ndarray]] = {}
    for k in range(top + 1):
        gk = A.grade(k)
        if not gk:
            continue
        for m in range(top + 1):
            for n in range(top + 1):
                if abs(m - n) > k or not A.grade(m) or not A.grade(n):
                    continue
                sub = A.tensor[np.ix_(gk, A.grade(n), A.grade(m))]
                best, best_b = -1.0, None
                for _ in range(starts):
                    b = rng.standard_normal(len(gk)) + 1j * rng.standard_normal(len(gk))
                    b /= np.linalg.norm(b)
                    for _ in range(iters):
                        M = np.einsum('i,ijr->rj', b, sub)
                        U, S, Vh = np.linalg.svd(M)
                        if S[0] == 0:
                            break
                        g = np.einsum('j,r,ijr->i', Vh[0].conj(), U[:, 0].conj(), sub)
                        g_norm = np.linalg.norm(g)
                        if g_norm == 0:
                            break
                        b = np.conj(g) / g_norm
                    value = float(np.linalg.norm(np.einsum('i,ijr->rj', b, sub), 2))
                    if value > best:
                        best, best_b = value, b
                witnesses[(k, m, n)] = (best, best_b)

    value = max(w[0] for w in witnesses.values())
    logger.info(f"{A.name}: component Haagerup constant (lower bound) {value:.10f}")
    return ComponentConstantReport(algebra=A.name, value=value, witnesses=witnesses)


def calibrated(A: ComponentAlgebra, **kwargs) -> ComponentAlgebra:
    """Trả về A với constant = kết quả brute force (nếu chưa khai báo)"""
    if A.constant is not None:
        return A
    report = component_haagerup_constant(A, **kwargs)
    return A.with_constant(report.value, 'brute-force lower bound')
