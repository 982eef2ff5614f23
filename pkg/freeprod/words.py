"""
Module cho reduced free product A1 * A2: basis 𝓑 gồm các alternating word
của basis element khác 1, và phép nhân y*z theo quy tắc rút gọn.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

from config.settings import FREE_WORD_BUDGET
from freeprod.components import ComponentAlgebra
from utils.errors import InvalidParameterError, ResourceBudgetError
from utils.logger import get_logger

logger = get_logger(__name__)

Letter = Tuple[int, int]


@dataclass(frozen=True, order=True)
class FreeWord:
    """
    Alternating word x_1 x_2 ... x_l; mỗi letter là (component tag, basis index >= 1).
    Word rỗng là 1.
    """
    letters: Tuple[Letter, ...] = ()
    lengths: Tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if len(self.letters) != len(self.lengths):
            raise InvalidParameterError("each letter needs a length")
        for (tag, idx), L in zip(self.letters, self.lengths):
            if tag not in (1, 2) or idx < 1 or L < 1:
                raise InvalidParameterError(f"invalid letter ({tag}, {idx}) of length {L}")
        for a, b in zip(self.letters, self.letters[1:]):
            if a[0] == b[0]:
                raise InvalidParameterError(f"consecutive letters {a}, {b} from the same component")

    @property
    def length(self) -> int:
        return sum(self.lengths)

    @property
    def mu(self) -> int:
        """Tag của letter đầu (0 cho word rỗng)"""
        return self.letters[0][0] if self.letters else 0

    @property
    def nu(self) -> int:
        """Tag của letter cuối (0 cho word rỗng)"""
        return self.letters[-1][0] if self.letters else 0

    def is_identity(self) -> bool:
        return not self.letters

    def star(self) -> 'FreeWord':
        """x* = x_l ... x_1 (các letter self-adjoint)"""
        return FreeWord(self.letters[::-1], self.lengths[::-1])

    def slice(self, start: int, stop: int = None) -> 'FreeWord':
        return FreeWord(self.letters[start:stop], self.lengths[start:stop])

    def concat(self, other: 'FreeWord') -> 'FreeWord':
        return FreeWord(self.letters + other.letters, self.lengths + other.lengths)

    def label(self, names: Dict[Letter, str] = None) -> str:
        if not self.letters:
            return '1'
        if names:
            return ''.join(names.get(x, f"[{x[0]}:{x[1]}]") for x in self.letters)
        return ' '.join(f"{tag}:{idx}" for tag, idx in self.letters)

    def __len__(self):
        return len(self.letters)


FreeVector = Dict[FreeWord, complex]


class FreeProduct:
    def __init__(self, A1: ComponentAlgebra, A2: ComponentAlgebra):
        """
        Khởi tạo free product

        Args:
            A1, A2: Hai component algebra
        """
        self.algebras = {1: A1, 2: A2}
        self._bases: Dict[int, List[FreeWord]] = {}
        self._indices: Dict[int, Dict[FreeWord, int]] = {}
        self.tables: Dict[tuple, object] = {}

    @property
    def name(self) -> str:
        return f"{self.algebras[1].name} * {self.algebras[2].name}"

    @property
    def constant(self) -> float:
        """max(C₁, C₂) của các component (phải đã khai báo)"""
        values = [A.constant for A in self.algebras.values()]
        if any(v is None for v in values):
            raise InvalidParameterError(f"{self.name}: component constants are not declared")
        return max(values)

    def letter_length(self, letter: Letter) -> int:
        tag, idx = letter
        return self.algebras[tag].lengths[idx]

    def word(self, letters: Sequence[Letter]) -> FreeWord:
        letters = tuple((int(t), int(i)) for t, i in letters)
        for tag, idx in letters:
            if tag not in self.algebras or not 1 <= idx < self.algebras[tag].dimension:
                raise InvalidParameterError(f"letter ({tag}, {idx}) is not a non-unit basis element")
        return FreeWord(letters, tuple(self.letter_length(x) for x in letters))

    def basis(self, m: int) -> List[FreeWord]:
        """
        𝓑_m: mọi alternating word có tổng độ dài m, sắp thứ tự deterministic

        Args:
            m: Độ dài (>= 0)

        Returns:
            List FreeWord
        """
        if m < 0:
            raise InvalidParameterError(f"m must be >= 0, got {m}")
        if m in self._bases:
            return self._bases[m]

        letters = {
            tag: [(tag, i) for i in range(1, A.dimension)]
            for tag, A in self.algebras.items()
        }
        words: List[Tuple[Letter, ...]] = []

        def extend(prefix, remaining, last_tag):
            if remaining == 0:
                words.append(prefix)
                if len(words) > FREE_WORD_BUDGET:
                    raise ResourceBudgetError(
                        f"{self.name}: |B_{m}| exceeds FREE_WORD_BUDGET={FREE_WORD_BUDGET}"
                    )
                return
            for tag in (1, 2):
                if tag == last_tag:
                    continue
                for letter in letters[tag]:
                    L = self.letter_length(letter)
                    if L <= remaining:
                        extend(prefix + (letter,), remaining - L, tag)

        extend((), m, 0)
        basis = sorted(self.word(w) for w in words)
        self._bases[m] = basis
        self._indices[m] = {w: i for i, w in enumerate(basis)}
        logger.debug(f"{self.name}: |B_{m}| = {len(basis)}")
        return basis

    def index(self, m: int) -> Dict[FreeWord, int]:
        self.basis(m)
        return self._indices[m]

    def reduce_product(self, y: FreeWord, z: FreeWord) -> FreeVector:
        """
        y*z khai triển trên basis 𝓑

        Đi từ trong ra ngoài: y* z = y_β ... y_1 z_1 ... z_γ. Khi y_i, z_i cùng
        component, y_i z_i = σ(y_i z_i)·1 + P_0^⊥(y_i z_i); phần P_0^⊥ cho các
        word y_β...y_{i+1} b_r z_{i+1}...z_γ, phần trace (= 1 nếu y_i = z_i,
        ngược lại 0) tiếp tục rút gọn.

        Args:
            y, z: FreeWord

        Returns:
            Dict {FreeWord: hệ số}
        """
        out: Dict[FreeWord, complex] = defaultdict(complex)
        i = 0
        while True:
            if i == len(y) or i == len(z) or y.letters[i][0] != z.letters[i][0]:
                out[y.slice(i).star().concat(z.slice(i))] += 1.0
                break
            tag = y.letters[i][0]
            A = self.algebras[tag]
            a, b = y.letters[i][1], z.letters[i][1]
            outer = y.slice(i + 1).star()
            inner = z.slice(i + 1)
            for r in range(1, A.dimension):
                coeff = A.tensor[a, b, r]
                if coeff != 0:
                    middle = FreeWord(((tag, r),), (A.lengths[r],))
                    out[outer.concat(middle).concat(inner)] += complex(coeff)
            if a != b:
                break
            i += 1
        return {w: c for w, c in out.items() if c != 0}

    def orthonormality_defect(self, y: FreeWord, z: FreeWord) -> float:
        """|σ(y*z) − δ_{y,z}|"""
        coeff = self.reduce_product(y, z).get(FreeWord(), 0j)
        return abs(coeff - (1.0 if y == z else 0.0))


@lru_cache(maxsize=None)
def get_free_product(A1: ComponentAlgebra, A2: ComponentAlgebra) -> FreeProduct:
    return FreeProduct(A1, A2)


def free_basis(A1: ComponentAlgebra, A2: ComponentAlgebra, m: int) -> List[FreeWord]:
    return get_free_product(A1, A2).basis(m)


def reduce_product(y: FreeWord, z: FreeWord, A1: ComponentAlgebra, A2: ComponentAlgebra) -> FreeVector:
    return get_free_product(A1, A2).reduce_product(y, z)
