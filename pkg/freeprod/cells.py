"""
Module phân hoạch 𝓑_m thành các cell P(s,t), Q(s,t), và PT(t) / PS(s)
trong trường hợp suy biến, theo vị trí k − q với q = (k + n − m)/2.

Mọi so sánh độ dài dùng số học nhân đôi: 2(k − q) = k − n + m.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from freeprod.words import FreeProduct, FreeWord
from utils.errors import InvalidParameterError, LengthConstraintError
from utils.logger import get_logger

logger = get_logger(__name__)

VARIANTS = ('P', 'Q', 'PT', 'PS')
EMPTY = FreeWord()


@dataclass(frozen=True)
class CellLabel:
    variant: str
    s: FreeWord = EMPTY
    t: FreeWord = EMPTY

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidParameterError(f"unknown cell variant '{self.variant}'")

    def label(self) -> str:
        if self.variant == 'PT':
            return f"PT({self.t.label()})"
        if self.variant == 'PS':
            return f"PS({self.s.label()})"
        return f"{self.variant}({self.s.label()}; {self.t.label()})"

    def __str__(self):
        return self.label()


def _same_mu(a: FreeWord, b: FreeWord) -> bool:
    # μ(1) vừa bằng vừa khác mọi μ
    return a.is_identity() or b.is_identity() or a.mu == b.mu


def _different_mu(a: FreeWord, b: FreeWord) -> bool:
    return a.is_identity() or b.is_identity() or a.mu != b.mu


def _check_lengths(m: int, k: int, n: int):
    if m < 1:
        raise InvalidParameterError(f"cells are defined for m >= 1, got m={m}")
    if abs(m - n) > k:
        raise LengthConstraintError(f"|m - n| <= k violated: m={m}, n={n}, k={k}")
    if abs(n - k) > m:
        raise LengthConstraintError(f"|n - k| <= m violated: m={m}, n={n}, k={k}")


def classify_cell(x: FreeWord, k: int, n: int) -> CellLabel:
    """
    Cell duy nhất chứa x ∈ 𝓑_m

    Args:
        x: FreeWord độ dài m >= 1
        k: Degree của a
        n: Degree của ξ

    Returns:
        CellLabel
    """
    m = x.length
    _check_lengths(m, k, n)

    head2 = k - n + m  # 2(k − q)
    tail2 = n - k + m  # 2(n − q)
    if head2 == 0:
        return CellLabel('PT', t=x.slice(1))
    if tail2 == 0:
        return CellLabel('PS', s=x.slice(0, len(x) - 1))

    prefix = 0
    for j in range(len(x)):
        before = 2 * prefix
        prefix += x.lengths[j]
        after = 2 * prefix
        if after == head2:
            return CellLabel('Q', s=x.slice(0, j).star(), t=x.slice(j + 2))
        if before < head2 < after:
            return CellLabel('P', s=x.slice(0, j).star(), t=x.slice(j + 1))
    raise LengthConstraintError(f"no cut at 2(k - q) = {head2} inside a word of length {m}")


def cell_memberships(x: FreeWord, k: int, n: int) -> List[CellLabel]:
    """
    Mọi cell chứa x theo định nghĩa trực tiếp (không qua classify_cell);
    phân hoạch đúng khi list này có đúng một phần tử.
    """
    m = x.length
    _check_lengths(m, k, n)
    head2 = k - n + m
    tail2 = n - k + m
    found: List[CellLabel] = []

    if head2 == 0 or tail2 == 0:
        if head2 == 0 and len(x) >= 1:
            r, t = x.slice(0, 1), x.slice(1)
            if t.length < m and _different_mu(r, t):
                found.append(CellLabel('PT', t=t))
        if tail2 == 0 and len(x) >= 1:
            s, r = x.slice(0, len(x) - 1), x.slice(len(x) - 1)
            if s.length < m and _different_mu(r, s.star()):
                found.append(CellLabel('PS', s=s))
        return found

    for j in range(len(x)):
        s, r, t = x.slice(0, j).star(), x.slice(j, j + 1), x.slice(j + 1)
        if (2 * s.length < head2 and 2 * t.length < tail2 and _same_mu(s, t)
                and _different_mu(s, r) and _different_mu(r, t)):
            found.append(CellLabel('P', s=s, t=t))

    if head2 % 2 == 0:
        for j in range(len(x) - 1):
            s, r1 = x.slice(0, j).star(), x.slice(j, j + 1)
            r2, t = x.slice(j + 1, j + 2), x.slice(j + 2)
            if (2 * (s.length + r1.length) == head2 and 2 * (r2.length + t.length) == tail2
                    and 2 * s.length < head2 and 2 * t.length < tail2
                    and _different_mu(s, t) and _different_mu(r1, s) and _different_mu(r2, t)):
                found.append(CellLabel('Q', s=s, t=t))
    return found


@dataclass
class PartitionReport:
    m: int
    k: int
    n: int
    total: int
    cells: Dict[str, int] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)
    skipped: Optional[str] = None

    @property
    def ok(self) -> bool:
        return not self.failures and sum(self.cells.values()) == self.total


def verify_partition(fp: FreeProduct, m: int, k: int, n: int) -> PartitionReport:
    """
    Kiểm tra 𝓑_m là hợp rời của các cell: mỗi x có đúng một membership
    và membership đó trùng với classify_cell

    Args:
        fp: FreeProduct
        m, k, n: Các degree

    Returns:
        PartitionReport
    """
    if m == 0:
        return PartitionReport(m, k, n, total=len(fp.basis(0)), cells={'1': 1}, skipped='m = 0')
    _check_lengths(m, k, n)

    basis = fp.basis(m)
    counts: Counter = Counter()
    failures: List[str] = []
    for x in basis:
        members = cell_memberships(x, k, n)
        label = classify_cell(x, k, n)
        if len(members) != 1:
            failures.append(f"{x.label()}: {len(members)} cells {[str(c) for c in members]}")
            continue
        if members[0] != label:
            failures.append(f"{x.label()}: classified {label} but belongs to {members[0]}")
            continue
        counts[str(label)] += 1

    report = PartitionReport(m, k, n, total=len(basis), cells=dict(counts), failures=failures)
    if report.ok:
        logger.debug(f"{fp.name}: B_{m} (k={k}, n={n}) splits into {len(counts)} cells")
    else:
        logger.warning(f"{fp.name}: partition of B_{m} (k={k}, n={n}) fails on {len(failures)} words")
    return report
