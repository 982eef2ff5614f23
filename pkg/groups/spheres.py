"""
Module quản lý spheres E_k, balls B_p và cấu trúc nhân (multiplication
structure) giữa các sphere, dùng để build các block P_m a P_n.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from groups.models import Form, GroupElement, GroupModel
from utils.errors import InvalidParameterError
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class SphereIndex:
    """E_k đã sắp thứ tự cùng map element -> index"""
    model_id: str
    radius: int
    forms: Tuple[Form, ...]
    index: Dict[Form, int] = field(repr=False)

    def __len__(self):
        return len(self.forms)

    @property
    def elements(self) -> List[GroupElement]:
        return [GroupElement(self.model_id, f) for f in self.forms]

    def position(self, g) -> Optional[int]:
        form = g.form if isinstance(g, GroupElement) else tuple(g)
        return self.index.get(form)


@dataclass(frozen=True, eq=False)
class BallIndex:
    """
    B_R sắp theo (độ dài, normal form); offsets[k] là vị trí bắt đầu của E_k.
    degrees[i] = ℓ(forms[i]) là nhãn của Dirac operator D = Σ n P_n.
    """
    model_id: str
    radius: int
    forms: Tuple[Form, ...]
    index: Dict[Form, int] = field(repr=False)
    degrees: np.ndarray = field(repr=False)
    offsets: Tuple[int, ...] = ()

    def __len__(self):
        return len(self.forms)

    def sphere_slice(self, k: int) -> slice:
        return slice(self.offsets[k], self.offsets[k + 1])


@dataclass(frozen=True, eq=False)
class BlockStructure:
    """
    Các bộ ba (row, col, left) với forms_m[row] = y_left · forms_n[col]

    Dùng chung cho mọi f trên cùng một cặp (left domain, target)
    """
    rows: np.ndarray
    cols: np.ndarray
    left: np.ndarray
    shape: Tuple[int, int]


def sphere(model: GroupModel, k: int, store=None) -> SphereIndex:
    """
    Lấy sphere E_k của model (dùng cache trên đĩa nếu có store)

    Args:
        model: Group model
        k: Bán kính
        store: SphereStore (optional)

    Returns:
        SphereIndex
    """
    if k < 0:
        raise InvalidParameterError(f"sphere radius must be >= 0, got {k}")

    cache_key = ('sphere', k)
    cached = model.tables.get(cache_key)
    if cached is not None:
        return cached

    forms = None
    if store is not None:
        forms = store.load(model, k)
        if forms is not None:
            model.remember_lengths(forms, k)
    if forms is None:
        forms = model.sphere_forms(k)
        if store is not None:
            store.save(model, k, forms)

    result = SphereIndex(
        model_id=model.name,
        radius=k,
        forms=tuple(forms),
        index={f: i for i, f in enumerate(forms)},
    )
    model.tables[cache_key] = result
    return result


def ball_sizes(model: GroupModel, p_max: int, store=None) -> List[int]:
    """
    Kích thước |B_0|, ..., |B_{p_max}|

    Args:
        model: Group model
        p_max: Bán kính lớn nhất

    Returns:
        List cumulative sizes
    """
    if p_max < 0:
        raise InvalidParameterError(f"p_max must be >= 0, got {p_max}")
    sizes = []
    total = 0
    for k in range(p_max + 1):
        total += len(sphere(model, k, store=store))
        sizes.append(total)
    return sizes


def ball_index(model: GroupModel, radius: int, store=None) -> BallIndex:
    """Ball B_R sắp theo thứ tự length-lexicographic"""
    cache_key = ('ball', radius)
    cached = model.tables.get(cache_key)
    if cached is not None:
        return cached

    forms: List[Form] = []
    degrees: List[int] = []
    offsets = [0]
    for k in range(radius + 1):
        sk = sphere(model, k, store=store)
        forms.extend(sk.forms)
        degrees.extend([k] * len(sk))
        offsets.append(len(forms))

    ball = BallIndex(
        model_id=model.name,
        radius=radius,
        forms=tuple(forms),
        index={f: i for i, f in enumerate(forms)},
        degrees=np.asarray(degrees, dtype=np.int64),
        offsets=tuple(offsets),
    )
    model.tables[cache_key] = ball
    return ball


def block_structure(model: GroupModel, k: int, m: int, n: int) -> BlockStructure:
    """
    Cấu trúc nhân E_k × E_n -> E_m: mọi (y, z) với yz ∈ E_m

    Args:
        model: Group model
        k: Độ dài của y (support của f)
        m: Độ dài của x = yz (hàng)
        n: Độ dài của z (cột)

    Returns:
        BlockStructure (cached trên model)
    """
    cache_key = ('block', k, m, n)
    cached = model.tables.get(cache_key)
    if cached is not None:
        return cached

    ek, em, en = sphere(model, k), sphere(model, m), sphere(model, n)
    rows, cols, left = [], [], []
    if abs(m - n) <= k:
        for j, z in enumerate(en.forms):
            for i, y in enumerate(ek.forms):
                r = em.index.get(model._mul(y, z))
                if r is not None:
                    rows.append(r)
                    cols.append(j)
                    left.append(i)

    structure = BlockStructure(
        rows=np.asarray(rows, dtype=np.int64),
        cols=np.asarray(cols, dtype=np.int64),
        left=np.asarray(left, dtype=np.int64),
        shape=(len(em), len(en)),
    )
    model.tables[cache_key] = structure
    logger.debug(f"{model.name}: block structure (k={k}, m={m}, n={n}) has {len(rows)} entries")
    return structure


def ball_structure(model: GroupModel, p: int, radius: int) -> BlockStructure:
    """
    Cấu trúc nhân B_p × B_R -> B_R cho operator left convolution trên ℓ²(B_R);
    left là index trong B_p
    """
    cache_key = ('ball-structure', p, radius)
    cached = model.tables.get(cache_key)
    if cached is not None:
        return cached

    left_ball = ball_index(model, p)
    ball = ball_index(model, radius)
    rows, cols, left = [], [], []
    for j, z in enumerate(ball.forms):
        for i, y in enumerate(left_ball.forms):
            r = ball.index.get(model._mul(y, z))
            if r is not None:
                rows.append(r)
                cols.append(j)
                left.append(i)

    structure = BlockStructure(
        rows=np.asarray(rows, dtype=np.int64),
        cols=np.asarray(cols, dtype=np.int64),
        left=np.asarray(left, dtype=np.int64),
        shape=(len(ball), len(ball)),
    )
    model.tables[cache_key] = structure
    logger.debug(f"{model.name}: ball structure (p={p}, R={radius}) has {len(rows)} entries")
    return structure
