"""
Module định nghĩa các group model hữu hạn sinh với normal form chính xác,
phép nhân, nghịch đảo và hàm độ dài từ (word length) ℓ.
"""

import hashlib
import re
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import SPHERE_BUDGET, MODEL_ALIASES
from utils.errors import InvalidParameterError, ResourceBudgetError
from utils.logger import get_logger

logger = get_logger(__name__)

# Tăng khi thay đổi quy tắc normal form -> cache cũ bị vô hiệu hóa
NORMAL_FORM_VERSION = 1

Form = Tuple


@dataclass(frozen=True)
class GroupElement:
    """Phần tử của group; equality và hash chỉ dựa trên normal form"""
    model_id: str = field(compare=False)
    form: Form = ()

    def __repr__(self):
        return f"GroupElement({self.model_id}, {self.form!r})"


class GroupModel:
    """
    Base class cho các group model.

    Subclass cung cấp normal form (tuple), phép nhân, nghịch đảo; độ dài
    mặc định lấy từ BFS trên Cayley graph (ground truth).
    """

    kind = 'abstract'
    amenable = False
    finite = False

    def __init__(self, params: Sequence[int], generators: Sequence[Form],
                 base_generators: Sequence[Form]):
        self.params = tuple(params)
        self._generator_forms = sorted(set(generators), key=self.sort_key)
        self._base_forms = list(base_generators)
        self._lock = threading.Lock()
        self._spheres: List[List[Form]] = [[self.identity_form()]]
        self._lengths: Dict[Form, int] = {self.identity_form(): 0}
        self._parents: Dict[Form, Tuple[Form, Form]] = {}
        self._exhausted = False
        # Cache cho block structures / ball index (bất biến sau khi build)
        self.tables: Dict[tuple, object] = {}

        self._letter_index: Dict[Form, int] = {}
        for i, b in enumerate(self._base_forms, start=1):
            self._letter_index[b] = i
            inv = self._inv(b)
            if inv != b:
                self._letter_index[inv] = -i

        self._check_generators()

    # ------------------------------------------------------------------
    # Bắt buộc cho subclass
    # ------------------------------------------------------------------
    def identity_form(self) -> Form:
        raise NotImplementedError

    def _mul(self, a: Form, b: Form) -> Form:
        raise NotImplementedError

    def _inv(self, a: Form) -> Form:
        raise NotImplementedError

    def relators(self) -> List[List[int]]:
        """Danh sách relator dạng word theo chỉ số có dấu của base generators"""
        return []

    # ------------------------------------------------------------------
    @property
    def name(self) -> str:
        if not self.params:
            return self.kind
        return f"{self.kind}({','.join(str(p) for p in self.params)})"

    @property
    def fingerprint(self) -> str:
        payload = f"{self.name}|nf{NORMAL_FORM_VERSION}"
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]

    @property
    def generators(self) -> List[GroupElement]:
        return [self.element(g) for g in self._generator_forms]

    @property
    def generator_forms(self) -> List[Form]:
        return list(self._generator_forms)

    @property
    def base_generator_forms(self) -> List[Form]:
        return list(self._base_forms)

    @property
    def identity(self) -> GroupElement:
        return self.element(self.identity_form())

    def sort_key(self, form: Form):
        return form

    def element(self, form: Form) -> GroupElement:
        return GroupElement(self.name, tuple(form))

    def _check_generators(self):
        gens = set(self._generator_forms)
        if self.identity_form() in gens:
            raise InvalidParameterError(f"{self.name}: identity in generating set")
        for g in gens:
            if self._inv(g) not in gens:
                raise InvalidParameterError(f"{self.name}: generating set not closed under inversion")

    # ------------------------------------------------------------------
    # Public API trên GroupElement
    # ------------------------------------------------------------------
    def multiply(self, g: GroupElement, h: GroupElement) -> GroupElement:
        return self.element(self._mul(g.form, h.form))

    def invert(self, g: GroupElement) -> GroupElement:
        return self.element(self._inv(g.form))

    def length(self, g) -> int:
        form = g.form if isinstance(g, GroupElement) else tuple(g)
        return self.form_length(form)

    def distance(self, g: GroupElement, h: GroupElement) -> int:
        """ρ(g, h) = ℓ(g⁻¹h)"""
        return self.form_length(self._mul(self._inv(g.form), h.form))

    def form_length(self, form: Form) -> int:
        length = self._lengths.get(form)
        if length is not None:
            return length
        return self._bfs_length(form)

    def remember_lengths(self, forms: Sequence[Form], k: int):
        """Ghi ℓ = k cho các form của E_k (đọc từ sphere cache) để length() khỏi chạy BFS"""
        with self._lock:
            for form in forms:
                self._lengths.setdefault(form, k)

    def _bfs_length(self, form: Form, need_parent: bool = False) -> int:
        identity = self.identity_form()
        with self._lock:
            while form not in self._lengths or (need_parent and form not in self._parents and form != identity):
                if self._exhausted:
                    raise InvalidParameterError(f"{form!r} is not an element of {self.name}")
                self._extend_locked()
            return self._lengths[form]

    # ------------------------------------------------------------------
    # BFS enumeration
    # ------------------------------------------------------------------
    def sphere_forms(self, k: int) -> List[Form]:
        """
        Trả về E_k = {x : ℓ(x) = k} theo thứ tự lexicographic trên normal form

        Args:
            k: Bán kính (k >= 0)

        Returns:
            List normal forms, không trùng lặp
        """
        if k < 0:
            raise InvalidParameterError(f"sphere radius must be >= 0, got {k}")
        with self._lock:
            while len(self._spheres) <= k and not self._exhausted:
                self._extend_locked()
            if k >= len(self._spheres):
                return []
            return list(self._spheres[k])

    def _extend_locked(self):
        radius = len(self._spheres)
        frontier = self._spheres[-1]
        total = sum(len(s) for s in self._spheres)
        identity = self.identity_form()
        next_sphere = []
        for x in frontier:
            for s in self._generator_forms:
                y = self._mul(x, s)
                # _lengths có thể chứa form đọc từ sphere cache; BFS chỉ tin _parents
                if y in self._parents or y == identity:
                    continue
                self._lengths[y] = radius
                self._parents[y] = (x, s)
                next_sphere.append(y)
                if total + len(next_sphere) > SPHERE_BUDGET:
                    # Rollback để model vẫn nhất quán
                    for z in next_sphere:
                        del self._lengths[z]
                        del self._parents[z]
                    raise ResourceBudgetError(
                        f"{self.name}: ball of radius {radius} exceeds SPHERE_BUDGET={SPHERE_BUDGET}"
                    )
        if not next_sphere:
            self._exhausted = True
            logger.debug(f"{self.name}: enumeration exhausted at radius {radius - 1}")
            return
        next_sphere.sort(key=self.sort_key)
        self._spheres.append(next_sphere)
        logger.debug(f"{self.name}: |E_{radius}| = {len(next_sphere)}")

    # ------------------------------------------------------------------
    def geodesic_word(self, g: GroupElement) -> List[GroupElement]:
        """
        Một word geodesic theo generators cho g (deterministic)

        Returns:
            List generators s_1..s_l với s_1···s_l = g và l = ℓ(g)
        """
        form = g.form
        self._bfs_length(form, need_parent=True)
        letters = []
        with self._lock:
            while form != self.identity_form():
                parent, s = self._parents[form]
                letters.append(s)
                form = parent
        return [self.element(s) for s in reversed(letters)]

    def character_value(self, phases: Sequence[complex], g: GroupElement) -> complex:
        """
        Giá trị của character xác định bởi phase trên mỗi base generator

        Args:
            phases: Unit complex number cho từng base generator
            g: Phần tử cần đánh giá

        Returns:
            χ(g)
        """
        self.check_phases(phases)
        value = complex(1.0)
        for s in self.geodesic_word(g):
            idx = self._letter_index[s.form]
            phase = complex(phases[abs(idx) - 1])
            value *= phase if idx > 0 else phase.conjugate()
        return value

    def check_phases(self, phases: Sequence[complex], tol: float = 1e-12):
        if len(phases) != len(self._base_forms):
            raise InvalidParameterError(
                f"{self.name} expects {len(self._base_forms)} phases, got {len(phases)}"
            )
        for p in phases:
            if abs(abs(complex(p)) - 1.0) > tol:
                raise InvalidParameterError(f"character phase {p} is not unimodular")
        for word in self.relators():
            value = complex(1.0)
            for idx in word:
                phase = complex(phases[abs(idx) - 1])
                value *= phase if idx > 0 else phase.conjugate()
            if abs(value - 1.0) > 1e-9:
                raise InvalidParameterError(
                    f"phases {list(phases)} violate relator {word} of {self.name}"
                )

    # ------------------------------------------------------------------
    # Text encoding của normal form (dùng cho cache và FilteredVector)
    # ------------------------------------------------------------------
    def encode_form(self, form: Form) -> str:
        return ','.join(str(x) for x in form) if form else 'e'

    def decode_form(self, text: str) -> Form:
        text = text.strip()
        if text == 'e':
            return self.identity_form()
        return tuple(int(x) for x in text.split(','))

    def __repr__(self):
        return f"<{self.__class__.__name__} {self.name}>"


class FreeGroupModel(GroupModel):
    """Free group F_n; normal form là reduced word các số nguyên ±i"""

    kind = 'free'

    def __init__(self, n: int):
        if n < 1:
            raise InvalidParameterError(f"free(n) requires n >= 1, got {n}")
        self.amenable = n == 1
        gens = [(i,) for i in range(1, n + 1)] + [(-i,) for i in range(1, n + 1)]
        super().__init__((n,), gens, [(i,) for i in range(1, n + 1)])

    def sort_key(self, form):
        # a < A < b < B ... (A = a⁻¹)
        return tuple((abs(x), x < 0) for x in form)

    def identity_form(self):
        return ()

    def _mul(self, a, b):
        out = list(a)
        for x in b:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    def _inv(self, a):
        return tuple(-x for x in reversed(a))

    def form_length(self, form):
        return len(form)

    def geodesic_word(self, g):
        return [self.element((x,)) for x in g.form]


class ZdModel(GroupModel):
    """Z^d với generators chuẩn ±e_i; ℓ là chuẩn ℓ¹"""

    kind = 'zd'
    amenable = True

    def __init__(self, d: int):
        if d < 1:
            raise InvalidParameterError(f"zd(d) requires d >= 1, got {d}")
        self.d = d
        gens = []
        for i in range(d):
            for sign in (1, -1):
                e = [0] * d
                e[i] = sign
                gens.append(tuple(e))
        base = [tuple(1 if j == i else 0 for j in range(d)) for i in range(d)]
        super().__init__((d,), gens, base)

    def identity_form(self):
        return (0,) * self.d

    def _mul(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def _inv(self, a):
        return tuple(-x for x in a)

    def form_length(self, form):
        return sum(abs(x) for x in form)

    def relators(self):
        # [e_i, e_j]
        return [[i, j, -i, -j] for i in range(1, self.d + 1) for j in range(i + 1, self.d + 1)]

    def geodesic_word(self, g):
        # Đi hết tọa độ thứ nhất trước (quy tắc deterministic)
        word = []
        for i, x in enumerate(g.form):
            step = [0] * self.d
            step[i] = 1 if x > 0 else -1
            word.extend([self.element(tuple(step))] * abs(x))
        return word

    def encode_form(self, form):
        return ','.join(str(x) for x in form)


class HeisenbergModel(GroupModel):
    """
    Integer Heisenberg group; normal form (a, b, c) = x^a y^b z^c với
    z = xyx⁻¹y⁻¹ central. Độ dài tính bằng BFS theo generators x, y.
    """

    kind = 'heisenberg'
    amenable = True

    def __init__(self):
        gens = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]
        super().__init__((), gens, [(1, 0, 0), (0, 1, 0)])

    def identity_form(self):
        return (0, 0, 0)

    def _mul(self, a, b):
        # y^b x^a' = x^a' y^b z^(-a'b)
        return (a[0] + b[0], a[1] + b[1], a[2] + b[2] - b[0] * a[1])

    def _inv(self, a):
        return (-a[0], -a[1], -a[2] - a[0] * a[1])

    def central_generator(self) -> GroupElement:
        x, y = (1, 0, 0), (0, 1, 0)
        z = self._mul(self._mul(self._mul(x, y), self._inv(x)), self._inv(y))
        return self.element(z)

    def relators(self):
        z = [1, 2, -1, -2]
        z_inv = [2, 1, -2, -1]
        return [[1] + z + [-1] + z_inv, [2] + z + [-2] + z_inv]

    def encode_form(self, form):
        return ','.join(str(x) for x in form)


class CyclicModel(GroupModel):
    """Z/p với generator u; normal form (a,) với 0 <= a < p"""

    kind = 'cyclic'
    amenable = True
    finite = True

    def __init__(self, p: int):
        if p < 2:
            raise InvalidParameterError(f"cyclic(p) requires p >= 2, got {p}")
        self.p = p
        gens = [(1,), ((p - 1) % p,)]
        super().__init__((p,), gens, [(1,)])

    def identity_form(self):
        return (0,)

    def _mul(self, a, b):
        return ((a[0] + b[0]) % self.p,)

    def _inv(self, a):
        return ((-a[0]) % self.p,)

    def form_length(self, form):
        a = form[0] % self.p
        return min(a, self.p - a)

    def relators(self):
        return [[1] * self.p]

    def geodesic_word(self, g):
        a = g.form[0]
        if a <= self.p - a:
            return [self.element((1,))] * a
        return [self.element((self.p - 1,))] * (self.p - a)

    def encode_form(self, form):
        return str(form[0])


class FreeProductCyclicModel(GroupModel):
    """
    Z/p * Z/q; normal form là tuple các syllable (factor, exponent) xen kẽ
    factor, exponent khác 0 theo modulo bậc của factor.
    """

    kind = 'free-product-cyclic'

    def __init__(self, p: int, q: int):
        if p < 2 or q < 2:
            raise InvalidParameterError(f"free-product-cyclic(p,q) requires p,q >= 2, got ({p},{q})")
        self.orders = {1: p, 2: q}
        self.amenable = p == 2 and q == 2
        gens = []
        for f, order in self.orders.items():
            gens.append(((f, 1),))
            gens.append(((f, order - 1),))
        super().__init__((p, q), gens, [((1, 1),), ((2, 1),)])

    def identity_form(self):
        return ()

    def _mul(self, a, b):
        out = list(a)
        for f, e in b:
            if out and out[-1][0] == f:
                merged = (out.pop()[1] + e) % self.orders[f]
                if merged:
                    out.append((f, merged))
            else:
                out.append((f, e))
        return tuple(out)

    def _inv(self, a):
        return tuple((f, (self.orders[f] - e) % self.orders[f]) for f, e in reversed(a))

    def form_length(self, form):
        return sum(min(e, self.orders[f] - e) for f, e in form)

    def relators(self):
        return [[1] * self.orders[1], [2] * self.orders[2]]

    def geodesic_word(self, g):
        word = []
        for f, e in g.form:
            order = self.orders[f]
            if e <= order - e:
                word.extend([self.element(((f, 1),))] * e)
            else:
                word.extend([self.element(((f, order - 1),))] * (order - e))
        return word

    def encode_form(self, form):
        if not form:
            return 'e'
        return ' '.join(f"{f}^{e}" for f, e in form)

    def decode_form(self, text):
        text = text.strip()
        if text == 'e':
            return ()
        out = []
        for token in text.split():
            f, e = token.split('^')
            out.append((int(f), int(e)))
        return tuple(out)


class DihedralInfinityModel(GroupModel):
    """Infinite dihedral group Z/2 * Z/2 với hai involution s (=1), t (=2)"""

    kind = 'dihedral-infinity'
    amenable = True

    def __init__(self):
        super().__init__((), [(1,), (2,)], [(1,), (2,)])

    def identity_form(self):
        return ()

    def _mul(self, a, b):
        out = list(a)
        for x in b:
            if out and out[-1] == x:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    def _inv(self, a):
        return tuple(reversed(a))

    def form_length(self, form):
        return len(form)

    def relators(self):
        return [[1, 1], [2, 2]]

    def geodesic_word(self, g):
        return [self.element((x,)) for x in g.form]


_MODEL_PATTERN = re.compile(r'^\s*([a-z\-]+)\s*(?:\(\s*([0-9,\s]*)\)|([0-9]+))?\s*$')


def make_model(spec) -> GroupModel:
    """
    Tạo GroupModel từ spec dạng chuỗi ('free(2)', 'zd(2)', 'heisenberg',
    'cyclic(3)', 'free-product-cyclic(2,3)', 'dihedral-infinity') hoặc dict
    {'kind': ..., 'params': [...]}.

    Args:
        spec: Model spec

    Returns:
        GroupModel tương ứng
    """
    if isinstance(spec, GroupModel):
        return spec
    if isinstance(spec, dict):
        kind = str(spec.get('kind', '')).lower()
        params = [int(p) for p in spec.get('params', [])]
    else:
        text = MODEL_ALIASES.get(str(spec).strip().lower(), str(spec).strip().lower())
        match = _MODEL_PATTERN.match(text)
        if not match:
            raise InvalidParameterError(f"cannot parse model spec {spec!r}")
        kind = match.group(1)
        raw = match.group(2) if match.group(2) is not None else match.group(3)
        try:
            params = [int(p) for p in raw.split(',') if p.strip()] if raw else []
        except ValueError:
            raise InvalidParameterError(f"non-integer parameter in model spec {spec!r}")

    builders = {
        'free': (FreeGroupModel, 1),
        'zd': (ZdModel, 1),
        'z': (ZdModel, 1),
        'cyclic': (CyclicModel, 1),
        'heisenberg': (HeisenbergModel, 0),
        'dihedral-infinity': (DihedralInfinityModel, 0),
        'free-product-cyclic': (FreeProductCyclicModel, 2),
        'fpc': (FreeProductCyclicModel, 2),
    }
    if kind not in builders:
        raise InvalidParameterError(
            f"unknown model kind {kind!r}; expected one of {sorted(set(builders) - {'z', 'fpc'})}"
        )
    cls, arity = builders[kind]
    if len(params) != arity:
        raise InvalidParameterError(f"model {kind!r} takes {arity} parameter(s), got {params}")
    model = cls(*params)
    logger.debug(f"Built model {model.name} (fingerprint {model.fingerprint})")
    return model


def sample_elements(model: GroupModel, radius: int, count: int,
                    rng: Optional[np.random.Generator] = None) -> List[GroupElement]:
    """Lấy mẫu đều các phần tử trong ball B_radius"""
    from groups.spheres import ball_index

    rng = rng if rng is not None else np.random.default_rng()
    ball = ball_index(model, radius)
    picks = rng.integers(0, len(ball), size=count)
    return [model.element(ball.forms[i]) for i in picks]
