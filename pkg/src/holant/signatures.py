"""Log-concave signatures, downward shifting, and instance parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, TYPE_CHECKING

if TYPE_CHECKING:
    from .model import HolantInstance

LOG_CONCAVE_RTOL = 1e-12


class SignatureError(ValueError):
    def __init__(self, index: int, message: str):
        super().__init__(f"{message} at index {index}")
        self.index = index


class NegativeEntry(SignatureError):
    def __init__(self, index: int):
        super().__init__(index, "negative entry")


class InternalZero(SignatureError):
    def __init__(self, index: int):
        super().__init__(index, "internal zero")


class NotLogConcave(SignatureError):
    def __init__(self, index: int):
        super().__init__(index, "log-concavity fails")


@dataclass(frozen=True)
class Signature:
    """Values ``f(0..d)`` of a symmetric vertex constraint."""

    values: tuple[float, ...]

    @property
    def d(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, k: int) -> float:
        return self.values[k]

    def __len__(self) -> int:
        return len(self.values)

    def at(self, k: int) -> float:
        """``f(k)``, taken as 0 beyond the stored range."""
        return self.values[k] if 0 <= k < len(self.values) else 0.0

    @property
    def support_top(self) -> int:
        """Largest k with ``f(k) > 0``, or -1 for the zero signature."""
        for k in range(self.d, -1, -1):
            if self.values[k] > 0:
                return k
        return -1

    def truncated(self, d: int) -> "Signature":
        """Restrict to ``f(0..d)``, padding with zeros if shorter."""
        vals = self.values[: d + 1] + (0.0,) * max(0, d + 1 - len(self.values))
        return Signature(vals)


def validate(values: Sequence[float]) -> Signature:
    """Check a sequence is a log-concave signature with consecutive support.

    Raises NegativeEntry, InternalZero or NotLogConcave naming the first
    offending index. Log-concavity is compared with a relative slack of 1e-12.
    """
    vals = tuple(float(x) for x in values)
    if not vals:
        raise ValueError("signature must be non-empty")
    for k, x in enumerate(vals):
        if not math.isfinite(x):
            raise ValueError(f"non-finite entry at index {k}")
        if x < 0:
            raise NegativeEntry(k)
    positive = [k for k, x in enumerate(vals) if x > 0]
    if positive:
        for k in range(positive[0], positive[-1] + 1):
            if vals[k] == 0:
                raise InternalZero(k)
    for k in range(1, len(vals) - 1):
        lhs = vals[k] * vals[k]
        rhs = vals[k - 1] * vals[k + 1]
        if lhs < rhs * (1.0 - LOG_CONCAVE_RTOL):
            raise NotLogConcave(k)
    return Signature(vals)


def shift_down(f: Signature, m: int = 1) -> Signature:
    """``D^m f``: drop the first ``m`` values."""
    if m < 0:
        raise ValueError("shift must be non-negative")
    if m > f.d:
        raise ValueError(f"cannot shift a degree-{f.d} signature by {m}")
    return Signature(f.values[m:])


def b_matching_signature(b: int, d: int) -> Signature:
    ones = min(max(b, 0), d) + 1
    return Signature((1.0,) * ones + (0.0,) * (d + 1 - ones))


def gen_poly_eval(f: Signature, x: float, d: int | None = None) -> float:
    """Normalized generating polynomial ``P_f(x)``.

    ``d`` is the vertex degree; it defaults to ``f.d``. Entries beyond ``d``
    do not enter the polynomial.
    """
    if d is None:
        d = f.d
    if f.values[0] <= 0:
        raise ValueError("normalized generating polynomial needs f(0) > 0")
    if x < 0:
        raise ValueError("x must be non-negative")
    coeffs = [math.comb(d, k) * f.at(k) for k in range(d + 1)]
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc / f.values[0]


@dataclass(frozen=True)
class InstanceParams:
    r_max: float
    r_min: float
    lambda_max: float
    lambda_min: float
    p_max: float
    delta: int


def compute_params(inst: "HolantInstance") -> InstanceParams:
    """Ratio, weight and generating-polynomial parameters of an instance.

    Only ``f_v(0..deg v)`` matters. Vertices of degree 0, or whose support is
    ``{0}``, contribute no ratio to ``r_min``; when no vertex does, ``r_min``
    falls back to ``r_max``. An edgeless graph has ``lambda_max = lambda_min = 1``.
    """
    g = inst.graph
    r_max = 0.0
    ratios = []
    for v in range(g.n):
        f = inst.sigs[v]
        if f.values[0] <= 0:
            raise ValueError(f"vertex {v} has f(0) = 0")
        deg = g.degrees[v]
        if deg == 0:
            continue
        r_max = max(r_max, f.at(1) / f.values[0])
        for k in range(1, deg + 1):
            if f.at(k) > 0:
                ratios.append(f.at(k) / f.at(k - 1))
    r_min = min(ratios) if ratios else r_max
    lam = inst.lambdas
    lambda_max = max(lam) if lam else 1.0
    lambda_min = min(lam) if lam else 1.0
    x = r_max * lambda_max
    p_max = max((gen_poly_eval(inst.sigs[v], x, g.degrees[v]) for v in range(g.n)), default=1.0)
    return InstanceParams(r_max, r_min, lambda_max, lambda_min, p_max, g.max_degree)


def p_max_upper_bound(params: InstanceParams) -> float:
    return (params.r_max ** 2 * params.lambda_max + 1.0) ** params.delta


def remark_b_matching_bound(delta: int, b: int) -> int:
    """Sum of ``C(delta, k)`` for ``k <= b``: the uniform b-matching P_max bound."""
    return sum(math.comb(delta, k) for k in range(min(b, delta) + 1))
