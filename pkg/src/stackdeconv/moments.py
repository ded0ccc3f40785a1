"""Forward moment map and unbiased estimator coefficients.

Everything here is an exact linear combination over the mixed-moment basis:
a key ``(p_1, ..., p_k)`` (sorted descending) stands for the product of
normalized traces ``tr(A^{p_1}) ... tr(A^{p_k})`` and ``()`` is the constant.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Iterator, Mapping

from .diagrams import term_table

P_MAX = 4

Partition = tuple[int, ...]

D_BASIS = "D"
Y_BASIS = "Y"
S_BASIS = "S"
DELTA_BASIS = "Delta"


class CapacityError(ValueError):
    """Requested moment order is above the configured ``p_max``."""


class EvaluationError(KeyError):
    """A moment needed to evaluate an expression was not supplied."""


def partition(*parts: int) -> Partition:
    """Canonical key for a mixed moment, e.g. ``partition(1, 2) == (2, 1)``."""
    if len(parts) == 1 and not isinstance(parts[0], int):
        parts = tuple(parts[0])
    if any(int(x) < 1 for x in parts):
        raise ValueError(f"partition parts must be positive: {parts!r}")
    return tuple(sorted((int(x) for x in parts), reverse=True))


def partitions_of(weight: int, largest: int | None = None) -> Iterator[Partition]:
    """Partitions of ``weight`` in reverse lexicographic order, ``(w,)`` first."""
    if weight == 0:
        yield ()
        return
    largest = weight if largest is None else largest
    for first in range(min(weight, largest), 0, -1):
        for rest in partitions_of(weight - first, first):
            yield (first,) + rest


def partitions_upto(p: int) -> list[Partition]:
    """All nonempty partitions of weight ``<= p``, ordered by weight first."""
    return [lam for w in range(1, p + 1) for lam in partitions_of(w)]


def format_partition(lam: Partition) -> str:
    return "+".join(str(x) for x in lam) if lam else "const"


def parse_partition(text: str) -> Partition:
    text = text.strip()
    if text in ("", "const"):
        return ()
    return partition(*(int(x) for x in text.replace(",", "+").split("+")))


def as_fraction(x) -> Fraction:
    """Exact rational from an int, Fraction or float (floats go through repr)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, Rational):
        return Fraction(int(x.numerator), int(x.denominator))
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class ModelDims:
    n: int
    N: int
    sigma: float | Fraction = 1

    def __post_init__(self):
        if int(self.n) < 1 or int(self.N) < 1:
            raise ValueError(f"dimensions must be positive, got n={self.n}, N={self.N}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "N", int(self.N))


@dataclass(frozen=True)
class StackingScheme:
    """``L1 x L2`` block layout of ``L = L1 L2`` observations.

    ``averaging=True`` means no stacking at all: the single-observation
    estimator is applied to each of ``L`` observations and averaged.
    """

    L1: int
    L2: int
    averaging: bool = False

    def __post_init__(self):
        if int(self.L1) < 1 or int(self.L2) < 1:
            raise ValueError(f"L1 and L2 must be positive, got {self.L1}, {self.L2}")
        object.__setattr__(self, "L1", int(self.L1))
        object.__setattr__(self, "L2", int(self.L2))

    @classmethod
    def average(cls, L: int) -> StackingScheme:
        return cls(1, L, averaging=True)

    @property
    def L(self) -> int:
        return self.L1 * self.L2

    @property
    def kind(self) -> str:
        if self.averaging:
            return "A"
        if self.L1 == 1:
            return "H"
        if self.L2 == 1:
            return "V"
        return "R"

    def aspect_ratio(self, dims: ModelDims) -> Fraction:
        """``c = n L1 / (N L2)`` for the compound matrix."""
        return Fraction(dims.n * self.L1, dims.N * self.L2)


@dataclass(frozen=True)
class MomentExpression:
    """Exact linear combination ``sum_lambda coeff * basis_lambda``."""

    terms: Mapping[Partition, Fraction] = field(default_factory=dict)
    basis: str = D_BASIS

    def __post_init__(self):
        clean = {}
        for lam, c in self.terms.items():
            c = as_fraction(c)
            if c:
                clean[tuple(lam)] = c
        object.__setattr__(self, "terms", dict(sorted(clean.items(), key=_order_key)))

    def __getitem__(self, lam) -> Fraction:
        return self.terms.get(tuple(lam), Fraction(0))

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    def items(self):
        return self.terms.items()

    def __eq__(self, other):
        if not isinstance(other, MomentExpression):
            return NotImplemented
        return self.basis == other.basis and self.terms == other.terms

    def __hash__(self):
        return hash((self.basis, tuple(self.terms.items())))

    def __add__(self, other: MomentExpression) -> MomentExpression:
        if self.basis != other.basis:
            raise ValueError(f"basis mismatch: {self.basis} vs {other.basis}")
        out = defaultdict(Fraction, self.terms)
        for lam, c in other.items():
            out[lam] += c
        return MomentExpression(out, self.basis)

    def scaled(self, factor) -> MomentExpression:
        factor = as_fraction(factor)
        return MomentExpression({lam: c * factor for lam, c in self.items()}, self.basis)

    def constant(self) -> Fraction:
        return self[()]

    def substitute(
        self, table: Mapping[Partition, MomentExpression], basis: str
    ) -> MomentExpression:
        """Replace each basis element by an expression in another basis.

        The constant term passes through unchanged.
        """
        out: dict[Partition, Fraction] = defaultdict(Fraction)
        for lam, c in self.items():
            if lam == ():
                out[()] += c
                continue
            for mu, d in table[lam].items():
                out[mu] += c * d
        return MomentExpression(out, basis)

    def to_csv(self) -> str:
        """Rows ``partition,numerator,denominator`` with a header."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["partition", "numerator", "denominator"])
        for lam, c in self.items():
            writer.writerow([format_partition(lam), c.numerator, c.denominator])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, basis: str = D_BASIS) -> MomentExpression:
        rows = csv.DictReader(io.StringIO(text))
        return cls(
            {
                parse_partition(r["partition"]): Fraction(int(r["numerator"]), int(r["denominator"]))
                for r in rows
            },
            basis,
        )

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for lam, c in self.items():
            sym = f"{self.basis}_{{{','.join(map(str, lam))}}}" if lam else ""
            parts.append(f"{c}{'*' if sym else ''}{sym}")
        return " + ".join(parts)


def _order_key(item):
    lam = item[0]
    return (-sum(lam), tuple(-x for x in lam))


def _check_weight(parts: Partition, p_max: int) -> Partition:
    parts = partition(*parts)
    if not parts:
        raise ValueError("empty partition has no moment map")
    if sum(parts) > p_max:
        raise CapacityError(
            f"weight {sum(parts)} exceeds p_max={p_max}; pass a larger p_max explicitly"
        )
    return parts


def _fold(parts: Partition, n, N, *, sign: bool, noise2, basis: str) -> MomentExpression:
    n = as_fraction(n)
    N = as_fraction(N)
    k = len(parts)
    out: dict[Partition, Fraction] = defaultdict(Fraction)
    for (r, halves, free_even, free_odd), mult in term_table(parts).items():
        c = Fraction(mult) * n ** (len(halves) - k) / N**r * N**free_even * n**free_odd
        if noise2 != 1:
            c *= noise2**r
        if sign and r % 2:
            c = -c
        out[halves] += c
    return MomentExpression(out, basis)


def forward_map(parts, dims: ModelDims, p_max: int = P_MAX) -> MomentExpression:
    """Expected mixed moment ``M_parts`` of ``(1/N) Y Y^H`` for ``Y = D + sigma X``.

    The result is in the basis of the moments ``D_lambda`` of ``(1/N) D D^H``.
    """
    parts = _check_weight(parts, p_max)
    noise2 = as_fraction(dims.sigma) ** 2
    return _fold(parts, dims.n, dims.N, sign=False, noise2=noise2, basis=D_BASIS)


def estimator_coeffs(parts, dims: ModelDims, p_max: int = P_MAX) -> MomentExpression:
    """Unbiased estimator of ``D_parts`` as a combination of observed moments ``Y_lambda``.

    ``dims.sigma`` is honoured; with the default ``sigma=1`` this is the
    plain unit-noise estimator.
    """
    parts = _check_weight(parts, p_max)
    noise2 = as_fraction(dims.sigma) ** 2
    return _fold(parts, dims.n, dims.N, sign=True, noise2=noise2, basis=Y_BASIS)


def noisy_estimator_coeffs(parts, dims: ModelDims, p_max: int = P_MAX) -> MomentExpression:
    if not dims.sigma > 0:
        raise ValueError(f"noise scale must be positive, got {dims.sigma}")
    return estimator_coeffs(parts, dims, p_max)


def stacked_estimator_coeffs(
    parts, dims: ModelDims, s: StackingScheme, p_max: int = P_MAX
) -> MomentExpression:
    """Estimator of ``D_parts`` from the moments of an ``L1 x L2`` compound matrix.

    The observed moments are those of ``(1/(N L2)) Y_c Y_c^H``.
    """
    parts = _check_weight(parts, p_max)
    noise2 = as_fraction(dims.sigma) ** 2
    expr = _fold(
        parts, dims.n * s.L1, dims.N * s.L2, sign=True, noise2=noise2, basis=Y_BASIS
    )
    return expr.scaled(Fraction(s.L1) ** (len(parts) - sum(parts)))


def scale_moments(parts, L1: int) -> Fraction:
    """Factor turning ``D_parts`` into the compound-matrix moment ``F_parts``."""
    parts = partition(*parts)
    if not parts:
        raise ValueError("scale_moments needs a nonempty partition")
    return Fraction(L1) ** (sum(parts) - len(parts))


def lookup(values: Mapping, lam: Partition):
    """Value of a mixed moment, falling back to the product of single traces."""
    if lam == ():
        return 1
    if lam in values:
        return values[lam]
    missing = [(x,) for x in lam if (x,) not in values and x not in values]
    if missing:
        raise EvaluationError(f"no value for moment {format_partition(lam)}")
    return math.prod(values[(x,)] if (x,) in values else values[x] for x in lam)


def evaluate(expr: MomentExpression, values: Mapping, exact: bool = False):
    """``sum coeff * value``; values may be keyed by partition tuples or by ints.

    Arithmetic stays rational while values are rational.  The result is a
    float unless ``exact`` is set.
    """
    total = Fraction(0)
    inexact = 0.0
    for lam, c in expr.items():
        v = lookup(values, lam)
        if isinstance(v, (int, Fraction)):
            total += c * v
        else:
            inexact += float(c) * float(v)
    if exact:
        if inexact:
            raise TypeError("exact evaluation requires rational moment values")
        return total
    return float(total) + inexact


def expected_compound(parts, dims: ModelDims, s: StackingScheme, p_max: int = P_MAX) -> MomentExpression:
    """Forward map of the compound matrix rewritten in the ``D`` basis of one block."""
    compound = ModelDims(dims.n * s.L1, dims.N * s.L2, dims.sigma)
    f_expr = forward_map(parts, compound, p_max)
    return MomentExpression(
        {lam: c * (scale_moments(lam, s.L1) if lam else 1) for lam, c in f_expr.items()}, D_BASIS
    )


def compose_expectation(
    estimator: MomentExpression, dims: ModelDims, s: StackingScheme | None = None,
    p_max: int = P_MAX,
) -> MomentExpression:
    """Expectation of an estimator, expressed in the ``D`` basis.

    Each observed ``Y_lambda`` is replaced by its forward map, so an unbiased
    estimator of ``D_parts`` composes to exactly ``1 * D_parts``.
    """
    s = s or StackingScheme(1, 1)
    table = {lam: expected_compound(lam, dims, s, p_max) for lam in estimator if lam}
    return estimator.substitute(table, D_BASIS)


def coefficient_table(exprs: Iterable[tuple[Partition, MomentExpression]]) -> str:
    """Several expressions in one CSV: ``target,partition,numerator,denominator``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["target", "partition", "numerator", "denominator"])
    for target, expr in exprs:
        for lam, c in expr.items():
            writer.writerow([format_partition(target), format_partition(lam), c.numerator, c.denominator])
    return buf.getvalue()
