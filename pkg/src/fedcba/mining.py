"""Class association rule mining (level-wise Apriori over rule items).

Record sets are held as Python integers used as bitsets, so the support of
an itemset is the popcount of the AND of its items' covers.
"""
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .dataset import DataError


@dataclass(frozen=True, order=True)
class Item:
    attribute: str
    value: str

    def __str__(self):
        return f"{self.attribute}={self.value}"


@dataclass(frozen=True)
class ClassAssociationRule:
    """``antecedent -> label`` with its support and confidence.

    ``count``, ``antecedent_count`` and ``n`` are the integer tallies the
    rule was mined from; they are ``None`` for rules produced by merging or
    read back from text, where only the real-valued statistics survive.
    """

    antecedent: frozenset
    label: str
    support: float
    confidence: float
    order: int = 0
    count: int = None
    antecedent_count: int = None
    n: int = None

    def __post_init__(self):
        antecedent = frozenset(self.antecedent)
        attrs = [item.attribute for item in antecedent]
        if len(set(attrs)) != len(attrs):
            raise ValueError(f"antecedent repeats an attribute: {sorted(antecedent)}")
        object.__setattr__(self, "antecedent", antecedent)

    @property
    def key(self):
        return self.antecedent, self.label

    @property
    def exact_support(self):
        if self.count is None:
            return Fraction(self.support)
        return Fraction(self.count, self.n)

    @property
    def exact_confidence(self):
        if self.count is None:
            return Fraction(self.confidence)
        return Fraction(self.count, self.antecedent_count)

    def sorted_items(self):
        return sorted(self.antecedent)

    def matches(self, record):
        """True when every antecedent item holds in ``record`` (a mapping)."""
        return all(record.get(item.attribute) == item.value for item in self.antecedent)

    def __str__(self):
        body = " AND ".join(map(str, self.sorted_items())) or "TRUE"
        return f"{body} -> {self.label} (conf={self.confidence:.4f}, supp={self.support:.4f}, order={self.order})"


def as_fraction(value):
    """Exact threshold from a float, str or Fraction.

    Floats go through their shortest repr, so ``0.02`` means exactly 1/50
    rather than the nearest binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class MiningParams:
    min_support: float = 0.02
    min_confidence: float = 0.5
    max_antecedent_len: int = None

    def __post_init__(self):
        if not 0 < as_fraction(self.min_support) <= 1:
            raise ValueError(f"min_support must lie in (0, 1], got {self.min_support}")
        if not 0 < as_fraction(self.min_confidence) <= 1:
            raise ValueError(f"min_confidence must lie in (0, 1], got {self.min_confidence}")
        if self.max_antecedent_len is not None and self.max_antecedent_len < 1:
            raise ValueError("max_antecedent_len must be positive or None")


def to_bitset(mask):
    """Boolean array -> int with bit ``i`` set when ``mask[i]``."""
    packed = np.packbits(np.asarray(mask, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def from_bitset(bits, n):
    """Inverse of :func:`to_bitset` for a known length ``n``."""
    raw = np.frombuffer(bits.to_bytes((n + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def item_covers(ds):
    """Items in (attribute position, value position) order with their bitsets."""
    items, covers = [], []
    for attr, col in zip(ds.schema, ds.columns):
        for code, value in enumerate(attr.domain):
            items.append(Item(attr.name, value))
            covers.append(to_bitset(col == code))
    return items, covers


def mine_cars(ds, params=MiningParams()):
    """Return every class association rule meeting both thresholds.

    Antecedents are non-empty. Rules come out level by level (antecedent
    length 1, 2, ...); within a level antecedents follow lexicographic
    (attribute, value) position order and labels follow ``class_domain``.
    ``order`` numbers rules in that sequence.
    """
    if not ds.is_categorical:
        raise DataError("mine_cars needs a fully categorical dataset")
    n = len(ds)
    if n == 0:
        raise DataError("cannot mine rules from an empty dataset")

    minsup = as_fraction(params.min_support)
    minconf = as_fraction(params.min_confidence)
    max_len = params.max_antecedent_len
    # count >= minsup * n  <=>  count * den >= num * n
    sup_num, sup_den = minsup.numerator, minsup.denominator
    conf_num, conf_den = minconf.numerator, minconf.denominator

    def frequent(count):
        return count * sup_den >= sup_num * n

    items, covers = item_covers(ds)
    attr_of = [ds.index(item.attribute) for item in items]
    class_covers = [to_bitset(ds.labels == c) for c in range(len(ds.class_domain))]

    rules = []

    def emit(itemset, cover):
        ant_count = cover.bit_count()
        for c, class_cover in enumerate(class_covers):
            count = (cover & class_cover).bit_count()
            if frequent(count) and count * conf_den >= conf_num * ant_count:
                rules.append(ClassAssociationRule(
                    frozenset(items[i] for i in itemset), ds.class_domain[c],
                    count / n, count / ant_count, len(rules), count, ant_count, n))

    def has_frequent_ruleitem(cover):
        return any(frequent((cover & cc).bit_count()) for cc in class_covers)

    # An antecedent survives a level when at least one of its rule items is
    # frequent; every subset of such an antecedent survives too.
    level = {}
    for i, cover in enumerate(covers):
        if has_frequent_ruleitem(cover):
            level[(i,)] = cover
    length = 1
    while level and (max_len is None or length <= max_len):
        for itemset in sorted(level):
            emit(itemset, level[itemset])
        if max_len is not None and length == max_len:
            break
        level = _next_level(level, covers, attr_of, has_frequent_ruleitem)
        length += 1
    return rules


def _next_level(level, covers, attr_of, keep):
    by_prefix = {}
    for itemset in sorted(level):
        by_prefix.setdefault(itemset[:-1], []).append(itemset[-1])
    nxt = {}
    for prefix, tails in by_prefix.items():
        for a, b in combinations(tails, 2):
            if attr_of[a] == attr_of[b]:
                continue
            candidate = prefix + (a, b)
            # anti-monotone pruning: all k-subsets must have survived
            if any(candidate[:j] + candidate[j + 1:] not in level
                   for j in range(len(candidate) - 2)):
                continue
            cover = level[prefix + (a,)] & covers[b]
            if keep(cover):
                nxt[candidate] = cover
    return nxt
