"""Server-side duCBA merge of client rule models into one global model.

Rules with the same antecedent and label are fused by a client-size
weighted average of support and confidence. When the same antecedent
carries different labels, the label group with the higher fused support
wins, with earlier arrival breaking exact ties. Arithmetic runs on exact
rationals (every float is a dyadic rational), so tie detection is exact
and results do not depend on summation order.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .cba import RuleModel, dumps_model, rank_rules
from .mining import ClassAssociationRule


@dataclass(frozen=True)
class MergedModel:
    model: RuleModel
    provenance: dict = field(default_factory=dict)  # (antecedent, label) -> frozenset of client ids
    total_train_count: int = 0

    def contributors(self, rule):
        return self.provenance.get(rule.key, frozenset())


@dataclass
class _Group:
    first_arrival: int
    weight: int = 0
    support: Fraction = Fraction(0)
    confidence: Fraction = Fraction(0)
    clients: set = field(default_factory=set)

    def add(self, n, rule, client_id):
        self.weight += n
        self.support += n * Fraction(rule.support)
        self.confidence += n * Fraction(rule.confidence)
        self.clients.add(client_id)

    @property
    def merged_support(self):
        return self.support / self.weight

    @property
    def merged_confidence(self):
        return self.confidence / self.weight


def arrival_sequence(clients):
    """``(arrival_index, client, rule)`` in (client position, rule order) order."""
    pairs = []
    for pos, client in enumerate(clients):
        for rule in sorted(client.model.rules, key=lambda r: r.order):
            pairs.append((pos, rule.order, client, rule))
    return [(i, client, rule) for i, (_, _, client, rule) in enumerate(pairs)]


def merge(clients, class_domain=None):
    """Merge an ordered list of :class:`ClientModel` into a :class:`MergedModel`.

    ``class_domain`` fixes the tie-break order for the default-class vote;
    without it the sorted set of default labels is used.
    """
    clients = list(clients)
    if not clients:
        raise ValueError("merge needs at least one client model")

    # antecedent -> label -> _Group, both in first-arrival order
    groups = {}
    for arrival, client, rule in arrival_sequence(clients):
        by_label = groups.setdefault(rule.antecedent, {})
        group = by_label.get(rule.label)
        if group is None:
            group = by_label[rule.label] = _Group(arrival)
        group.add(client.train_count, rule, client.client_id)

    rules, provenance = [], {}
    for antecedent, by_label in groups.items():
        # max support; on an exact tie the earlier arrival wins
        label, group = min(by_label.items(),
                           key=lambda kv: (-kv[1].merged_support, kv[1].first_arrival))
        rule = ClassAssociationRule(antecedent, label, float(group.merged_support),
                                    float(group.merged_confidence), group.first_arrival)
        rules.append(rule)
        provenance[rule.key] = frozenset(group.clients)

    default_class, default_conf = _merge_default(clients, class_domain)
    total = sum(c.train_count for c in clients)
    return MergedModel(RuleModel(rank_rules(rules), default_class, default_conf), provenance, total)


def _merge_default(clients, class_domain):
    votes = {}
    for client in clients:
        votes[client.model.default_class] = votes.get(client.model.default_class, 0) + client.train_count
    order = list(class_domain) if class_domain else sorted(votes)
    rank = {label: i for i, label in enumerate(order)}
    winner = min(votes, key=lambda label: (-votes[label], rank.get(label, len(rank)), label))
    voters = [c for c in clients if c.model.default_class == winner]
    weight = sum(c.train_count for c in voters)
    conf = sum(c.train_count * Fraction(c.model.default_confidence) for c in voters) / weight
    return winner, float(conf)


def dumps_provenance(merged):
    """Sidecar lines ``<rule line number><TAB><client ids>`` matching :func:`dumps_model` lines."""
    lines = []
    for lineno, rule in enumerate(merged.model.rules, 1):
        ids = ",".join(str(c) for c in sorted(merged.contributors(rule)))
        lines.append(f"{lineno}\t{ids}")
    return "\n".join(lines) + ("\n" if lines else "")


def loads_provenance(text, model):
    provenance = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        lineno, _, ids = line.partition("\t")
        rule = model.rules[int(lineno) - 1]
        provenance[rule.key] = frozenset(int(i) for i in ids.split(",") if i)
    return provenance


def write_merged(path, merged):
    """Write the merged model and its ``.provenance`` sidecar next to it."""
    path = Path(path)
    path.write_text(dumps_model(merged.model, merged.total_train_count), encoding="utf-8")
    sidecar = path.with_name(path.name + ".provenance")
    sidecar.write_text(dumps_provenance(merged), encoding="utf-8")
    return path, sidecar
