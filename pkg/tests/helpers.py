"""Small constructors shared by the test modules."""
from fedcba.cba import ClientModel, RuleModel
from fedcba.dataset import CategoricalDataset
from fedcba.mining import ClassAssociationRule, Item


def rule(spec, label, support, confidence, order=0):
    """``rule("A=1,B=2", "+", 0.1, 0.9)`` shorthand."""
    items = frozenset(Item(*part.split("=")) for part in spec.split(",") if part)
    return ClassAssociationRule(items, label, support, confidence, order)


def client(rules, n, default="-", default_conf=0.5, client_id=0):
    return ClientModel(RuleModel(rules, default, default_conf), n, client_id)


def random_categorical(rng, n_records, domain_sizes, n_classes=2):
    columns = [rng.integers(0, k, n_records) for k in domain_sizes]
    records = [(tuple(str(c[i]) for c in columns), str(rng.integers(0, n_classes))) for i in range(n_records)]
    names = [f"a{j}" for j in range(len(domain_sizes))]
    domains = {f"a{j}": tuple(str(v) for v in range(k)) for j, k in enumerate(domain_sizes)}
    return CategoricalDataset.from_records(records, names, tuple(str(c) for c in range(n_classes)), domains)
