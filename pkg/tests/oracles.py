"""Independent reference implementations used to check the package.

Everything here is deliberately written the slow, obvious way and stays
decoupled from the code under test: a DOM dump parser, a full-table edit
distance, Fraction-exact metric transcriptions, and a brute-force feature
extractor for graph embeddings.
"""

from fractions import Fraction
from xml.dom import minidom


def dom_parse_posts(path, post_types=("1",)):
    """Whole-document parse of a posts dump; returns retained row attr dicts."""
    doc = minidom.parse(str(path))
    rows = []
    for elem in doc.getElementsByTagName("row"):
        attrs = {a.name: a.value for a in elem.attributes.values()}
        post_type = attrs.get("PostTypeId")
        if post_type is not None and post_type not in post_types:
            continue
        rows.append(attrs)
    return rows


def dp_edit_distance(a: str, b: str) -> int:
    """Full-table Levenshtein, unit costs."""
    la, lb = len(a), len(b)
    table = [[0] * (lb + 1) for _ in range(la + 1)]
    for i in range(la + 1):
        table[i][0] = i
    for j in range(lb + 1):
        table[0][j] = j
    for i in range(1, la + 1):
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + cost,
            )
    return table[la][lb]


def precision_at_k_ref(true_tags, predicted, k) -> Fraction:
    hits = len(set(predicted[:k]) & set(true_tags))
    return Fraction(hits, k)


def recall_at_k_ref(true_tags, predicted, k) -> Fraction:
    hits = len(set(predicted[:k]) & set(true_tags))
    if len(true_tags) < k:
        return Fraction(hits, k)
    return Fraction(hits, len(true_tags))


def f1_ref(p: Fraction, r: Fraction) -> Fraction:
    if p + r == 0:
        return Fraction(0)
    return 2 * p * r / (p + r)


def mean_ref(values) -> Fraction:
    return sum(values, Fraction(0)) / len(values)


def accuracy_ref(gold, predicted) -> Fraction:
    return Fraction(sum(1 for g, p in zip(gold, predicted) if g == p), len(gold))


def per_class_f1_ref(gold, predicted, cls) -> Fraction:
    tp = sum(1 for g, p in zip(gold, predicted) if g == cls and p == cls)
    fp = sum(1 for g, p in zip(gold, predicted) if g != cls and p == cls)
    fn = sum(1 for g, p in zip(gold, predicted) if g == cls and p != cls)
    prec = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    rec = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    return f1_ref(prec, rec)


def graph_feature_multiset(graph) -> dict:
    """Brute-force feature bag matching the embedding's feature definition."""
    labels = {n.id: n.label for n in graph.nodes}
    feats = {}
    for n in graph.nodes:
        key = f"n|{n.kind}|{n.label}"
        feats[key] = feats.get(key, 0) + 1
    for e in graph.edges:
        key = f"e|{e.kind}|{labels[e.src]}|{labels[e.dst]}"
        feats[key] = feats.get(key, 0) + 1
    return feats
