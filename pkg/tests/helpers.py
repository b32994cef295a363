"""Conversions from label-keyed reference data to package vectors."""
from nefcone import moduli


def parse_label(label):
    return tuple(int(x) for x in label.split(","))


def ambient_vector(n, terms):
    amb = moduli.enumerate_classes(n)
    return amb.vector({parse_label(k): c for k, c in terms.items()})


def basis_vector(basis_labels, terms):
    pos = {lab: i for i, lab in enumerate(basis_labels)}
    v = [0] * len(basis_labels)
    for k, c in terms.items():
        v[pos[k]] += c
    return tuple(v)
