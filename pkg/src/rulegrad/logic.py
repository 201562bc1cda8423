"""Product t-norm logic carried out directly on logits.

A truth value ``t`` in (0, 1) is represented by ``z = logit(t)``. With that
representation negation is an exact sign flip and

    or(a, b)  = logit(1 - s(-a) s(-b)) = log(e^a + e^b + e^(a+b))
    and(a, b) = logit(s(a) s(b))       = -or(-a, -b)

so both connectives reduce to one three-term log-sum-exp, which stays finite
for any finite input.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import ndgrad as nd
from .errors import ContractError

EPS = 1e-7
"""Pseudo-probabilities are clamped to [EPS, 1 - EPS] before taking a logit."""

SATURATED = 20.0
"""Logit used for a hard-coded True (and its negation for False)."""


# -- connectives -------------------------------------------------------------

def _lse3(a: nd.Node, b: nd.Node) -> nd.Node:
    if a.shape != b.shape:
        raise ContractError(f"logic operands differ in shape: {a.shape} vs {b.shape}")
    out, da, db = kernels.lse3(a.value, b.value)
    return nd.apply("l_or", out, (a, b), lambda g: (g * da, g * db))


def _lift(a, b):
    tape = nd._tape_of((a, b))
    a, b = nd._as_node(a, tape), nd._as_node(b, tape)
    if a.value.ndim == 0 and b.value.ndim:
        a = tape.const(np.full(b.shape, a.item()))
    if b.value.ndim == 0 and a.value.ndim:
        b = tape.const(np.full(a.shape, b.item()))
    return a, b


def to_logit(t: nd.Node) -> nd.Node:
    return nd.logit(nd.clamp(t, EPS, 1.0 - EPS))


def l_not(a: nd.Node) -> nd.Node:
    return nd.neg(a)


def l_or(a, b) -> nd.Node:
    return _lse3(*_lift(a, b))


def l_and(a, b) -> nd.Node:
    a, b = _lift(a, b)
    return nd.neg(_lse3(nd.neg(a), nd.neg(b)))


def l_implies_margin(a, b, c: float = 0.0) -> nd.Node:
    """``a -> b`` as ``((not a + c) or (b + c)) - c``.

    With both operands uncertain the output is pushed towards True by about
    ``c``, so the rule stops contributing loss until one side is confident.
    """
    if c < 0:
        raise ContractError(f"confidence margin must be >= 0, got {c}")
    a, b = _lift(a, b)
    if c == 0:
        return l_or(l_not(a), b)
    return nd.add(l_or(nd.add(l_not(a), c), nd.add(b, c)), -float(c))


def l_iff_margin(a, b, c: float = 0.0) -> nd.Node:
    return l_and(l_implies_margin(a, b, c), l_implies_margin(b, a, c))


# -- set membership ----------------------------------------------------------

def membership_matrix(class_sets, n_classes: int) -> np.ndarray:
    """Column k holds ``N_s`` for every class in set k and 0 elsewhere.

    ``N_s = |Y| / (2 |S|)`` makes a uniform class distribution map to truth 1/2.
    """
    m = np.zeros((n_classes, len(class_sets)))
    for k, s in enumerate(class_sets):
        idx = sorted(set(int(i) for i in s))
        if not idx:
            raise ContractError(f"inside(): class set #{k} is empty")
        if idx[0] < 0 or idx[-1] >= n_classes:
            raise ContractError(f"inside(): class set #{k} has indices outside [0, {n_classes})")
        m[idx, k] = n_classes / (2.0 * len(idx))
    return m


def inside(log_probs: nd.Node, class_sets) -> nd.Node:
    """Truth logit that the predicted class falls inside each set.

    ``log_probs`` is a vector (one sample) or a batch matrix; ``class_sets`` is a
    single iterable of class indices or a list of them. Returns a scalar, a
    vector over sets, or a batch x sets matrix accordingly.
    """
    single_set = len(class_sets) > 0 and np.isscalar(next(iter(class_sets)))
    sets = [class_sets] if single_set else list(class_sets)
    if not sets:
        raise ContractError("inside(): no class sets given")
    tape = log_probs.tape
    vector = log_probs.value.ndim == 1
    lp = log_probs
    if vector:
        lp = _as_row(lp)
    n_classes = lp.shape[1]
    m = tape.const(membership_matrix(sets, n_classes))
    z = to_logit(nd.matmul(nd.exp(lp), m))
    if vector:
        z = nd.take(z, 0, axis=0)
    if single_set:
        z = nd.take(z, 0, axis=-1)
    return z


def _as_row(v: nd.Node) -> nd.Node:
    return nd.apply("row", v.value[None, :], (v,), lambda g: (g[0],))


def exists_inside(isa_class_logits: nd.Node, class_set) -> nd.Node:
    """Naive membership: OR over per-class isA logits of the set (reference only)."""
    idx = sorted(set(int(i) for i in class_set))
    if not idx:
        raise ContractError("exists_inside(): empty class set")
    z = nd.take(isa_class_logits, [idx[0]], axis=-1)
    for i in idx[1:]:
        z = l_or(z, nd.take(isa_class_logits, [i], axis=-1))
    return nd.take(z, 0, axis=-1)


# -- rule sets and grounding ---------------------------------------------------

@dataclass
class RuleSet:
    """Grounded class sets for hypernym and attribute rules.

    ``hypernyms`` / ``attributes`` map a name to the class indices consistent
    with it. Insertion order fixes the column order everywhere else.
    """

    n_classes: int
    hypernyms: dict[str, list[int]] = field(default_factory=dict)
    attributes: dict[str, list[int]] = field(default_factory=dict)
    exclusive_hypernyms: bool = False

    def __post_init__(self):
        self.hypernyms = {k: sorted(set(int(i) for i in v)) for k, v in self.hypernyms.items()}
        self.attributes = {k: sorted(set(int(i) for i in v)) for k, v in self.attributes.items()}
        self.validate()

    def validate(self):
        for kind, table in (("hypernym", self.hypernyms), ("attribute", self.attributes)):
            for name, members in table.items():
                bad = [i for i in members if i < 0 or i >= self.n_classes]
                if bad:
                    raise ContractError(
                        f"{kind} {name!r} references unknown class indices {bad} "
                        f"(universe has {self.n_classes})")
        for name, members in self.hypernyms.items():
            if not members:
                raise ContractError(f"hypernym {name!r} has an empty class set")
        if self.exclusive_hypernyms:
            seen: dict[int, str] = {}
            for name, members in self.hypernyms.items():
                for i in members:
                    if i in seen:
                        raise ContractError(
                            f"class {i} belongs to both {seen[i]!r} and {name!r} "
                            "but hypernyms are declared exclusive")
                    seen[i] = name

    def drop_degenerate_attributes(self) -> list[str]:
        """Remove attributes held by no class or by every class; return their names."""
        dropped = [a for a, m in self.attributes.items() if len(m) in (0, self.n_classes)]
        for a in dropped:
            del self.attributes[a]
        if dropped:
            warnings.warn(f"dropping degenerate attributes (empty or universal): {dropped}",
                          stacklevel=2)
        return dropped

    @property
    def hypernym_sets(self) -> list[list[int]]:
        return list(self.hypernyms.values())

    @property
    def attribute_sets(self) -> list[list[int]]:
        return list(self.attributes.values())

    def attribute_table(self) -> np.ndarray:
        """Boolean [n_classes x n_attributes] table."""
        t = np.zeros((self.n_classes, len(self.attributes)), dtype=bool)
        for k, members in enumerate(self.attributes.values()):
            t[members, k] = True
        return t


def ground_hypernym_rule(log_probs: nd.Node, hypernym_scores: nd.Node, rules: RuleSet,
                         c: float) -> nd.Node:
    """One assertion logit per (sample, hypernym): isA(x, h) -> inside(x, C_h)."""
    sets = rules.hypernym_sets
    if hypernym_scores.shape[-1] != len(sets):
        raise ContractError(
            f"expected {len(sets)} hypernym scores per sample, got {hypernym_scores.shape[-1]}")
    return l_implies_margin(hypernym_scores, inside(log_probs, sets), c)


def ground_attribute_rule(log_probs: nd.Node, attribute_scores: nd.Node, rules: RuleSet,
                          c: float) -> nd.Node:
    """One assertion logit per (sample, attribute): isA(x, a) <-> inside(x, C_a)."""
    sets = rules.attribute_sets
    if attribute_scores.shape[-1] != len(sets):
        raise ContractError(
            f"expected {len(sets)} attribute scores per sample, got {attribute_scores.shape[-1]}")
    return l_iff_margin(attribute_scores, inside(log_probs, sets), c)
