"""Training objective: VSE classification/bias terms plus the logical rule loss."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import logic
from . import ndgrad as nd
from . import vse
from .errors import ContractError


@dataclass
class LossWeights:
    lambda_q: float = 0.0
    lambda_reg: float = 0.0
    lambda_hyp: float = 0.0
    lambda_attr: float = 0.0
    lambda_trans: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not np.isfinite(v) or v < 0:
                raise ContractError(f"{f.name} must be a finite non-negative number, got {v}")
            setattr(self, f.name, v)

    @property
    def rules_active(self) -> bool:
        return self.lambda_hyp > 0 or self.lambda_attr > 0


@dataclass
class LossBreakdown:
    """Unweighted loss components and the weighted total of one objective evaluation."""

    classification: float = 0.0
    bias: float = 0.0
    regularizer: float = 0.0
    hypernym: float = 0.0
    attribute: float = 0.0
    hypernym_trans: float = 0.0
    attribute_trans: float = 0.0
    total: float = 0.0

    def weighted_sum(self, w: LossWeights) -> float:
        return (self.classification + w.lambda_q * self.bias + w.lambda_reg * self.regularizer
                + w.lambda_hyp * self.hypernym + w.lambda_attr * self.attribute
                + w.lambda_trans * (w.lambda_hyp * self.hypernym_trans
                                    + w.lambda_attr * self.attribute_trans))

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def average(cls, items: list["LossBreakdown"]) -> "LossBreakdown":
        if not items:
            return cls()
        return cls(**{f.name: float(np.mean([getattr(b, f.name) for b in items]))
                      for f in fields(cls)})


def classification_loss(log_probs: nd.Node, labels) -> nd.Node:
    """Cross-entropy ``-log p(label)``; scalar for a vector input, per-row for a batch."""
    n_classes = log_probs.shape[-1]
    lab = np.atleast_1d(np.asarray(labels, dtype=np.intp))
    if lab.size and (lab.min() < 0 or lab.max() >= n_classes):
        raise ContractError(f"label out of range [0, {n_classes}): {lab.tolist()}")
    if log_probs.value.ndim == 1:
        return nd.neg(nd.take(log_probs, int(lab[0]), axis=0))
    return nd.neg(nd.pick(log_probs, lab))


def bias_loss(log_probs: nd.Node, unseen) -> nd.Node:
    """``-log sum_{y in unseen} p(y|x)``, computed with a log-sum-exp over the set."""
    idx = sorted(set(int(i) for i in unseen))
    if not idx:
        raise ContractError("bias_loss(): empty unseen class set")
    return nd.neg(nd.logsumexp(nd.take(log_probs, idx, axis=-1)))


def bce_with_logits(z: nd.Node, target: int = 1) -> nd.Node:
    if target not in (0, 1):
        raise ContractError(f"bce target must be 0 or 1, got {target}")
    return nd.softplus(nd.neg(z) if target == 1 else z)


def rule_assertions(log_probs, hyp_isa, attr_isa, rules: logic.RuleSet, margin: float):
    """Ground both rule families; either isA input may be None to skip that family."""
    hyp = attr = None
    if hyp_isa is not None and rules.hypernyms:
        hyp = logic.ground_hypernym_rule(log_probs, hyp_isa, rules, margin)
    if attr_isa is not None and rules.attributes:
        attr = logic.ground_attribute_rule(log_probs, attr_isa, rules, margin)
    return hyp, attr


def csnl_loss(log_probs, hyp_isa, attr_isa, rules: logic.RuleSet, margin: float,
              weights: LossWeights):
    """Weighted rule loss for one batch.

    Each assertion is scored with ``bce(z, 1)``; assertions are averaged within a
    sample and samples are averaged over the batch. Returns
    ``(loss, hypernym_term, attribute_term)`` where the two terms are unweighted
    nodes (or None when the family is off).
    """
    tape = log_probs.tape
    use_hyp = hyp_isa if weights.lambda_hyp > 0 else None
    use_attr = attr_isa if weights.lambda_attr > 0 else None
    hyp_z, attr_z = rule_assertions(log_probs, use_hyp, use_attr, rules, margin)
    hyp = nd.mean(bce_with_logits(hyp_z, 1)) if hyp_z is not None else None
    attr = nd.mean(bce_with_logits(attr_z, 1)) if attr_z is not None else None
    total = tape.const(0.0)
    if hyp is not None:
        total = nd.add(total, nd.scale(hyp, weights.lambda_hyp))
    if attr is not None:
        total = nd.add(total, nd.scale(attr, weights.lambda_attr))
    return total, hyp, attr


def labeled_attribute_isa(tape, labels, rules: logic.RuleSet) -> nd.Node:
    """Saturated isA logits for attributes, read from the ground-truth class."""
    table = rules.attribute_table()[np.asarray(labels, dtype=np.intp)]
    return tape.const(np.where(table, logic.SATURATED, -logic.SATURATED))


def baseline_objective(w_x, w_y, x_lab, y_lab, x_unl, data, weights: LossWeights,
                       gamma: float):
    """Rule-free part of the objective.

    Returns ``(loss, labeled_log_probs, unlabeled_log_probs, parts)``; ``parts``
    holds the unweighted classification, bias and regularizer nodes.
    """
    if len(y_lab) == 0:
        raise ContractError("labeled batch is empty")
    lp = vse.class_log_probs(x_lab, data.class_emb, w_x, w_y, gamma)
    l_c = nd.mean(classification_loss(lp, y_lab))
    loss = l_c
    parts = {"classification": l_c}
    lp_u = None
    if x_unl is not None and len(x_unl):
        lp_u = vse.class_log_probs(x_unl, data.class_emb, w_x, w_y, gamma)
        if weights.lambda_q > 0:
            l_q = nd.mean(bias_loss(lp_u, data.unseen))
            loss = nd.add(loss, nd.scale(l_q, weights.lambda_q))
            parts["bias"] = l_q
    if weights.lambda_reg > 0:
        reg = nd.add(nd.l2_norm_sq(w_x), nd.l2_norm_sq(w_y))
        loss = nd.add(loss, nd.scale(reg, weights.lambda_reg))
        parts["regularizer"] = reg
    return loss, lp, lp_u, parts


def total_loss(w_x, w_y, x_lab, y_lab, x_unl, data, margin: float, weights: LossWeights,
               gamma: float = 32.0):
    """Full objective on one labeled batch and an optional unlabeled batch.

    ``data`` supplies ``class_emb``, ``hypernym_emb``, ``attribute_emb`` (may be
    None), ``unseen`` and ``rules``. Returns ``(loss_node, LossBreakdown)``.
    """
    tape = w_x.tape
    loss, lp, lp_u, parts = baseline_objective(w_x, w_y, x_lab, y_lab, x_unl, data, weights,
                                               gamma)
    rules = data.rules
    if weights.rules_active:
        hyp_isa, attr_isa = _isa_inputs(tape, x_lab, y_lab, data, w_x, w_y, gamma, weights)
        csnl, hyp, attr = csnl_loss(lp, hyp_isa, attr_isa, rules, margin, weights)
        loss = nd.add(loss, csnl)
        parts["hypernym"], parts["attribute"] = hyp, attr
        if lp_u is not None and weights.lambda_trans > 0:
            hyp_u, attr_u = _isa_inputs(tape, x_unl, None, data, w_x, w_y, gamma, weights)
            csnl_u, hyp_t, attr_t = csnl_loss(lp_u, hyp_u, attr_u, rules, margin, weights)
            loss = nd.add(loss, nd.scale(csnl_u, weights.lambda_trans))
            parts["hypernym_trans"], parts["attribute_trans"] = hyp_t, attr_t
    br = LossBreakdown(total=loss.item(),
                       **{k: v.item() for k, v in parts.items() if v is not None})
    return loss, br


def _isa_inputs(tape, x, labels, data, w_x, w_y, gamma, weights):
    hyp_isa = attr_isa = None
    if weights.lambda_hyp > 0 and data.rules.hypernyms:
        hyp_isa = vse.isa_logits(x, data.hypernym_emb, w_x, w_y, gamma)
    if weights.lambda_attr > 0 and data.rules.attributes:
        if getattr(data, "attribute_emb", None) is not None:
            attr_isa = vse.isa_logits(x, data.attribute_emb, w_x, w_y, gamma)
        elif labels is not None:
            attr_isa = labeled_attribute_isa(tape, labels, data.rules)
    return hyp_isa, attr_isa
