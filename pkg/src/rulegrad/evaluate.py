"""Mean-class-accuracy metrics for conventional and generalized zero-shot evaluation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import ZslDataset
from .errors import ContractError
from .vse import VseParams, predict


@dataclass
class EvalReport:
    mca_t: float
    mca_s_g: float
    mca_t_g: float
    hm: float
    per_class: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def per_class_accuracy(predictions, labels) -> dict[int, float]:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    return {int(c): float(np.mean(predictions[labels == c] == c)) for c in np.unique(labels)}


def mca(predictions, labels, class_set) -> float:
    """Unweighted mean of per-class top-1 accuracy over classes present in ``labels``."""
    allowed = set(int(c) for c in class_set)
    labels = np.asarray(labels)
    if not allowed:
        raise ContractError("mca(): empty class set")
    stray = sorted(set(labels.tolist()) - allowed)
    if stray:
        raise ContractError(f"mca(): labels {stray} are not in the class set")
    if labels.size == 0:
        raise ContractError("mca(): no samples from the class set")
    acc = per_class_accuracy(predictions, labels)
    return float(np.mean(list(acc.values())))


def harmonic_mean(seen: float, unseen: float) -> float:
    if seen <= 0 or unseen <= 0:
        return 0.0
    return 2.0 * seen * unseen / (seen + unseen)


def evaluate(dataset: ZslDataset, params: VseParams, gamma: float = 32.0) -> EvalReport:
    """Conventional MCA on unseen classes, plus generalized seen/unseen MCA and their HM.

    ``gamma`` does not change the argmax; it is accepted for interface symmetry.
    """
    del gamma
    x, y = dataset.test_x, dataset.test_y
    unseen = np.isin(y, dataset.unseen)
    seen = np.isin(y, dataset.seen)
    mca_t = mca(predict(x[unseen], dataset.class_emb, params, dataset.unseen), y[unseen],
                dataset.unseen)
    pred_all = predict(x, dataset.class_emb, params, range(dataset.n_classes))
    mca_t_g = mca(pred_all[unseen], y[unseen], dataset.unseen)
    mca_s_g = mca(pred_all[seen], y[seen], dataset.seen) if seen.any() else 0.0
    per_class = {dataset.class_names[c]: a for c, a in per_class_accuracy(pred_all, y).items()}
    return EvalReport(mca_t, mca_s_g, mca_t_g, harmonic_mean(mca_s_g, mca_t_g), per_class)
