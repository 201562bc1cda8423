"""Linear visual-semantic embedding with cosine scoring."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ndgrad as nd
from .errors import ContractError, NumericError, ShapeError


@dataclass
class VseParams:
    """Projection matrices: visual ``w_x`` [D_x x D_e] and semantic ``w_y`` [D_y x D_e]."""

    w_x: np.ndarray
    w_y: np.ndarray

    def __post_init__(self):
        self.w_x = np.ascontiguousarray(self.w_x, dtype=np.float64)
        self.w_y = np.ascontiguousarray(self.w_y, dtype=np.float64)
        if self.w_x.ndim != 2 or self.w_y.ndim != 2 or self.w_x.shape[1] != self.w_y.shape[1]:
            raise ShapeError(f"projections must share the embedding width: "
                             f"{self.w_x.shape} vs {self.w_y.shape}")

    @classmethod
    def init(cls, d_x: int, d_y: int, d_e: int = 1024, seed: int = 0) -> "VseParams":
        """Glorot-uniform initialisation."""
        rng = np.random.default_rng(seed)
        bx = np.sqrt(6.0 / (d_x + d_e))
        by = np.sqrt(6.0 / (d_y + d_e))
        return cls(rng.uniform(-bx, bx, (d_x, d_e)), rng.uniform(-by, by, (d_y, d_e)))

    def copy(self) -> "VseParams":
        return VseParams(self.w_x.copy(), self.w_y.copy())

    def arrays(self) -> list[np.ndarray]:
        return [self.w_x, self.w_y]

    def save(self, path):
        np.savez(Path(path), w_x=self.w_x, w_y=self.w_y)

    @classmethod
    def load(cls, path) -> "VseParams":
        with np.load(Path(path)) as z:
            return cls(z["w_x"], z["w_y"])


def _projected(tape, x, w):
    x = x if isinstance(x, nd.Node) else tape.const(np.atleast_2d(x))
    return nd.normalize_rows(nd.matmul(x, w))


def score_matrix(x, e, w_x: nd.Node, w_y: nd.Node) -> nd.Node:
    """Cosine between every projected row of ``x`` and every projected row of ``e``."""
    tape = w_x.tape
    return nd.matmul(_projected(tape, x, w_x), nd.transpose(_projected(tape, e, w_y)))


def class_log_probs(x, class_emb, w_x: nd.Node, w_y: nd.Node, gamma: float = 32.0) -> nd.Node:
    """Row-wise log p(y | x) = log softmax(gamma * s(x, y)) over all classes."""
    if gamma <= 0:
        raise ContractError(f"gamma must be positive, got {gamma}")
    return nd.softmax_log_probs(nd.scale(score_matrix(x, class_emb, w_x, w_y), gamma))


def isa_logits(x, side_emb, w_x: nd.Node, w_y: nd.Node, gamma: float = 32.0) -> nd.Node:
    """isA truth logits ``gamma * s(x, e)`` against hypernym/attribute embeddings."""
    return nd.scale(score_matrix(x, side_emb, w_x, w_y), gamma)


# -- numpy-only inference helpers ----------------------------------------------

def _unit_rows(m):
    n = np.linalg.norm(m, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise NumericError("zero-norm projection")
    return m / n


def scores(x: np.ndarray, emb: np.ndarray, params: VseParams) -> np.ndarray:
    """Plain-numpy cosine score matrix [n_samples x n_rows_of_emb]."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    emb = np.atleast_2d(np.asarray(emb, dtype=np.float64))
    if x.shape[1] != params.w_x.shape[0] or emb.shape[1] != params.w_y.shape[0]:
        raise ShapeError(f"inputs {x.shape}, {emb.shape} do not fit params "
                         f"{params.w_x.shape}, {params.w_y.shape}")
    return _unit_rows(x @ params.w_x) @ _unit_rows(emb @ params.w_y).T


def score(x: np.ndarray, e: np.ndarray, params: VseParams) -> float:
    """Cosine score of a single feature vector against a single label embedding."""
    return float(scores(x, e, params)[0, 0])


def predict(x: np.ndarray, class_emb: np.ndarray, params: VseParams, restriction) -> np.ndarray:
    """Nearest label (by cosine) among ``restriction``; ties go to the lowest index."""
    allowed = np.array(sorted(set(int(i) for i in restriction)), dtype=np.intp)
    if allowed.size == 0:
        raise ContractError("predict(): empty restriction set")
    s = scores(x, class_emb[allowed], params)
    return allowed[np.argmax(s, axis=1)]
