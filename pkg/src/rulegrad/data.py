"""ZSL datasets: in-memory container, on-disk format, and a synthetic generator.

On disk a dataset is a directory with ``manifest.json`` plus raw little-endian
float64 matrices (``*.f64``, row-major) and newline-delimited integer label
files (``*.labels``). All integers are class indices in manifest order.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, DataError
from .logic import RuleSet

FORMAT = "rulegrad-zsl/1"

_FILES = {
    "train_features": "train_features.f64",
    "train_labels": "train.labels",
    "test_features": "test_features.f64",
    "test_labels": "test.labels",
    "class_embeddings": "class_embeddings.f64",
    "hypernym_embeddings": "hypernym_embeddings.f64",
}


@dataclass(eq=False)
class ZslDataset:
    """Seen-class training data, mixed seen/unseen test data and the class semantics.

    Test labels are only read by evaluation; transductive training goes through
    :attr:`unlabeled`, which exposes features alone.
    """

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    class_emb: np.ndarray
    hypernym_emb: np.ndarray
    seen: list[int]
    unseen: list[int]
    rules: RuleSet
    class_names: list[str] = field(default_factory=list)
    attribute_emb: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        f = lambda a: np.ascontiguousarray(a, dtype=np.float64)  # noqa: E731
        self.train_x, self.test_x = f(self.train_x), f(self.test_x)
        self.class_emb, self.hypernym_emb = f(self.class_emb), f(self.hypernym_emb)
        if self.attribute_emb is not None:
            self.attribute_emb = f(self.attribute_emb)
        self.train_y = np.asarray(self.train_y, dtype=np.int64)
        self.test_y = np.asarray(self.test_y, dtype=np.int64)
        self.seen = sorted(int(i) for i in self.seen)
        self.unseen = sorted(int(i) for i in self.unseen)
        if not self.class_names:
            self.class_names = [f"class{i}" for i in range(self.n_classes)]
        self.validate()

    @property
    def n_classes(self) -> int:
        return self.class_emb.shape[0]

    @property
    def unlabeled(self) -> np.ndarray:
        """Test features without labels, for transductive training."""
        return self.test_x

    def validate(self):
        n = self.n_classes
        overlap = sorted(set(self.seen) & set(self.unseen))
        if overlap:
            raise DataError(f"seen and unseen partitions overlap on classes {overlap}")
        missing = sorted(set(range(n)) - set(self.seen) - set(self.unseen))
        extra = sorted((set(self.seen) | set(self.unseen)) - set(range(n)))
        if missing or extra:
            raise DataError(f"seen/unseen must partition the {n} classes "
                            f"(missing {missing}, out of range {extra})")
        for split, x, y in (("train", self.train_x, self.train_y),
                            ("test", self.test_x, self.test_y)):
            if x.ndim != 2:
                raise DataError(f"{split} features must be a matrix, got shape {x.shape}")
            if x.shape[0] != y.shape[0]:
                raise DataError(f"{split}: {x.shape[0]} feature rows but {y.shape[0]} labels")
            if y.size and (y.min() < 0 or y.max() >= n):
                raise DataError(f"{split} labels outside [0, {n})")
            if not np.all(np.isfinite(x)):
                raise DataError(f"{split} features contain non-finite values")
        if self.train_x.shape[1] != self.test_x.shape[1]:
            raise DataError(f"feature width differs: train {self.train_x.shape[1]}, "
                            f"test {self.test_x.shape[1]}")
        bad = sorted(set(self.train_y.tolist()) - set(self.seen))
        if bad:
            raise DataError(f"train labels include non-seen classes {bad}")
        d_y = self.class_emb.shape[1]
        if self.hypernym_emb.ndim != 2 or self.hypernym_emb.shape != (len(self.rules.hypernyms), d_y):
            raise DataError(f"hypernym embeddings have shape {self.hypernym_emb.shape}, expected "
                            f"({len(self.rules.hypernyms)}, {d_y})")
        if self.attribute_emb is not None and self.attribute_emb.shape != (len(self.rules.attributes), d_y):
            raise DataError(f"attribute embeddings have shape {self.attribute_emb.shape}, expected "
                            f"({len(self.rules.attributes)}, {d_y})")
        if self.rules.n_classes != n:
            raise DataError(f"rule set is over {self.rules.n_classes} classes, dataset has {n}")
        if len(self.class_names) != n:
            raise DataError(f"{len(self.class_names)} class names for {n} classes")

    def __eq__(self, other):
        if not isinstance(other, ZslDataset):
            return NotImplemented
        arrays = ("train_x", "train_y", "test_x", "test_y", "class_emb", "hypernym_emb")
        same = all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
        if (self.attribute_emb is None) != (other.attribute_emb is None):
            return False
        if self.attribute_emb is not None:
            same = same and np.array_equal(self.attribute_emb, other.attribute_emb)
        return (same and self.seen == other.seen and self.unseen == other.unseen
                and self.class_names == other.class_names and self.name == other.name
                and self.rules.hypernyms == other.rules.hypernyms
                and self.rules.attributes == other.rules.attributes
                and list(self.rules.hypernyms) == list(other.rules.hypernyms)
                and list(self.rules.attributes) == list(other.rules.attributes))


# -- disk format ---------------------------------------------------------------

def _write_f64(path: Path, a: np.ndarray):
    np.ascontiguousarray(a, dtype="<f8").tofile(path)


def _read_f64(path: Path, shape) -> np.ndarray:
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    raw = np.fromfile(path, dtype="<f8")
    expected = int(np.prod(shape))
    if raw.size != expected:
        raise DataError(f"{path.name}: holds {raw.size} values, manifest shape {list(shape)} "
                        f"needs {expected}")
    return raw.reshape(shape).astype(np.float64)


def _read_labels(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    text = path.read_text().split()
    try:
        return np.array([int(t) for t in text], dtype=np.int64)
    except ValueError as e:
        raise DataError(f"{path.name}: non-integer label ({e})") from None


def save_dataset(ds: ZslDataset, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = dict(_FILES)
    _write_f64(d / files["train_features"], ds.train_x)
    _write_f64(d / files["test_features"], ds.test_x)
    _write_f64(d / files["class_embeddings"], ds.class_emb)
    _write_f64(d / files["hypernym_embeddings"], ds.hypernym_emb)
    if ds.attribute_emb is not None:
        files["attribute_embeddings"] = "attribute_embeddings.f64"
        _write_f64(d / files["attribute_embeddings"], ds.attribute_emb)
    (d / files["train_labels"]).write_text("".join(f"{int(v)}\n" for v in ds.train_y))
    (d / files["test_labels"]).write_text("".join(f"{int(v)}\n" for v in ds.test_y))
    manifest = {
        "format": FORMAT,
        "name": ds.name,
        "dims": {"d_x": ds.train_x.shape[1], "d_y": ds.class_emb.shape[1]},
        "counts": {"classes": ds.n_classes, "train": len(ds.train_y), "test": len(ds.test_y),
                   "hypernyms": len(ds.rules.hypernyms), "attributes": len(ds.rules.attributes)},
        "class_names": ds.class_names,
        "seen": ds.seen,
        "unseen": ds.unseen,
        "hypernym_map": ds.rules.hypernyms,
        "attribute_map": ds.rules.attributes,
        "hypernyms_exclusive": ds.rules.exclusive_hypernyms,
        "files": files,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return d


def load_dataset(directory) -> ZslDataset:
    d = Path(directory)
    mpath = d / "manifest.json"
    if not mpath.is_file():
        raise DataError(f"missing file: {mpath}")
    try:
        m = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"manifest.json is not valid JSON: {e}") from None
    try:
        d_x, d_y = int(m["dims"]["d_x"]), int(m["dims"]["d_y"])
        counts, files = m["counts"], m["files"]
        n_cls = int(counts["classes"])
        seen, unseen = list(m["seen"]), list(m["unseen"])
        hyp_map, attr_map = dict(m["hypernym_map"]), dict(m.get("attribute_map", {}))
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"manifest.json is missing or has a malformed field: {e}") from None

    overlap = sorted(set(seen) & set(unseen))
    if overlap:
        raise DataError(f"seen and unseen partitions overlap on classes {overlap}")
    for kind, table in (("hypernym", hyp_map), ("attribute", attr_map)):
        for k, members in table.items():
            dangling = [i for i in members if not 0 <= int(i) < n_cls]
            if dangling:
                raise DataError(f"{kind} {k!r} references unknown class indices {dangling}")

    train_y = _read_labels(d / files["train_labels"])
    test_y = _read_labels(d / files["test_labels"])
    for split, y in (("train", train_y), ("test", test_y)):
        if len(y) != int(counts[split]):
            raise DataError(f"{split} labels: file has {len(y)}, manifest says {counts[split]}")
    train_x = _read_f64(d / files["train_features"], (int(counts["train"]), d_x))
    test_x = _read_f64(d / files["test_features"], (int(counts["test"]), d_x))
    class_emb = _read_f64(d / files["class_embeddings"], (n_cls, d_y))
    hyp_emb = _read_f64(d / files["hypernym_embeddings"], (len(hyp_map), d_y))
    attr_emb = None
    if "attribute_embeddings" in files:
        attr_emb = _read_f64(d / files["attribute_embeddings"], (len(attr_map), d_y))

    try:
        rules = RuleSet(n_cls, hyp_map, attr_map, bool(m.get("hypernyms_exclusive", False)))
    except ContractError as e:
        raise DataError(str(e)) from None
    dropped = [k for k, v in rules.attributes.items() if len(v) in (0, n_cls)]
    if dropped:
        keep = [i for i, k in enumerate(rules.attributes) if k not in dropped]
        rules.drop_degenerate_attributes()
        if attr_emb is not None:
            attr_emb = attr_emb[keep]
    try:
        return ZslDataset(train_x, train_y, test_x, test_y, class_emb, hyp_emb, seen, unseen,
                          rules, list(m.get("class_names", [])), attr_emb,
                          str(m.get("name", d.name)))
    except ContractError as e:
        raise DataError(str(e)) from None


# -- preprocessing ---------------------------------------------------------------

def binarize_attributes(mean_attributes, threshold: float = 0.75, names=None) -> dict:
    """Class-level attribute sets: class y holds attribute a iff value >= threshold.

    Attributes held by no class or by every class are dropped with a warning.
    """
    m = np.asarray(mean_attributes, dtype=np.float64)
    if m.ndim != 2:
        raise ContractError(f"expected a [classes x attributes] matrix, got shape {m.shape}")
    if not 0.0 < threshold < 1.0:
        raise ContractError(f"threshold must lie in (0, 1), got {threshold}")
    if np.any(~np.isfinite(m)) or m.min() < 0.0 or m.max() > 1.0:
        raise ContractError("attribute values must lie in [0, 1]")
    names = list(names) if names is not None else [f"attr{k}" for k in range(m.shape[1])]
    out, dropped = {}, []
    for k, name in enumerate(names):
        members = np.flatnonzero(m[:, k] >= threshold).tolist()
        if len(members) in (0, m.shape[0]):
            dropped.append(name)
        else:
            out[name] = members
    if dropped:
        warnings.warn(f"dropping degenerate attributes (empty or universal): {dropped}",
                      stacklevel=2)
    return out


def add_feature_noise(features, sigma: float = 0.5, seed: int = 0) -> np.ndarray:
    """Add N(0, sigma^2) noise elementwise; sigma == 0 returns an exact copy."""
    if sigma < 0:
        raise ContractError(f"sigma must be >= 0, got {sigma}")
    x = np.array(features, dtype=np.float64)
    if sigma == 0:
        return x
    return x + np.random.default_rng(seed).normal(0.0, sigma, size=x.shape)


# -- synthetic data ------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Hierarchical Gaussian-cluster dataset with correlated word-embedding stand-ins."""

    n_hypernyms: int = 5
    classes_per_hypernym: int = 4
    samples_per_class: int = 50
    d_x: int = 32
    d_y: int = 16
    unseen_per_hypernym: int = 1
    sigma: float = 1.0
    separation: float = 4.0
    class_spread: float = 2.0
    embedding_noise: float = 0.3
    n_attributes: int = 8
    seen_test_fraction: float = 0.2
    seed: int = 0

    def validate(self):
        if self.n_hypernyms < 1 or self.classes_per_hypernym < 2:
            raise ContractError("need at least one hypernym with two or more classes")
        if not 0 < self.unseen_per_hypernym < self.classes_per_hypernym:
            raise ContractError("unseen_per_hypernym must be in [1, classes_per_hypernym)")
        if self.samples_per_class < 2 or self.d_x < 1 or self.d_y < 1:
            raise ContractError("samples_per_class must be >= 2 and dimensions positive")
        if min(self.sigma, self.separation, self.class_spread, self.embedding_noise) < 0:
            raise ContractError("noise and scale parameters must be >= 0")
        if not 0 < self.seen_test_fraction < 1:
            raise ContractError("seen_test_fraction must lie in (0, 1)")
        if self.n_attributes < 0:
            raise ContractError("n_attributes must be >= 0")


def generate_synthetic(spec: SyntheticSpec) -> ZslDataset:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    H, K = spec.n_hypernyms, spec.classes_per_hypernym
    n_cls = H * K
    hyp_of = np.repeat(np.arange(H), K)

    # hypernym centres on a sphere of radius `separation`
    centres = rng.normal(size=(H, spec.d_x))
    centres *= spec.separation / np.linalg.norm(centres, axis=1, keepdims=True)
    offsets = rng.normal(size=(n_cls, spec.d_x)) * (spec.class_spread / np.sqrt(spec.d_x))
    protos = centres[hyp_of] + offsets

    # semantic side: a fixed linear view of the visual prototypes plus noise
    a = rng.normal(size=(spec.d_x, spec.d_y)) / np.sqrt(spec.d_x)
    emb_scale = spec.separation if spec.separation > 0 else 1.0
    class_emb = (protos @ a) / emb_scale + spec.embedding_noise * rng.normal(size=(n_cls, spec.d_y))
    hyp_emb = (centres @ a) / emb_scale + spec.embedding_noise * rng.normal(size=(H, spec.d_y))

    unseen = []
    for h in range(H):
        picks = rng.choice(K, size=spec.unseen_per_hypernym, replace=False)
        unseen.extend(int(h * K + p) for p in picks)
    unseen = sorted(unseen)
    seen = [c for c in range(n_cls) if c not in set(unseen)]

    train_x, train_y, test_x, test_y = [], [], [], []
    n_test_seen = max(1, int(round(spec.seen_test_fraction * spec.samples_per_class)))
    for c in range(n_cls):
        x = protos[c] + spec.sigma * rng.normal(size=(spec.samples_per_class, spec.d_x))
        if c in unseen:
            test_x.append(x)
            test_y.extend([c] * len(x))
        else:
            train_x.append(x[n_test_seen:])
            train_y.extend([c] * (len(x) - n_test_seen))
            test_x.append(x[:n_test_seen])
            test_y.extend([c] * n_test_seen)

    attributes = _synthetic_attributes(rng, spec, offsets, hyp_of)
    rules = RuleSet(n_cls, {f"h{h}": list(range(h * K, (h + 1) * K)) for h in range(H)},
                    attributes, exclusive_hypernyms=True)
    return ZslDataset(np.vstack(train_x), np.array(train_y), np.vstack(test_x), np.array(test_y),
                      class_emb, hyp_emb, seen, unseen, rules,
                      [f"c{c}" for c in range(n_cls)], None, f"synthetic-{spec.seed}")


def _synthetic_attributes(rng, spec, offsets, hyp_of) -> dict:
    """Each attribute mixes a per-hypernym preference with a within-hypernym direction."""
    n_cls = len(hyp_of)
    out = {}
    tries = 0
    while len(out) < spec.n_attributes and tries < 100 * max(1, spec.n_attributes):
        tries += 1
        favoured = rng.random(spec.n_hypernyms) < 0.5
        u = rng.normal(size=spec.d_x)
        proj = offsets @ u
        proj = proj / (proj.std() + 1e-12)
        held = (np.where(favoured[hyp_of], 0.75, -0.75) + proj) > 0
        if 0 < held.sum() < n_cls:
            out[f"a{len(out)}"] = np.flatnonzero(held).tolist()
    return out
