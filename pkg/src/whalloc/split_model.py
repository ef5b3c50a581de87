"""Per-sku regional demand split probabilities learned from purchase events.

Three model kinds share one interface:

* ``baseline``  -- label frequencies over the training window, ignoring features
* ``logistic``  -- multinomial logistic regression on one-hot attributes
* ``mlp``       -- one tanh hidden layer followed by a softmax

Models are trained by full-batch gradient descent with L2 on the weight
matrices (biases are not penalised). One model is fitted per
(article type, gender) partition; :class:`SplitModelRegistry` falls back to
a model fitted on the whole corpus for unseen partitions.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateLabels, EmptyCorpus, ParseError, ValidationError
from .types import PurchaseOrder, Sku

KINDS = ("baseline", "logistic", "mlp")
PROB_FLOOR = 1e-12
FORMAT_NAME = "whalloc-split-model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureEncoder:
    """One-hot encoder over categorical attributes.

    Each attribute gets a block of columns, one per category seen in
    training. A value never seen in training (or a missing attribute) falls
    into the attribute's unknown bucket, which activates no column, so a sku
    with only unknown values encodes to the zero vector.
    """

    vocab: Mapping[str, tuple[str, ...]]

    @classmethod
    def fit(cls, rows: Iterable[Mapping[str, str]]) -> "FeatureEncoder":
        seen: dict[str, set] = {}
        for attrs in rows:
            for k, v in attrs.items():
                seen.setdefault(k, set()).add(str(v))
        return cls({k: tuple(sorted(seen[k])) for k in sorted(seen)})

    def __post_init__(self):
        offsets = {}
        index = {}
        n = 0
        for name, cats in self.vocab.items():
            offsets[name] = n
            index[name] = {c: i for i, c in enumerate(cats)}
            n += len(cats)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_dim", n)

    @property
    def dim(self) -> int:
        return self._dim

    def encode(self, attrs: Mapping[str, str]) -> np.ndarray:
        x = np.zeros(self._dim)
        for name, value in attrs.items():
            pos = self._index.get(name, {}).get(str(value))
            if pos is not None:
                x[self._offsets[name] + pos] = 1.0
        return x

    def encode_many(self, rows: Sequence[Mapping[str, str]]) -> np.ndarray:
        X = np.zeros((len(rows), self._dim))
        for r, attrs in enumerate(rows):
            for name, value in attrs.items():
                pos = self._index.get(name, {}).get(str(value))
                if pos is not None:
                    X[r, self._offsets[name] + pos] = 1.0
        return X


@dataclass(frozen=True)
class TrainingCorpus:
    """Labelled rows: the sku behind a purchase event and the index of the
    warehouse nearest to the buyer."""

    skus: tuple[Sku, ...]
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        object.__setattr__(self, "skus", tuple(self.skus))
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.shape != (len(self.skus),):
            raise ValidationError("one label per corpus row is required")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValidationError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return len(self.skus)

    def partitions(self) -> dict[tuple[str, str], "TrainingCorpus"]:
        groups: dict[tuple[str, str], list[int]] = {}
        for r, sku in enumerate(self.skus):
            groups.setdefault(sku.partition, []).append(r)
        return {
            key: TrainingCorpus([self.skus[r] for r in rows], self.labels[rows], self.n_classes)
            for key, rows in sorted(groups.items())
        }

    def split(self, fraction: float, seed: int = 0):
        """Random (train, held-out) split of the rows."""
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(self))
        cut = int(round(len(self) * fraction))
        a, b = np.sort(order[:cut]), np.sort(order[cut:])
        pick = lambda idx: TrainingCorpus([self.skus[r] for r in idx], self.labels[idx], self.n_classes)
        return pick(a), pick(b)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def one_hot(labels, K: int) -> np.ndarray:
    Y = np.zeros((len(labels), K))
    Y[np.arange(len(labels)), labels] = 1.0
    return Y


def logistic_forward(params, X):
    return softmax(X @ params["W"] + params["b"])


def logistic_loss_grad(params, X, Y, l2: float = 0.0):
    """Mean cross-entropy plus ``l2/2 * |W|^2`` and its gradient."""
    n = X.shape[0]
    P = logistic_forward(params, X)
    loss = -np.sum(Y * np.log(np.maximum(P, PROB_FLOOR))) / n + 0.5 * l2 * np.sum(params["W"] ** 2)
    G = (P - Y) / n
    return loss, {"W": X.T @ G + l2 * params["W"], "b": G.sum(axis=0)}


def mlp_forward(params, X, return_hidden: bool = False):
    H = np.tanh(X @ params["W1"] + params["b1"])
    P = softmax(H @ params["W2"] + params["b2"])
    return (P, H) if return_hidden else P


def mlp_loss_grad(params, X, Y, l2: float = 0.0):
    n = X.shape[0]
    P, H = mlp_forward(params, X, return_hidden=True)
    reg = 0.5 * l2 * (np.sum(params["W1"] ** 2) + np.sum(params["W2"] ** 2))
    loss = -np.sum(Y * np.log(np.maximum(P, PROB_FLOOR))) / n + reg
    G2 = (P - Y) / n
    G1 = (G2 @ params["W2"].T) * (1.0 - H**2)
    grads = {
        "W2": H.T @ G2 + l2 * params["W2"],
        "b2": G2.sum(axis=0),
        "W1": X.T @ G1 + l2 * params["W1"],
        "b1": G1.sum(axis=0),
    }
    return loss, grads


_LOSS_GRAD = {"logistic": logistic_loss_grad, "mlp": mlp_loss_grad}
_FORWARD = {"logistic": logistic_forward, "mlp": mlp_forward}


def init_params(kind: str, dim: int, K: int, rng: np.random.Generator, hidden: int = 16):
    if kind == "logistic":
        return {"W": 0.01 * rng.standard_normal((dim, K)), "b": np.zeros(K)}
    if kind == "mlp":
        return {
            "W1": rng.standard_normal((dim, hidden)) / np.sqrt(max(dim, 1)),
            "b1": np.zeros(hidden),
            "W2": rng.standard_normal((hidden, K)) / np.sqrt(hidden),
            "b2": np.zeros(K),
        }
    raise ValueError(f"no parameters for kind {kind!r}")


@dataclass
class SplitClassifier:
    kind: str
    n_classes: int
    params: dict[str, np.ndarray]
    encoder: FeatureEncoder = field(default_factory=lambda: FeatureEncoder({}))
    degenerate: bool = False

    def predict_proba_encoded(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "baseline":
            P = np.tile(self.params["prior"], (X.shape[0], 1))
        else:
            P = _FORWARD[self.kind](self.params, X)
        return P / P.sum(axis=1, keepdims=True)

    def predict_proba(self, sku: Sku | Mapping[str, str]) -> np.ndarray:
        attrs = sku.attributes if isinstance(sku, Sku) else sku
        return self.predict_proba_encoded(self.encoder.encode(attrs)[None, :])[0]

    def predict_proba_many(self, skus: Sequence[Sku]) -> np.ndarray:
        return self.predict_proba_encoded(self.encoder.encode_many([s.attributes for s in skus]))


def fit(
    corpus: TrainingCorpus,
    kind: str = "logistic",
    *,
    step: float = 0.1,
    l2: float = 1e-4,
    epochs: int = 500,
    hidden: int = 16,
    seed: int = 0,
) -> SplitClassifier:
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if len(corpus) == 0:
        raise EmptyCorpus("cannot fit a split model on an empty corpus")
    K = corpus.n_classes
    counts = np.bincount(corpus.labels, minlength=K).astype(float)
    if kind == "baseline":
        return SplitClassifier("baseline", K, {"prior": counts / counts.sum()})

    encoder = FeatureEncoder.fit(s.attributes for s in corpus.skus)
    rng = np.random.default_rng(seed)
    params = init_params(kind, encoder.dim, K, rng, hidden)

    if np.count_nonzero(counts) == 1:
        warnings.warn(
            f"only one warehouse label in {len(corpus)} rows; fitting a constant predictor",
            DegenerateLabels,
            stacklevel=2,
        )
        out_bias = np.log((counts + 1.0) / (counts.sum() + K))
        for name in params:
            params[name] = np.zeros_like(params[name])
        params["b" if kind == "logistic" else "b2"] = out_bias
        return SplitClassifier(kind, K, params, encoder, degenerate=True)

    X = encoder.encode_many([s.attributes for s in corpus.skus])
    Y = one_hot(corpus.labels, K)
    loss_grad = _LOSS_GRAD[kind]
    for _ in range(epochs):
        _, grads = loss_grad(params, X, Y, l2)
        for name, g in grads.items():
            params[name] -= step * g
    return SplitClassifier(kind, K, params, encoder)


def log_loss(model, corpus: TrainingCorpus) -> float:
    """Mean negative log probability of the true label (probabilities floored at 1e-12)."""
    if len(corpus) == 0:
        raise EmptyCorpus("log loss of an empty corpus is undefined")
    P = predict_many(model, corpus.skus)
    p = P[np.arange(len(corpus)), corpus.labels]
    return float(np.mean(-np.log(np.maximum(p, PROB_FLOOR))))


@dataclass
class SplitModelRegistry:
    """Models keyed by (article type, gender), plus a corpus-wide fallback."""

    fallback: SplitClassifier
    models: dict[tuple[str, str], SplitClassifier] = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return self.fallback.n_classes

    def model_for(self, sku: Sku) -> SplitClassifier:
        return self.models.get(sku.partition, self.fallback)

    def predict_proba(self, sku: Sku) -> np.ndarray:
        return self.model_for(sku).predict_proba(sku)


def fit_registry(corpus: TrainingCorpus, kind: str = "logistic", **hyper) -> SplitModelRegistry:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateLabels)
        models = {key: fit(part, kind, **hyper) for key, part in corpus.partitions().items()}
    return SplitModelRegistry(fit(corpus, kind, **hyper), models)


def predict_many(model, skus: Sequence[Sku]) -> np.ndarray:
    """Probability rows for many skus, batching per underlying classifier."""
    if isinstance(model, SplitClassifier):
        return model.predict_proba_many(skus)
    P = np.zeros((len(skus), model.n_classes))
    groups: dict[int, list[int]] = {}
    chosen = {}
    for r, sku in enumerate(skus):
        m = model.model_for(sku)
        chosen[id(m)] = m
        groups.setdefault(id(m), []).append(r)
    for key, rows in groups.items():
        P[rows] = chosen[key].predict_proba_many([skus[r] for r in rows])
    return P


def build_split_matrix(model, po: PurchaseOrder) -> np.ndarray:
    """Split probability matrix P (one row per PO line) for a purchase order."""
    return predict_many(model, po.skus)


# -- persistence -------------------------------------------------------------


def _classifier_to_dict(m: SplitClassifier, partition=None) -> dict:
    return {
        "partition": list(partition) if partition is not None else None,
        "kind": m.kind,
        "n_classes": m.n_classes,
        "degenerate": m.degenerate,
        "vocab": {k: list(v) for k, v in m.encoder.vocab.items()},
        "params": {
            name: {"shape": list(a.shape), "data": a.ravel().tolist()} for name, a in m.params.items()
        },
    }


def _classifier_from_dict(d: dict) -> SplitClassifier:
    params = {
        name: np.array(p["data"], dtype=float).reshape(p["shape"]) for name, p in d["params"].items()
    }
    encoder = FeatureEncoder({k: tuple(v) for k, v in d["vocab"].items()})
    return SplitClassifier(d["kind"], int(d["n_classes"]), params, encoder, bool(d["degenerate"]))


def dumps(model, warehouses: Sequence[str] = ()) -> str:
    """Serialize a classifier or registry as JSON text. Floats are written with
    ``repr`` precision so a load reproduces predictions bit for bit."""
    if isinstance(model, SplitClassifier):
        entries = [_classifier_to_dict(model)]
    else:
        entries = [_classifier_to_dict(model.fallback)]
        entries += [_classifier_to_dict(m, key) for key, m in sorted(model.models.items())]
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "registry": not isinstance(model, SplitClassifier),
        "warehouses": list(warehouses),
        "models": entries,
    }
    return json.dumps(doc, indent=1) + "\n"


def loads(text: str, source: str = "<string>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(source, exc.lineno, exc.msg) from None
    if doc.get("format") != FORMAT_NAME:
        raise ParseError(source, 1, f"not a {FORMAT_NAME} file")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(source, 1, f"unsupported model format version {doc.get('version')!r}")
    entries = doc["models"]
    first = _classifier_from_dict(entries[0])
    if not doc["registry"]:
        return first
    models = {tuple(e["partition"]): _classifier_from_dict(e) for e in entries[1:]}
    return SplitModelRegistry(first, models)


def save(model, path, warehouses: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model, warehouses))


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(str(path), 0, exc.strerror or str(exc)) from None
    return loads(text, str(path))


def model_warehouses(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return list(json.load(fh).get("warehouses", []))
