"""Dataset ingestion, synthesis, splits, and serialization.

File grammar (plain text, '#' comments allowed everywhere):

* edges file: ``u v w`` with 0-based node indices and a real weight, one
  undirected edge per line (mirrored on load);
* features file: header ``N d`` then N lines of d reals;
* labels file: ``node_index class_index``, class -1 for unlabeled;
* a multimodal bundle is a directory of ``modality_<m>/`` subdirectories
  (each holding the three files above) plus ``correspondence_<m>_<e>.txt``
  files of ``i j`` ground-truth matches.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError, ParseError
from .graphs import UNLABELED, ModalityGraph, knn_graph, make_graph
from .linalg import from_coo

EDGES_FILE = "edges.txt"
FEATURES_FILE = "features.txt"
LABELS_FILE = "labels.txt"


@dataclass
class DatasetBundle:
    """Modalities plus optional ground-truth correspondences.

    correspondence[(m, e)][i] = j means node i of modality m and node j of
    modality e are the same underlying entity. Evaluation-only in learned
    mode; mv-gwcn consumes it as its fixed permutations.
    """

    modalities: list[ModalityGraph]
    correspondence: dict[tuple[int, int], np.ndarray]
    name: str = "bundle"

    def validate(self) -> None:
        label_sets = []
        for g in self.modalities:
            labs = np.unique(g.labels[g.labels != UNLABELED])
            label_sets.append(set(int(v) for v in labs))
        if label_sets and any(s != label_sets[0] for s in label_sets):
            raise DataError("modalities disagree on the label alphabet")
        for (m, e), cols in self.correspondence.items():
            n_m = self.modalities[m].n_nodes
            n_e = self.modalities[e].n_nodes
            if cols.shape != (n_m,):
                raise DataError(f"correspondence ({m},{e}) has wrong length")
            if n_m == n_e and len(np.unique(cols)) != n_e:
                raise DataError(f"correspondence ({m},{e}) is not a bijection")

    def n_classes(self) -> int:
        labs = np.concatenate([g.labels for g in self.modalities])
        labs = labs[labs != UNLABELED]
        return int(labs.max()) + 1


def _data_lines(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    for lineno, line in enumerate(raw, start=1):
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            yield lineno, stripped


def load_explicit_graph(edge_path: str, feature_path: str, label_path: str,
                        row_normalize: bool = False) -> ModalityGraph:
    """Read one modality from the three-file grammar."""
    lines = list(_data_lines(feature_path))
    if not lines:
        raise ParseError(f"{feature_path}: empty features file")
    header_no, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise ParseError(f"{feature_path}:{header_no}: header must be 'N d'")
    try:
        n, d = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ParseError(f"{feature_path}:{header_no}: bad header") from exc
    if len(lines) - 1 != n:
        raise ParseError(
            f"{feature_path}: header says {n} rows, found {len(lines) - 1}")
    feats = np.zeros((n, d))
    for row, (lineno, text) in enumerate(lines[1:]):
        vals = text.split()
        if len(vals) != d:
            raise ParseError(f"{feature_path}:{lineno}: expected {d} values")
        try:
            feats[row] = [float(v) for v in vals]
        except ValueError as exc:
            raise ParseError(f"{feature_path}:{lineno}: bad real value") from exc

    rows, cols, vals = [], [], []
    for lineno, text in _data_lines(edge_path):
        parts = text.split()
        if len(parts) != 3:
            raise ParseError(f"{edge_path}:{lineno}: expected 'u v w'")
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ParseError(f"{edge_path}:{lineno}: bad edge line") from exc
        if not (0 <= u < n and 0 <= v < n):
            raise ParseError(f"{edge_path}:{lineno}: node index out of range")
        if w < 0:
            raise ParseError(f"{edge_path}:{lineno}: negative edge weight")
        if u == v:
            continue  # zero-diagonal convention: self loops dropped
        rows.extend((u, v))
        cols.extend((v, u))
        vals.extend((w, w))
    adjacency = from_coo(n, n, rows, cols, vals)

    labels = np.full(n, UNLABELED, dtype=np.int64)
    for lineno, text in _data_lines(label_path):
        parts = text.split()
        if len(parts) != 2:
            raise ParseError(f"{label_path}:{lineno}: expected 'node class'")
        try:
            idx, cls = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ParseError(f"{label_path}:{lineno}: bad label line") from exc
        if not 0 <= idx < n:
            raise ParseError(f"{label_path}:{lineno}: node index out of range")
        if cls < UNLABELED:
            raise ParseError(f"{label_path}:{lineno}: bad class index")
        labels[idx] = cls

    if row_normalize:
        sums = feats.sum(axis=1, keepdims=True)
        feats = np.divide(feats, sums, out=feats.copy(), where=sums != 0)
    return make_graph(adjacency, feats, labels)


def semi_supervised_split(g: ModalityGraph, per_class: int, n_val: int,
                          n_test: int, seed: int) -> ModalityGraph:
    """Citation-style split: per_class train labels per class, then
    n_val/n_test sampled uniformly from the remaining labeled pool."""
    rng = np.random.default_rng(seed)
    labeled = np.nonzero(g.labels != UNLABELED)[0]
    classes = np.unique(g.labels[labeled])
    train_idx = []
    for c in classes:
        pool = labeled[g.labels[labeled] == c]
        if pool.size < per_class:
            raise DataError(
                f"class {c} has {pool.size} labeled nodes, need {per_class}")
        train_idx.extend(rng.choice(pool, size=per_class, replace=False))
    train_idx = np.array(sorted(train_idx))
    rest = np.setdiff1d(labeled, train_idx)
    if rest.size < n_val + n_test:
        raise DataError(
            f"need {n_val + n_test} non-train labeled nodes, have {rest.size}")
    picked = rng.choice(rest, size=n_val + n_test, replace=False)
    val_idx, test_idx = picked[:n_val], picked[n_val:]
    n = g.n_nodes
    train = np.zeros(n, dtype=bool); train[train_idx] = True
    val = np.zeros(n, dtype=bool); val[val_idx] = True
    test = np.zeros(n, dtype=bool); test[test_idx] = True
    return g.with_masks(train, val, test)


def fractional_split(g: ModalityGraph, train_frac: float, val_frac: float,
                     seed: int) -> ModalityGraph:
    """Proportional split of the labeled nodes; the remainder is test."""
    if train_frac <= 0 or val_frac < 0 or train_frac + val_frac > 1:
        raise ParameterError(
            f"bad fractions train={train_frac}, val={val_frac}")
    rng = np.random.default_rng(seed)
    labeled = np.nonzero(g.labels != UNLABELED)[0]
    perm = rng.permutation(labeled)
    n_lab = perm.size
    n_train = int(round(train_frac * n_lab))
    n_val = int(round(val_frac * n_lab))
    n = g.n_nodes
    train = np.zeros(n, dtype=bool); train[perm[:n_train]] = True
    val = np.zeros(n, dtype=bool); val[perm[n_train:n_train + n_val]] = True
    test = np.zeros(n, dtype=bool); test[perm[n_train + n_val:]] = True
    return g.with_masks(train, val, test)


def synth_multimodal(n_nodes: int, n_classes: int, n_modalities: int,
                     dims: list[int], noise: float, k: int,
                     seed: int) -> DatasetBundle:
    """Shared-latent synthetic multimodal dataset with known matches.

    Entities get one latent vector each (class centers plus jitter); every
    modality applies its own seeded linear map plus Gaussian noise, builds
    a kNN graph, and independently shuffles its node order. The shuffles
    are recorded as ground-truth correspondences.

    The modalities carry complementary information: modality m's linear
    map shrinks the direction separating one designated class pair
    (cycling through pairs with m), so at zero noise every class is still
    separable in every modality, while at moderate noise that pair can
    only be resolved by fusing information across modalities.
    """
    if n_classes < 1 or n_modalities < 1:
        raise ParameterError("need at least one class and one modality")
    if len(dims) != n_modalities:
        raise ParameterError(f"dims has {len(dims)} entries for "
                             f"{n_modalities} modalities")
    if n_nodes < n_classes * k:
        raise ParameterError(
            f"need n_nodes >= n_classes * k = {n_classes * k}, got {n_nodes}")
    if noise < 0:
        raise ParameterError("noise must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    latent_dim = max(8, n_classes)
    centers = np.zeros((n_classes, latent_dim))
    centers[np.arange(n_classes), np.arange(n_classes)] = 5.0
    entity_class = np.repeat(np.arange(n_classes), n_nodes // n_classes)
    if entity_class.size < n_nodes:
        entity_class = np.concatenate(
            [entity_class, rng.integers(0, n_classes, n_nodes - entity_class.size)])
    latents = centers[entity_class] + 0.12 * rng.normal(size=(n_nodes, latent_dim))

    orders = []
    graphs = []
    for m in range(n_modalities):
        mix = rng.normal(size=(latent_dim, dims[m])) / np.sqrt(latent_dim)
        noise_draw = noise * rng.normal(size=(n_nodes, dims[m]))
        if n_classes >= 2:
            pair = m % (n_classes // 2) if n_classes >= 4 else 0
            a, b = 2 * pair, 2 * pair + 1
            u = np.zeros(latent_dim)
            u[a], u[b] = 1.0 / np.sqrt(2.0), -1.0 / np.sqrt(2.0)
            # shrink the pair-separating direction and point extra noise
            # along it (anisotropic Gaussian): separable at zero noise,
            # drowned at moderate noise
            mix = mix - 0.9 * np.outer(u, u @ mix)
            v = u @ mix
            v_norm = np.linalg.norm(v)
            if v_norm > 0:
                noise_draw = noise_draw + (
                    3.0 * noise * rng.normal(size=(n_nodes, 1)) * (v / v_norm))
        feats = latents @ mix + noise_draw
        order = rng.permutation(n_nodes)  # position -> entity id
        orders.append(order)
        feats = feats[order]
        labels = entity_class[order].astype(np.int64)
        graphs.append(make_graph(knn_graph(feats, k), feats, labels))

    correspondence: dict[tuple[int, int], np.ndarray] = {}
    for m in range(n_modalities):
        inv_e = {}
        for e in range(n_modalities):
            if m == e:
                continue
            if e not in inv_e:
                inv = np.empty(n_nodes, dtype=np.int64)
                inv[orders[e]] = np.arange(n_nodes)
                inv_e[e] = inv
            # node i of m is entity orders[m][i], sitting at position
            # inv_e[orders[m][i]] in modality e
            correspondence[(m, e)] = inv_e[e][orders[m]]
    bundle = DatasetBundle(modalities=graphs, correspondence=correspondence,
                           name=f"synth{n_modalities}")
    bundle.validate()
    return bundle


def correspondence_matrix(bundle: DatasetBundle, m: int, e: int) -> np.ndarray:
    """Dense 0/1 permutation matrix for the (m, e) ground truth."""
    cols = bundle.correspondence[(m, e)]
    n_m = bundle.modalities[m].n_nodes
    n_e = bundle.modalities[e].n_nodes
    p = np.zeros((n_m, n_e))
    p[np.arange(n_m), cols] = 1.0
    return p


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_modality(g: ModalityGraph, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    coo = g.adjacency.to_scipy().tocoo()
    with open(os.path.join(directory, EDGES_FILE), "w", encoding="utf-8") as fh:
        for u, v, w in zip(coo.row, coo.col, coo.data):
            if u < v:  # one line per undirected edge
                fh.write(f"{u} {v} {_fmt(w)}\n")
    with open(os.path.join(directory, FEATURES_FILE), "w", encoding="utf-8") as fh:
        fh.write(f"{g.n_nodes} {g.features.shape[1]}\n")
        for row in g.features:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
    with open(os.path.join(directory, LABELS_FILE), "w", encoding="utf-8") as fh:
        for i, lab in enumerate(g.labels):
            fh.write(f"{i} {int(lab)}\n")


def save_bundle(bundle: DatasetBundle, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    for m, g in enumerate(bundle.modalities):
        save_modality(g, os.path.join(directory, f"modality_{m}"))
    for (m, e), cols in sorted(bundle.correspondence.items()):
        path = os.path.join(directory, f"correspondence_{m}_{e}.txt")
        with open(path, "w", encoding="utf-8") as fh:
            for i, j in enumerate(cols):
                fh.write(f"{i} {int(j)}\n")


def load_modality_dir(directory: str, row_normalize: bool = False) -> ModalityGraph:
    return load_explicit_graph(
        os.path.join(directory, EDGES_FILE),
        os.path.join(directory, FEATURES_FILE),
        os.path.join(directory, LABELS_FILE),
        row_normalize=row_normalize,
    )


def load_bundle(directory: str, row_normalize: bool = False) -> DatasetBundle:
    """Load a bundle directory, or wrap a bare single-modality directory."""
    sub = sorted(
        d for d in os.listdir(directory)
        if d.startswith("modality_") and os.path.isdir(os.path.join(directory, d)))
    if not sub:
        if os.path.exists(os.path.join(directory, FEATURES_FILE)):
            g = load_modality_dir(directory, row_normalize)
            return DatasetBundle(modalities=[g], correspondence={},
                                 name=os.path.basename(directory.rstrip(os.sep)))
        raise DataError(f"{directory}: no modality_* subdirectories and no "
                        f"{FEATURES_FILE}")
    try:
        indices = sorted(int(d.split("_", 1)[1]) for d in sub)
    except ValueError as exc:
        raise DataError(f"{directory}: bad modality directory name") from exc
    graphs = [load_modality_dir(os.path.join(directory, f"modality_{m}"),
                                row_normalize) for m in indices]
    correspondence = {}
    for m in indices:
        for e in indices:
            path = os.path.join(directory, f"correspondence_{m}_{e}.txt")
            if m != e and os.path.exists(path):
                cols = np.full(graphs[m].n_nodes, -1, dtype=np.int64)
                for lineno, text in _data_lines(path):
                    parts = text.split()
                    if len(parts) != 2:
                        raise ParseError(f"{path}:{lineno}: expected 'i j'")
                    i, j = int(parts[0]), int(parts[1])
                    if not (0 <= i < graphs[m].n_nodes
                            and 0 <= j < graphs[e].n_nodes):
                        raise ParseError(f"{path}:{lineno}: index out of range")
                    cols[i] = j
                if np.any(cols < 0):
                    raise ParseError(f"{path}: incomplete correspondence")
                correspondence[(m, e)] = cols
    bundle = DatasetBundle(modalities=graphs, correspondence=correspondence,
                           name=os.path.basename(directory.rstrip(os.sep)))
    bundle.validate()
    return bundle
