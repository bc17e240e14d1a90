"""Per-position information gain between residues and the class label.

For every alignment column p, IG_p = H(class) - H(class | residue at p),
with base-2 entropies, so a constant column scores 0 and a column that
determines the class scores the full class entropy. Corpora must be
positionally aligned (equal lengths); an optional seeded subsample caps
the counting cost on large corpora.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidResidue, IoFailure, NotNormalized, RaggedLengths, SingleClass
from .features import ALPHABET_SIZE, _CODE
from .ingest import LabeledSequence, label_for_level


def entropy(dist) -> float:
    """Base-2 entropy of a probability vector; 0*log(0) is 0."""
    p = np.asarray(dist, dtype=np.float64)
    if p.size and (p.min() < 0 or abs(p.sum() - 1.0) > 1e-9):
        raise NotNormalized(f"probabilities must be >= 0 and sum to 1, got sum {p.sum()!r}")
    return _entropy_from_counts(p)


def _entropy_from_counts(counts: np.ndarray) -> float:
    """Entropy of counts (or probabilities) after normalizing by their sum."""
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


@dataclass
class IgTable:
    """Information gain per position (1-based externally), in bits."""

    ig_bits: np.ndarray  # (L,)
    sequence_length: int
    class_entropy: float

    def rows(self) -> list[tuple[int, float]]:
        return [(p + 1, float(v)) for p, v in enumerate(self.ig_bits)]


def position_histograms(
    data: list[LabeledSequence], class_level: str = "country"
) -> tuple[np.ndarray, list[str]]:
    """Joint counts (L, 21, C) of residue-at-position by class."""
    if not data:
        raise SingleClass("information gain needs a non-empty corpus")
    L = len(data[0].record.residues)
    ragged = [item.record.id for item in data if len(item.record.residues) != L]
    if ragged:
        shown = ", ".join(ragged[:5])
        raise RaggedLengths(
            f"{len(ragged)} sequences differ from length {L} (e.g. {shown}); align the corpus first"
        )
    names = [label_for_level(item.label, class_level) for item in data]
    class_names = sorted(set(names))
    if len(class_names) < 2:
        raise SingleClass("information gain needs at least two distinct classes")
    name_to_id = {name: i for i, name in enumerate(class_names)}
    y = np.array([name_to_id[name] for name in names], dtype=np.int64)
    C = len(class_names)

    blob = "".join(item.record.residues for item in data).encode("ascii", errors="replace")
    codes = _CODE[np.frombuffer(blob, dtype=np.uint8)].reshape(len(data), L).astype(np.int64)
    if codes.max() >= ALPHABET_SIZE:
        bad_row = int(np.argmax((codes >= ALPHABET_SIZE).any(axis=1)))
        bad_pos = int(np.argmax(codes[bad_row] >= ALPHABET_SIZE))
        raise InvalidResidue(
            data[bad_row].record.id, bad_pos + 1, data[bad_row].record.residues[bad_pos]
        )

    hist = np.zeros((L, ALPHABET_SIZE, C), dtype=np.int64)
    for p in range(L):
        joint = np.bincount(codes[:, p] * C + y, minlength=ALPHABET_SIZE * C)
        hist[p] = joint.reshape(ALPHABET_SIZE, C)
    return hist, class_names


def information_gain(data: list[LabeledSequence], class_level: str = "country") -> IgTable:
    """IG per position over an aligned corpus; values lie in [0, H(class)]."""
    hist, class_names = position_histograms(data, class_level)
    L = hist.shape[0]
    n = len(data)
    class_counts = hist[0].sum(axis=0)
    h_class = _entropy_from_counts(class_counts)

    ig = np.empty(L)
    for p in range(L):
        conditional = 0.0
        for s in range(ALPHABET_SIZE):
            n_s = hist[p, s].sum()
            if n_s == 0:
                continue
            conditional += (n_s / n) * _entropy_from_counts(hist[p, s])
        ig[p] = h_class - conditional
    np.clip(ig, 0.0, h_class, out=ig)
    return IgTable(ig_bits=ig, sequence_length=L, class_entropy=h_class)


def subsample(data: list[LabeledSequence], size: int, seed: int) -> list[LabeledSequence]:
    """Uniform sample without replacement; the whole corpus if size exceeds it."""
    if size >= len(data):
        if size > len(data):
            warnings.warn(
                f"subsample size {size} exceeds corpus size {len(data)}; using the whole corpus",
                stacklevel=2,
            )
        return list(data)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(data), size=size, replace=False))
    return [data[i] for i in idx]


def export_ig(table: IgTable, path: str) -> None:
    """CSV with 1-based positions: ``position,information_gain``."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["position", "information_gain"])
            for position, value in table.rows():
                writer.writerow([position, f"{value:.10g}"])
    except OSError as exc:
        raise IoFailure(f"cannot write IG table {path!r}: {exc}") from exc


def read_ig_csv(path: str) -> list[tuple[int, float]]:
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != ["position", "information_gain"]:
                raise IoFailure(f"{path!r} is not an IG table")
            return [(int(row[0]), float(row[1])) for row in reader]
    except OSError as exc:
        raise IoFailure(f"cannot read IG table {path!r}: {exc}") from exc


def export_histograms(path: str, hist: np.ndarray, class_names: list[str]) -> None:
    """JSON with per-position per-symbol class counts, for plotting."""
    from .features import ALPHABET

    payload = {
        "format": "seqclass-ig-hist/1",
        "class_names": class_names,
        "alphabet": ALPHABET,
        "positions": [
            {
                "position": p + 1,
                "symbol_class_counts": {
                    ALPHABET[s]: hist[p, s].tolist()
                    for s in range(hist.shape[1])
                    if hist[p, s].sum() > 0
                },
            }
            for p in range(hist.shape[0])
        ],
    }
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write histograms {path!r}: {exc}") from exc
