"""FASTA parsing, metadata joining, validation and train/test splitting.

Sequences are amino-acid strings over the 21-letter alphabet
``ACDEFGHIKLMNPQRSTVWXY``; a single trailing ``*`` (stop) is tolerated
by the parser and stripped when a corpus is assembled, so everything
downstream sees stop-free sequences.

Metadata is a tab-separated table ``id<TAB>continent<TAB>country<TAB>state``
(header row required, ``state`` may be empty).
"""

from __future__ import annotations

import struct
import sys
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    ClassTooSmall,
    DuplicateMetadataKey,
    EmptyJoin,
    InvalidConfig,
    InvalidResidue,
    IoFailure,
    MalformedFasta,
)

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWXY"
STOP_CHAR = "*"

_VALID = frozenset(AMINO_ACIDS)

CLASS_LEVELS = ("continent", "country", "state")


@dataclass(frozen=True)
class SequenceRecord:
    """One FASTA record: accession id plus residue string."""

    id: str
    residues: str


@dataclass(frozen=True)
class LabelHierarchy:
    continent: str
    country: str
    state: str | None = None


@dataclass(frozen=True)
class LabeledSequence:
    record: SequenceRecord
    label: LabelHierarchy


@dataclass(frozen=True)
class SplitSpec:
    """Train/test split parameters. ``train_fraction`` defaults to 0.10."""

    train_fraction: float = 0.10
    seed: int = 0
    stratified: bool = True


def validate_residues(seq_id: str, residues: str) -> None:
    """Raise InvalidResidue unless every character is in the alphabet.

    One trailing ``*`` is allowed; positions are reported 1-based.
    """
    body = residues
    if body.endswith(STOP_CHAR):
        body = body[:-1]
    for pos, ch in enumerate(body, start=1):
        if ch not in _VALID:
            raise InvalidResidue(seq_id, pos, ch)


def parse_fasta(stream: Iterable[str]) -> list[SequenceRecord]:
    """Parse FASTA text into validated records, preserving input order.

    Sequence lines may be wrapped; surrounding whitespace is ignored.
    Raises MalformedFasta for sequence data before the first header,
    empty headers/bodies or duplicate ids, and InvalidResidue for
    characters outside the alphabet (plus optional trailing stop).
    """
    records: list[SequenceRecord] = []
    seen: set[str] = set()
    header: str | None = None
    chunks: list[str] = []

    def flush() -> None:
        nonlocal header, chunks
        if header is None:
            return
        body = "".join(chunks)
        if not body:
            raise MalformedFasta(f"record {header!r} has an empty sequence body")
        validate_residues(header, body)
        if header in seen:
            raise MalformedFasta(f"duplicate sequence id {header!r}")
        seen.add(header)
        records.append(SequenceRecord(id=header, residues=body))
        header, chunks = None, []

    for raw in stream:
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            header = line[1:].strip()
            if not header:
                raise MalformedFasta("empty FASTA header")
        else:
            if header is None:
                raise MalformedFasta("sequence data before first '>' header")
            chunks.append(line)
    flush()
    return records


def write_fasta(records: Iterable[SequenceRecord], handle: IO[str]) -> None:
    for rec in records:
        handle.write(f">{rec.id}\n{rec.residues}\n")


def strip_stop(record: SequenceRecord) -> SequenceRecord:
    """Drop the single trailing stop character, if present."""
    if record.residues.endswith(STOP_CHAR):
        return SequenceRecord(record.id, record.residues[:-1])
    return record


def read_metadata_tsv(stream: Iterable[str]) -> dict[str, LabelHierarchy]:
    """Read ``id<TAB>continent<TAB>country<TAB>state`` rows keyed by id."""
    table: dict[str, LabelHierarchy] = {}
    rows = iter(stream)
    header = next(rows, None)
    if header is None:
        return table
    for lineno, raw in enumerate(rows, start=2):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            raise IoFailure(f"metadata line {lineno}: expected at least 3 tab-separated fields")
        seq_id, continent, country = parts[0], parts[1], parts[2]
        state = parts[3] if len(parts) > 3 and parts[3] != "" else None
        if seq_id in table:
            raise DuplicateMetadataKey(f"duplicate metadata key {seq_id!r} (line {lineno})")
        table[seq_id] = LabelHierarchy(continent=continent, country=country, state=state)
    return table


def join_metadata(
    records: Iterable[SequenceRecord],
    metadata: dict[str, LabelHierarchy],
    report: IO[str] | None = None,
) -> list[LabeledSequence]:
    """Inner-join records with metadata by id; stops are stripped here.

    Records without a metadata row are dropped; a summary count goes to
    ``report`` (stderr by default). Raises EmptyJoin when nothing matches.
    """
    if report is None:
        report = sys.stderr
    joined: list[LabeledSequence] = []
    dropped = 0
    for rec in records:
        label = metadata.get(rec.id)
        if label is None:
            dropped += 1
            continue
        joined.append(LabeledSequence(record=strip_stop(rec), label=label))
    if not joined:
        raise EmptyJoin("no sequence ids matched the metadata table")
    print(f"joined {len(joined)} sequences, {dropped} dropped (no metadata)", file=report)
    return joined


def label_for_level(label: LabelHierarchy, class_level: str) -> str:
    if class_level == "continent":
        return label.continent
    if class_level == "country":
        return label.country
    if class_level == "state":
        if label.state is None:
            raise InvalidConfig("class level 'state' requested but a label has no state")
        return label.state
    raise InvalidConfig(f"unknown class level {class_level!r} (expected one of {CLASS_LEVELS})")


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _largest_remainder(total: int, counts: np.ndarray) -> np.ndarray:
    """Apportion ``total`` across groups proportionally to ``counts``."""
    n = counts.sum()
    quotas = total * counts / n
    base = np.floor(quotas).astype(int)
    short = total - base.sum()
    if short > 0:
        remainders = quotas - base
        # largest remainder first, class index as the tie-break
        order = np.lexsort((np.arange(len(counts)), -remainders))
        base[order[:short]] += 1
    return base


def split_indices(
    n: int,
    spec: SplitSpec,
    class_labels: Sequence[str] | np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Index-level split; |train| = round(train_fraction * n), half up.

    ``class_labels`` (one per item) is required for stratified mode and
    drives largest-remainder apportionment of the train budget across
    classes, so per-class proportions hold within rounding. Both outputs
    are sorted, disjoint and exhaustive.
    """
    if n < 1:
        raise EmptyJoin("cannot split an empty corpus")
    if not 0.0 < spec.train_fraction < 1.0:
        raise InvalidConfig(f"train_fraction must be in (0,1), got {spec.train_fraction}")
    n_train = _round_half_up(spec.train_fraction * n)
    rng = np.random.default_rng(spec.seed)

    if not spec.stratified:
        perm = rng.permutation(n)
        train_idx = np.sort(perm[:n_train])
    else:
        if class_labels is None or len(class_labels) != n:
            raise InvalidConfig("stratified split needs one class label per item")
        class_names = sorted(set(class_labels))
        members: dict[str, list[int]] = {name: [] for name in class_names}
        for i, name in enumerate(class_labels):
            members[name].append(i)
        for name in class_names:
            if len(members[name]) == 1:
                raise ClassTooSmall(
                    f"class {name!r} has a single member; stratified split needs >= 2"
                )
        counts = np.array([len(members[name]) for name in class_names])
        takes = _largest_remainder(n_train, counts)
        picked: list[int] = []
        for name, take in zip(class_names, takes):
            idx = np.array(members[name])
            perm = rng.permutation(len(idx))
            picked.extend(idx[perm[:take]].tolist())
        train_idx = np.sort(np.array(picked, dtype=np.int64))

    in_train = np.zeros(n, dtype=bool)
    in_train[train_idx] = True
    test_idx = np.flatnonzero(~in_train)
    return train_idx.astype(np.int64), test_idx.astype(np.int64)


def split_train_test(
    data: list[LabeledSequence],
    spec: SplitSpec,
    class_level: str = "country",
) -> tuple[list[LabeledSequence], list[LabeledSequence]]:
    """Deterministic train/test split of a labeled corpus.

    Stratified mode (the default) preserves per-class proportions within
    rounding and rejects classes with a single member (ClassTooSmall).
    Outputs keep corpus order.
    """
    labels = None
    if spec.stratified:
        labels = [label_for_level(item.label, class_level) for item in data] if data else []
    train_idx, test_idx = split_indices(len(data), spec, labels)
    train = [data[i] for i in train_idx]
    test = [data[i] for i in test_idx]
    return train, test


# --- corpus container -------------------------------------------------------
#
# Binary layout: magic "SQCR1", u8 format version, u64 record count, then per
# record five length-prefixed UTF-8 fields (id, continent, country, state,
# residues); an absent state is encoded with length 0xFFFFFFFF.

_CORPUS_MAGIC = b"SQCR1"
_ABSENT = 0xFFFFFFFF


def _write_str(handle: IO[bytes], value: str | None) -> None:
    if value is None:
        handle.write(struct.pack("<I", _ABSENT))
        return
    raw = value.encode("utf-8")
    handle.write(struct.pack("<I", len(raw)))
    handle.write(raw)


def _read_str(handle: IO[bytes]) -> str | None:
    (length,) = struct.unpack("<I", handle.read(4))
    if length == _ABSENT:
        return None
    return handle.read(length).decode("utf-8")


def save_corpus(path: str, data: list[LabeledSequence]) -> None:
    try:
        with open(path, "wb") as f:
            f.write(_CORPUS_MAGIC)
            f.write(struct.pack("<BQ", 1, len(data)))
            for item in data:
                _write_str(f, item.record.id)
                _write_str(f, item.label.continent)
                _write_str(f, item.label.country)
                _write_str(f, item.label.state)
                _write_str(f, item.record.residues)
    except OSError as exc:
        raise IoFailure(f"cannot write corpus {path!r}: {exc}") from exc


def load_corpus(path: str) -> list[LabeledSequence]:
    try:
        with open(path, "rb") as f:
            magic = f.read(5)
            if magic != _CORPUS_MAGIC:
                raise IoFailure(f"{path!r} is not a corpus file (bad magic)")
            version, count = struct.unpack("<BQ", f.read(9))
            if version != 1:
                raise IoFailure(f"unsupported corpus version {version}")
            data = []
            for _ in range(count):
                seq_id = _read_str(f)
                continent = _read_str(f)
                country = _read_str(f)
                state = _read_str(f)
                residues = _read_str(f)
                data.append(
                    LabeledSequence(
                        record=SequenceRecord(id=seq_id, residues=residues),
                        label=LabelHierarchy(continent=continent, country=country, state=state),
                    )
                )
            return data
    except OSError as exc:
        raise IoFailure(f"cannot read corpus {path!r}: {exc}") from exc


def iter_residues(data: Iterable[LabeledSequence]) -> Iterator[str]:
    for item in data:
        yield item.record.residues
