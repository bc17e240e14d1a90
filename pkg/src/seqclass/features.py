"""k-mer count vectors and per-position one-hot encodings.

A k-mer (contiguous substring of length k) is mapped to a column index
by base-21 positional encoding over the fixed residue alphabet, leftmost
character most significant, so a sequence of length N yields N - k + 1
k-mers in a vector of dimension 21**k. One-hot encoding expands a
length-L sequence into 21*L indicator columns (column 21*p + code of the
residue at position p).

Matrices are scipy CSR; extraction is vectorized over chunks of
sequences and can fan out over worker processes (order preserving).

Feature container format ("SQFV1"): the 5 magic bytes, u8 encoding tag
(0 = kmers, 1 = ohe, 2 = rff), u64 dim, u64 rows, u64 nnz, then the CSR
triplet of arrays: indptr int64[rows+1], indices int32[nnz],
data float64[nnz]. All integers little-endian. Labels and class names
travel in a JSON sidecar.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    DataError,
    EmptyCorpus,
    InvalidConfig,
    InvalidResidue,
    IoFailure,
    LengthMismatch,
    SequenceTooShort,
)
from .ingest import AMINO_ACIDS, LabeledSequence, label_for_level

ALPHABET = AMINO_ACIDS
ALPHABET_SIZE = len(ALPHABET)  # 21

MAX_K = 6  # 21**7 would exceed 1.8e9 columns

_CODE = np.full(256, 255, dtype=np.uint8)
for _i, _ch in enumerate(ALPHABET):
    _CODE[ord(_ch)] = _i

ENCODING_KMERS = "kmers"
ENCODING_OHE = "ohe"
ENCODING_RFF = "rff"

_ENCODING_TAGS = {ENCODING_KMERS: 0, ENCODING_OHE: 1, ENCODING_RFF: 2}
_TAG_ENCODINGS = {v: k for k, v in _ENCODING_TAGS.items()}


def symbol_index(ch: str) -> int:
    code = _CODE[ord(ch)] if len(ch) == 1 and ord(ch) < 256 else 255
    if code == 255:
        raise InvalidResidue("<symbol>", 1, ch)
    return int(code)


def kmer_dim(k: int) -> int:
    if not 1 <= k <= MAX_K:
        raise InvalidConfig(f"k must be in [1, {MAX_K}], got {k}")
    return ALPHABET_SIZE**k


def kmer_index(kmer: str) -> int:
    """Base-21 index of a k-mer, leftmost character most significant."""
    idx = 0
    for pos, ch in enumerate(kmer, start=1):
        code = _CODE[ord(ch)] if ord(ch) < 256 else 255
        if code == 255:
            raise InvalidResidue("<kmer>", pos, ch)
        idx = idx * ALPHABET_SIZE + int(code)
    return idx


def kmer_from_index(idx: int, k: int) -> str:
    """Inverse of kmer_index."""
    chars = []
    for _ in range(k):
        idx, rem = divmod(idx, ALPHABET_SIZE)
        chars.append(ALPHABET[rem])
    return "".join(reversed(chars))


def kmer_counts(seq: str, k: int = 3) -> dict[str, int]:
    """Counts of every length-k substring, keyed by the substring itself."""
    row = kmer_vector(seq, k)
    return {
        kmer_from_index(int(col), k): int(val)
        for col, val in zip(row.indices, row.data)
    }


class _ChunkFeatureError(DataError):
    """Internal: carries a chunk-relative row so callers can attach the id."""

    def __init__(self, row: int, kind: str, position: int = 0, char: str = ""):
        self.row = row
        self.kind = kind  # "invalid" | "short" | "length"
        self.position = position
        self.char = char
        super().__init__(f"feature error {kind} at chunk row {row}")

    def __reduce__(self):  # keep picklable across worker processes
        return (_ChunkFeatureError, (self.row, self.kind, self.position, self.char))


def _encode_chunk(seqs: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Residue codes for a chunk, concatenated, plus per-sequence lengths."""
    blob = "".join(seqs).encode("ascii", errors="replace")
    codes = _CODE[np.frombuffer(blob, dtype=np.uint8)]
    lengths = np.fromiter((len(s) for s in seqs), dtype=np.int64, count=len(seqs))
    if np.any(codes == 255):
        flat = int(np.argmax(codes == 255))
        bounds = np.cumsum(lengths)
        row = int(np.searchsorted(bounds, flat, side="right"))
        offset = flat - (bounds[row - 1] if row else 0)
        raise _ChunkFeatureError(row, "invalid", int(offset) + 1, seqs[row][offset])
    return codes, lengths


def _kmer_csr_chunk(seqs: Sequence[str], k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR triplet (indptr, indices, data) of k-mer counts for a chunk."""
    dim = ALPHABET_SIZE**k
    codes, lengths = _encode_chunk(seqs)
    if np.any(lengths < k):
        raise _ChunkFeatureError(int(np.argmax(lengths < k)), "short")
    offsets = np.concatenate(([0], np.cumsum(lengths)))
    codes = codes.astype(np.int64)
    n_windows = len(codes) - k + 1
    idx = np.zeros(n_windows, dtype=np.int64)
    for j in range(k):
        idx = idx * ALPHABET_SIZE + codes[j : n_windows + j]
    # windows that straddle a sequence boundary are not k-mers
    valid = np.ones(n_windows, dtype=bool)
    for boundary in offsets[1:-1]:
        valid[boundary - k + 1 : boundary] = False
    idx = idx[valid]
    per_row = lengths - k + 1
    rows = np.repeat(np.arange(len(seqs), dtype=np.int64), per_row)
    counts = np.bincount(rows * dim + idx, minlength=len(seqs) * dim)
    flat_nz = np.flatnonzero(counts)
    data = counts[flat_nz].astype(np.int32)
    indices = (flat_nz % dim).astype(np.int32)
    indptr = np.searchsorted(flat_nz // dim, np.arange(len(seqs) + 1)).astype(np.int64)
    return indptr, indices, data


def _ohe_csr_chunk(seqs: Sequence[str], expected_len: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR triplet of one-hot indicators; every sequence must have expected_len."""
    codes, lengths = _encode_chunk(seqs)
    if np.any(lengths != expected_len):
        raise _ChunkFeatureError(int(np.argmax(lengths != expected_len)), "length")
    n = len(seqs)
    positions = np.tile(np.arange(expected_len, dtype=np.int64), n)
    indices = (positions * ALPHABET_SIZE + codes.astype(np.int64)).astype(np.int32)
    data = np.ones(n * expected_len, dtype=np.int8)
    indptr = np.arange(0, n * expected_len + 1, expected_len, dtype=np.int64)
    return indptr, indices, data


def _kmer_worker(args: tuple[Sequence[str], int]):
    return _kmer_csr_chunk(*args)


def _ohe_worker(args: tuple[Sequence[str], int]):
    return _ohe_csr_chunk(*args)


def _assemble(chunks, dim: int, n_rows: int) -> sp.csr_matrix:
    indptrs, indices, datas = zip(*chunks)
    nnz_offsets = np.cumsum([0] + [len(ix) for ix in indices])
    indptr = np.concatenate(
        [ip[:-1] + off for ip, off in zip(indptrs, nnz_offsets)]
        + [np.array([nnz_offsets[-1]], dtype=np.int64)]
    )
    return sp.csr_matrix(
        (np.concatenate(datas), np.concatenate(indices), indptr),
        shape=(n_rows, dim),
    )


def _run_chunked(worker, seqs: Sequence[str], extra, dim: int, workers: int,
                 ids: Sequence[str] | None, chunk_size: int = 512) -> sp.csr_matrix:
    chunks = [seqs[i : i + chunk_size] for i in range(0, len(seqs), chunk_size)]
    args = [(chunk, extra) for chunk in chunks]
    results = []
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for result in pool.map(worker, args):
                    results.append(result)
        else:
            for arg in args:
                results.append(worker(arg))
    except _ChunkFeatureError as exc:
        row = len(results) * chunk_size + exc.row
        seq_id = ids[row] if ids is not None else f"<row {row}>"
        if exc.kind == "invalid":
            raise InvalidResidue(seq_id, exc.position, exc.char) from None
        if exc.kind == "short":
            raise SequenceTooShort(
                f"sequence {seq_id!r} is shorter than k={extra} ({len(seqs[row])} residues)"
            ) from None
        raise LengthMismatch(
            f"sequence {seq_id!r} has length {len(seqs[row])}, expected {extra}"
        ) from None
    return _assemble(results, dim, len(seqs))


def kmer_matrix(
    seqs: Sequence[str],
    k: int = 3,
    workers: int = 1,
    ids: Sequence[str] | None = None,
) -> sp.csr_matrix:
    """n x 21**k sparse count matrix; row i sums to len(seqs[i]) - k + 1."""
    dim = kmer_dim(k)
    if not seqs:
        raise EmptyCorpus("no sequences to featurize")
    return _run_chunked(_kmer_worker, seqs, k, dim, workers, ids)


def ohe_matrix(
    seqs: Sequence[str],
    expected_len: int,
    workers: int = 1,
    ids: Sequence[str] | None = None,
) -> sp.csr_matrix:
    """n x 21*expected_len sparse 0/1 matrix with exactly expected_len ones per row."""
    if expected_len < 1:
        raise InvalidConfig(f"expected_len must be positive, got {expected_len}")
    if not seqs:
        raise EmptyCorpus("no sequences to featurize")
    return _run_chunked(_ohe_worker, seqs, expected_len, ALPHABET_SIZE * expected_len, workers, ids)


def kmer_vector(seq, k: int = 3) -> sp.csr_matrix:
    """1 x 21**k count vector for a single sequence (str or SequenceRecord)."""
    seq_id, residues = _seq_parts(seq)
    return kmer_matrix([residues], k=k, ids=[seq_id])


def ohe_vector(seq, expected_len: int) -> sp.csr_matrix:
    """1 x 21*expected_len indicator vector for a single sequence."""
    seq_id, residues = _seq_parts(seq)
    return ohe_matrix([residues], expected_len=expected_len, ids=[seq_id])


def _seq_parts(seq) -> tuple[str, str]:
    if hasattr(seq, "residues"):
        return seq.id, seq.residues
    return "<sequence>", seq


@dataclass
class FeaturizedCorpus:
    matrix: sp.csr_matrix
    labels: np.ndarray  # dense class ids, int64
    class_names: list[str]
    encoding: str
    dim: int


def featurize_corpus(
    data: list[LabeledSequence],
    mode: str,
    *,
    k: int = 3,
    expected_len: int | None = None,
    class_level: str = "country",
    workers: int = 1,
    l2_normalize: bool = False,
) -> FeaturizedCorpus:
    """Featurize a labeled corpus; class ids follow sorted class names.

    ``mode`` is "kmers" or "ohe". For one-hot, ``expected_len`` defaults
    to the first sequence's length and every sequence must match it.
    Row order matches the input order.
    """
    if not data:
        raise EmptyCorpus("cannot featurize an empty corpus")
    ids = [item.record.id for item in data]
    seqs = [item.record.residues for item in data]
    if mode == ENCODING_KMERS:
        matrix = kmer_matrix(seqs, k=k, workers=workers, ids=ids)
    elif mode == ENCODING_OHE:
        if expected_len is None:
            expected_len = len(seqs[0])
        matrix = ohe_matrix(seqs, expected_len=expected_len, workers=workers, ids=ids)
    else:
        raise InvalidConfig(f"unknown featurization mode {mode!r}")

    names = [label_for_level(item.label, class_level) for item in data]
    class_names = sorted(set(names))
    name_to_id = {name: i for i, name in enumerate(class_names)}
    labels = np.array([name_to_id[name] for name in names], dtype=np.int64)

    if l2_normalize:
        matrix = l2_normalize_rows(matrix)
    return FeaturizedCorpus(matrix, labels, class_names, mode, matrix.shape[1])


def l2_normalize_rows(matrix: sp.csr_matrix) -> sp.csr_matrix:
    out = matrix.astype(np.float64)
    norms = np.sqrt(np.asarray(out.multiply(out).sum(axis=1)).ravel())
    norms[norms == 0.0] = 1.0
    scale = sp.diags(1.0 / norms)
    return (scale @ out).tocsr()


# --- serialization ----------------------------------------------------------

_MAGIC = b"SQFV1"


def save_features(path: str, matrix: sp.csr_matrix | np.ndarray, encoding: str) -> None:
    """Write a feature matrix in the SQFV1 container."""
    if encoding not in _ENCODING_TAGS:
        raise InvalidConfig(f"unknown encoding {encoding!r}")
    csr = sp.csr_matrix(matrix)
    try:
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<BQQQ", _ENCODING_TAGS[encoding], csr.shape[1], csr.shape[0], csr.nnz))
            f.write(np.asarray(csr.indptr, dtype="<i8").tobytes())
            f.write(np.asarray(csr.indices, dtype="<i4").tobytes())
            f.write(np.asarray(csr.data, dtype="<f8").tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write features {path!r}: {exc}") from exc


def load_features(path: str) -> tuple[sp.csr_matrix, str]:
    try:
        with open(path, "rb") as f:
            if f.read(5) != _MAGIC:
                raise IoFailure(f"{path!r} is not an SQFV1 feature file")
            tag, dim, rows, nnz = struct.unpack("<BQQQ", f.read(25))
            indptr = np.frombuffer(f.read(8 * (rows + 1)), dtype="<i8")
            indices = np.frombuffer(f.read(4 * nnz), dtype="<i4")
            data = np.frombuffer(f.read(8 * nnz), dtype="<f8")
    except OSError as exc:
        raise IoFailure(f"cannot read features {path!r}: {exc}") from exc
    matrix = sp.csr_matrix((data.copy(), indices.copy(), indptr.copy()), shape=(rows, dim))
    return matrix, _TAG_ENCODINGS[tag]


def export_features_csv(handle: IO[str], matrix: sp.csr_matrix) -> None:
    """COO triplets (row, col, value) with a header, for interoperability."""
    coo = sp.coo_matrix(matrix)
    handle.write("row,col,value\n")
    for r, c, v in zip(coo.row, coo.col, coo.data):
        handle.write(f"{r},{c},{v:g}\n")


def save_labels(path: str, labels: np.ndarray, class_names: list[str], encoding: str, dim: int) -> None:
    payload = {
        "format": "seqclass-labels/1",
        "encoding": encoding,
        "dim": int(dim),
        "class_names": list(class_names),
        "labels": [int(x) for x in labels],
    }
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write labels {path!r}: {exc}") from exc


def load_labels(path: str) -> tuple[np.ndarray, list[str]]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except OSError as exc:
        raise IoFailure(f"cannot read labels {path!r}: {exc}") from exc
    return np.array(payload["labels"], dtype=np.int64), list(payload["class_names"])
