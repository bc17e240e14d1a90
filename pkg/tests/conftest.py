import numpy as np
import pytest

from seqclass.features import ALPHABET
from seqclass.ingest import LabeledSequence, LabelHierarchy, SequenceRecord

_LUT = np.frombuffer(ALPHABET.encode(), dtype=np.uint8)


def random_sequences(rng: np.random.Generator, n: int, length: int) -> list[str]:
    """Uniform random residue strings."""
    codes = rng.integers(0, len(ALPHABET), size=(n, length))
    return [bytes(_LUT[row]).decode("ascii") for row in codes]


def labeled_corpus(
    class_sizes: dict[str, int],
    length: int = 24,
    seed: int = 0,
    continent: str = "nowhere",
) -> list[LabeledSequence]:
    """Synthetic corpus with the given per-country class sizes.

    Sequences are random and carry no class signal; the label
    distribution is the only structure.
    """
    rng = np.random.default_rng(seed)
    data = []
    i = 0
    for country, size in class_sizes.items():
        for seq in random_sequences(rng, size, length):
            data.append(
                LabeledSequence(
                    record=SequenceRecord(id=f"s{i:06d}", residues=seq),
                    label=LabelHierarchy(continent=continent, country=country, state=country),
                )
            )
            i += 1
    return data


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
