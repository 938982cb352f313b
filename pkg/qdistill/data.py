"""
Corpus and Teacher Data

Loads labeled corpora, splits them 6:2:2, builds the training-split
vocabulary, tokenizes, and attaches frozen teacher distributions from a
file or from a seeded synthetic teacher. Also generates synthetic corpora
with a controlled degree of class separability.

Corpus file:  one JSON object per line {"id": str, "text": str, "label": int}
Teacher file: one JSON object per line {"id": str, "probs": [float, ...]}
"""

import hashlib
import json
import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ArgumentError, DataError, InputError

logger = logging.getLogger(__name__)

UNK_ID = 0
UNK_TOKEN = "<unk>"
SPLIT_RATIO = (0.6, 0.2, 0.2)
TEACHER_SUM_TOLERANCE = 1e-6

_WORD = re.compile(r"[^\W_]+")


def split_words(text: str) -> List[str]:
    """Lowercase and split on runs of non-alphanumeric characters"""
    return _WORD.findall(text.lower())


class Vocabulary:
    """Word -> id map built from the training split; id 0 is reserved for unknown words"""

    def __init__(self, words: Iterable[str]):
        self.words = sorted(set(words))
        self._ids = {word: i + 1 for i, word in enumerate(self.words)}

    @classmethod
    def build(cls, examples: Iterable["LabeledExample"]) -> "Vocabulary":
        words = set()
        for example in examples:
            words.update(split_words(example.text))
        return cls(words)

    def __len__(self) -> int:
        return len(self.words) + 1

    def id(self, word: str) -> int:
        return self._ids.get(word, UNK_ID)

    def encode(self, text: str) -> Tuple[int, ...]:
        tokens = tuple(self.id(word) for word in split_words(text))
        return tokens if tokens else (UNK_ID,)

    def to_list(self) -> List[str]:
        return list(self.words)


def build_vocabulary(train_examples: Iterable["LabeledExample"]) -> Vocabulary:
    return Vocabulary.build(train_examples)


def tokenize(text: str, vocabulary: Vocabulary) -> Tuple[int, ...]:
    return vocabulary.encode(text)


@dataclass(frozen=True, eq=False)
class LabeledExample:
    """One corpus record, optionally tokenized and carrying its teacher distribution"""

    id: str
    text: str
    label: int
    tokens: Tuple[int, ...] = ()
    teacher: Optional[np.ndarray] = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise DataError(f"Example id must be a non-empty string, got {self.id!r}")
        if isinstance(self.label, bool) or not isinstance(self.label, (int, np.integer)) or self.label < 0:
            raise DataError(f"Example '{self.id}' has invalid label {self.label!r}")
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if self.teacher is not None:
            teacher = np.array(self.teacher, dtype=np.float64)
            teacher.flags.writeable = False
            object.__setattr__(self, "teacher", teacher)

    def with_tokens(self, tokens: Sequence[int]) -> "LabeledExample":
        return replace(self, tokens=tuple(tokens))

    def with_teacher(self, teacher: np.ndarray) -> "LabeledExample":
        return replace(self, teacher=teacher)

    def record(self) -> dict:
        return {"id": self.id, "text": self.text, "label": self.label}


@dataclass(frozen=True)
class SplitCorpus:
    """Disjoint train / validation / test partition of one corpus"""

    train: Tuple[LabeledExample, ...]
    validation: Tuple[LabeledExample, ...]
    test: Tuple[LabeledExample, ...]
    seed: int
    vocabulary: Optional[Vocabulary] = None

    def splits(self) -> Dict[str, Tuple[LabeledExample, ...]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}

    def all_examples(self) -> List[LabeledExample]:
        return list(self.train) + list(self.validation) + list(self.test)

    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)

    def map(self, fn) -> "SplitCorpus":
        return replace(
            self,
            train=tuple(fn(e) for e in self.train),
            validation=tuple(fn(e) for e in self.validation),
            test=tuple(fn(e) for e in self.test),
        )


def split_sizes(n: int) -> Tuple[int, int, int]:
    """Largest-remainder 6:2:2 sizes; ties go to train, then validation, then test"""
    exact = [n * r for r in SPLIT_RATIO]
    sizes = [int(x) for x in exact]
    order = sorted(range(3), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes[0], sizes[1], sizes[2]


def _check_unique_ids(examples: Sequence[LabeledExample]):
    seen, duplicates = set(), []
    for example in examples:
        if example.id in seen:
            duplicates.append(example.id)
        seen.add(example.id)
    if duplicates:
        raise DataError(f"Duplicate example ids: {sorted(set(duplicates))[:20]}")


def split_corpus(examples: Sequence[LabeledExample], seed: int) -> SplitCorpus:
    """Seeded, class-stratified 6:2:2 split

    Each class is shuffled with its own permutation, the classes are
    interleaved round-robin, and the interleaved order is cut at the 6:2:2
    sizes, which keeps every class within one example of proportional in
    every split.
    """
    examples = list(examples)
    if len(examples) < 5:
        raise InputError(f"Need at least 5 examples to split 6:2:2, got {len(examples)}")
    _check_unique_ids(examples)

    rng = np.random.default_rng(seed)
    by_class: Dict[int, List[LabeledExample]] = {}
    for example in examples:
        by_class.setdefault(example.label, []).append(example)
    queues = []
    for label in sorted(by_class):
        members = by_class[label]
        queues.append([members[i] for i in rng.permutation(len(members))])

    interleaved = []
    depth = max(len(q) for q in queues)
    for position in range(depth):
        for queue in queues:
            if position < len(queue):
                interleaved.append(queue[position])

    n_train, n_val, _ = split_sizes(len(interleaved))
    return SplitCorpus(
        train=tuple(interleaved[:n_train]),
        validation=tuple(interleaved[n_train:n_train + n_val]),
        test=tuple(interleaved[n_train + n_val:]),
        seed=seed,
    )


def tokenize_corpus(corpus: SplitCorpus, vocabulary: Optional[Vocabulary] = None) -> SplitCorpus:
    """Tokenize every split with the training-split vocabulary"""
    if vocabulary is None:
        vocabulary = build_vocabulary(corpus.train)
    tokenized = corpus.map(lambda e: e.with_tokens(vocabulary.encode(e.text)))
    return replace(tokenized, vocabulary=vocabulary)


def prepare_corpus(examples: Sequence[LabeledExample], seed: int) -> SplitCorpus:
    corpus = tokenize_corpus(split_corpus(examples, seed))
    train, val, test = corpus.sizes()
    logger.info(f"  ✓ Split {train + val + test} examples into train/validation/test = {train}/{val}/{test}")
    logger.info(f"  ✓ Vocabulary: {len(corpus.vocabulary)} ids (including {UNK_TOKEN})")
    return corpus


# --------------------------------------------------------------------------
# Teacher providers
# --------------------------------------------------------------------------

class ProviderKind(str, Enum):
    FILE = "FILE"
    SYNTHETIC = "SYNTHETIC"


class TeacherProvider(ABC):
    """Read-only source of teacher class distributions

    `reads` counts every distribution handed out. Providers have no
    mutating API, so `writes` stays 0; it is reported for audits.
    """

    kind: ProviderKind

    def __init__(self):
        self.reads = 0
        self.writes = 0

    @abstractmethod
    def covers(self, example: LabeledExample) -> bool:
        """True when a distribution exists for this example"""

    @abstractmethod
    def _lookup(self, example: LabeledExample) -> np.ndarray:
        """Distribution for a covered example"""

    def distribution(self, example: LabeledExample) -> np.ndarray:
        if not self.covers(example):
            raise DataError(f"No teacher distribution for example '{example.id}'")
        self.reads += 1
        probs = np.array(self._lookup(example), dtype=np.float64)
        probs.flags.writeable = False
        return probs


class FileTeacherProvider(TeacherProvider):
    kind = ProviderKind.FILE

    def __init__(self, table: Mapping[str, Sequence[float]], source: Optional[str] = None):
        super().__init__()
        frozen = {}
        for key, probs in table.items():
            array = np.array(probs, dtype=np.float64)
            array.flags.writeable = False
            frozen[key] = array
        self._table = MappingProxyType(frozen)
        self.source = source

    @property
    def table(self) -> Mapping[str, np.ndarray]:
        return self._table

    def covers(self, example: LabeledExample) -> bool:
        return example.id in self._table

    def _lookup(self, example: LabeledExample) -> np.ndarray:
        return self._table[example.id]


def _stable_key(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


class SyntheticTeacherProvider(TeacherProvider):
    """Seeded noisy one-hot teacher

    With probability `accuracy` the teacher favours the true label, otherwise
    a uniformly chosen wrong class. `smoothing` of the mass is spread over
    all classes by a Dirichlet(1, ..., 1) draw.
    """

    kind = ProviderKind.SYNTHETIC

    def __init__(self, n_classes: int, accuracy: float = 0.95, smoothing: float = 0.1, seed: int = 0):
        super().__init__()
        if n_classes < 2:
            raise ArgumentError(f"Synthetic teacher needs at least 2 classes, got {n_classes}")
        if not 0.0 <= accuracy <= 1.0:
            raise ArgumentError(f"Teacher accuracy must lie in [0, 1], got {accuracy}")
        if not 0.0 <= smoothing <= 1.0:
            raise ArgumentError(f"Teacher smoothing must lie in [0, 1], got {smoothing}")
        self.n_classes = n_classes
        self.accuracy = accuracy
        self.smoothing = smoothing
        self.seed = seed

    def covers(self, example: LabeledExample) -> bool:
        return example.label < self.n_classes

    def _lookup(self, example: LabeledExample) -> np.ndarray:
        rng = np.random.default_rng([self.seed, _stable_key(example.id)])
        favoured = example.label
        if rng.random() >= self.accuracy:
            others = [c for c in range(self.n_classes) if c != example.label]
            favoured = others[int(rng.integers(len(others)))]
        probs = np.zeros(self.n_classes)
        probs[favoured] = 1.0 - self.smoothing
        if self.smoothing > 0:
            probs += self.smoothing * rng.dirichlet(np.ones(self.n_classes))
        return probs / probs.sum()


def _checked_teacher(example: LabeledExample, probs: np.ndarray, n_classes: int) -> np.ndarray:
    if probs.shape != (n_classes,):
        raise DataError(f"Teacher distribution for '{example.id}' has {probs.size} entries, expected {n_classes}")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0):
        raise DataError(f"Teacher distribution for '{example.id}' has negative or non-finite entries")
    total = float(probs.sum())
    # 1e-12 absorbs rounding of sums that sit exactly on the tolerance
    if abs(total - 1.0) > TEACHER_SUM_TOLERANCE + 1e-12:
        raise DataError(
            f"Teacher distribution for '{example.id}' sums to {total:.9f} "
            f"(tolerance {TEACHER_SUM_TOLERANCE})"
        )
    if total == 1.0:
        return probs
    return probs / total


def attach_teacher(corpus: SplitCorpus, provider: TeacherProvider, n_classes: int) -> SplitCorpus:
    """Return a corpus whose examples all carry a teacher distribution"""
    examples = corpus.all_examples()
    for example in examples:
        if example.label >= n_classes:
            raise DataError(f"Example '{example.id}' has label {example.label} but only {n_classes} classes")
    missing = [e.id for e in examples if not provider.covers(e)]
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise DataError(f"Teacher provider is missing {len(missing)} example id(s): {shown}")

    def attach(example: LabeledExample) -> LabeledExample:
        probs = provider.distribution(example)
        return example.with_teacher(_checked_teacher(example, probs, n_classes))

    attached = corpus.map(attach)
    logger.info(f"  ✓ Attached {provider.kind.value.lower()} teacher distributions to {len(examples)} examples")
    return attached


def check_teacher_attached(examples: Sequence[LabeledExample]):
    missing = [e.id for e in examples if e.teacher is None]
    if missing:
        raise DataError(f"Teacher distributions missing for {len(missing)} training example(s): {missing[:20]}")


# --------------------------------------------------------------------------
# Files
# --------------------------------------------------------------------------

def _read_jsonl(path, what: str) -> List[Tuple[int, dict]]:
    path = Path(path)
    try:
        handle = open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"{what} file not found: {path}")
    rows = []
    with handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{line_no}: invalid JSON ({e.msg})")
            if not isinstance(row, dict):
                raise DataError(f"{path}:{line_no}: expected an object, got {type(row).__name__}")
            rows.append((line_no, row))
    return rows


def read_corpus(path) -> List[LabeledExample]:
    examples = []
    for line_no, row in _read_jsonl(path, "Corpus"):
        missing = [k for k in ("id", "text", "label") if k not in row]
        if missing:
            raise DataError(f"{path}:{line_no}: missing field(s) {missing}")
        if not isinstance(row["text"], str):
            raise DataError(f"{path}:{line_no}: text must be a string")
        try:
            examples.append(LabeledExample(id=row["id"], text=row["text"], label=row["label"]))
        except DataError as e:
            raise DataError(f"{path}:{line_no}: {e}")
    _check_unique_ids(examples)
    logger.info(f"  ✓ Loaded {len(examples)} examples from {path}")
    return examples


def write_corpus(examples: Iterable[LabeledExample], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for example in examples:
            f.write(json.dumps(example.record(), ensure_ascii=False) + "\n")
    return path


def read_teacher_file(path) -> FileTeacherProvider:
    table: Dict[str, List[float]] = {}
    for line_no, row in _read_jsonl(path, "Teacher"):
        if "id" not in row or "probs" not in row:
            raise DataError(f"{path}:{line_no}: teacher rows need 'id' and 'probs'")
        if row["id"] in table:
            raise DataError(f"{path}:{line_no}: duplicate teacher id '{row['id']}'")
        probs = row["probs"]
        if not isinstance(probs, list) or not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs):
            raise DataError(f"{path}:{line_no}: probs must be an array of numbers")
        table[row["id"]] = probs
    logger.info(f"  ✓ Loaded {len(table)} teacher distributions from {path}")
    return FileTeacherProvider(table, source=str(path))


def write_teacher_file(provider: TeacherProvider, examples: Iterable[LabeledExample], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for example in examples:
            probs = provider.distribution(example)
            f.write(json.dumps({"id": example.id, "probs": [float(p) for p in probs]}) + "\n")
    return path


# --------------------------------------------------------------------------
# Synthetic corpora
# --------------------------------------------------------------------------

def class_word(label: int, index: int) -> str:
    return f"c{label}w{index:02d}"


def shared_word(index: int) -> str:
    return f"sh{index:02d}"


def make_synthetic_corpus(n_examples: int, n_classes: int, seed: int, overlap: float = 0.0,
                          words_per_class: int = 12, shared_words: int = 12,
                          min_length: int = 6, max_length: int = 14) -> List[LabeledExample]:
    """Class-balanced corpus; each token comes from the shared pool with probability `overlap`

    With overlap 0 every token belongs to its class's own vocabulary block,
    so unigram counts separate the classes perfectly.
    """
    if n_classes < 2:
        raise ArgumentError(f"Need at least 2 classes, got {n_classes}")
    if n_examples < n_classes:
        raise InputError(f"Need at least one example per class: {n_examples} examples for {n_classes} classes")
    if not 0.0 <= overlap <= 1.0:
        raise ArgumentError(f"overlap must lie in [0, 1], got {overlap}")
    if not 1 <= min_length <= max_length:
        raise ArgumentError(f"Invalid sentence length range [{min_length}, {max_length}]")

    rng = np.random.default_rng(seed)
    base, extra = divmod(n_examples, n_classes)
    labels = np.concatenate([np.full(base + (1 if c < extra else 0), c) for c in range(n_classes)])
    labels = labels[rng.permutation(labels.size)]

    examples = []
    for i, label in enumerate(labels):
        length = int(rng.integers(min_length, max_length + 1))
        words = []
        for _ in range(length):
            if rng.random() < overlap:
                words.append(shared_word(int(rng.integers(shared_words))))
            else:
                words.append(class_word(int(label), int(rng.integers(words_per_class))))
        text = " ".join(words).capitalize() + "."
        examples.append(LabeledExample(id=f"ex-{i:05d}", text=text, label=int(label)))
    return examples
