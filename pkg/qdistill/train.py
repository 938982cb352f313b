"""
Distillation Training Harness

Runs the student against frozen teacher distributions: seeded batch
shuffles, one Adam step per batch, validation after every epoch, and the
best-validation checkpoint kept as the result. Also hosts the loss-mode
ablation, the teacher-quality sweep, teacher-free inference and the
logistic-regression learnability check.

Only the optimization loop is timed (Tkd); ingestion, validation and test
passes are excluded.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import LogisticRegression

from .data import (
    LabeledExample,
    SplitCorpus,
    SyntheticTeacherProvider,
    Vocabulary,
    attach_teacher,
    check_teacher_attached,
    tokenize,
    tokenize_corpus,
)
from .errors import ArgumentError, ConfigError, DataError, FormatError, NumericalError
from .grad import batch_loss, batch_triples, loss_gradient
from .loss import LossMode, LossSpec, combined_loss, loss_terms
from .metrics import (
    DEFAULT_TEACHER_PARAMS,
    MetricsReport,
    classification_metrics,
    efficiency_ratios,
    parameter_proportion,
)
from .model import FrozenEmbedding, ModelConfig, StudentParams, param_count, predict
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines one distillation run"""

    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossSpec = field(default_factory=LossSpec)
    epochs: int = 10
    batch_size: int = 8
    lr: float = 0.06
    seed: int = 0
    repeats: int = 5
    workers: int = 1
    embedding_path: Optional[str] = None
    teacher_params: float = DEFAULT_TEACHER_PARAMS

    def __post_init__(self):
        checks = {
            "epochs": self.epochs >= 1,
            "batch_size": self.batch_size >= 1,
            "repeats": self.repeats >= 1,
            "workers": self.workers >= 1,
            "lr": math.isfinite(self.lr) and self.lr > 0,
            "teacher_params": self.teacher_params > 0,
        }
        for name, ok in checks.items():
            if not ok:
                raise ConfigError(f"Invalid {name}: {getattr(self, name)!r}")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "loss": {"mode": self.loss.mode.value, "lambda2": self.loss.lambda2},
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "seed": self.seed,
            "repeats": self.repeats,
            "workers": self.workers,
            "embedding_path": self.embedding_path,
            "teacher_params": self.teacher_params,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(
            model=ModelConfig.from_dict(data["model"]),
            loss=LossSpec(data["loss"]["mode"], data["loss"]["lambda2"]),
            epochs=data["epochs"],
            batch_size=data["batch_size"],
            lr=data["lr"],
            seed=data["seed"],
            repeats=data.get("repeats", 5),
            workers=data.get("workers", 1),
            embedding_path=data.get("embedding_path"),
            teacher_params=data.get("teacher_params", DEFAULT_TEACHER_PARAMS),
        )

    def with_mode(self, mode: LossMode) -> "TrainConfig":
        return replace(self, loss=LossSpec(mode, self.loss.lambda2))


def build_embedding(config: TrainConfig) -> FrozenEmbedding:
    """Frozen embedding for a run, seeded by the run seed unless a table file is given"""
    if config.embedding_path:
        return FrozenEmbedding.from_file(config.embedding_path, config.model.embed_dim, config.seed)
    return FrozenEmbedding(config.model.embed_dim, seed=config.seed)


@dataclass
class Checkpoint:
    """Trained student plus everything needed to resume or reproduce it"""

    config: TrainConfig
    params: StudentParams
    adam: AdamState
    epoch: int
    rng_state: dict
    distillation_seconds: float
    vocabulary: List[str]

    def __post_init__(self):
        expected = param_count(self.config.model)
        if self.params.size() != expected:
            raise FormatError(f"Checkpoint holds {self.params.size()} parameters, config needs {expected}")
        if self.adam.first_moment.size != expected:
            raise FormatError(f"Optimizer moments hold {self.adam.first_moment.size} values, expected {expected}")

    @property
    def param_count(self) -> int:
        return param_count(self.config.model)

    def digest(self) -> str:
        return self.params.digest()

    def tokenizer(self) -> Vocabulary:
        return Vocabulary(self.vocabulary)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    mean_batch_loss: float
    validation: MetricsReport
    seconds: float
    cumulative_seconds: float
    terms: Dict[str, float] = field(default_factory=dict)

    def metrics_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "loss_terms": dict(self.terms),
            "mean_batch_loss": self.mean_batch_loss,
            "validation": self.validation.to_dict(),
        }


@dataclass
class RunReport:
    """Outcome of one train_run

    metrics_dict() is a pure function of inputs and seed; timing_dict()
    holds the wall-clock measurements.
    """

    config: TrainConfig
    param_count: int
    initial_loss: float
    initial_digest: str
    epochs: List[EpochRecord]
    best_epoch: int
    final_digest: str
    test: MetricsReport
    distillation_seconds: float = 0.0
    inference_seconds: float = 0.0

    @property
    def final_train_loss(self) -> float:
        return self.epochs[-1].train_loss

    @property
    def parameter_proportion(self) -> float:
        return parameter_proportion(self.param_count, self.config.teacher_params)

    def metrics_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "param_count": self.param_count,
            "parameter_proportion": self.parameter_proportion,
            "initial_loss": self.initial_loss,
            "initial_digest": self.initial_digest,
            "final_digest": self.final_digest,
            "best_epoch": self.best_epoch,
            "epochs": [record.metrics_dict() for record in self.epochs],
            "test": self.test.to_dict(),
        }

    def timing_dict(self) -> dict:
        timing = {
            "distillation_seconds": self.distillation_seconds,
            "epoch_seconds": [record.seconds for record in self.epochs],
            "cumulative_seconds": [record.cumulative_seconds for record in self.epochs],
            "inference_seconds": self.inference_seconds,
        }
        timing.update(efficiency_ratios(self.test.accuracy, self.param_count, self.distillation_seconds))
        return timing


def _check_labels(examples: Sequence[LabeledExample], n_classes: int):
    bad = [e.id for e in examples if e.label >= n_classes]
    if bad:
        raise DataError(f"{len(bad)} example(s) have labels outside [0, {n_classes}): {bad[:20]}")


def _tokenized(examples: Sequence[LabeledExample], vocabulary: Vocabulary) -> List[LabeledExample]:
    return [e if e.tokens else e.with_tokens(tokenize(e.text, vocabulary)) for e in examples]


def predict_examples(examples: Sequence[LabeledExample], params: StudentParams, config: ModelConfig,
                     embedding: FrozenEmbedding) -> Tuple[List[int], List[np.ndarray]]:
    predictions, distributions = [], []
    for example in examples:
        label, q = predict(example.tokens, embedding, params, config)
        predictions.append(label)
        distributions.append(q)
    return predictions, distributions


def score_params(examples: Sequence[LabeledExample], params: StudentParams, config: ModelConfig,
                 embedding: FrozenEmbedding) -> MetricsReport:
    if len(examples) == 0:
        raise ArgumentError("Cannot evaluate an empty example list")
    predictions, _ = predict_examples(examples, params, config, embedding)
    report = classification_metrics([e.label for e in examples], predictions, config.n_classes)
    return report.with_efficiency(param_count(config))


def evaluate(checkpoint: Checkpoint, examples: Sequence[LabeledExample],
             embedding: Optional[FrozenEmbedding] = None) -> MetricsReport:
    """Test-set style metrics of a checkpoint

    Acc/Tkd uses the total distillation time of the run that wrote the
    checkpoint, so it matches RunReport.timing_dict() for the same examples.
    """
    if len(examples) == 0:
        raise ArgumentError("Cannot evaluate an empty example list")
    model = checkpoint.config.model
    _check_labels(examples, model.n_classes)
    embedding = embedding or build_embedding(checkpoint.config)
    examples = _tokenized(examples, checkpoint.tokenizer())
    report = score_params(examples, checkpoint.params, model, embedding)
    return report.with_efficiency(checkpoint.param_count, checkpoint.distillation_seconds)


def infer(checkpoint: Checkpoint, text: str, embedding: Optional[FrozenEmbedding] = None) -> Tuple[int, np.ndarray]:
    """Classify raw text with the student alone"""
    embedding = embedding or build_embedding(checkpoint.config)
    tokens = tokenize(text, checkpoint.tokenizer())
    return predict(tokens, embedding, checkpoint.params, checkpoint.config.model)


def _log_banner(title: str):
    logger.info("=" * 70)
    logger.info(title)
    logger.info("=" * 70)


def train_run(corpus: SplitCorpus, config: TrainConfig,
              embedding: Optional[FrozenEmbedding] = None) -> Tuple[Checkpoint, RunReport]:
    """Distill the teacher into a fresh student; returns the best-validation checkpoint"""
    model = config.model
    if corpus.vocabulary is None:
        corpus = tokenize_corpus(corpus)
    _check_labels(corpus.all_examples(), model.n_classes)
    if config.loss.mode.needs_teacher:
        check_teacher_attached(corpus.train)
    if not corpus.train or not corpus.validation or not corpus.test:
        raise DataError(f"Every split needs at least one example, got sizes {corpus.sizes()}")
    embedding = embedding or build_embedding(config)

    rng = np.random.default_rng(config.seed)
    params = StudentParams.initialize(model, rng)
    adam = AdamState.fresh(params.size(), lr=config.lr)
    train = list(corpus.train)
    initial_loss = batch_loss(train, params, model, config.loss, embedding)
    initial_digest = params.digest()
    steps_per_epoch = math.ceil(len(train) / config.batch_size)

    _log_banner(f"DISTILLATION RUN  seed={config.seed}  loss={config.loss.mode.value}")
    logger.info(f"  Parameters: {params.size()}  epochs: {config.epochs}  batches/epoch: {steps_per_epoch}")
    logger.info(f"  Initial train loss: {initial_loss:.6f}")

    records: List[EpochRecord] = []
    best: Optional[Checkpoint] = None
    best_accuracy = -1.0
    elapsed = 0.0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train))
        batch_losses = []
        started = time.perf_counter()
        for b in range(steps_per_epoch):
            batch = [train[i] for i in order[b * config.batch_size:(b + 1) * config.batch_size]]
            try:
                value, grads = loss_gradient(batch, params, model, config.loss, embedding, config.workers)
                params, adam = adam_step(params, grads, adam)
            except NumericalError as e:
                raise NumericalError(f"epoch {epoch}, batch {b + 1}/{steps_per_epoch}: {e}") from e
            batch_losses.append(value)
        seconds = time.perf_counter() - started
        elapsed += seconds

        triples = batch_triples(train, params, model, config.loss, embedding)
        train_loss = combined_loss(triples, config.loss)
        terms = loss_terms(triples)
        if not math.isfinite(train_loss):
            raise NumericalError(f"epoch {epoch}: non-finite train loss {train_loss}")
        validation = score_params(corpus.validation, params, model, embedding)
        records.append(
            EpochRecord(epoch, train_loss, float(np.mean(batch_losses)), validation, seconds, elapsed, terms)
        )
        marker = ""
        if validation.accuracy >= best_accuracy:
            best_accuracy = validation.accuracy
            best = Checkpoint(
                config=config,
                params=params.copy(),
                adam=replace(adam, first_moment=adam.first_moment.copy(), second_moment=adam.second_moment.copy()),
                epoch=epoch,
                rng_state=rng.bit_generator.state,
                distillation_seconds=elapsed,
                vocabulary=corpus.vocabulary.to_list(),
            )
            marker = "  ✓ best"
        logger.info(
            f"  Epoch {epoch:>3}/{config.epochs}  train loss {train_loss:.6f}  "
            f"val acc {validation.accuracy:.4f}  val F1 {validation.f1:.4f}  ({seconds:.2f}s){marker}"
        )
        logger.debug(f"    KL {terms['kl']:.6f}  JS {terms['js']:.6f}  CE {terms['ce']:.6f}")

    # Tkd covers every epoch, not only those up to the best one
    best.distillation_seconds = elapsed

    started = time.perf_counter()
    test = score_params(corpus.test, best.params, model, embedding)
    inference_seconds = time.perf_counter() - started
    report = RunReport(
        config=config,
        param_count=param_count(model),
        initial_loss=initial_loss,
        initial_digest=initial_digest,
        epochs=records,
        best_epoch=best.epoch,
        final_digest=best.digest(),
        test=test,
        distillation_seconds=elapsed,
        inference_seconds=inference_seconds,
    )
    logger.info(
        f"  Best epoch {best.epoch}: test acc {test.accuracy:.4f}  P {test.precision:.4f}  "
        f"R {test.recall:.4f}  F1 {test.f1:.4f}  Tkd {elapsed:.2f}s"
    )
    return best, report


@dataclass
class AblationReport:
    """Per-mode metrics averaged over repeats, with the per-repeat detail kept"""

    modes: List[str]
    seeds: List[int]
    runs: Dict[str, List[RunReport]]

    def initial_digests(self) -> List[Dict[str, str]]:
        return [{mode: self.runs[mode][r].initial_digest for mode in self.modes} for r in range(len(self.seeds))]

    def shared_initialization(self) -> bool:
        return all(len(set(digests.values())) == 1 for digests in self.initial_digests())

    def rows(self) -> List[dict]:
        rows = []
        for mode in self.modes:
            tests = [run.test for run in self.runs[mode]]
            rows.append({
                "mode": mode,
                "accuracy": float(np.mean([t.accuracy for t in tests])),
                "precision": float(np.mean([t.precision for t in tests])),
                "recall": float(np.mean([t.recall for t in tests])),
                "f1": float(np.mean([t.f1 for t in tests])),
                "accuracy_per_repeat": [t.accuracy for t in tests],
            })
        return rows

    def combined_vs_ce(self) -> Optional[Tuple[int, int]]:
        """(repeats where COMBINED >= CE, repeats) or None when either mode is absent"""
        combined, ce = LossMode.COMBINED.value, LossMode.CE.value
        if combined not in self.runs or ce not in self.runs:
            return None
        wins = sum(
            1 for a, b in zip(self.runs[combined], self.runs[ce]) if a.test.accuracy >= b.test.accuracy
        )
        return wins, len(self.seeds)

    def metrics_dict(self) -> dict:
        return {
            "modes": self.modes,
            "seeds": self.seeds,
            "rows": self.rows(),
            "initial_digests": self.initial_digests(),
            "shared_initialization": self.shared_initialization(),
            "runs": {mode: [run.metrics_dict() for run in runs] for mode, runs in self.runs.items()},
        }

    def timing_dict(self) -> dict:
        return {mode: [run.timing_dict() for run in runs] for mode, runs in self.runs.items()}


def ablation_run(corpus: SplitCorpus, base_config: TrainConfig,
                 modes: Sequence[LossMode] = tuple(LossMode)) -> AblationReport:
    """Train every loss mode from the same initialization, repeat r using seed + r"""
    modes = [LossMode(m) for m in modes]
    seeds = [base_config.seed + r for r in range(base_config.repeats)]
    runs: Dict[str, List[RunReport]] = {mode.value: [] for mode in modes}
    for seed in seeds:
        for mode in modes:
            _, report = train_run(corpus, replace(base_config.with_mode(mode), seed=seed))
            runs[mode.value].append(report)
    report = AblationReport([m.value for m in modes], seeds, runs)
    if not report.shared_initialization():
        raise NumericalError("Loss modes did not start from identical parameters")
    _log_banner("ABLATION SUMMARY")
    for row in report.rows():
        logger.info(f"  {row['mode']:<9} acc {row['accuracy']:.4f}  P {row['precision']:.4f}  "
                    f"R {row['recall']:.4f}  F1 {row['f1']:.4f}")
    return report


def teacher_agreement(examples: Sequence[LabeledExample]) -> float:
    """Fraction of examples whose teacher argmax equals the label"""
    scored = [e for e in examples if e.teacher is not None]
    if not scored:
        return 0.0
    return float(np.mean([int(np.argmax(e.teacher)) == e.label for e in scored]))


def teacher_quality_sweep(corpus: SplitCorpus, base_config: TrainConfig, accuracies: Sequence[float],
                          smoothing: float = 0.1, teacher_seed: Optional[int] = None) -> List[dict]:
    """Distill from synthetic teachers of increasing accuracy"""
    if not accuracies:
        raise ArgumentError("Teacher sweep needs at least one accuracy")
    n_classes = base_config.model.n_classes
    seed = base_config.seed if teacher_seed is None else teacher_seed
    rows = []
    for accuracy in accuracies:
        provider = SyntheticTeacherProvider(n_classes, accuracy=accuracy, smoothing=smoothing, seed=seed)
        attached = attach_teacher(corpus, provider, n_classes)
        _, report = train_run(attached, base_config)
        rows.append({
            "teacher_accuracy": float(accuracy),
            "teacher_agreement": teacher_agreement(attached.train),
            "test": report.test.to_dict(),
            "best_epoch": report.best_epoch,
        })
        logger.info(f"  teacher accuracy {accuracy:.2f} -> student test acc {report.test.accuracy:.4f}")
    return rows


def learnability_oracle(corpus: SplitCorpus, embedding: FrozenEmbedding) -> float:
    """Test accuracy of logistic regression on pooled embeddings"""
    if corpus.vocabulary is None:
        corpus = tokenize_corpus(corpus)
    train = list(corpus.train) + list(corpus.validation)
    features = np.array([embedding.pool(e.tokens) for e in train])
    classifier = LogisticRegression(max_iter=2000)
    classifier.fit(features, [e.label for e in train])
    test_features = np.array([embedding.pool(e.tokens) for e in corpus.test])
    return float(classifier.score(test_features, [e.label for e in corpus.test]))
