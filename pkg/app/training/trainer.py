"""Training loops for the argument and frame identification models.

One sentence per update. Each epoch visits the training units in an order drawn
from ``data_seed``, so ensemble members differing only in ``seed`` see the same
data order.
"""

import logging
import math
import multiprocessing
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.autodiff.graph import Graph
from app.autodiff.optim import OptimizerState, adam_step, clip_gradients
from app.core.config import ModelConfig
from app.core.errors import DataValidationError, NumericError
from app.data.corpus import AnnotatedSentence, ArgInstance, FrameOntology, build_instances
from app.data.embeddings import PretrainedTable
from app.data.trees import ScaffoldInstance, framenet_scaffold
from app.db.repository import RunRepository
from app.models.argid import ArgumentModel
from app.models.frameid import FrameIdentifier, FrameIdInstance, build_frame_instances
from app.models.resources import Resources
from app.training.checkpoint import Model, save_checkpoint
from app.training.predict import ARGS_GOLD_FRAMES, FRAMES, EnsembleParser, evaluate, predict

logger = logging.getLogger("SegRNN.train")


@dataclass(frozen=True)
class TrainingUnit:
    """Everything one sentence contributes to one update."""

    instances: Tuple[ArgInstance, ...] = ()
    scaffold: Optional[ScaffoldInstance] = None


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_metric: Optional[float]


@dataclass
class TrainResult:
    checkpoint_path: str
    best_metric: Optional[float]
    best_epoch: int
    history: List[EpochStats] = field(default_factory=list)


def make_optimizer(config: ModelConfig, model: Model) -> OptimizerState:
    return OptimizerState.for_store(
        model.store, config.learning_rate, config.effective_beta1, config.adam_beta2, config.adam_epsilon
    )


def _scaffold_config(config: ModelConfig, trees: Sequence[ScaffoldInstance]) -> ModelConfig:
    if not config.use_scaffold:
        return config
    if config.scaffold_source == "treebank" and not trees:
        logger.info("No tree corpus given; training without the scaffold")
        return replace(config, use_scaffold=False)
    return config


def build_arg_units(
    config: ModelConfig,
    sentences: Sequence[AnnotatedSentence],
    ontology: FrameOntology,
    trees: Sequence[ScaffoldInstance] = (),
) -> List[TrainingUnit]:
    instances = build_instances(sentences, ontology, config.max_span_length)
    grouped: Dict[int, List[ArgInstance]] = {}
    for instance in instances:
        grouped.setdefault(int(instance.instance_id.split(":")[0]), []).append(instance)

    framenet_positives = config.use_scaffold and config.scaffold_source in ("framenet", "both")
    units: List[TrainingUnit] = []
    for s_index, sentence in enumerate(sentences):
        scaffold = None
        if framenet_positives:
            spans = [el.span for annotation in sentence.annotations for el in annotation.elements]
            scaffold = framenet_scaffold(sentence.tokens, sentence.pos, spans, config.max_span_length)
        members = tuple(grouped.get(s_index, ()))
        if members or scaffold is not None:
            units.append(TrainingUnit(members, scaffold))
    if config.use_scaffold and config.scaffold_source in ("treebank", "both"):
        units.extend(TrainingUnit((), tree) for tree in trees)
    return units


def _sgd_update(
    model: Model,
    optimizer: OptimizerState,
    config: ModelConfig,
    loss_fn: Callable[[Graph], Optional[object]],
    label: str,
) -> Optional[float]:
    graph = Graph(model.store)
    loss = loss_fn(graph)
    if loss is None:
        return None
    value = loss.scalar()
    if not math.isfinite(value):
        raise NumericError(f"non-finite loss {value} on {label}")
    gradients = clip_gradients(graph.backward(loss), config.clip_norm)
    adam_step(optimizer, model.store, gradients)
    return value


def _run_epochs(
    kind: str,
    model: Model,
    units: Sequence,
    config: ModelConfig,
    seed: int,
    output_path: str,
    step: Callable[[Model, OptimizerState, object, np.random.Generator], Optional[float]],
    dev_metric: Callable[[Model], Optional[float]],
    repository: Optional[RunRepository],
) -> TrainResult:
    optimizer = make_optimizer(config, model)
    data_rng = np.random.default_rng(config.data_seed)
    noise_rng = np.random.default_rng([seed, 1])
    run_id = repository.start_run(kind, seed, config.to_json()) if repository is not None else None

    history: List[EpochStats] = []
    best_metric: Optional[float] = None
    best_epoch = -1
    try:
        if config.epochs == 0:
            save_checkpoint(output_path, model, optimizer, None, epoch=0, seed=seed)
        for epoch in range(config.epochs):
            total = 0.0
            for index in data_rng.permutation(len(units)):
                value = step(model, optimizer, units[int(index)], noise_rng)
                if value is not None:
                    total += value
            metric = dev_metric(model)
            history.append(EpochStats(epoch, total, metric))
            logger.info("Epoch %d done | kind=%s seed=%d loss=%.4f dev=%s", epoch, kind, seed, total, metric)
            if repository is not None:
                repository.record_epoch(run_id, epoch, total, metric)

            improved = best_epoch < 0 or metric is None or (best_metric is not None and metric > best_metric)
            if improved:
                best_metric, best_epoch = metric, epoch
                save_checkpoint(output_path, model, optimizer, best_metric, epoch=epoch, seed=seed)
    except Exception:
        if repository is not None:
            repository.finish_run(run_id, best_metric, None, status="failed")
        raise

    if repository is not None:
        repository.finish_run(run_id, best_metric, output_path)
    return TrainResult(output_path, best_metric, max(best_epoch, 0), history)


def arg_f1(model: ArgumentModel, sentences: Sequence[AnnotatedSentence]) -> Optional[float]:
    if not sentences:
        return None
    parser = EnsembleParser([model])
    return evaluate(predict(parser, sentences, ARGS_GOLD_FRAMES), sentences, ARGS_GOLD_FRAMES).f1


def frame_accuracy(model: FrameIdentifier, sentences: Sequence[AnnotatedSentence]) -> Optional[float]:
    if not sentences:
        return None
    parser = EnsembleParser(frame_models=[model])
    return evaluate(predict(parser, sentences, FRAMES), sentences, FRAMES).frame_accuracy


def train_arg(
    config: ModelConfig,
    train: Sequence[AnnotatedSentence],
    dev: Sequence[AnnotatedSentence],
    ontology: FrameOntology,
    output_path: str,
    seed: int,
    pretrained: Optional[PretrainedTable] = None,
    trees: Sequence[ScaffoldInstance] = (),
    repository: Optional[RunRepository] = None,
) -> TrainResult:
    if not train and not trees:
        raise DataValidationError("training corpus is empty", field="train")
    config = _scaffold_config(config, trees)
    pretrained = pretrained or PretrainedTable.empty(config.pretrained_dim)
    vocabulary_source = list(train) + [AnnotatedSentence(tree.tokens, tree.pos) for tree in trees]
    resources = Resources.build(vocabulary_source, ontology, pretrained)
    model = ArgumentModel.create(config, resources, seed)
    units = build_arg_units(config, train, ontology, trees)
    if not units:
        raise DataValidationError("no trainable instances after filtering", field="train")
    logger.info(
        "Training arg model | seed=%d units=%d params=%d scaffold=%s",
        seed, len(units), len(model.store.names()), config.use_scaffold,
    )

    def step(model: ArgumentModel, optimizer: OptimizerState, unit: TrainingUnit, rng: np.random.Generator) -> Optional[float]:
        label = unit.instances[0].instance_id if unit.instances else "scaffold sentence"
        return _sgd_update(model, optimizer, config, lambda graph: model.sentence_loss(graph, unit.instances, unit.scaffold, rng), label)

    return _run_epochs("arg", model, units, config, seed, output_path, step, lambda m: arg_f1(m, dev), repository)


def train_frame(
    config: ModelConfig,
    train: Sequence[AnnotatedSentence],
    dev: Sequence[AnnotatedSentence],
    ontology: FrameOntology,
    output_path: str,
    seed: int,
    pretrained: Optional[PretrainedTable] = None,
    repository: Optional[RunRepository] = None,
) -> TrainResult:
    instances = build_frame_instances(train)
    if not instances:
        raise DataValidationError("training corpus has no frame annotations", field="train")
    pretrained = pretrained or PretrainedTable.empty(config.pretrained_dim)
    resources = Resources.build(train, ontology, pretrained)
    model = FrameIdentifier.create(config, resources, seed)
    logger.info("Training frame model | seed=%d instances=%d", seed, len(instances))

    def step(model: FrameIdentifier, optimizer: OptimizerState, instance: FrameIdInstance, rng: np.random.Generator) -> Optional[float]:
        return _sgd_update(model, optimizer, config, lambda graph: model.loss(graph, instance, rng), instance.instance_id)

    return _run_epochs("frame", model, instances, config, seed, output_path, step, lambda m: frame_accuracy(m, dev), repository)


def member_path(output_dir: str, kind: str, member: int) -> str:
    return os.path.join(output_dir, f"{kind}-member-{member}.ckpt")


def _train_member(kind: str, member: int, kwargs: Dict) -> TrainResult:
    db_path = kwargs.pop("db_path", None)
    repository = None
    if db_path:
        repository = RunRepository(db_path)
        repository.init_schema()
    trainer = train_arg if kind == "arg" else train_frame
    return trainer(repository=repository, **kwargs)


def train_ensemble(
    kind: str,
    config: ModelConfig,
    output_dir: str,
    seed: int,
    workers: int = 1,
    db_path: Optional[str] = None,
    **corpora,
) -> List[TrainResult]:
    """Members k = 0..ensemble_size-1 differ only in their initialisation seed (seed + k)."""
    if kind not in ("arg", "frame"):
        raise DataValidationError(f"unknown model kind {kind!r}", field="kind")
    os.makedirs(output_dir, exist_ok=True)
    jobs = [
        (kind, k, dict(corpora, config=config, seed=seed + k, output_path=member_path(output_dir, kind, k), db_path=db_path))
        for k in range(config.ensemble_size)
    ]
    if workers <= 1 or len(jobs) == 1:
        results = [_train_member(*job) for job in jobs]
    else:
        with multiprocessing.Pool(processes=min(workers, len(jobs))) as pool:
            results = pool.starmap(_train_member, jobs)
    for k, result in enumerate(results):
        logger.info("Member %d finished | best=%s epoch=%d path=%s", k, result.best_metric, result.best_epoch, result.checkpoint_path)
    return results
