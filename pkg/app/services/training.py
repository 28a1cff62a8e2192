"""
Training loop for the descriptor, correspondence and retrieval tasks.
"""
import logging
import math
import time
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import DimensionError, InsufficientDataError, TaskMismatchError
from app.models.learning import LossRecord, PairSet, ShapeSample, TrainResult
from app.models.network import Model
from app.schemas.experiment import Task, TrainConfig
from app.services.losses import multinomial_loss, siamese_loss
from app.services.network import model_backward, model_forward
from app.services.optimizer import OptimizerState, adadelta_step
from app.services.pairs import NearMissOracle, sample_pairs, sample_shape_pairs

logger = logging.getLogger(__name__)

# loss, parameter gradient
StepFn = Callable[[np.random.Generator], Tuple[float, np.ndarray]]


def check_task(model: Model, task: Task, samples: Sequence[ShapeSample]) -> None:
    """Raise when the model head does not fit the task or the data cannot feed it."""
    if not samples:
        raise InsufficientDataError("no training shapes", hint="list shapes with split 'train' in the dataset")
    for sample in samples:
        if sample.features.shape[1] != model.input_dim:
            raise DimensionError(
                f"shape {sample.name} has {sample.features.shape[1]} input channels, model expects {model.input_dim}"
            )
    if task is Task.DESCRIPTOR:
        if model.has_softmax_head or model.has_cov_head:
            raise TaskMismatchError("descriptor training needs a point-descriptor head (no SOFTMAX or COV)")
    elif task is Task.CORRESPONDENCE:
        if not model.has_softmax_head:
            raise TaskMismatchError("correspondence training needs a SOFTMAX head")
        if model.n_reference is not None and model.output_dim != model.n_reference:
            raise TaskMismatchError(
                f"softmax head has {model.output_dim} classes for a {model.n_reference}-vertex reference"
            )
        missing = [s.name for s in samples if s.ground_truth is None]
        if missing:
            raise InsufficientDataError(f"shapes without ground truth: {missing}")
        for s in samples:
            if int(s.ground_truth.max()) >= model.output_dim:
                raise TaskMismatchError(f"ground truth of {s.name} exceeds the {model.output_dim} head classes")
    elif task is Task.RETRIEVAL:
        if not model.has_cov_head:
            raise TaskMismatchError("retrieval training needs a COV head")


class _Objective:
    """Loss and parameter gradient of one task over a fixed list of shapes."""

    def __init__(self, model: Model, task: Task, samples: Sequence[ShapeSample], config: TrainConfig):
        self.model = model
        self.task = task
        self.samples = samples
        self.config = config
        self.bound = [model.bind(s.patch_operator, s.areas) for s in samples]
        self.oracle = NearMissOracle(samples) if task is Task.DESCRIPTOR else None
        self._cursor = 0

    def sample_pairs(self, rng: np.random.Generator) -> PairSet:
        c = self.config
        if self.task is Task.RETRIEVAL:
            return sample_shape_pairs([s.label for s in self.samples], c.batch_positives, c.batch_negatives, rng=rng)
        return sample_pairs(self.samples, c.batch_positives, c.batch_negatives, rng=rng, oracle=self.oracle)

    def pair_loss(self, pairs: PairSet, with_grad: bool = True) -> Tuple[float, Optional[np.ndarray]]:
        rows, flags = pairs.stacked()
        shapes = sorted(set(rows[:, 0].tolist()) | set(rows[:, 2].tolist()))
        outputs: Dict[int, np.ndarray] = {}
        activations = {}
        for s in shapes:
            outputs[s], activations[s] = model_forward(self.bound[s], self.samples[s].features)

        def pick(shape_col, vertex_col):
            if self.task is Task.RETRIEVAL:
                return np.stack([outputs[s][0] for s in rows[:, shape_col]])
            return np.stack([outputs[s][v] for s, v in zip(rows[:, shape_col], rows[:, vertex_col])])

        loss, grad_a, grad_b = siamese_loss(
            pick(0, 1), pick(2, 3), flags, self.config.gamma, self.config.margin
        )
        if not with_grad:
            return loss, None

        out_grads = {s: np.zeros_like(outputs[s]) for s in shapes}
        for (sa, va, sb, vb), ga, gb in zip(rows.tolist(), grad_a, grad_b):
            out_grads[sa][max(va, 0)] += ga
            out_grads[sb][max(vb, 0)] += gb
        grads = np.zeros(self.model.params.size)
        for s in shapes:
            g, _ = model_backward(self.bound[s], activations[s], out_grads[s])
            grads += g
        return loss, grads

    def correspondence_loss(self, index: int, vertices: np.ndarray, with_grad: bool = True):
        sample = self.samples[index]
        probs, act = model_forward(self.bound[index], sample.features)
        loss, logit_grad = multinomial_loss(probs[vertices], sample.ground_truth[vertices])
        if not with_grad:
            return loss, None
        out_grad = np.zeros_like(probs)
        out_grad[vertices] = logit_grad
        grads, _ = model_backward(self.bound[index], act, out_grad, through_softmax=False)
        return loss, grads

    def step(self, rng: np.random.Generator) -> Tuple[float, np.ndarray]:
        if self.task is Task.CORRESPONDENCE:
            index = self._cursor % len(self.samples)
            self._cursor += 1
            n = self.samples[index].n_vertices
            count = min(self.config.batch_vertices, n)
            vertices = np.sort(rng.choice(n, size=count, replace=False))
            return self.correspondence_loss(index, vertices)
        return self.pair_loss(self.sample_pairs(rng))


class _Validator:
    """Fixed validation batch so losses are comparable across steps."""

    def __init__(self, model: Model, task: Task, samples: Sequence[ShapeSample], config: TrainConfig):
        self.objective = _Objective(model, task, samples, config)
        self.pairs: Optional[PairSet] = None
        if task is not Task.CORRESPONDENCE:
            self.pairs = self.objective.sample_pairs(np.random.default_rng(config.seed + 1))

    def loss(self) -> float:
        if self.pairs is not None:
            return self.objective.pair_loss(self.pairs, with_grad=False)[0]
        total = 0.0
        for index, sample in enumerate(self.objective.samples):
            total += self.objective.correspondence_loss(index, np.arange(sample.n_vertices), with_grad=False)[0]
        return total


def train(
    model: Model,
    task: Task,
    samples: Sequence[ShapeSample],
    config: TrainConfig,
    validation: Optional[Sequence[ShapeSample]] = None,
) -> TrainResult:
    """Adadelta training on a copy of the model parameters.

    When validation shapes are given, the parameters with the lowest validation loss are returned.
    """
    task = Task(task)
    check_task(model, task, samples)
    params = model.params.copy()
    working = model.with_params(params)
    objective = _Objective(working, task, samples, config)

    validator = None
    if validation:
        try:
            check_task(model, task, validation)
            validator = _Validator(working, task, validation, config)
        except InsufficientDataError as e:
            logger.warning("Validation disabled: %s", e.message)

    rng = np.random.default_rng(config.seed)
    state = OptimizerState.zeros(params.size)
    history = []
    best_values, best_step, best_val = params.values.copy(), None, math.inf
    started = time.monotonic()

    for step in range(1, config.max_updates + 1):
        loss, grads = objective.step(rng)
        new_values, state = adadelta_step(params.values, grads, state, config.decay, config.epsilon)
        params.values[:] = new_values

        val_loss = None
        if validator is not None and (step % config.validation_interval == 0 or step == config.max_updates):
            val_loss = validator.loss()
            if val_loss < best_val:
                best_val, best_step = val_loss, step
                best_values = params.values.copy()
        history.append(LossRecord(step=step, loss=loss, val_loss=val_loss))

        if step % config.log_interval == 0 or step == config.max_updates:
            logger.info(
                "Step %d/%d: loss %.6g%s (%.1fs)",
                step,
                config.max_updates,
                loss,
                f", val {val_loss:.6g}" if val_loss is not None else "",
                time.monotonic() - started,
            )

    if validator is not None and best_step is not None:
        params.values[:] = best_values
        logger.info("Keeping parameters from step %d (validation loss %.6g)", best_step, best_val)
    trained = model.with_params(params)
    return TrainResult(
        model=trained,
        history=history,
        best_step=best_step,
        best_val_loss=best_val if best_step is not None else None,
    )
