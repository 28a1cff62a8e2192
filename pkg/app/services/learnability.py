"""
Desk-scale learnability run: two isometrically bent copies of a jittered sheet with
identity ground truth, one correspondence network and one GCNN1 descriptor network.
"""
import logging
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from app.models.learning import LossRecord
from app.schemas.experiment import ChartSettings, SpectralSettings, Task, TrainConfig
from app.services.evaluation import cmc, princeton
from app.services.inference import shape_output, soft_matches
from app.services.losses import multinomial_loss
from app.services.network import build_model, preset_architecture
from app.services.precompute import prepare_shape
from app.services.synthetic import bend_mesh, grid_plane, jitter_planar
from app.services.training import train

logger = logging.getLogger(__name__)

CORRESPONDENCE_NET = ("LIN8", "RELU", "GC8", "AMP", "LINREF", "SOFTMAX")
PRINCETON_RADIUS = 0.1
# Stochastic batch losses are averaged over this many updates at each end of a run
LOSS_WINDOW = 10


@dataclass
class LearnabilityReport:
    vertices: int
    loss_before: float
    loss_after: float
    princeton_untrained: float
    princeton_trained: float
    cmc_raw: float
    cmc_net: float
    descriptor_loss_start: float
    descriptor_loss_end: float
    seconds: float

    def checks(self) -> List[Tuple[str, bool, str]]:
        """Acceptance thresholds of the 500-vertex run as (name, passed, detail)."""
        return [
            (
                "loss below 10% of initial",
                self.loss_after < 0.1 * self.loss_before,
                f"{self.loss_before:.4g} -> {self.loss_after:.4g}",
            ),
            ("trained Princeton(0.1) >= 0.8", self.princeton_trained >= 0.8, f"{self.princeton_trained:.3f}"),
            ("untrained Princeton(0.1) <= 0.1", self.princeton_untrained <= 0.1, f"{self.princeton_untrained:.3f}"),
            (
                "GCNN1 CMC(1) beats raw by 20 points",
                self.cmc_net >= self.cmc_raw + 0.2,
                f"{self.cmc_raw:.3f} -> {self.cmc_net:.3f}",
            ),
        ]


def _window_mean(history: List[LossRecord], tail: bool) -> float:
    records = history[-LOSS_WINDOW:] if tail else history[:LOSS_WINDOW]
    return float(np.mean([r.loss for r in records]))


def run_learnability(
    grid_size: int = 22,
    updates: int = 500,
    seed: int = 0,
    spectral: Optional[SpectralSettings] = None,
    charting: Optional[ChartSettings] = None,
) -> LearnabilityReport:
    started = time.monotonic()
    spectral = spectral or SpectralSettings(k=100, m=50)
    charting = charting or ChartSettings(rho0_fraction=0.1)

    spacing = 1.0 / (grid_size - 1)
    plane = jitter_planar(grid_plane(grid_size, grid_size, spacing), 0.15 * spacing, seed=7)
    plane = plane.transformed(np.eye(3), np.array([-0.5, -0.5, 0.0]))
    ref = prepare_shape(bend_mesh(plane, 0.5), spectral, charting, seed, name="bent_a")
    other = prepare_shape(bend_mesh(plane, 1.0), spectral, charting, seed, name="bent_b")
    identity = np.arange(plane.n_vertices)
    samples = [ref.sample("bent_a", ground_truth=identity), other.sample("bent_b", ground_truth=identity)]
    diameter = ref.diameter * ref.scale
    logger.info("Prepared two copies with %d vertices in %.1fs", plane.n_vertices, time.monotonic() - started)

    untrained = build_model(
        CORRESPONDENCE_NET, spectral.m, charting.n_rho, charting.n_theta, n_reference=plane.n_vertices, seed=seed
    )
    config = TrainConfig(task=Task.CORRESPONDENCE, max_updates=updates, seed=seed)
    trained = train(untrained, Task.CORRESPONDENCE, samples, config).model

    def scores(model):
        probs = shape_output(model, samples[1])
        curve = princeton(soft_matches(probs)[0], identity, ref.mesh, r_max=0.25, diameter=diameter)
        return multinomial_loss(probs, identity)[0], curve.at(PRINCETON_RADIUS)

    loss_before, princeton_untrained = scores(untrained)
    loss_after, princeton_trained = scores(trained)

    descriptor_net = build_model(preset_architecture("gcnn1"), spectral.m, charting.n_rho, charting.n_theta, seed=seed)
    config = TrainConfig(task=Task.DESCRIPTOR, max_updates=updates, seed=seed)
    result = train(descriptor_net, Task.DESCRIPTOR, samples, config)
    learned = result.model
    cmc_raw = cmc(samples[1].features, samples[0].features, identity, k_max=1).at(1)
    cmc_net = cmc(shape_output(learned, samples[1]), shape_output(learned, samples[0]), identity, k_max=1).at(1)

    report = LearnabilityReport(
        vertices=plane.n_vertices,
        loss_before=float(loss_before),
        loss_after=float(loss_after),
        princeton_untrained=float(princeton_untrained),
        princeton_trained=float(princeton_trained),
        cmc_raw=float(cmc_raw),
        cmc_net=float(cmc_net),
        descriptor_loss_start=_window_mean(result.history, tail=False),
        descriptor_loss_end=_window_mean(result.history, tail=True),
        seconds=time.monotonic() - started,
    )
    logger.info("Learnability run finished in %.1fs", report.seconds)
    return report
