import pytest

from app.schemas.experiment import ChartSettings, SpectralSettings
from app.services.learnability import run_learnability


@pytest.fixture(scope="module")
def report():
    return run_learnability(
        grid_size=12,
        updates=300,
        seed=0,
        spectral=SpectralSettings(k=60, m=20),
        charting=ChartSettings(rho0_fraction=0.15),
    )


@pytest.mark.slow
def test_correspondence_net_learns_bent_copy(report):
    assert report.vertices == 144
    assert report.loss_after < 0.95 * report.loss_before
    assert report.princeton_trained >= report.princeton_untrained


@pytest.mark.slow
def test_descriptor_net_lowers_siamese_loss(report):
    assert report.descriptor_loss_end < report.descriptor_loss_start
    assert 0.0 <= report.cmc_raw <= 1.0 and 0.0 <= report.cmc_net <= 1.0


@pytest.mark.slow
def test_report_lists_acceptance_checks(report):
    names = [name for name, _, _ in report.checks()]
    assert len(names) == 4
    assert all(isinstance(ok, bool) for _, ok, _ in report.checks())
