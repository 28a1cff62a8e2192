import numpy as np
import pytest

from app.core.errors import ConfigError, InsufficientDataError
from app.schemas.experiment import DatasetSettings, ExperimentConfig, ShapeEntry, Split
from app.services.dataset import read_ground_truth, reference_entry, shapes_in, write_ground_truth
from app.services.inference import (
    format_correspondence_csv,
    nearest_matches,
    read_descriptors,
    soft_matches,
    write_descriptors,
)


def config_with(shapes, reference=None):
    return ExperimentConfig(dataset=DatasetSettings(shapes=shapes, reference=reference))


def test_ground_truth_round_trip(tmp_path):
    path = tmp_path / "a.gt"
    write_ground_truth(path, [2, 0, 1])
    assert read_ground_truth(path, 3).tolist() == [2, 0, 1]


def test_ground_truth_errors(tmp_path):
    path = tmp_path / "a.gt"
    path.write_text("0\nx\n")
    with pytest.raises(ConfigError, match=":2:"):
        read_ground_truth(path)
    path.write_text("0\n1\n")
    with pytest.raises(ConfigError):
        read_ground_truth(path, 3)
    path.write_text("-1\n")
    with pytest.raises(ConfigError):
        read_ground_truth(path)
    with pytest.raises(ConfigError):
        read_ground_truth(tmp_path / "absent.gt")


def test_reference_entry():
    shapes = [ShapeEntry(name="a", mesh="a.off"), ShapeEntry(name="b", mesh="b.off", split=Split.TEST)]
    assert reference_entry(config_with(shapes)).name == "a"
    assert reference_entry(config_with(shapes, "b")).name == "b"
    assert [s.name for s in shapes_in(config_with(shapes), [Split.TEST])] == ["b"]
    with pytest.raises(InsufficientDataError):
        reference_entry(config_with([]))


def test_nearest_and_soft_matches():
    ref = np.array([[0.0], [1.0], [2.0]])
    assert nearest_matches(np.array([[0.9], [1.5], [5.0]]), ref).tolist() == [1, 1, 2]
    probs = np.array([[0.1, 0.7, 0.2], [0.5, 0.25, 0.25]])
    best, prob = soft_matches(probs)
    assert best.tolist() == [1, 0] and prob.tolist() == [0.7, 0.5]
    assert format_correspondence_csv(probs).splitlines()[1:] == ["0,1,0.7", "1,0,0.5"]


def test_descriptor_export(tmp_path):
    values = np.arange(6.0).reshape(3, 2)
    path = write_descriptors(tmp_path / "apply" / "s.descriptors.gcnn", values, "s")
    field = read_descriptors(path)
    assert np.array_equal(field.values, values)
