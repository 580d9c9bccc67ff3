"""Bundled example model files used by the documentation and the test suite."""

from importlib import resources


def fixture_path(name: str):
    """Filesystem path of a bundled model file, e.g. ``fixture_path("ex1.json")``."""
    return resources.files(__package__) / name


def load_fixture(name: str):
    from ..model import load_model

    return load_model(fixture_path(name).read_text(encoding="utf-8"))
