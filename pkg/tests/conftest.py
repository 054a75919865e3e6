import os
import sys

import pytest

from stochpi.parser import load

HERE = os.path.dirname(__file__)
MODELS = os.path.join(HERE, os.pardir, "src", "stochpi", "models")
sys.path.insert(0, HERE)


def model_path(name):
    return os.path.normpath(os.path.join(MODELS, name + ".spi"))


def load_model(name):
    return load(model_path(name))


@pytest.fixture
def models_dir():
    return os.path.normpath(MODELS)
