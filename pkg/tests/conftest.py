import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture(scope="session")
def tiny_model():
    from mangacolor.models import ColorizationModel

    return ColorizationModel(label_count=4, channel_scale=0.125, seed=5)


@pytest.fixture(scope="session")
def tiny_sr():
    from mangacolor.models import SRModel

    return SRModel(channel_scale=0.25, seed=6)


@pytest.fixture(scope="session")
def tiny_checkpoints(tmp_path_factory, tiny_model, tiny_sr):
    d = tmp_path_factory.mktemp("ckpts")
    model_path = str(d / "model.ckpt")
    sr_path = str(d / "sr.ckpt")
    tiny_model.save(model_path)
    tiny_sr.save(sr_path)
    return model_path, sr_path
