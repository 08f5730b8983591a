import hashlib

import numpy
import pytest
from numpy.testing import assert_array_equal

from surfeat.exceptions import ContainerFormatError, InvalidArgumentError
from surfeat.nncore.checkpoint import (
    ModelCheckpoint,
    checkpoint_digest,
    decode_checkpoint,
    encode_checkpoint,
    read_checkpoint,
    write_checkpoint,
)
from surfeat.nncore.layers import SharedMLP
from surfeat.nncore.optim import AdamW


@pytest.fixture
def trained():
    model = SharedMLP([("xyz", 3)], [4, 2]).reset_parameters(seed=0)
    optimizer = AdamW(model.named_parameters(), total_steps=5, schedule_mode="learning-rate")
    for parameter in model.parameters():
        parameter.grad = numpy.ones_like(parameter.data)
    optimizer.step()
    return model, optimizer


def test_checkpoint__write_read_write(trained, tmp_path):
    model, optimizer = trained
    checkpoint = ModelCheckpoint.from_model(model, optimizer.state, {"epoch": 3})
    path = tmp_path / "model.sfck"
    digest = write_checkpoint(path, checkpoint)
    assert digest == hashlib.sha256(path.read_bytes()).hexdigest()
    assert digest == checkpoint_digest(path) == checkpoint_digest(checkpoint)
    restored = read_checkpoint(path)
    assert encode_checkpoint(restored) == path.read_bytes()
    assert list(restored.parameters) == list(model.state_dict())
    assert restored.optimizer.step == 1
    assert restored.optimizer.schedule_mode == "learning-rate"
    assert_array_equal(restored.metadata["epoch"], [3.0])


def test_checkpoint__restores_model(trained):
    model, _ = trained
    restored = decode_checkpoint(encode_checkpoint(ModelCheckpoint.from_model(model)))
    fresh = SharedMLP([("xyz", 3)], [4, 2])
    fresh.load_state_dict(restored.parameters)
    for name, values in model.state_dict().items():
        assert_array_equal(dict(fresh.named_parameters())[name].data, values)
    assert restored.optimizer is None


def test_checkpoint__reserved_name():
    with pytest.raises(InvalidArgumentError):
        encode_checkpoint(ModelCheckpoint(parameters={"__meta__.x": numpy.zeros(1)}))


def test_checkpoint__truncated(trained):
    data = encode_checkpoint(ModelCheckpoint.from_model(trained[0]))
    with pytest.raises(ContainerFormatError):
        decode_checkpoint(data[:-1])
