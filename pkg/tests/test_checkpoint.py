import json

import numpy as np
import pytest

from qdistill.checkpoint import MAGIC, checkpoint_digest, load_checkpoint, save_checkpoint
from qdistill.errors import FormatError
from qdistill.model import ModelConfig, StudentParams
from qdistill.optim import AdamState
from qdistill.train import Checkpoint


@pytest.fixture
def checkpoint(small_config):
    rng = np.random.default_rng(0)
    params = StudentParams.initialize(small_config.model, rng)
    adam = AdamState(
        step=3,
        first_moment=rng.normal(size=params.size()),
        second_moment=rng.uniform(size=params.size()),
        lr=small_config.lr,
    )
    return Checkpoint(
        config=small_config,
        params=params,
        adam=adam,
        epoch=2,
        rng_state=rng.bit_generator.state,
        distillation_seconds=1.5,
        vocabulary=["alpha", "beta"],
    )


class TestRoundTrip:
    def test_bit_exact(self, checkpoint, tmp_path):
        path = save_checkpoint(checkpoint, tmp_path / "student.ckpt")
        loaded = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.params.flatten(), checkpoint.params.flatten())
        np.testing.assert_array_equal(loaded.adam.first_moment, checkpoint.adam.first_moment)
        np.testing.assert_array_equal(loaded.adam.second_moment, checkpoint.adam.second_moment)
        assert loaded.adam.step == 3
        assert loaded.epoch == 2
        assert loaded.vocabulary == ["alpha", "beta"]
        assert loaded.rng_state == checkpoint.rng_state
        assert loaded.config == checkpoint.config
        assert checkpoint_digest(loaded) == checkpoint_digest(checkpoint)

    def test_header_is_json_line(self, checkpoint, tmp_path):
        path = save_checkpoint(checkpoint, tmp_path / "student.ckpt")
        header = json.loads(path.read_bytes().split(b"\n", 1)[0])
        assert header["format"] == MAGIC
        assert header["layout"]["params"] == checkpoint.param_count

    def test_no_temporary_file_left(self, checkpoint, tmp_path):
        save_checkpoint(checkpoint, tmp_path / "student.ckpt")
        assert [p.name for p in tmp_path.iterdir()] == ["student.ckpt"]


class TestCorruption:
    def test_flipped_payload_byte(self, checkpoint, tmp_path):
        path = save_checkpoint(checkpoint, tmp_path / "student.ckpt")
        raw = bytearray(path.read_bytes())
        raw[-5] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="checksum"):
            load_checkpoint(path)

    def test_truncated(self, checkpoint, tmp_path):
        path = save_checkpoint(checkpoint, tmp_path / "student.ckpt")
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_wrong_magic(self, checkpoint, tmp_path):
        path = save_checkpoint(checkpoint, tmp_path / "student.ckpt")
        head, payload = path.read_bytes().split(b"\n", 1)
        header = json.loads(head)
        header["format"] = "something-else"
        path.write_bytes(json.dumps(header).encode() + b"\n" + payload)
        with pytest.raises(FormatError, match="not a qdistill checkpoint"):
            load_checkpoint(path)

    def test_future_version(self, checkpoint, tmp_path):
        path = save_checkpoint(checkpoint, tmp_path / "student.ckpt")
        head, payload = path.read_bytes().split(b"\n", 1)
        header = json.loads(head)
        header["version"] = 2
        path.write_bytes(json.dumps(header).encode() + b"\n" + payload)
        with pytest.raises(FormatError, match="version"):
            load_checkpoint(path)

    def test_no_header(self, tmp_path):
        path = tmp_path / "student.ckpt"
        path.write_bytes(b"garbage")
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError, match="not found"):
            load_checkpoint(tmp_path / "absent.ckpt")

    def test_size_mismatch_rejected_in_memory(self, checkpoint, small_config):
        bigger = StudentParams.zeros(ModelConfig(4, 4, 1, 2))
        with pytest.raises(FormatError):
            Checkpoint(small_config, bigger, checkpoint.adam, 1, {}, 0.0, [])
