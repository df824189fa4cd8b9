import struct
import zlib

import pytest
import torch

from hanforge.core import Task
from hanforge.errors import (CorruptContainer, FormatVersionMismatch,
                             ModelNotLoaded)
from hanforge.pipeline import predict
from hanforge.serialization import FORMAT_VERSION, MAGIC, load, save


@pytest.fixture(scope="module")
def saved(tiny_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("models") / "tiny.fh"
    save(tiny_model, path)
    return path


class TestRoundTrip:
    def test_state_dict_bit_identical(self, tiny_model, saved):
        loaded = load(saved)
        original = tiny_model.state_dict()
        restored = loaded.state_dict()
        assert original.keys() == restored.keys()
        for key in original:
            assert torch.equal(original[key], restored[key]), key

    def test_metadata_restored(self, tiny_model, saved):
        loaded = load(saved)
        assert loaded.encoder.config == tiny_model.encoder.config
        assert loaded.vocab.chars == tiny_model.vocab.chars
        assert loaded.tags.names() == tiny_model.tags.names()
        assert loaded.pos_categories == tiny_model.pos_categories
        assert loaded.rel_labels == tiny_model.rel_labels
        for task, scheme in tiny_model.schemes.items():
            assert loaded.schemes[task].labels == scheme.labels

    def test_predictions_bit_identical(self, tiny_model, saved):
        loaded = load(saved)
        texts = ["王小明在北京观看足球比赛。", "我们讨论经济政策。"]
        for task in (Task.CWS, Task.POS, Task.NER, Task.DEP):
            assert predict(tiny_model, texts, task).items == \
                predict(loaded, texts, task).items

    def test_default_cws_tag_round_trips(self, tiny_model, tmp_path):
        tiny_model.default_cws_tag = "CWS-fine"
        try:
            path = tmp_path / "styled.fh"
            save(tiny_model, path)
            assert load(path).default_cws_tag == "CWS-fine"
        finally:
            tiny_model.default_cws_tag = None


class TestFailureModes:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelNotLoaded):
            load(tmp_path / "nope.fh")

    def test_truncated_file(self, saved, tmp_path):
        raw = saved.read_bytes()
        clipped = tmp_path / "clipped.fh"
        clipped.write_bytes(raw[:len(raw) // 2])
        with pytest.raises(CorruptContainer):
            load(clipped)

    def test_bad_magic(self, saved, tmp_path):
        raw = bytearray(saved.read_bytes())
        raw[:8] = b"NOTAFILE"
        bad = tmp_path / "bad.fh"
        bad.write_bytes(bytes(raw))
        with pytest.raises(CorruptContainer):
            load(bad)

    def test_older_format_version(self, saved, tmp_path):
        raw = bytearray(saved.read_bytes())
        struct.pack_into("<I", raw, len(MAGIC), FORMAT_VERSION - 1)
        # keep the checksum honest so only the version differs
        raw[-4:] = struct.pack("<I", zlib.crc32(bytes(raw[:-4])))
        old = tmp_path / "old.fh"
        old.write_bytes(bytes(raw))
        with pytest.raises(FormatVersionMismatch):
            load(old)

    def test_flipped_payload_byte(self, saved, tmp_path):
        raw = bytearray(saved.read_bytes())
        raw[len(raw) // 2] ^= 0xFF
        bad = tmp_path / "flip.fh"
        bad.write_bytes(bytes(raw))
        with pytest.raises(CorruptContainer):
            load(bad)
