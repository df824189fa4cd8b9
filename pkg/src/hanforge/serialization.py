"""Model container: one self-describing binary file.

Layout (all integers little-endian):

    magic     8 bytes  b"HANFORGE"
    version   uint32
    length    uint64   manifest byte count
    manifest  UTF-8 JSON: config, schemes, vocabulary, corpus tags and a
              tensor index with per-blob name, shape, byte offset and size
    blobs     concatenated float32 little-endian row-major tensor data
    crc32     uint32 over every preceding byte

Loading verifies the magic, then the version, then the checksum, so a
container from a newer or older format fails with FormatVersionMismatch
while truncation or bit rot fails with CorruptContainer.
"""

import json
import struct
import zlib

import numpy as np
import torch

from .core import LabelScheme, TagRegistry, Task, Vocabulary
from .encoder import EncoderConfig, TransformerEncoder
from .errors import CorruptContainer, FormatVersionMismatch, ModelNotLoaded
from .model import JointModel

MAGIC = b"HANFORGE"
FORMAT_VERSION = 1


def save(model: JointModel, path) -> None:
    """Write the model to ``path``; loading reproduces bit-identical predictions."""
    blobs: list[bytes] = []
    index: list[dict] = []
    offset = 0
    for name, tensor in sorted(model.state_dict().items()):
        data = tensor.detach().cpu().to(torch.float32).numpy()
        raw = np.ascontiguousarray(data, dtype="<f4").tobytes()
        index.append({
            "name": name,
            "shape": list(data.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)

    manifest = {
        "format_version": FORMAT_VERSION,
        "encoder_config": model.encoder.config.to_dict(),
        "vocab": {"tags": list(model.vocab.tag_names), "chars": list(model.vocab.chars)},
        "corpus_tags": [
            {"name": t.name, "task": t.task.value, "vocab_id": t.vocab_id}
            for t in model.tags
        ],
        "schemes": {task.value: list(scheme.labels) for task, scheme in model.schemes.items()},
        "pos_categories": list(model.pos_categories),
        "rel_labels": list(model.rel_labels),
        "arc_dim": model.arc_dim,
        "rel_dim": model.rel_dim,
        "default_cws_tag": model.default_cws_tag,
        "tensors": index,
    }
    manifest_raw = json.dumps(manifest, ensure_ascii=False).encode("utf-8")

    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<I", FORMAT_VERSION)
    payload += struct.pack("<Q", len(manifest_raw))
    payload += manifest_raw
    for raw in blobs:
        payload += raw
    payload += struct.pack("<I", zlib.crc32(bytes(payload)))
    with open(path, "wb") as fh:
        fh.write(bytes(payload))


def load(path) -> JointModel:
    """Rebuild a model from a container written by :func:`save`."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError:
        raise ModelNotLoaded(f"model file not found: {path}") from None

    header = len(MAGIC) + 4 + 8
    if len(raw) < header + 4:
        raise CorruptContainer("file too short to be a model container")
    if raw[:len(MAGIC)] != MAGIC:
        raise CorruptContainer("bad magic; not a model container")
    version = struct.unpack_from("<I", raw, len(MAGIC))[0]
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"container format {version}, this build reads {FORMAT_VERSION}"
        )
    (checksum,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(raw[:-4]) != checksum:
        raise CorruptContainer("checksum mismatch")

    (manifest_len,) = struct.unpack_from("<Q", raw, len(MAGIC) + 4)
    manifest_end = header + manifest_len
    if manifest_end > len(raw) - 4:
        raise CorruptContainer("manifest extends past end of file")
    try:
        manifest = json.loads(raw[header:manifest_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptContainer(f"manifest unreadable: {exc}") from None

    vocab = Vocabulary(manifest["vocab"]["tags"], manifest["vocab"]["chars"])
    tags = TagRegistry()
    for entry in manifest["corpus_tags"]:
        tag = tags.register(entry["name"], Task(entry["task"]), entry["vocab_id"])
        if tag.vocab_id != vocab.tag_id(tag.name):
            raise CorruptContainer(f"tag {tag.name!r} id disagrees with vocabulary")
    schemes = {
        Task(name): LabelScheme(Task(name), labels)
        for name, labels in manifest["schemes"].items()
    }
    config = EncoderConfig.from_dict(manifest["encoder_config"])
    model = JointModel(
        TransformerEncoder(config), vocab, tags, schemes,
        manifest["pos_categories"], manifest["rel_labels"],
        manifest["arc_dim"], manifest["rel_dim"],
    )
    model.default_cws_tag = manifest["default_cws_tag"]

    data_start = manifest_end
    state = {}
    for entry in manifest["tensors"]:
        begin = data_start + entry["offset"]
        stop = begin + entry["nbytes"]
        if stop > len(raw) - 4:
            raise CorruptContainer(f"tensor {entry['name']!r} extends past end of file")
        arr = np.frombuffer(raw[begin:stop], dtype="<f4").reshape(entry["shape"]).copy()
        state[entry["name"]] = torch.from_numpy(arr)
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise CorruptContainer(f"tensor set does not match the manifest: {exc}") from None
    model.eval()
    return model
