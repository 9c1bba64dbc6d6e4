"""Versioned model files: gzip-compressed JSON."""

from __future__ import annotations

import gzip
import io
import json
from pathlib import Path

from .corpus import Vocabulary
from .hpyp import HpypTree
from .model import ContextSpec, GenerativeModel

MAGIC = "hpypdp-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def model_to_dict(model: GenerativeModel, metadata: dict | None = None) -> dict:
    return {
        "magic": MAGIC,
        "version": VERSION,
        "lexicalised": model.lexicalised,
        "predict_labels": model.predict_labels,
        "word_model": model.word_model,
        "specs": {k: list(s.elements) for k, s in model.specs.items()},
        "vocab": model.vocab.to_dict(),
        "trees": {k: t.to_dict() for k, t in model.trees().items()},
        "metadata": metadata or {},
    }


def model_from_dict(data: dict) -> tuple[GenerativeModel, dict]:
    if not isinstance(data, dict) or data.get("magic") != MAGIC:
        raise ModelFormatError("not a model file")
    if data.get("version") != VERSION:
        raise ModelFormatError(f"model file version {data.get('version')} is not supported (need {VERSION})")
    specs = {k: ContextSpec(k, tuple(v)) for k, v in data["specs"].items()}
    model = GenerativeModel(
        Vocabulary.from_dict(data["vocab"]),
        lexicalised=data["lexicalised"],
        predict_labels=data["predict_labels"],
        specs=specs,
        word_model=data["word_model"],
    )
    trees = {k: HpypTree.from_dict(v) for k, v in data["trees"].items()}
    for kind, tree in trees.items():
        current = getattr(model, {"transition": "transitions", "tag": "tags", "word": "words"}[kind])
        if (tree.base_size, tree.depth) != (current.base_size, current.depth):
            raise ModelFormatError(f"{kind} distribution does not match the model settings")
    model.transitions, model.tags, model.words = trees["transition"], trees["tag"], trees["word"]
    return model, data.get("metadata", {})


def dumps(model: GenerativeModel, metadata: dict | None = None) -> bytes:
    text = json.dumps(model_to_dict(model, metadata), separators=(",", ":"), sort_keys=True)
    buf = io.BytesIO()
    # mtime=0 keeps the bytes identical across runs.
    with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as fh:
        fh.write(text.encode("utf-8"))
    return buf.getvalue()


def loads(blob: bytes) -> tuple[GenerativeModel, dict]:
    try:
        text = gzip.decompress(blob).decode("utf-8")
        data = json.loads(text)
    except (OSError, EOFError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable model file: {exc}") from None
    return model_from_dict(data)


def save_model(model: GenerativeModel, path: str | Path, metadata: dict | None = None) -> None:
    Path(path).write_bytes(dumps(model, metadata))


def load_model(path: str | Path) -> tuple[GenerativeModel, dict]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ModelFormatError(f"{path}: {exc.strerror}") from None
    try:
        return loads(blob)
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
