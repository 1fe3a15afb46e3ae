"""Corpus JSONL: one ``{"id", "segments": [{"tag", "text", "supervised"}]}`` per line."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from ..errors import FormatError, IoError, MissingFile
from .serialize import Segment, TrainingSample


def sample_to_json(sample: TrainingSample) -> dict:
    return {
        "id": sample.id,
        "segments": [{"tag": s.tag, "text": s.text, "supervised": s.supervised} for s in sample.segments],
    }


def write_corpus(samples: Iterable[TrainingSample], path) -> None:
    samples = list(samples)
    for s in samples:
        if not s.segments:
            raise FormatError(f"sample {s.id} has no segments")
    lines = [json.dumps(sample_to_json(s), ensure_ascii=False, sort_keys=True) for s in samples]
    try:
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write corpus {path}: {exc}") from exc


def read_corpus(path) -> list[TrainingSample]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    samples = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                segs = tuple(Segment(str(s["tag"]), str(s["text"]), bool(s["supervised"])) for s in obj["segments"])
                sample = TrainingSample(str(obj["id"]), segs)
            except FormatError as exc:
                raise FormatError(exc.detail, lineno, path) from None
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(f"bad sample: {exc}", lineno, path) from None
            if not sample.segments:
                raise FormatError("sample has no segments", lineno, path)
            samples.append(sample)
    return samples
