"""File formats: example and response corpora as JSON lines.

Examples:  {"id", "task", "question", "ground_truth", "option_count"?, "answer_space"?}
Responses: {"example_id", "source": "teacher"|"student", "sample_index", "text"}

Ground-truth / answer-space values are written in the natural shape of the
task (a two-list for segments, four-list for boxes, a letter, "yes"/"no",
a number, or a string) — the task field disambiguates on read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from mskd.tasks import (
    AnswerPayload,
    Binary,
    Number,
    OptionLetter,
    SpatialBox,
    SupervisionExample,
    TaskType,
    TemporalSegment,
    Text,
)


class CorpusError(ValueError):
    """A corpus file failed validation."""


@dataclass(frozen=True, slots=True)
class ResponseRow:
    example_id: str
    source: str
    sample_index: int
    text: str


def payload_to_json(payload: AnswerPayload):
    if isinstance(payload, TemporalSegment):
        return [payload.start, payload.end]
    if isinstance(payload, SpatialBox):
        return [payload.x1, payload.y1, payload.x2, payload.y2]
    if isinstance(payload, OptionLetter):
        return payload.letter
    if isinstance(payload, Binary):
        return "yes" if payload.value else "no"
    if isinstance(payload, Number):
        return payload.value
    if isinstance(payload, Text):
        return payload.value
    raise TypeError(f"not an answer payload: {payload!r}")


def payload_from_json(value, task: TaskType) -> AnswerPayload:
    try:
        if task is TaskType.TEMPORAL_GROUNDING:
            start, end = value
            return TemporalSegment(float(start), float(end))
        if task is TaskType.SPATIAL_GROUNDING:
            x1, y1, x2, y2 = value
            return SpatialBox(float(x1), float(y1), float(x2), float(y2))
        if task is TaskType.MULTIPLE_CHOICE:
            letter = str(value).strip().upper()
            if len(letter) != 1 or not letter.isascii() or not letter.isalpha():
                raise ValueError("option letter must be a single ASCII letter")
            return OptionLetter(letter)
        if task is TaskType.BINARY_QA:
            if isinstance(value, bool):
                return Binary(value)
            word = str(value).strip().lower()
            if word not in ("yes", "no"):
                raise ValueError("binary value must be yes/no or a bool")
            return Binary(word == "yes")
        if task is TaskType.NUMERICAL:
            return Number(float(value))
        if not isinstance(value, str):
            raise ValueError("text payload must be a string")
        return Text(value)
    except (TypeError, ValueError) as exc:
        raise CorpusError(f"bad payload value {value!r} for task {task.value}") from exc


def example_to_json(ex: SupervisionExample) -> dict:
    obj: dict = {"id": ex.id, "task": ex.task.value, "question": ex.question}
    if ex.ground_truth is not None:
        obj["ground_truth"] = payload_to_json(ex.ground_truth)
    if ex.option_count is not None:
        obj["option_count"] = ex.option_count
    if ex.answer_space is not None:
        obj["answer_space"] = [payload_to_json(p) for p in ex.answer_space]
    return obj


def example_from_json(obj: dict) -> SupervisionExample:
    try:
        task = TaskType(obj["task"])
    except (KeyError, ValueError) as exc:
        raise CorpusError(f"bad or missing task in example record: {obj!r}") from exc
    for key in ("id", "question"):
        if key not in obj:
            raise CorpusError(f"example record missing {key!r}: {obj!r}")
    gt = obj.get("ground_truth")
    space = obj.get("answer_space")
    try:
        return SupervisionExample(
            id=str(obj["id"]),
            task=task,
            question=str(obj["question"]),
            ground_truth=None if gt is None else payload_from_json(gt, task),
            option_count=obj.get("option_count"),
            answer_space=None
            if space is None
            else tuple(payload_from_json(v, task) for v in space),
        )
    except ValueError as exc:
        raise CorpusError(str(exc)) from exc


def write_examples(examples: Iterable[SupervisionExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_json(ex), sort_keys=True) + "\n")


def read_examples(path: str | Path) -> list[SupervisionExample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON") from exc
            out.append(example_from_json(obj))
    return out


def write_responses(rows: Iterable[ResponseRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(
                json.dumps(
                    {
                        "example_id": row.example_id,
                        "source": row.source,
                        "sample_index": row.sample_index,
                        "text": row.text,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_responses(path: str | Path) -> list[ResponseRow]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON") from exc
            try:
                out.append(
                    ResponseRow(
                        example_id=str(obj["example_id"]),
                        source=str(obj["source"]),
                        sample_index=int(obj["sample_index"]),
                        text=str(obj["text"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad response record") from exc
    for row in out:
        if row.source not in ("teacher", "student"):
            raise CorpusError(f"bad source {row.source!r} for example {row.example_id}")
    return out
