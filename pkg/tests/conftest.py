import numpy as np
import pytest

from mskd.tasks import (
    Binary,
    OptionLetter,
    SupervisionExample,
    TaskType,
    TemporalSegment,
    Text,
    option_letters,
)


def mk_mcq(idx=0, gt="B", n_options=4):
    letters = option_letters(n_options)
    return SupervisionExample(
        id=f"mcq-{idx}",
        task=TaskType.MULTIPLE_CHOICE,
        question=f"question {idx}",
        ground_truth=OptionLetter(gt),
        option_count=n_options,
        answer_space=tuple(OptionLetter(c) for c in letters),
    )


def mk_binary(idx=0, gt=True):
    return SupervisionExample(
        id=f"bin-{idx}",
        task=TaskType.BINARY_QA,
        question=f"question {idx}",
        ground_truth=Binary(gt),
        answer_space=(Binary(True), Binary(False)),
    )


def mk_temporal(idx=0, gt=(0.2, 0.6), space=None):
    if space is None:
        space = (
            TemporalSegment(0.0, 0.4),
            TemporalSegment(0.2, 0.6),
            TemporalSegment(0.4, 0.8),
            TemporalSegment(0.6, 1.0),
        )
    return SupervisionExample(
        id=f"tg-{idx}",
        task=TaskType.TEMPORAL_GROUNDING,
        question=f"question {idx}",
        ground_truth=TemporalSegment(*gt),
        answer_space=space,
    )


def mk_open(idx=0, n_slots=4):
    return SupervisionExample(
        id=f"open-{idx}",
        task=TaskType.OPEN_ENDED,
        question=f"question {idx}",
        answer_space=tuple(Text(f"caption {idx}-{j}") for j in range(n_slots)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
