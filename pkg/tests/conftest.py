import numpy as np
import pytest

from motpipe.geometry import BBox
from motpipe.mot_io import Detection, PipelineConfig


@pytest.fixture
def cfg() -> PipelineConfig:
    return PipelineConfig()


def mkdet(frame: int, x: float, y: float, w: float, h: float, score: float, **kw) -> Detection:
    return Detection(frame, BBox(x, y, w, h), score, **kw)


def random_box(rng: np.random.Generator, span: float = 200.0) -> BBox:
    return BBox(
        float(rng.uniform(0, span)),
        float(rng.uniform(0, span)),
        float(rng.uniform(5, 60)),
        float(rng.uniform(5, 60)),
    )
