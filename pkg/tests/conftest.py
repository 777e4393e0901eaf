import numpy as np
import pytest

from fusebench.imgcore import (
    Frame,
    FrameSequence,
    Image,
    ground_truth,
    random_scene,
    save_image,
    synth_bracket,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_sequence(frame_data, evs, color_space=None):
    """Wrap raw arrays into an EV-tagged FrameSequence."""
    frames = tuple(Frame(Image(d, color_space), ev)
                   for d, ev in zip(frame_data, evs))
    return FrameSequence(frames)


def write_scene(scene_dir, width=64, height=48, evs=(-24, 0, 1, 2),
                seed=0, with_gt=True):
    """Materialize one synthetic scene on disk in the dataset layout."""
    scene_dir.mkdir(parents=True, exist_ok=True)
    spec = random_scene(width, height, evs, seed=seed)
    for frame in synth_bracket(spec, evs, seed=seed):
        save_image(frame.image, scene_dir / f"ev_{frame.ev}.png")
    if with_gt:
        save_image(ground_truth(spec), scene_dir / "gt.png")
    return scene_dir
