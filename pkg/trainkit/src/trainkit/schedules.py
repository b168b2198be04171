"""Training schedules and augmentation settings.

A schedule is a fixed three-stage plan: first only the classifier head
trains, then the head plus the last feature block, then the whole
network. Each stage carries its own epoch count and learning rate.
The named presets reproduce the published per-dataset settings.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from trainkit import TrainkitError

# Scopes in the order stages must use them.
STAGE_SCOPES = ("head_only", "head_plus_last_block", "full")

ADAM_BETAS = (0.9, 0.9)


@dataclass(frozen=True)
class Stage:
    """One phase of the staged fine-tune.

    Attributes:
        epochs: number of passes over the training split.
        learning_rate: Adam learning rate for this stage.
        trainable_scope: one of STAGE_SCOPES.
    """

    epochs: int
    learning_rate: float
    trainable_scope: str

    def __post_init__(self) -> None:
        if self.trainable_scope not in STAGE_SCOPES:
            raise TrainkitError(
                f"unknown trainable_scope {self.trainable_scope!r}; "
                f"expected one of {STAGE_SCOPES}"
            )
        if self.epochs < 1:
            raise TrainkitError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise TrainkitError(
                f"learning_rate must be positive, got {self.learning_rate}"
            )


@dataclass(frozen=True)
class StageSchedule:
    """An ordered three-stage unfreeze plan.

    Stages must widen monotonically: head_only, then
    head_plus_last_block, then full. Anything else is a config error.
    """

    name: str
    stages: tuple[Stage, ...]
    betas: tuple[float, float] = ADAM_BETAS

    def __post_init__(self) -> None:
        if len(self.stages) != 3:
            raise TrainkitError(
                f"schedule {self.name!r} must have exactly 3 stages, "
                f"got {len(self.stages)}"
            )
        scopes = tuple(s.trainable_scope for s in self.stages)
        if scopes != STAGE_SCOPES:
            raise TrainkitError(
                f"schedule {self.name!r} stages must use scopes "
                f"{STAGE_SCOPES} in order, got {scopes}"
            )

    def tuples(self) -> tuple[tuple[int, float], ...]:
        """The (epochs, learning_rate) pairs, stage by stage."""
        return tuple((s.epochs, s.learning_rate) for s in self.stages)


def _schedule(name: str, *pairs: tuple[int, float]) -> StageSchedule:
    stages = tuple(
        Stage(epochs=e, learning_rate=lr, trainable_scope=scope)
        for (e, lr), scope in zip(pairs, STAGE_SCOPES)
    )
    return StageSchedule(name=name, stages=stages)


# Published per-dataset stage settings: (epochs, lr) for head_only,
# head_plus_last_block, full. Do not round-trip these through floats
# of your own; they are compared exactly in tests.
PRESETS: dict[str, StageSchedule] = {
    s.name: s
    for s in (
        _schedule("cdc", (1, 1e-2), (1, 1e-5), (8, 1e-8)),
        _schedule("cdc-bhc", (1, 1e-1), (1, 1e-4), (4, 1e-7)),
        _schedule("metis-s112-p224", (1, 1e-1), (1, 1e-4), (4, 1e-7)),
        _schedule("metis-s224-p224", (1, 1e-2), (1, 1e-5), (4, 1e-8)),
        _schedule("web-s112-p224", (1, 1e-1), (1, 1e-4), (4, 1e-7)),
        _schedule("web-s224-p224", (1, 1e-2), (1, 1e-5), (4, 1e-8)),
        _schedule("concat-s112-p224", (1, 1e-2), (1, 1e-5), (1, 1e-8)),
        _schedule("concat-s224-p224", (1, 1e-2), (1, 1e-5), (4, 1e-8)),
    )
}


def preset(name: str) -> StageSchedule:
    """Look up a named preset schedule.

    Raises:
        TrainkitError: if the name is unknown (message lists choices).
    """
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise TrainkitError(
            f"unknown schedule preset {name!r}; known presets: {known}"
        ) from None


@dataclass(frozen=True)
class AugmentSpec:
    """Train-time augmentation settings.

    brightness/contrast/saturation are torchvision-style jitter factors
    (0 disables that jitter). jpeg_quality is an inclusive integer range
    the per-sample encode quality is drawn from.
    """

    brightness: float = 0.2
    contrast: float = 0.2
    saturation: float = 0.2
    jpeg_quality: tuple[int, int] = (50, 100)

    def __post_init__(self) -> None:
        for f in (self.brightness, self.contrast, self.saturation):
            if f < 0:
                raise TrainkitError(f"jitter factors must be >= 0, got {f}")
        lo, hi = self.jpeg_quality
        if not (1 <= lo <= hi <= 100):
            raise TrainkitError(
                f"jpeg_quality must satisfy 1 <= lo <= hi <= 100, "
                f"got ({lo}, {hi})"
            )

    def draw_jpeg_quality(self, rng: random.Random) -> int:
        """Draw one encode quality, uniform over the inclusive range."""
        lo, hi = self.jpeg_quality
        return rng.randint(lo, hi)
