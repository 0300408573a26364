from __future__ import annotations

from typing import Final, Literal, TypeAlias

RunStage: TypeAlias = Literal[
    "gen_problems",
    "train",
    "rollout",
    "update",
    "evaluate",
    "plot",
]

STAGE_GEN_PROBLEMS: Final[RunStage] = "gen_problems"
STAGE_TRAIN: Final[RunStage] = "train"
STAGE_ROLLOUT: Final[RunStage] = "rollout"
STAGE_UPDATE: Final[RunStage] = "update"
STAGE_EVALUATE: Final[RunStage] = "evaluate"
STAGE_PLOT: Final[RunStage] = "plot"

RUN_STAGES: Final[tuple[RunStage, ...]] = (
    STAGE_GEN_PROBLEMS,
    STAGE_TRAIN,
    STAGE_ROLLOUT,
    STAGE_UPDATE,
    STAGE_EVALUATE,
    STAGE_PLOT,
)

RunEventType: TypeAlias = Literal[
    "run_started",
    "run_completed",
    "run_failed",
    "batch_completed",
    "checkpoint_saved",
    "checkpoint_loaded",
    "episode_aborted",
    "update_aborted",
    "update_early_stopped",
    "tournament_pair_completed",
]

EVENT_RUN_STARTED: Final[RunEventType] = "run_started"
EVENT_RUN_COMPLETED: Final[RunEventType] = "run_completed"
EVENT_RUN_FAILED: Final[RunEventType] = "run_failed"
EVENT_BATCH_COMPLETED: Final[RunEventType] = "batch_completed"
EVENT_CHECKPOINT_SAVED: Final[RunEventType] = "checkpoint_saved"
EVENT_CHECKPOINT_LOADED: Final[RunEventType] = "checkpoint_loaded"
EVENT_EPISODE_ABORTED: Final[RunEventType] = "episode_aborted"
EVENT_UPDATE_ABORTED: Final[RunEventType] = "update_aborted"
EVENT_UPDATE_EARLY_STOPPED: Final[RunEventType] = "update_early_stopped"
EVENT_TOURNAMENT_PAIR_COMPLETED: Final[RunEventType] = "tournament_pair_completed"

# Random substream namespaces. Training and evaluation problems never share one.
STREAM_TRAIN: Final[int] = 0
STREAM_EVAL: Final[int] = 1
STREAM_GEN_PROBLEMS: Final[int] = 2
STREAM_UPDATE: Final[int] = 3


def stage_display_name(stage: str | None) -> str:
    if not stage:
        return "run"
    if stage == STAGE_GEN_PROBLEMS:
        return "problem generation"
    if stage == STAGE_EVALUATE:
        return "evaluation"
    return stage.replace("_", " ")
