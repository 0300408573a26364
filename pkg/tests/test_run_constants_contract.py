from __future__ import annotations

import unittest

from app import run_constants


class RunConstantsContractTest(unittest.TestCase):
    def test_stage_constants_are_stable(self) -> None:
        self.assertEqual(run_constants.STAGE_GEN_PROBLEMS, "gen_problems")
        self.assertEqual(run_constants.STAGE_TRAIN, "train")
        self.assertEqual(run_constants.STAGE_ROLLOUT, "rollout")
        self.assertEqual(run_constants.STAGE_UPDATE, "update")
        self.assertEqual(run_constants.STAGE_EVALUATE, "evaluate")
        self.assertEqual(len(set(run_constants.RUN_STAGES)), len(run_constants.RUN_STAGES))

    def test_event_constants_include_core_run_flow(self) -> None:
        self.assertEqual(run_constants.EVENT_RUN_STARTED, "run_started")
        self.assertEqual(run_constants.EVENT_RUN_COMPLETED, "run_completed")
        self.assertEqual(run_constants.EVENT_RUN_FAILED, "run_failed")
        self.assertEqual(run_constants.EVENT_BATCH_COMPLETED, "batch_completed")
        self.assertEqual(run_constants.EVENT_CHECKPOINT_SAVED, "checkpoint_saved")

    def test_random_streams_are_distinct(self) -> None:
        streams = (
            run_constants.STREAM_TRAIN,
            run_constants.STREAM_EVAL,
            run_constants.STREAM_GEN_PROBLEMS,
            run_constants.STREAM_UPDATE,
        )
        self.assertEqual(len(set(streams)), len(streams))

    def test_stage_display_name_contract(self) -> None:
        self.assertEqual(run_constants.stage_display_name(None), "run")
        self.assertEqual(run_constants.stage_display_name("gen_problems"), "problem generation")
        self.assertEqual(run_constants.stage_display_name("evaluate"), "evaluation")
        self.assertEqual(run_constants.stage_display_name("rollout"), "rollout")


if __name__ == "__main__":
    unittest.main()
