"""Start a review service populated with the engineered pipeline fixture.

Used by the frontend's scripted-session tests: builds the fixture manifest,
runs the annotation pipeline with deterministic mocks so the three review
queues hold real items, then serves the API (and the built UI when present)
on the requested port.  State lives under --workdir so a later pipeline
resume can pick up the recorded decisions.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import uvicorn

from cirlab.core.manifest import save_manifest
from cirlab.fixtures import build_pipeline_fixture
from cirlab.pipeline.clients import mock_clients
from cirlab.pipeline.runner import run_pipeline
from cirlab.pipeline.stages import PipelineConfig
from cirlab.review.service import create_app
from cirlab.review.store import LogicalClock, ReviewStore


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--port", type=int, required=True)
    ap.add_argument("--workdir", required=True)
    ap.add_argument("--static", default=None)
    args = ap.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    manifest, design, backend = build_pipeline_fixture()
    save_manifest(manifest, workdir / "fixture.jsonl")
    store = ReviewStore(path=workdir / "review-log.jsonl", clock=LogicalClock())
    result = run_pipeline(manifest, PipelineConfig(), mock_clients(), store, backend)
    save_manifest(result.manifest, workdir / "after-run1.jsonl")
    (workdir / "design.json").write_text(
        json.dumps(
            {
                "expected_open_queues": design.expected_open_queues(),
                "compress_review_id": design.compress_review_id,
                "text_flag_id": design.text_flag_id,
                "image_flag_id": design.image_flag_id,
                "resume_pair_id": design.resume_pair_id,
            }
        ),
        "utf-8",
    )

    app = create_app(store, manifest=result.manifest, static_dir=args.static)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
