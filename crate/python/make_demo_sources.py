#!/usr/bin/env python3
"""Write a small demo sources.jsonl for mock pipeline runs.

Each line is a rollout bundle over a source problem: the question, its
reference answer, and judged rollouts whose first correct entry carries
the verified solution steps. Partial-success problems are the ones the
extract stage decomposes.

Usage: python3 python/make_demo_sources.py [out_dir]
"""

import json
import sys
from pathlib import Path

STEPS = [
    ["restate the given quantities", "derive the intermediate value", "substitute it", "simplify", "state the result"],
    ["set up the governing equation", "isolate the unknown", "solve", "verify the solution"],
    ["model the scenario", "derive the first relation", "derive the second relation", "combine them", "reduce", "conclude"],
]


def bundle(i: int, dataset: str, label: str) -> dict:
    steps = [f"demo-{i:03d}: {s}" for s in STEPS[i % len(STEPS)]]
    verdicts = {
        "partial": ["incorrect", "correct", "correct"],
        "all_correct": ["correct", "correct", "correct"],
        "all_wrong": ["incorrect", "incorrect", "incorrect"],
    }[label]
    return {
        "question_id": f"demo-{i:03d}",
        "state": {
            "question": f"Demo problem {i:03d}: compute the final quantity from the stated setup.",
            "answer": f"answer-{i:03d}",
            "solution_steps": [],
            "step_index": 0,
        },
        "rollouts": [
            {
                "response": f"raw rollout {i:03d}/{j}",
                "parsed_steps": steps,
                "parsed_final_answer": f"answer-{i:03d}",
                "verdict": verdict,
            }
            for j, verdict in enumerate(verdicts)
        ],
        "label": label,
        "source_dataset_id": dataset,
    }


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "sources.jsonl"
    bundles = [bundle(i, "demo-corpus", "partial") for i in range(8)]
    bundles.append(bundle(8, "demo-corpus", "all_correct"))
    bundles.append(bundle(9, "cais__hle", "partial"))  # removed by provenance filtering
    with path.open("w", encoding="utf-8") as fh:
        for item in bundles:
            fh.write(json.dumps(item, ensure_ascii=False) + "\n")
    print(f"wrote {len(bundles)} source bundles to {path}")


if __name__ == "__main__":
    main()
