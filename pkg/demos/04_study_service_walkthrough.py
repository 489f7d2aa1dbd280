"""End-to-end study-service walkthrough, in process (no network needed).

Creates a small synthetic catalog, runs rater sessions against the study
engine (one honest rater, one inattentive rater who fails the attention
checks), closes the stage, and then restarts the service from its log to
show bit-identical score recovery.
"""

import csv
import tempfile
from pathlib import Path

from PIL import Image

from vizcomplexity import synth
from vizcomplexity.dataset import load_catalog
from vizcomplexity.ranking import RankingConfig
from vizcomplexity.studysvc import CONTROL_IMAGE_ID, Study


def build_catalog(root: Path) -> Path:
    images = {
        f"img-{k}": synth.noise(64, 64, seed=k) if k % 2
        else synth.rectangles(64, 64, [(8, 8, 12 + 4 * k, 10)])
        for k in range(8)
    }
    rows = []
    for img_id, img in images.items():
        path = root / f"{img_id}.png"
        Image.fromarray(img.pixels).save(path)
        rows.append((img_id, str(path), "demo"))
    catalog = root / "catalog.csv"
    with open(catalog, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "path", "tags"])
        writer.writerows(rows)
    return catalog


def run_session(study, rater, fail_attention=False):
    session = study.create_session(rater, (1280, 800))
    while study.get_session(session.session_id).status == "active":
        trial = study.next_trial(session.session_id)
        a, b = trial["pair"]
        if trial["is_attention_check"]:
            choice = CONTROL_IMAGE_ID if fail_attention else a
        else:
            choice = max(a, b)  # deterministic stand-in for a human
        study.record_response(session.session_id, trial["token"], choice, 1.2)
    status = study.get_session(session.session_id).status
    print(f"  {rater}: {len(session.queue)} trials served "
          f"({len(session.attention_positions)} attention) -> {status}")
    return session


def main():
    root = Path(tempfile.mkdtemp(prefix="study-demo-"))
    catalog = build_catalog(root)
    log = root / "study.jsonl"
    cfg = RankingConfig(stage_pair_count=10)
    study = Study(load_catalog(catalog), log_path=log, cfg=cfg, seed=11)

    print("stage 0 sessions:")
    run_session(study, "attentive-rater")
    run_session(study, "inattentive-rater", fail_attention=True)
    report = study.close_stage()
    print(f"stage closed: {report['valid_trials']} valid trials "
          f"(the rejected session contributed none)")

    print("\ntop scores after stage 0:")
    scores = study.scores()
    for img in sorted(scores, key=lambda i: -scores[i]["mu"])[:3]:
        s = scores[img]
        print(f"  {img}: mu={s['mu']:.2f} sigma={s['sigma']:.2f}")

    print("\nrestarting from the append-only log ...")
    twin = Study(load_catalog(catalog), log_path=log, cfg=cfg, seed=11)
    assert twin.scores() == study.scores()
    print("replayed scores are bit-identical to the live run")
    print(f"log: {log}")


if __name__ == "__main__":
    main()
