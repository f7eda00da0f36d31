"""Listening-test sessions, ratings log, screening and statistics.

A trial is one sentence: an audible reference plus five blinded clips
(the hidden reference among them). Listeners score each clip 0..100.
Ratings append to a JSONL log with the unblinded condition per row, so the
log alone reconstructs every statistic; the service can restart mid-test
without losing anything but unsubmitted scores.
"""

from __future__ import annotations

import csv
import io
import json
import random
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..errors import (
    DuplicateSubmission,
    EmptyAfterScreening,
    IncompleteRatings,
    NoTrialsLoaded,
    ScoreOutOfRange,
)

HIDDEN_REFERENCE = "hidden_reference"
SCREEN_MIN_SCORE = 90
SCREEN_MAX_VIOLATION_FRACTION = 0.15


@dataclass(frozen=True)
class TrialClip:
    slot: str
    file: str
    condition: str
    sample: int = 0


@dataclass(frozen=True)
class Trial:
    trial_id: str
    utterance: str
    reference_file: str
    clips: tuple[TrialClip, ...]

    def __post_init__(self) -> None:
        if len(self.clips) != 5:
            raise ValueError(f"trial {self.trial_id!r} must have 5 clips")
        conditions = [c.condition for c in self.clips]
        if len(set(conditions)) != 5:
            raise ValueError(f"trial {self.trial_id!r} repeats a condition")
        if HIDDEN_REFERENCE not in conditions:
            raise ValueError(f"trial {self.trial_id!r} lacks the hidden reference")

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(c.slot for c in self.clips)

    def condition_of(self, slot: str) -> TrialClip:
        for clip in self.clips:
            if clip.slot == slot:
                return clip
        raise KeyError(slot)


def load_trial_bundle(bundle_dir: str | Path) -> list[Trial]:
    """Read trials.json written by the export stage."""
    bundle_dir = Path(bundle_dir)
    manifest_path = bundle_dir / "trials.json"
    if not manifest_path.is_file():
        raise NoTrialsLoaded(f"no manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    trials = []
    for raw in manifest.get("trials", []):
        trials.append(
            Trial(
                trial_id=str(raw["trial_id"]),
                utterance=str(raw["utterance"]),
                reference_file=str(raw["reference"]),
                clips=tuple(
                    TrialClip(
                        slot=str(c["slot"]),
                        file=str(c["file"]),
                        condition=str(c["condition"]),
                        sample=int(c.get("sample", 0)),
                    )
                    for c in raw["clips"]
                ),
            )
        )
    if not trials:
        raise NoTrialsLoaded(f"manifest {manifest_path} lists no trials")
    return trials


class MushraService:
    """Session handling and rating collection over a trial bundle."""

    def __init__(
        self,
        trials: Sequence[Trial],
        log_path: str | Path,
        seed: int = 0,
        bundle_dir: Optional[str | Path] = None,
    ):
        self.trials = list(trials)
        self.by_id = {t.trial_id: t for t in self.trials}
        self.log_path = Path(log_path)
        self.seed = seed
        self.bundle_dir = Path(bundle_dir) if bundle_dir else None
        self._lock = threading.Lock()
        self._ratings: list[dict] = []
        self._completed: set[tuple[str, str]] = set()  # (listener, trial)
        if self.log_path.is_file():
            self._replay()

    def _replay(self) -> None:
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                self._ratings.append(row)
                self._completed.add((row["listener_id"], row["trial_id"]))

    # sessions

    def create_session(self, listener_id: Optional[str] = None) -> dict:
        if not self.trials:
            raise NoTrialsLoaded("no trials to serve")
        listener = listener_id or uuid.uuid4().hex[:12]
        order = [t.trial_id for t in self.trials]
        random.Random(f"{self.seed}|order|{listener}").shuffle(order)
        return {"listener_id": listener, "trials": order}

    def trial_view(self, trial_id: str, listener_id: str) -> dict:
        """What a listener sees: slots and clip URLs, nothing unblinded.

        The slot order is shuffled per (listener, trial) deterministically
        given the service seed.
        """
        trial = self.by_id.get(trial_id)
        if trial is None:
            raise KeyError(trial_id)
        slots = [
            {"slot": clip.slot, "clip_url": f"/clips/{trial_id}/{clip.file}"}
            for clip in trial.clips
        ]
        random.Random(f"{self.seed}|shuffle|{listener_id}|{trial_id}").shuffle(slots)
        return {
            "trial_id": trial_id,
            "reference_url": f"/clips/{trial_id}/{trial.reference_file}",
            "clips": slots,
        }

    def clip_path(self, trial_id: str, file_name: str) -> Path:
        trial = self.by_id.get(trial_id)
        if trial is None:
            raise KeyError(trial_id)
        known = {c.file for c in trial.clips} | {trial.reference_file}
        if file_name not in known:
            raise KeyError(file_name)
        if self.bundle_dir is None:
            raise NoTrialsLoaded("service has no bundle directory for clips")
        return self.bundle_dir / "trials" / trial_id / file_name

    # ratings

    def submit(
        self, listener_id: str, trial_id: str, scores: Mapping[str, int]
    ) -> list[dict]:
        trial = self.by_id.get(trial_id)
        if trial is None:
            raise KeyError(trial_id)
        expected = set(trial.slots)
        got = set(scores.keys())
        if got != expected:
            raise IncompleteRatings(
                f"expected scores for slots {sorted(expected)}, got {sorted(got)}"
            )
        for slot, score in scores.items():
            if isinstance(score, bool) or not isinstance(score, int):
                raise ScoreOutOfRange(f"slot {slot}: score must be an integer")
            if not 0 <= score <= 100:
                raise ScoreOutOfRange(f"slot {slot}: {score} outside 0..100")

        with self._lock:
            if (listener_id, trial_id) in self._completed:
                raise DuplicateSubmission(
                    f"listener {listener_id!r} already rated trial {trial_id!r}"
                )
            submitted_at = datetime.now(timezone.utc).isoformat()
            rows = []
            for clip in trial.clips:
                rows.append(
                    {
                        "listener_id": listener_id,
                        "trial_id": trial_id,
                        "utterance": trial.utterance,
                        "slot": clip.slot,
                        "condition": clip.condition,
                        "sample": clip.sample,
                        "score": int(scores[clip.slot]),
                        "submitted_at": submitted_at,
                    }
                )
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_path, "a", encoding="utf-8") as fh:
                for row in rows:
                    fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")
                fh.flush()
            self._ratings.extend(rows)
            self._completed.add((listener_id, trial_id))
        return rows

    def completed_trials(self, listener_id: str) -> set[str]:
        return {t for (l, t) in self._completed if l == listener_id}

    @property
    def ratings(self) -> list[dict]:
        return list(self._ratings)

    def stats(self) -> dict:
        return compute_stats(self._ratings, self.trials)

    def export_csv(self) -> str:
        return export_csv(self._ratings)


def screen_listeners(ratings: Iterable[dict]) -> tuple[set[str], set[str]]:
    """Split listeners into (kept, excluded).

    A listener is excluded iff they scored the hidden reference below 90 on
    strictly more than 15% of their completed trials. Exactly 15% stays in.
    """
    hidden: dict[str, list[int]] = {}
    trials_of: dict[str, set[str]] = {}
    for row in ratings:
        listener = row["listener_id"]
        trials_of.setdefault(listener, set()).add(row["trial_id"])
        if row["condition"] == HIDDEN_REFERENCE:
            hidden.setdefault(listener, []).append(int(row["score"]))
    kept, excluded = set(), set()
    for listener, trials in trials_of.items():
        scores = hidden.get(listener, [])
        violations = sum(1 for s in scores if s < SCREEN_MIN_SCORE)
        if violations > SCREEN_MAX_VIOLATION_FRACTION * len(trials):
            excluded.add(listener)
        else:
            kept.add(listener)
    return kept, excluded


def _quartiles(scores: Sequence[int]) -> tuple[float, float, float]:
    arr = np.asarray(scores, dtype=np.float64)
    q1, median, q3 = np.percentile(arr, [25, 50, 75])
    return float(q1), float(median), float(q3)


def compute_stats(ratings: Sequence[dict], trials: Sequence[Trial]) -> dict:
    """Screening, then per-condition and per-sentence score summaries.

    Presentation order never enters: rows carry no order, so any listener
    shuffle yields identical stats given identical scores.
    """
    kept, excluded = screen_listeners(ratings)
    kept_rows = [r for r in ratings if r["listener_id"] in kept]
    if not kept_rows:
        raise EmptyAfterScreening("no ratings survive listener screening")

    by_condition: dict[str, list[int]] = {}
    for row in kept_rows:
        by_condition.setdefault(row["condition"], []).append(int(row["score"]))
    conditions = {}
    for condition, scores in sorted(by_condition.items()):
        q1, median, q3 = _quartiles(scores)
        conditions[condition] = {
            "n": len(scores),
            "mean": float(np.mean(scores)),
            "median": median,
            "q1": q1,
            "q3": q3,
        }

    utterance_of = {t.trial_id: t.utterance for t in trials}
    per_sentence: dict[str, dict[str, list[int]]] = {}
    for row in kept_rows:
        utterance = row.get("utterance") or utterance_of.get(row["trial_id"], "")
        if row["condition"] in ("pred_k1", "rand_k1"):
            per_sentence.setdefault(utterance, {}).setdefault(
                row["condition"], []
            ).append(int(row["score"]))
    sentences = {
        utterance: {
            condition: float(np.mean(scores))
            for condition, scores in sorted(groups.items())
        }
        for utterance, groups in sorted(per_sentence.items())
    }

    return {
        "listeners_kept": sorted(kept),
        "listeners_excluded": sorted(excluded),
        "ratings_kept": len(kept_rows),
        "conditions": conditions,
        "per_sentence": sentences,
    }


def export_csv(ratings: Sequence[dict]) -> str:
    """Every rating, unblinded, one row per (listener, trial, clip)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["listener_id", "trial_id", "utterance", "slot", "condition", "sample", "score", "submitted_at"]
    )
    for row in ratings:
        writer.writerow(
            [
                row["listener_id"],
                row["trial_id"],
                row.get("utterance", ""),
                row.get("slot", ""),
                row["condition"],
                row.get("sample", 0),
                row["score"],
                row.get("submitted_at", ""),
            ]
        )
    return buffer.getvalue()
