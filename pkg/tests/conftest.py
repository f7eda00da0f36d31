"""Shared fixtures: a synthetic chain corpus and a full mock pipeline run.

The chain corpus is built for measurable separations: a six-word vocabulary
(all in one length bin) gives the random condition an exact-match rate near
1/6, and two- or three-way bigram continuations keep the n-gram predictor
well above that without being perfect.
"""

from __future__ import annotations

import json
import random
import time
from pathlib import Path
from types import SimpleNamespace

import pytest
from hypothesis import settings

settings.register_profile("ci", derandomize=True, deadline=None)
settings.load_profile("ci")

ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []

CHAIN_SEED = 97
CHAIN_TRANSITIONS = {
    "cat": (("sat", 6), ("ran", 4)),
    "dog": (("ran", 6), ("sat", 4)),
    "fox": (("sat", 5), ("ran", 5)),
    "sat": (("dog", 4), ("fox", 3), ("mat", 3)),
    "ran": (("cat", 4), ("mat", 3), ("fox", 3)),
    "mat": (("dog", 5), ("cat", 5)),
}
CHAIN_STARTS = (("cat", 4), ("dog", 3), ("fox", 3))
CHAIN_VOCAB = sorted(CHAIN_TRANSITIONS)


def make_chain_corpus(
    num_sentences: int = 64, words_per_sentence: int = 8, seed: int = CHAIN_SEED
) -> str:
    rng = random.Random(seed)

    def draw(options):
        words = [w for w, _ in options]
        weights = [c for _, c in options]
        return rng.choices(words, weights=weights, k=1)[0]

    lines = []
    for _ in range(num_sentences):
        word = draw(CHAIN_STARTS)
        sentence = [word]
        while len(sentence) < words_per_sentence:
            word = draw(CHAIN_TRANSITIONS[word])
            sentence.append(word)
        lines.append(" ".join(sentence))
    return "\n".join(lines) + "\n"


def write_experiment(root: Path, corpus_text: str, **overrides) -> Path:
    """Drop a corpus and config into `root`; returns the config path."""
    (root / "corpus.txt").write_text(corpus_text, encoding="utf-8")
    cfg = {
        "corpus": "corpus.txt",
        "output_dir": "out",
        "num_samples": 5,
        "top_k": 30,
        "seed": CHAIN_SEED,
    }
    cfg.update(overrides)
    config_path = root / "config.json"
    config_path.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return config_path


@pytest.fixture(scope="session")
def acceptance_run(tmp_path_factory):
    """One full mock pipeline run over the chain corpus, with timings."""
    from prosogap.config import load_config
    from prosogap.pipeline import run_evaluate, run_prepare, run_synthesize

    root = tmp_path_factory.mktemp("acceptance")
    config_path = write_experiment(root, make_chain_corpus())
    cfg = load_config(config_path)

    timings = {}
    start = time.perf_counter()
    assert run_prepare(cfg) == 0
    timings["prepare"] = time.perf_counter() - start

    start = time.perf_counter()
    assert run_synthesize(cfg) == 0
    timings["synthesize"] = time.perf_counter() - start

    start = time.perf_counter()
    assert run_evaluate(cfg) == 0
    timings["evaluate"] = time.perf_counter() - start

    return SimpleNamespace(
        root=root,
        config_path=config_path,
        cfg=cfg,
        out=cfg.output_dir,
        timings=timings,
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, status, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status} {name}: {detail}")
