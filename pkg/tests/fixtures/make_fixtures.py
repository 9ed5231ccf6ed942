"""Regenerate the committed fixture files and shipped data bundles.

Run from the repository root:

    python tests/fixtures/make_fixtures.py

Fixture values are frozen into JSON; this script exists so they can be
rebuilt or extended deterministically. The desk bundle and bench suite are
only accepted if the best joint score is nondecreasing in the beam size for
every algorithm at its default weight preset, so tests may assert that
property on shipped files.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "src"))

from jointbeam.core import Vocabulary  # noqa: E402
from jointbeam.models import (  # noqa: E402
    CtcGrid,
    ModelBundle,
    TableAttention,
    TableTransducer,
    save_models,
)
from jointbeam.search import (  # noqa: E402
    ALGORITHMS,
    DEFAULT_PRESET,
    WEIGHT_PRESETS,
    SearchConfig,
    run_search,
)
from jointbeam.synthetic import random_table_bundle, seeded_bundle  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"
DATA = ROOT / "src" / "jointbeam" / "data"


def write_named_fixtures() -> None:
    vocab = Vocabulary(("a",))

    grid = CtcGrid.from_linear([[0.5, 0.5], [0.5, 0.5]], vocab)
    save_models(ModelBundle(vocab=vocab, ctc_grid=grid, frames=2),
                FIXTURES / "grid_t2_v1.json")

    tdx = TableTransducer(vocab, frames=1, s_max=1, linear_rows={
        (0, 0, None): np.array([0.6, 0.4]),
        (0, 1, 0): np.array([0.3, 0.7]),
    })
    save_models(ModelBundle(vocab=vocab, transducer=tdx, frames=1),
                FIXTURES / "tdx_t1_v1.json")

    att = TableAttention(vocab, s_max=2, linear_rows={
        (0, None): np.array([0.7, 0.3]),
        (1, 0): np.array([0.1, 0.9]),
        (2, 0): np.array([0.05, 0.95]),
    })
    save_models(ModelBundle(vocab=vocab, attention=att),
                FIXTURES / "att_v1.json")


def beam_scores_monotonic(bundle: ModelBundle, k_beams: list[int],
                          max_output_len: int | None = None) -> bool:
    for algorithm in ALGORITHMS:
        weights = WEIGHT_PRESETS[DEFAULT_PRESET[algorithm]]
        prev = float("-inf")
        for k in k_beams:
            cfg = SearchConfig(algorithm=algorithm, weights=weights, k_beam=k,
                               k_pre=max(k, -(-3 * k // 2)),
                               max_output_len=max_output_len)
            joint = run_search(bundle, cfg).entries[0].joint
            if joint < prev - 1e-12:
                return False
            prev = joint
    return True


def write_desk_bundle() -> None:
    exhaustive = sum(2**s for s in range(5))
    for seed in range(100):
        bundle = random_table_bundle(seed, frames=4, vocab_size=2, s_max=4)
        if beam_scores_monotonic(bundle, [1, 2, 4, exhaustive], max_output_len=4):
            save_models(bundle, DATA / "desk_bundle.json")
            print(f"desk bundle: seed {seed}")
            return
    raise RuntimeError("no seed produced a beam-monotonic desk bundle")


def write_suite() -> None:
    specs = [("suite_t12.json", 12, 101), ("suite_t16.json", 16, 202)]
    for name, frames, base_seed in specs:
        for seed in range(base_seed, base_seed + 100):
            bundle = seeded_bundle(seed, frames=frames, vocab_size=6,
                                   concentration=3.0)
            if beam_scores_monotonic(bundle, [1, 2, 4, 8, 20]):
                save_models(bundle, DATA / name)
                print(f"{name}: seed {seed}")
                break
        else:
            raise RuntimeError(f"no seed produced a beam-monotonic {name}")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    DATA.mkdir(parents=True, exist_ok=True)
    write_named_fixtures()
    write_desk_bundle()
    write_suite()


if __name__ == "__main__":
    main()
