"""Shipped synthetic model bundles.

`desk_bundle.json` is a small fully table-backed bundle (4 frames, 2 tokens,
all three decoder sections) whose best joint score is nondecreasing in the
beam size for every algorithm at its default preset. The `suite_*.json`
bundles are larger hash-model utterances for benchmarking. All were produced
by tests/fixtures/make_fixtures.py.
"""

from pathlib import Path

_HERE = Path(__file__).parent


def data_path(name: str) -> Path:
    return _HERE / name


def desk_bundle_path() -> Path:
    return data_path("desk_bundle.json")


def suite_paths() -> list[Path]:
    return [data_path("suite_t12.json"), data_path("suite_t16.json")]
