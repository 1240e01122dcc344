"""Loader-side acceptance: cross-implementation validation of a generated
dataset and index-order iteration."""

import time

import pytest

from layerloader import iter_samples, validate_dataset
from layerloader.loading import read_index_entries

from conftest import generate_dataset_via_cli


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] {name}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def dataset_1k(tmp_path_factory):
    return generate_dataset_via_cli(
        tmp_path_factory.mktemp("ds-1k"), count=1000, workers=4, canvas=96, seed=2027
    )


@pytest.fixture(scope="module")
def dataset_100(tmp_path_factory):
    return generate_dataset_via_cli(
        tmp_path_factory.mktemp("ds-100"), count=100, workers=2, canvas=96, seed=3033
    )


def test_cross_language_validation(dataset_1k):
    start = time.time()
    result = validate_dataset(dataset_1k)
    elapsed = time.time() - start
    failures = [(s.sample_id, s.failures) for s in result.samples if not s.passed]
    report(
        "cross-implementation validation",
        len(result.samples) == 1000 and result.all_passed(),
        f"{result.summary()} in {elapsed:.0f}s; failures: {failures[:3]}",
    )


def test_loader_ordering(dataset_100):
    index_order = [e["sample_id"] for e in read_index_entries(dataset_100)]
    iterated = [s.sample_id for s in iter_samples(dataset_100)]
    report(
        "loader ordering",
        len(iterated) == 100 and iterated == index_order,
        f"{len(iterated)} samples iterated in index order",
    )
