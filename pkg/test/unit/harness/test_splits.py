import numpy
import pytest

from surfeat.exceptions import InvalidArgumentError
from surfeat.harness.splits import stratified_folds, stratified_split

LABELS = numpy.array([0] * 33 + [1] * 7)


def test_stratified_split__proportions():
    split = stratified_split(LABELS, 0.2, seed=3)
    assert numpy.intersect1d(split.train, split.test).size == 0
    assert numpy.union1d(split.train, split.test).tolist() == list(range(40))
    for label in (0, 1):
        count = (LABELS == label).sum()
        held_out = (LABELS[split.test] == label).sum()
        assert abs(held_out - 0.2 * count) <= 1


def test_stratified_split__seeded():
    first = stratified_split(LABELS, seed=1)
    assert first.test.tolist() == stratified_split(LABELS, seed=1).test.tolist()
    assert first.test.tolist() != stratified_split(LABELS, seed=2).test.tolist()
    assert first.describe()["test"] == first.test.tolist()


def test_stratified_split__errors():
    with pytest.raises(InvalidArgumentError):
        stratified_split(LABELS, 1.5)
    with pytest.raises(InvalidArgumentError):
        stratified_split([1])


@pytest.mark.parametrize("folds", [2, 5])
def test_stratified_folds__partition(folds):
    splits = stratified_folds(LABELS, folds, seed=0)
    tested = numpy.sort(numpy.concatenate([split.test for split in splits]))
    assert tested.tolist() == list(range(40))
    for split in splits:
        assert numpy.union1d(split.train, split.test).size == 40
    for label in (0, 1):
        per_fold = [(LABELS[split.test] == label).sum() for split in splits]
        assert max(per_fold) - min(per_fold) <= 1


def test_stratified_folds__errors():
    with pytest.raises(InvalidArgumentError):
        stratified_folds(LABELS, 1)
    with pytest.raises(InvalidArgumentError):
        stratified_folds([0, 1, 0], 5)
