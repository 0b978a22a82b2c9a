import os
import shutil
import sys

import numpy as np
import pytest

import prototypal as pt


@pytest.fixture(scope='session')
def config():
    pt.config(log_console=True, log_file=True,
              data_folder='tests/.temp/data', logs_folder='tests/.temp/logs')


@pytest.fixture(scope='session')
def fresh_start():
    """# remove the tests/.temp folders if they already exist so we
    start fresh with tests. Needs to be called after `config`"""
    for setting in [pt.settings.data_folder]:
        if os.path.exists(setting):
            shutil.rmtree(setting)
            assert not os.path.exists(setting)


@pytest.fixture
def rng():
    """A seeded generator, fresh for every test"""
    return np.random.default_rng(20190612)


@pytest.fixture(scope='session')
def worked_similarity():
    """The 2 x 2 worked instance S = [[3, 1], [2, 4]], q = (0.5, 0.5)"""
    return pt.SimilarityMatrix([[3., 1.], [2., 4.]]), \
        pt.SimplexWeights([0.5, 0.5])


@pytest.fixture(scope='session')
def toy_pair():
    """10 x 10 labeled toy source and target"""
    return (pt.load_dataset('tests/input_data/toy_source.csv',
                            label_column='label'),
            pt.load_dataset('tests/input_data/toy_target.csv',
                            label_column='label'))


@pytest.fixture(scope='session')
def blobs():
    """The synthetic 5-class instance: 500 source and 500 target points in
    d=10, class means 6 standard deviations apart"""
    source = pt.make_blobs_dataset(n_classes=5, n_per_class=100,
                                   n_features=10, separation=6.0, seed=1,
                                   name='source')
    target = pt.make_blobs_dataset(n_classes=5, n_per_class=100,
                                   n_features=10, separation=6.0, seed=2,
                                   name='target')
    return source, target


def random_similarity(rng, m, n):
    """Entries uniform in (0, 1]"""
    return pt.SimilarityMatrix(1.0 - rng.random((m, n)))


def random_weights(rng, n):
    return pt.SimplexWeights.from_masses(rng.random(n) + 1e-3)


ALL = set("darwin linux win32".split())


def pytest_runtest_setup(item):
    supported_platforms = ALL.intersection(
        mark.name for mark in item.iter_markers())
    plat = sys.platform
    if supported_platforms and plat not in supported_platforms:
        pytest.skip("cannot run on platform %s" % (plat))
