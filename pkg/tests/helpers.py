"""Small builders shared by the test modules."""

import numpy as np

from doco import mirror, problems


def unit_box(d=2):
    return mirror.FeasibleSet.box(np.zeros(d), np.ones(d))


def make_suite(T=256, seed=0, X=None, **kw):
    X = X if X is not None else unit_box()
    return problems.generate(problems.SuiteSpec(T=T, seed=seed, **kw), X)
