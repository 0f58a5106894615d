"""Shared fixtures: built example problems and their reference fixed points.

Problem builds and long reference runs are session-scoped because several
test modules (and the acceptance suite) reuse them.
"""

import numpy as np
import pytest

from scatopt import monitor, problems


@pytest.fixture(scope="session")
def lasso_huber_built():
    inst = problems.LassoInstance.random(m=10, n=20, seed=0)
    return problems.build_lasso_huber(inst)


@pytest.fixture(scope="session")
def lasso_huber_dstar(lasso_huber_built):
    return monitor.reference_fixed_point(lasso_huber_built.system, tol=1e-13)


@pytest.fixture(scope="session")
def lasso_augmented_built():
    inst = problems.LassoInstance.random(m=10, n=20, seed=0)
    return problems.build_lasso_augmented(inst)


@pytest.fixture(scope="session")
def fir_spec():
    return problems.FirSpec()


@pytest.fixture(scope="session")
def fir_built(fir_spec):
    return problems.build_minimax_fir(fir_spec)


@pytest.fixture(scope="session")
def svm_built():
    inst = problems.SvmInstance.separable_blobs(seed=0)
    return problems.build_svm_decentralized(inst)


@pytest.fixture(scope="session")
def equalizer_built():
    inst = problems.EqualizerInstance.synthetic(seed=0)
    return problems.build_sparse_equalizer(inst)
