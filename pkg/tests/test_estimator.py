import numpy as np
import pytest
from sklearn.base import clone

from qoptlab import QoptEstimator
from qoptlab.fixtures import builders as b
from qoptlab.fixtures import corpus


def test_fit_predict_transform():
    m, t = b.lookup_witness({"00": 0.3, "01": 0.5, "10": 0.7, "11": 0.9})
    est = QoptEstimator(index_size=1, steps=t).fit(m)
    assert np.allclose(est.predict(["00", "11"]), [0.3, 0.9], atol=1e-9)
    assert est.transform(["00"]).shape == (1, 2)
    assert est.score(["01"], [0.5]) == pytest.approx(0.0, abs=1e-9)


def test_fit_from_path_and_clone():
    est = QoptEstimator(index_size=1, steps=1).fit(str(corpus.package_corpus() / "identity.json"))
    assert est.predict(["1"])[0] == pytest.approx(1.0)
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert not hasattr(twin, "problem_")


def test_fit_from_problem_document():
    from qoptlab.fixtures import load_document

    est = QoptEstimator(index_size=1, steps=1).fit(load_document("projector"))
    assert np.allclose(est.predict(["0", "1"]), [1.0, 1.0], atol=1e-9)
