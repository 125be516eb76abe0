"""scikit-learn style facade over witnessed optimization problems."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .machine import MachineDescription, machine_from_dict
from .qopt import MachineProblem, extract_opt_matrix, problem_from_dict


class QoptEstimator(BaseEstimator):
    """Fit on a witness machine, predict optimization values.

    ``fit`` takes a machine or problem document (description, dict or
    path); ``predict`` maps
    classical inputs to ``sup_phi`` acceptance; ``transform`` returns the
    maximizing indices.
    """

    def __init__(self, index_size=1, steps=1, oracle=None):
        self.index_size = index_size
        self.steps = steps
        self.oracle = oracle

    def fit(self, machine, y=None):
        if not isinstance(machine, (dict, MachineDescription)):
            machine = json.loads(Path(machine).read_text())
        if isinstance(machine, dict) and "machine" in machine:
            # problem document: keep its input rule, ignore its sizes
            machine = problem_from_dict(machine).machine
        elif isinstance(machine, dict):
            machine = machine_from_dict(machine)
        self.problem_ = MachineProblem(
            machine, self.index_size, self.steps, None if self.oracle is None else frozenset(self.oracle)
        )
        return self

    def _matrices(self, xs):
        return [extract_opt_matrix(self.problem_, x) for x in xs]

    def predict(self, xs):
        return np.array([om.max_eigenvalue for om in self._matrices(xs)])

    def transform(self, xs):
        return np.array([om.max_eigenvector for om in self._matrices(xs)])

    def score(self, xs, values):
        """Negative max absolute error against given values."""
        return -float(np.max(np.abs(self.predict(xs) - np.asarray(values))))
