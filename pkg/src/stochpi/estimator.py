"""scikit-learn style facade: ``fit`` a model, ``transform`` times into distributions."""
import os

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .analysis import stationary, transient
from .ctmc import build_ctmc, explore, reach_prob
from .errors import ModelError
from .parser import load, parse
from .syntax import Node


def check_model(X):
    """Coerce ``X`` (model text, a ``.spi`` path or ``(env, term)``) to ``(env, term)``."""
    if isinstance(X, tuple) and len(X) == 2:
        env, term = X
        if not isinstance(term, Node):
            raise TypeError("second element of a model tuple must be a process term")
        return env, term
    if isinstance(X, os.PathLike) or (isinstance(X, str) and X.endswith(".spi") and "\n" not in X):
        env, term = load(os.fspath(X))
    elif isinstance(X, str):
        env, term = parse(X)
    else:
        raise TypeError(f"cannot interpret {type(X).__name__} as a model")
    if term is None:
        raise ModelError("model has no system term")
    return env, term


def check_times(times):
    """1-d float array of nonnegative, finite time points."""
    arr = check_array(np.atleast_1d(np.asarray(times, dtype=float)).reshape(-1, 1),
                      ensure_all_finite=True).ravel()
    if (arr < 0).any():
        raise ValueError("time points must be nonnegative")
    return arr


class StochPiCTMC(TransformerMixin, BaseEstimator):
    """Extract the CTMC of a model and evaluate it at time points.

    Parameters
    ----------
    state_cap : int or None
        Exploration limit (``None`` uses the environment default).
    follow_preempted : bool
        Explore Markovian moves of immediate states as well.
    exact_limit : int
        Largest chain solved exactly by ``stationary``.
    tol : float
        Per-entry error bound for ``transform``.
    """

    def __init__(self, state_cap=None, follow_preempted=True, exact_limit=2000, tol=1e-10):
        self.state_cap = state_cap
        self.follow_preempted = follow_preempted
        self.exact_limit = exact_limit
        self.tol = tol

    def fit(self, X, y=None):
        self.env_, self.init_ = check_model(X)
        self.space_ = explore(self.init_, self.env_, self.state_cap, self.follow_preempted)
        self.reach_ = reach_prob(self.space_)
        self.ctmc_ = build_ctmc(self.space_, self.reach_)
        self.n_states_ = self.ctmc_.n
        self.states_ = [str(s) for s in self.ctmc_.states]
        return self

    def transform(self, X):
        """Rows of state probabilities, one row per time point in ``X``."""
        check_is_fitted(self, "ctmc_")
        times = check_times(X)
        return np.vstack([transient(self.ctmc_, t, tol=self.tol) for t in times])

    def predict(self, X):
        """Most probable state index at each time point."""
        return self.transform(X).argmax(axis=1)

    def stationary(self):
        check_is_fitted(self, "ctmc_")
        return stationary(self.ctmc_, self.exact_limit)

    def fit_transform(self, X, y=None, times=None, **fit_params):
        self.fit(X, y)
        return self.transform([0.0] if times is None else times)
