"""State builders shared by the test modules."""

import numpy as np
from dataclasses import replace

from robust_rs.problem import PosteriorState


class Hyper:
    """Minimal hyper-parameter holder for building states directly."""

    def __init__(self, k, m, sampling_var=1.0, prior_mean=0.0, prior_var=np.inf):
        self.sampling_var = np.broadcast_to(np.asarray(sampling_var, float), (k, m)).copy()
        self.prior_mean = np.full((k, m), prior_mean)
        self.prior_var = np.broadcast_to(np.asarray(prior_var, float), (k, m)).copy()


def state_from(means, counts, sampling_var=1.0, prior_var=np.inf, prior_mean=0.0):
    """State whose posterior means equal ``means`` exactly (uninformative prior)
    or come from sums chosen to hit them (informative prior)."""
    means = np.asarray(means, float)
    counts = np.asarray(counts, dtype=np.int64)
    k, m = means.shape
    hyper = Hyper(k, m, sampling_var, prior_mean, prior_var)
    state = PosteriorState.from_statistics(hyper, counts, means * counts)
    return replace(state, post_mean=means.copy()) if np.isinf(prior_var) else state


def random_state(rng, k, m, informative=False):
    counts = rng.integers(1, 30, size=(k, m))
    sv = rng.uniform(0.2, 5.0, size=(k, m))
    means = rng.normal(size=(k, m))
    pv = rng.uniform(0.5, 4.0, size=(k, m)) if informative else np.inf
    hyper = Hyper(k, m, sv, 0.0, pv)
    return PosteriorState.from_statistics(hyper, counts, means * counts)
