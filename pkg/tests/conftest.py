"""Shared builders for randomized model-based tests."""

import numpy as np

from drmdp.ambiguity import (
    FactorMap,
    build_support_only,
    build_uncertain_mean,
    build_wasserstein,
    identity_factor_map,
)
from drmdp.engine import DrMdpModel
from drmdp.geometry import box, simplex, singleton


def random_simplex_ambiguity(rng, dim, kind=None):
    """A random ambiguity set over factor vectors in the dim-simplex."""
    kind = kind or rng.choice(["support", "wasserstein", "mean"])
    d = simplex(dim)
    if kind == "support":
        return build_support_only(d)
    if kind == "wasserstein":
        k = int(rng.integers(1, 4))
        samples = [rng.dirichlet(np.ones(dim)) for _ in range(k)]
        return build_wasserstein(samples, float(rng.uniform(0.0, 1.0)), d)
    center = rng.dirichlet(np.ones(dim))
    return build_uncertain_mean(
        d, np.zeros(dim), np.ones(dim), center, float(rng.uniform(0.05, 0.5))
    )


def shared_row_factor_map(rng, n_actions, n_next):
    """All actions share one uncertain transition row (the factor); rewards
    are fixed per action."""
    dim = n_next
    p_mat = np.tile(np.eye(dim), (n_actions, 1))
    r_mat = np.zeros((n_actions, dim))
    return FactorMap(
        n_actions,
        n_next,
        p_mat,
        np.zeros(n_actions * n_next),
        r_mat,
        rng.normal(size=n_actions),
    )


def random_infinite_model(rng, n_states=2, gamma=0.9):
    fms, ambs = [], []
    for _ in range(n_states):
        n_actions = int(rng.integers(1, 4))
        fms.append(shared_row_factor_map(rng, n_actions, n_states))
        ambs.append(random_simplex_ambiguity(rng, n_states))
    return DrMdpModel(n_states, tuple(fms), tuple(ambs), discount=gamma)


def random_staged_model(rng, mid_states=2, n_terminal=2):
    """Three stages: one root, a middle layer, and a terminal layer."""
    stages = (
        (0,),
        tuple(range(1, 1 + mid_states)),
        tuple(range(1 + mid_states, 1 + mid_states + n_terminal)),
    )
    n_states = 1 + mid_states + n_terminal
    fms = [None] * n_states
    ambs = [None] * n_states
    n_actions = int(rng.integers(1, 4))
    fms[0] = shared_row_factor_map(rng, n_actions, mid_states)
    ambs[0] = random_simplex_ambiguity(rng, mid_states)
    for s in stages[1]:
        n_actions = int(rng.integers(1, 4))
        fms[s] = shared_row_factor_map(rng, n_actions, n_terminal)
        ambs[s] = random_simplex_ambiguity(rng, n_terminal)
    return DrMdpModel(
        n_states,
        tuple(fms),
        tuple(ambs),
        stages=stages,
        terminal_values=rng.normal(size=n_terminal),
    )


def singleton_kernel_model(rng, stages_shape=(1, 2, 2)):
    """Finite-horizon model whose ambiguity sets are singletons: the robust
    value must coincide with classical dynamic programming."""
    sizes = list(stages_shape)
    offsets = np.cumsum([0] + sizes)
    stages = tuple(tuple(range(offsets[i], offsets[i + 1])) for i in range(len(sizes)))
    n_states = offsets[-1]
    fms = [None] * n_states
    ambs = [None] * n_states
    factors = {}
    for t in range(len(sizes) - 1):
        n_next = sizes[t + 1]
        for s in stages[t]:
            n_actions = int(rng.integers(1, 4))
            fm = identity_factor_map(n_actions, n_next)
            xi = np.concatenate(
                [
                    np.concatenate([rng.dirichlet(np.ones(n_next)) for _ in range(n_actions)]),
                    rng.normal(size=n_actions),
                ]
            )
            fms[s] = fm
            ambs[s] = build_support_only(singleton(xi))
            factors[s] = xi
    model = DrMdpModel(
        n_states,
        tuple(fms),
        tuple(ambs),
        stages=stages,
        terminal_values=rng.normal(size=sizes[-1]),
    )
    return model, factors
