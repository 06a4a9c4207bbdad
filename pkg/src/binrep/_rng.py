import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *keys)``.

    Every stochastic entry point derives its streams here so that results
    depend only on the seed and the logical position (restart, chain, rep),
    never on execution order.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def derive(seed: int, *keys: int) -> int:
    """Integer seed for a sub-task keyed by ``(seed, *keys)``."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])
