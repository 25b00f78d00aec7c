import argparse
import os
from typing import List, Optional, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


class _HelpAction(argparse._HelpAction):
    """Redefined class to print full help on the different commands.

    """

    def __call__(self, parser, _, __, ___):
        parser.print_help()
        print()

        subparsers_actions = [
            action
            for action in parser._actions
            if isinstance(action, argparse._SubParsersAction)
        ]
        for subparsers_action in subparsers_actions:
            for choice, subparser in subparsers_action.choices.items():
                print(f'Command "{choice}"')
                print(subparser.format_help())

        parser.exit()


def spawn_seeds(seed: SeedLike, n: int) -> List[int]:
    """Derives `n` independent integer seeds from a parent seed.

    The derivation goes through :class:`numpy.random.SeedSequence`, so the streams
    seeded with the returned values do not overlap and only depend on `seed` and the
    position.

    :param seed: The parent seed
    :type seed: int or numpy.random.SeedSequence
    :param int n: The number of seeds to derive
    :return: A list of `n` non-negative integer seeds
    :rtype: list[int]
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(
        seed
    )

    return [int(child.generate_state(1)[0]) for child in ss.spawn(n)]


def resolve_n_jobs(n_jobs: Optional[int] = None) -> int:
    """Resolves the number of parallel workers.

    The :envvar:`THREADS` environment variable caps the requested number of workers.

    :param n_jobs: The requested number of workers, defaults to :const:`None` (one)
    :type n_jobs: int, optional
    :return: The effective number of workers, at least one
    :rtype: int
    """
    n = 1 if n_jobs is None else int(n_jobs)
    cap = os.environ.get("THREADS")

    if cap:
        n = min(n, int(cap)) if n > 0 else int(cap)

    return max(n, 1)
