"""Helpers shared by the experiment pipelines."""

from concurrent.futures import ThreadPoolExecutor
import math

from ..lineshape import Lineshape, OffsetSet, sample_offsets

__all__ = ["DEFAULT_LINESHAPE", "ensemble_offsets", "parallel_map", "wrap_phase"]

# lineshape used when only gamma_inh is known
DEFAULT_LINESHAPE = ("pseudo_voigt", 0.3)


def wrap_phase(x):
    """Map an angle onto ``(-pi, pi]``."""
    return math.remainder(x, 2 * math.pi)


def ensemble_offsets(p, shape=None, n_groups=10_000, strategy="quantile", seed=None):
    """Offsets for ``n_groups`` groups.

    ``shape`` overrides the lineshape; otherwise a pseudo-Voigt of width
    ``p.gamma_inh`` is used, and all offsets vanish when ``gamma_inh = 0``.
    """
    if shape is None:
        if p.gamma_inh == 0:
            return OffsetSet.zeros(n_groups)
        kind, eta = DEFAULT_LINESHAPE
        shape = Lineshape(kind, p.gamma_inh, eta)
    return sample_offsets(shape, n_groups, strategy=strategy, seed=seed)


def parallel_map(fn, items, threads=1):
    """``[fn(x) for x in items]`` on up to ``threads`` worker threads.

    Results come back in input order whatever the scheduling.
    """
    items = list(items)
    threads = max(1, int(threads or 1))
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
