"""Order-preserving map used for Monte Carlo paths and per-day fits.

Work items carry their own seeds, so serial and process-parallel runs return
identical results in identical order.
"""

from concurrent.futures import ProcessPoolExecutor
from functools import partial


def pmap(func, items, n_jobs=1, **kwargs):
    f = partial(func, **kwargs) if kwargs else func
    if n_jobs is None or n_jobs <= 1 or len(items) < 2:
        return [f(it) for it in items]
    chunk = max(1, len(items) // (4 * n_jobs))
    with ProcessPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(f, items, chunksize=chunk))
