"""Seed sweeps, optionally spread over worker processes."""
from concurrent.futures import ProcessPoolExecutor


def run_seeds(fn, seeds, workers=1):
    """``[fn(seed) for seed in seeds]``, in seed order regardless of ``workers``.

    ``fn`` must be picklable when ``workers > 1``.
    """
    seeds = list(seeds)
    if workers is None or workers <= 1 or len(seeds) < 2:
        return [fn(s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds))
