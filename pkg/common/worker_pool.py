"""Process pool helper for the embarrassingly parallel parts of the pipeline.

Integrations of distinct initial conditions are independent, so they are farmed out to worker
processes. Results always come back in input order, which keeps every output independent of the
number of workers.
"""
import concurrent.futures
import logging
import multiprocessing
import os


def default_threads():
    """SPML_THREADS if set, otherwise one worker per CPU."""
    env_threads = os.getenv('SPML_THREADS')
    if env_threads:
        return max(1, int(env_threads))
    return multiprocessing.cpu_count()


def ordered_map(fn, items, threads=1):
    """Map fn over items, returning results in input order.

    Args:
        fn: picklable callable (module-level function or functools.partial of one).
        items: iterable of arguments.
        threads: int number of worker processes. 1 or less runs inline in this process.
    Returns:
        list of fn(item) for each item, in order.
    """
    items = list(items)
    if threads is None:
        threads = default_threads()
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    workers = min(threads, len(items))
    chunksize = max(1, len(items) // (workers * 4))
    logging.debug('Mapping %d items over %d worker processes', len(items), workers)
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items, chunksize=chunksize))
