################################################################################
# Module: utils.py
# Description: Utility functions for configuration, logging, errors and
#              parallel execution
# License: MIT, see full license in LICENSE.md
# Web: https://github.com/prototypal/prototypal
################################################################################
# OSMnx
#
# Copyright (c) 2019 Geoff Boeing https://geoffboeing.com/
#
# Part of the following code is a derivative work of the code from the OSMnx
# project, which is licensed MIT License. This code therefore is also
# licensed under the terms of the The MIT License (MIT).
################################################################################

import contextlib
import datetime as dt
import logging as lg
import multiprocessing
import os
import sys
import time
import unicodedata
import warnings

from prototypal import settings


def config(data_folder=settings.data_folder,
           logs_folder=settings.logs_folder,
           log_file=settings.log_file,
           log_console=settings.log_console,
           log_level=settings.log_level,
           log_name=settings.log_name,
           log_filename=settings.log_filename,
           default_metric=settings.default_metric,
           beta_margin=settings.beta_margin,
           brute_force_limit=settings.brute_force_limit,
           exact_ot_max_cells=settings.exact_ot_max_cells,
           sinkhorn_reg_factor=settings.sinkhorn_reg_factor,
           sinkhorn_max_iters=settings.sinkhorn_max_iters,
           sinkhorn_tol=settings.sinkhorn_tol,
           protodash_max_iters=settings.protodash_max_iters,
           protodash_tol=settings.protodash_tol,
           kernel_width_grid=settings.kernel_width_grid,
           default_kernel_width=settings.default_kernel_width,
           processors=settings.processors):
    """
    Configurations

    Args:
        data_folder (str): where to save and load data files
        logs_folder (str): where to write the log files
        log_file (bool): if true, save log output to a log file in logs_folder
        log_console (bool): if true, print log output to standard error
        log_level (int): one of the logger.level constants
        log_name (str): name of the logger
        log_filename (str): name of the log file
        default_metric (str): ground metric used when none is given
        beta_margin (float): default beta is max(C) + beta_margin
        brute_force_limit (int): largest number of subsets the exhaustive
            oracle is allowed to enumerate
        exact_ot_max_cells (int): largest k*n handled by the exact transport
            solver
        sinkhorn_reg_factor (float): default entropic regularization as a
            fraction of the largest cost
        sinkhorn_max_iters (int): default Sinkhorn iteration cap
        sinkhorn_tol (float): default L1 marginal violation tolerance
        protodash_max_iters (int): iteration cap of the ProtoDash weight refit
        protodash_tol (float): gradient-norm stop of the ProtoDash refit
        kernel_width_grid (tuple): Gaussian widths tried by
            :func:`select_kernel_width`
        default_kernel_width (float): Gaussian width when none is selected
        processors (int): worker processes for independent experiment runs.
            -1 uses all cores.

    Returns:
        None

    """
    # set each global variable to the passed-in parameter value
    settings.data_folder = data_folder
    settings.logs_folder = logs_folder
    settings.log_console = log_console
    settings.log_file = log_file
    settings.log_level = log_level
    settings.log_name = log_name
    settings.log_filename = log_filename
    settings.default_metric = validate_metric(default_metric)
    settings.beta_margin = beta_margin
    settings.brute_force_limit = brute_force_limit
    settings.exact_ot_max_cells = exact_ot_max_cells
    settings.sinkhorn_reg_factor = sinkhorn_reg_factor
    settings.sinkhorn_max_iters = sinkhorn_max_iters
    settings.sinkhorn_tol = sinkhorn_tol
    settings.protodash_max_iters = protodash_max_iters
    settings.protodash_tol = protodash_tol
    settings.kernel_width_grid = tuple(kernel_width_grid)
    settings.default_kernel_width = default_kernel_width
    settings.processors = processors

    # if logging is turned on, log that we are configured
    if settings.log_file or settings.log_console:
        log('Configured prototypal')


def validate_metric(metric_kind):
    if metric_kind not in settings.metric_kinds:
        raise DataError('Unknown metric "{}"; expected one of {}'.format(
            metric_kind, ', '.join(settings.metric_kinds)))
    return metric_kind


def log(message, level=None, name=None, filename=None, avoid_console=False):
    """
    Write a message to the log file and/or print to standard error.

    Args:
        message (str): the content of the message to log
        level (int): one of the logger.level constants
        name (str): name of the logger
        filename (str): name of the log file
        avoid_console (bool): If True, don't print to console for this message
            only

    Returns:
        None

    """
    if level is None:
        level = settings.log_level
    if name is None:
        name = settings.log_name
    if filename is None:
        filename = settings.log_filename

    # if logging to file is turned on
    if settings.log_file:
        # get the current logger (or create a new one, if none), then log
        # message at requested level
        logger = get_logger(level=level, name=name, filename=filename)
        if level == lg.DEBUG:
            logger.debug(message)
        elif level == lg.INFO:
            logger.info(message)
        elif level == lg.WARNING:
            logger.warning(message)
        elif level == lg.ERROR:
            logger.error(message)

    # the console is standard error; messages below log_level are dropped
    if settings.log_console and not avoid_console and \
            level >= settings.log_level:
        # convert message to ascii for console display so it doesn't break
        # windows terminals
        message = unicodedata.normalize('NFKD', str(message)).encode(
            'ascii', errors='replace').decode()
        print(message, file=sys.stderr)

        if level == lg.WARNING:
            warnings.warn(message)


def get_logger(level=None, name=None, filename=None):
    """Create a logger or return the current one if already instantiated.

    Args:
        level (int): one of the logger.level constants
        name (str): name of the logger
        filename (str): name of the log file

    Returns:
        logging.Logger: a Logger

    """

    if level is None:
        level = settings.log_level
    if name is None:
        name = settings.log_name
    if filename is None:
        filename = settings.log_filename

    logger = lg.getLogger(name)

    # if a logger with this name is not already set up
    if not getattr(logger, 'handler_set', None):

        # get today's date and construct a log filename
        todays_date = dt.datetime.today().strftime('%Y_%m_%d')
        log_filename = os.path.join(settings.logs_folder,
                                    '{}_{}.log'.format(filename, todays_date))

        # if the logs folder does not already exist, create it
        if not os.path.exists(settings.logs_folder):
            os.makedirs(settings.logs_folder)

        # create file handler and log formatter and set them up
        handler = lg.FileHandler(log_filename, encoding='utf-8')
        formatter = lg.Formatter(
            '%(asctime)s %(levelname)s %(name)s %(message)s')
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        logger.setLevel(level)
        logger.handler_set = True

    return logger


@contextlib.contextmanager
def timer():
    """Context manager measuring wall time on the monotonic clock.

    Yields a one-element list whose only item holds the elapsed seconds once
    the block exits.

    Examples:
        >>> with timer() as elapsed:
        >>>     spot_greedy(similarity, q, config)
        >>> elapsed[0]
    """
    elapsed = [0.0]
    start_time = time.perf_counter()
    try:
        yield elapsed
    finally:
        elapsed[0] = time.perf_counter() - start_time


def parallel_process(in_dict, function, processors=-1, use_kwargs=True,
                     desc=None):
    """A parallel version of the map function with a progress bar.

    Results come back keyed and ordered like `in_dict`, whatever the
    completion order of the workers.

    Args:
        in_dict (dict-like): A dictionary to iterate over.
        function (function): A python function to apply to the elements of
            in_dict. Must be importable (module level) when processors > 1.
        processors (int): The number of cores to use. -1 uses all of them.
        use_kwargs (bool): If True, pass the kwargs as arguments to `function`.
        desc (str): progress bar label. Defaults to the function name.

    Returns:
        dict: {key: function(in_dict[key])} in the key order of in_dict

    Raises:
        Exception: the first failing job's exception, after logging it.

    Examples:
        >>> import prototypal as pt
        >>> jobs = {run: dict(run_index=run, seed=seed) for run, seed in
        >>>         enumerate(seeds)}
        >>> result = pt.parallel_process(jobs, single_run, processors=4)

    """
    from tqdm import tqdm
    from concurrent.futures import ProcessPoolExecutor, as_completed

    if processors == -1:
        processors = min(len(in_dict), multiprocessing.cpu_count())
    processors = max(1, min(processors, len(in_dict)))

    kwargs = {
        'desc': desc or function.__name__,
        'total': len(in_dict),
        'unit': 'runs',
        'unit_scale': True,
        'leave': False,
        'disable': not settings.log_console
    }
    out = {}
    if processors == 1:
        for key in tqdm(in_dict, **kwargs):
            try:
                if use_kwargs:
                    out[key] = function(**in_dict[key])
                else:
                    out[key] = function(in_dict[key])
            except Exception as e:
                log('{} failed for "{}": {}'.format(function.__name__, key, e),
                    lg.ERROR)
                raise
        return out

    with ProcessPoolExecutor(max_workers=processors) as pool:
        if use_kwargs:
            futures = {pool.submit(function, **in_dict[a]): a for a in
                       in_dict}
        else:
            futures = {pool.submit(function, in_dict[a]): a for a in in_dict}

        # Print out the progress as tasks complete
        for f in tqdm(as_completed(futures), **kwargs):
            pass

    # Get the results from the futures, in the order of in_dict
    results = {futures[f]: f for f in futures}
    for key in in_dict:
        try:
            out[key] = results[key].result()
        except Exception as e:
            log('{} failed for "{}": {}'.format(function.__name__, key, e),
                lg.ERROR)
            raise
    return out


class Error(Exception):
    """Base class for exceptions in this package."""
    pass


class DataError(Error, ValueError):
    """Malformed input data: missing files, ragged or non-numeric CSV cells,
    non-finite features, mismatched dimensions or missing labels."""
    pass


class SimplexError(Error, ValueError):
    """A weight vector that does not lie on the probability simplex."""
    pass


class SimilarityError(Error, ValueError):
    """An invalid similarity matrix or similarity offset."""
    pass


class SelectionError(Error, ValueError):
    """An invalid selection request (cardinality, batch size, indices)."""
    pass


class TransportError(Error, ValueError):
    """A transport problem that cannot be solved as requested."""
    pass


class KernelError(Error, ValueError):
    """An invalid kernel width or kernel-weight vector."""
    pass


class ExperimentError(Error):
    """A failure inside an experiment run"""

    def __init__(self, run, method, cause):
        super(ExperimentError, self).__init__(run, method, str(cause))
        self.run = run
        self.method = method
        self.cause = str(cause)

    def __str__(self):
        """Single line: run, method and the underlying message"""
        return 'run {} / {}: {}'.format(self.run, self.method, self.cause)
