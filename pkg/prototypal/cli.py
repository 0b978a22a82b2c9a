################################################################################
# Module: cli.py
# Description: Command line interface: prototype selection, evaluation,
#              experiments, criticisms and k-medoids
# License: MIT, see full license in LICENSE.md
# Web: https://github.com/prototypal/prototypal
################################################################################

import functools
import json
import logging as lg
import os

import click
import numpy as np
import pandas as pd
from tabulate import tabulate

from prototypal import settings
from prototypal.core import objective_of, read_prototypes
from prototypal.data import compute_ground_cost, load_cost_matrix, \
    load_dataset, to_similarity, uniform_weights
from prototypal.evaluation import SkewSpec, nearest_prototype_classify, \
    results_to_frame, run_experiment, select_criticisms, \
    select_kernel_width, witness_scores, write_results
from prototypal.mmd import compose_with_ot, gaussian_kernel, \
    mmd_critic_select, protodash_select
from prototypal.selectors import SelectionConfig, k_medoids, random_select, \
    spot_greedy, spot_simple, stop_rules
from prototypal.transport import SinkhornConfig
from prototypal.utils import Error

metric_choice = click.Choice([m for m in settings.metric_kinds
                              if m != 'precomputed'])


def read_config_file(path):
    """key=value lines ('#' comments) as a dict of parameter names"""
    values = {}
    with open(path, encoding='utf-8') as f:
        for number, line in enumerate(f, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise click.BadParameter('line {}: expected key=value'.format(
                    number), param_hint='--config')
            key, value = (part.strip() for part in line.split('=', 1))
            values[key.lstrip('-').replace('-', '_')] = value
    return values


def command_defaults(command, values):
    """The entries of `values` naming one of the command's parameters, by
    parameter name or by option flag. Repeatable options take
    comma-separated values."""
    defaults = {}
    for param in command.params:
        keys = {param.name} | {opt.lstrip('-').replace('-', '_') for opt in
                               param.opts}
        for key in keys & set(values):
            value = values[key]
            if getattr(param, 'multiple', False):
                value = [v.strip() for v in value.split(',') if v.strip()]
            defaults[param.name] = value
    return defaults


def handle_errors(function):
    """Turns package and I/O errors into a one-line message and exit 1"""

    @functools.wraps(function)
    def wrapper(*args, **kwargs):
        try:
            return function(*args, **kwargs)
        except (Error, OSError) as e:
            raise click.ClickException(str(e).splitlines()[0] if str(e)
                                       else type(e).__name__)

    return wrapper


def _read_dataset(path, label_column, required=False):
    """Loads a feature CSV, using `label_column` for labels when present"""
    if required:
        return load_dataset(path, label_column=label_column)
    try:
        header = pd.read_csv(path, nrows=0, encoding='utf-8').columns
    except (pd.errors.EmptyDataError, pd.errors.ParserError, OSError):
        header = []
    return load_dataset(path, label_column=label_column
                        if label_column in header else None)


def _emit(text, output):
    """Writes `text` to `output`, or to standard output"""
    if output is None:
        click.echo(text, nl=not text.endswith('\n'))
        return
    folder = os.path.dirname(output)
    if folder and not os.path.isdir(folder):
        os.makedirs(folder)
    with open(output, 'w', encoding='utf-8') as f:
        f.write(text)


def _summary(rows, headers):
    if settings.log_console:
        click.echo(tabulate(rows, headers=headers, floatfmt='.6g'), err=True)


def _sigma(value):
    if value is None or value == 'auto':
        return value
    try:
        sigma = float(value)
    except ValueError:
        raise click.BadParameter('expected a positive number or "auto"',
                                 param_hint='--sigma')
    if not sigma > 0:
        raise click.BadParameter('must be positive', param_hint='--sigma')
    return sigma


@click.group()
@click.option('--config', 'config_path', type=click.Path(exists=True,
                                                         dir_okay=False),
              help='key=value file of option defaults; flags override it.')
@click.option('--quiet', is_flag=True, help='No progress on standard error.')
@click.option('--threads', type=click.IntRange(min=-1), default=1,
              envvar='SPOT_THREADS', show_default=True,
              help='Worker processes for experiment runs (-1: all cores).')
@click.pass_context
def main(ctx, config_path, quiet, threads):
    """Prototype selection by sparse-support optimal transport."""
    settings.log_console = not quiet
    # progress lines of the selectors are logged at debug level
    settings.log_level = lg.INFO if quiet else lg.DEBUG
    settings.processors = threads if threads != 0 else 1
    if config_path:
        values = read_config_file(config_path)
        ctx.default_map = {name: command_defaults(command, values)
                           for name, command in main.commands.items()}


def common_options(function):
    """Options shared by the commands reading a source dataset"""
    options = [
        click.option('--source', type=click.Path(exists=True, dir_okay=False),
                     help='Source feature CSV (header row).'),
        click.option('--label-column', default='label', show_default=True,
                     help='Name of the label column.'),
        click.option('--metric', type=metric_choice,
                     default=settings.default_metric, show_default=True,
                     help='Ground metric.'),
        click.option('--output', type=click.Path(dir_okay=False),
                     help='Output file (standard output when omitted).'),
    ]
    for option in reversed(options):
        function = option(function)
    return function


def _similarity(source_path, target_path, cost_path, label_column, metric,
                beta):
    """(source, target, cost, similarity) of the select-like commands"""
    if cost_path:
        cost = load_cost_matrix(cost_path)
        return None, None, cost, to_similarity(cost, beta)
    if not source_path:
        raise click.UsageError('--source or --cost is required')
    source = _read_dataset(source_path, label_column)
    target = source if not target_path else _read_dataset(target_path,
                                                          label_column)
    cost = compute_ground_cost(source, target, metric)
    return source, target, cost, to_similarity(cost, beta)


@main.command('select')
@common_options
@click.option('--target', type=click.Path(exists=True, dir_okay=False),
              help='Target feature CSV; the source itself when omitted.')
@click.option('--cost', 'cost_path', type=click.Path(exists=True,
                                                     dir_okay=False),
              help='Precomputed m x n cost CSV (no header) instead of '
                   'features.')
@click.option('--method', type=click.Choice(settings.selection_methods),
              default='spot_greedy', show_default=True)
@click.option('-k', type=click.IntRange(min=1), required=True,
              help='Number of prototypes.')
@click.option('-s', type=click.IntRange(min=1), default=1, show_default=True,
              help='Prototypes added per greedy iteration.')
@click.option('--epsilon', type=click.FloatRange(min=0),
              help='Smallest objective increment of an iteration.')
@click.option('--stop-rule', type=click.Choice(stop_rules),
              default='cardinality', show_default=True)
@click.option('--beta', type=float,
              help='Similarity offset, S = beta - C (default max(C) + 1).')
@click.option('--sigma', default=None,
              help='Gaussian kernel width of the MMD methods, or "auto" to pick '
                   'it on held-out target labels.')
@click.option('--ot-reg', type=click.FloatRange(min=0, min_open=True),
              help='Sinkhorn regularization of the "+ot" methods.')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--format', 'fmt', type=click.Choice(['json', 'csv']),
              default='json', show_default=True)
@click.option('--no-plan', is_flag=True, help='Leave the plan out of the '
                                              'JSON.')
@handle_errors
def cmd_select(source, label_column, metric, output, target, cost_path,
               method, k, s, epsilon, stop_rule, beta, sigma, ot_reg, seed,
               fmt, no_plan):
    """Select k prototypes of the source that best represent the target."""
    source_data, target_data, cost, similarity = _similarity(
        source, target, cost_path, label_column, metric, beta)
    q = uniform_weights(similarity.n)

    trace = None
    if method in ('spot_greedy', 'spot_simple', 'random'):
        if method == 'spot_greedy':
            prototypes, trace = spot_greedy(similarity, q, SelectionConfig(
                k, s, epsilon, stop_rule))
        elif method == 'spot_simple':
            prototypes = spot_simple(similarity, q, k)
        else:
            prototypes = random_select(similarity, q, k, seed=seed)
        data = prototypes.to_dict(include_plan=not no_plan)
    else:
        if source_data is None:
            raise click.UsageError('MMD methods need feature files, not '
                                   '--cost')
        sigma = _sigma(sigma)
        if sigma == 'auto':
            sigma = select_kernel_width(source_data, target_data, k, method,
                                        seed=seed, metric_kind=metric)
        elif sigma is None:
            sigma = settings.default_kernel_width
        kernel = gaussian_kernel(source_data, target_data, sigma)
        select = protodash_select if method.startswith('protodash') else \
            mmd_critic_select
        selection = select(kernel, k)
        data = selection.to_dict()
        if selection.weights.sum() > 0:
            data['weights'] = selection.normalized_weights.values.tolist()
        data['objective'] = objective_of(similarity, q, selection.indices)
        if method.endswith('+ot') and not no_plan:
            config = SinkhornConfig(ot_reg) if ot_reg else None
            plan = compose_with_ot(selection, cost.rows(selection.indices), q,
                                   config)
            data['plan'] = plan.to_dict()
    data['method'] = method
    if trace is not None:
        data['trace'] = trace.to_list()

    if fmt == 'csv':
        frame = pd.DataFrame({'index': data['indices'],
                              'weight': data['weights']})
        _emit(frame.to_csv(index=False, float_format='%.17g'), output)
    else:
        _emit(json.dumps(data, indent=2), output)
    _summary([[method, len(data['indices']), data['objective']]],
             ['method', 'k', 'objective'])


@main.command('evaluate')
@common_options
@click.option('--target', type=click.Path(exists=True, dir_okay=False),
              required=True, help='Labeled target CSV to classify.')
@click.option('--prototypes', 'prototypes_path', required=True,
              type=click.Path(exists=True, dir_okay=False),
              help='PrototypeSet JSON written by select.')
@handle_errors
def cmd_evaluate(source, label_column, metric, output, target,
                 prototypes_path):
    """1-NN accuracy of saved prototypes on a labeled target."""
    if not source:
        raise click.UsageError('--source is required')
    source_data = _read_dataset(source, label_column, required=True)
    target_data = _read_dataset(target, label_column, required=True)
    prototypes = read_prototypes(prototypes_path)
    _, accuracy = nearest_prototype_classify(prototypes, source_data,
                                             target_data, metric)
    data = {'k': len(prototypes), 'accuracy': accuracy}
    _emit(json.dumps(data, indent=2), output)
    _summary([[data['k'], accuracy]], ['k', 'accuracy'])


@main.command('experiment')
@common_options
@click.option('--target', type=click.Path(exists=True, dir_okay=False),
              required=True,
              help='Labeled target CSV, or the pool skewed targets are drawn '
                   'from with --skew-percent.')
@click.option('--method', 'methods', multiple=True,
              type=click.Choice(settings.selection_methods),
              default=('spot_greedy',), show_default=True,
              help='Selection method (repeatable).')
@click.option('-k', 'ks', multiple=True, type=click.IntRange(min=1),
              required=True, help='Number of prototypes (repeatable).')
@click.option('--runs', type=click.IntRange(min=1), default=10,
              show_default=True)
@click.option('--skew-class', help='Dominant class; drawn per run when '
                                   'omitted.')
@click.option('--skew-percent', type=click.FloatRange(0, 100),
              help='Share of the dominant class in the target, in percent.')
@click.option('--sigma', default=None,
              help='Gaussian kernel width of the MMD methods, or "auto".')
@click.option('--ot-reg', type=click.FloatRange(min=0, min_open=True),
              help='Sinkhorn regularization of the "+ot" methods.')
@click.option('--domain-shift', is_flag=True,
              help='Classify with prototypes mapped into the target domain.')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--format', 'fmt', type=click.Choice(['json', 'csv']),
              default='csv', show_default=True,
              help='With json and --output, the CSV curves are also written '
                   'next to the JSON.')
@handle_errors
def cmd_experiment(source, label_column, metric, output, target, methods, ks,
                   runs, skew_class, skew_percent, sigma, ot_reg,
                   domain_shift, seed, fmt):
    """Accuracy and objective curves averaged over randomized runs."""
    if not source:
        raise click.UsageError('--source is required')
    source_data = _read_dataset(source, label_column, required=True)
    target_data = _read_dataset(target, label_column, required=True)
    pool = None
    target_spec = target_data
    if skew_percent is not None:
        pool = target_data
        target_spec = SkewSpec(skew_class, skew_percent)
    elif skew_class is not None:
        raise click.UsageError('--skew-class needs --skew-percent')

    results = run_experiment(source_data, target_spec, list(methods), ks,
                             runs=runs, seed=seed, pool=pool,
                             metric_kind=metric, sigma=_sigma(sigma),
                             domain_shift=domain_shift,
                             sinkhorn_config=SinkhornConfig(ot_reg)
                             if ot_reg else None)
    frame = results_to_frame(results)
    if output is None:
        if fmt == 'csv':
            _emit(frame.to_csv(index=False, float_format='%.17g'), None)
        else:
            _emit(json.dumps([r.to_dict() for r in results], indent=2), None)
    else:
        write_results(results, output, fmt)
        if fmt == 'json':
            write_results(results, os.path.splitext(output)[0] + '.csv',
                          'csv')
    _summary(frame.values.tolist(), list(frame.columns))


@main.command('criticisms')
@common_options
@click.option('--target', type=click.Path(exists=True, dir_okay=False),
              help='Target CSV of the witness function; the source itself '
                   'when omitted.')
@click.option('--prototypes', 'prototypes_path',
              type=click.Path(exists=True, dir_okay=False),
              help='PrototypeSet JSON indexing the source.')
@click.option('--method', type=click.Choice(settings.selection_methods),
              default='spot_greedy', show_default=True,
              help='Inline selection when --prototypes is omitted.')
@click.option('-k', type=click.IntRange(min=1), help='Inline selection size.')
@click.option('--count', type=click.IntRange(min=0), required=True,
              help='Number of criticisms.')
@click.option('--sigma', type=click.FloatRange(min=0, min_open=True),
              default=settings.default_kernel_width, show_default=True,
              help='Gaussian kernel width of the witness function.')
@click.option('--seed', type=int, default=0, show_default=True)
@handle_errors
def cmd_criticisms(source, label_column, metric, output, target,
                   prototypes_path, method, k, count, sigma, seed):
    """Source points worst represented by the prototypes."""
    if not source:
        raise click.UsageError('--source is required')
    pool = _read_dataset(source, label_column)
    target_data = pool if not target else _read_dataset(target, label_column)
    kernel = gaussian_kernel(pool, target_data, sigma)

    if prototypes_path:
        prototypes = read_prototypes(prototypes_path)
    else:
        if k is None:
            raise click.UsageError('--prototypes or -k is required')
        cost = compute_ground_cost(pool, target_data, metric)
        similarity = to_similarity(cost)
        q = uniform_weights(target_data.m)
        if method == 'spot_greedy':
            prototypes, _ = spot_greedy(similarity, q, SelectionConfig(k))
        elif method == 'spot_simple':
            prototypes = spot_simple(similarity, q, k)
        elif method == 'random':
            prototypes = random_select(similarity, q, k, seed=seed)
        elif method.startswith('protodash'):
            prototypes = protodash_select(kernel, k)
        else:
            prototypes = mmd_critic_select(kernel, k)

    indices = select_criticisms(prototypes, pool, kernel, count)
    witness = witness_scores(prototypes, kernel)
    data = [{'index': i, 'witness': float(witness[i])} for i in indices]
    _emit(json.dumps(data, indent=2), output)
    _summary([[d['index'], d['witness']] for d in data], ['index', 'witness'])


@main.command('kmedoids')
@common_options
@click.option('-k', type=click.IntRange(min=1), required=True,
              help='Number of medoids.')
@click.option('-s', type=click.IntRange(min=1), default=1, show_default=True)
@click.option('--beta', type=float,
              help='Similarity offset, S = beta - C (default max(C) + 1).')
@handle_errors
def cmd_kmedoids(source, label_column, metric, output, k, s, beta):
    """k-medoids of the source (square self-similarity, uniform weights)."""
    if not source:
        raise click.UsageError('--source is required')
    dataset = _read_dataset(source, label_column)
    similarity = to_similarity(compute_ground_cost(dataset, dataset, metric),
                               beta)
    medoids = k_medoids(dataset, similarity, k, s)
    data = medoids.to_dict()
    data['method'] = 'kmedoids'
    _emit(json.dumps(data, indent=2), output)
    _summary([[i, w] for i, w in zip(medoids.indices,
                                     np.asarray(medoids.weights.values))],
             ['medoid', 'weight'])


if __name__ == '__main__':
    main()
