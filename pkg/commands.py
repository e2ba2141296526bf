"""
Flask CLI commands for tdi-sense
"""
import os

import click
from flask import current_app
from flask.cli import FlaskGroup, with_appcontext


def experiment_options(command):
    """Options shared by every experiment command"""
    options = [
        click.option('--config', 'config_path', required=True, type=click.Path(exists=True, dir_okay=False),
                     help='JSON experiment configuration'),
        click.option('--seed', type=int, default=None, help='Override the configured seed'),
        click.option('--threads', type=int, default=None, help='Worker threads'),
        click.option('--mode', type=click.Choice(['exact', 'mc']), default=None,
                     help='Exact averaged laws or Monte-Carlo sampling'),
        click.option('--out-dir', type=click.Path(file_okay=False), default=None,
                     help='Directory for CSV and JSON outputs'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def load_config(config_path, **overrides):
    """Read the experiment file with app defaults and apply CLI overrides"""
    from tdisense.experiment import ExperimentConfig

    cfg = ExperimentConfig.from_file(config_path, defaults=current_app.config)
    return cfg.with_overrides(**overrides)


def _fail(error):
    current_app.logger.error(f"{error.__class__.__name__}: {error.message}")
    raise click.ClickException(f"{error.__class__.__name__}: {error.message}")


@click.command()
@experiment_options
@with_appcontext
def sweep(config_path, seed, threads, mode, out_dir):
    """Estimate the MSE of each strategy over the epsilon grid."""
    from tdisense.errors import TdiError
    from tdisense.experiment import emit, sweep_epsilon

    try:
        cfg = load_config(config_path, seed=seed, threads=threads, mode=mode, out_dir=out_dir)
        result = sweep_epsilon(cfg)
        paths = emit(result, stem='sweep')
    except TdiError as e:
        _fail(e)

    for row in result.aggregates():
        click.echo(f"{row['strategy']:>8} eps={row['epsilon']:.3e} "
                   f"mean_mse={row['mean_mse']:.4e} std={row['std_mse']:.2e}")
    click.echo(f"Wrote {paths['csv']} and {paths['manifest']}")


@click.command()
@experiment_options
@with_appcontext
def bounds(config_path, seed, threads, mode, out_dir):
    """Evaluate every analytic bound on the epsilon grid."""
    from tdisense.bounds import bound_report
    from tdisense.errors import TdiError
    from tdisense.experiment import emit_json

    try:
        cfg = load_config(config_path, seed=seed, threads=threads, mode=mode, out_dir=out_dir)
        reports = []
        for omega in cfg.omega_values():
            p = cfg.params(omega)
            for epsilon in cfg.epsilons:
                reports.append({'params': p.to_dict(), 'report': bound_report(p, cfg.shots, epsilon).to_dict()})
        path = emit_json({'shots': cfg.shots, 'seed': cfg.seed, 'reports': reports},
                         os.path.join(cfg.out_dir, 'bounds.json'))
    except TdiError as e:
        _fail(e)

    for entry in reports:
        report = entry['report']
        click.echo(f"omega={entry['params']['omega']:.5g} eps={report['epsilon']:.3e} "
                   f"fe>={report['loss_fe_lower']:.4e} ce<={report['loss_ce_upper']:.4e}")
    click.echo(f"Wrote {path}")


@click.command('worst-case')
@experiment_options
@click.option('--strategy', default='ce_swap', show_default=True, help='Strategy to attack')
@with_appcontext
def worst_case(config_path, seed, threads, mode, out_dir, strategy):
    """Search bounded TDI laws for the largest relative bias."""
    from tdisense.errors import TdiError
    from tdisense.experiment import emit_json, worst_case_bias

    try:
        cfg = load_config(config_path, seed=seed, threads=threads, mode='exact', out_dir=out_dir)
        omega = cfg.omega_values()[0]
        results = []
        for epsilon in cfg.epsilons:
            found = worst_case_bias(cfg, strategy, epsilon, omega)
            results.append({
                'epsilon': epsilon,
                'relative_bias': found.value,
                'distribution': found.distribution.to_dict(),
                'table': [{'law': label, 'relative_bias': value} for label, value in found.table],
            })
            click.echo(f"eps={epsilon:.3e} worst |b/omega|={found.value:.4e} ({found.distribution.label})")
        path = emit_json({'strategy': strategy, 'omega': omega, 'seed': cfg.seed, 'results': results},
                         os.path.join(cfg.out_dir, f'worst_case_{strategy}.json'))
    except TdiError as e:
        _fail(e)

    click.echo(f"Wrote {path}")


@click.command()
@experiment_options
@with_appcontext
def multilevel(config_path, seed, threads, mode, out_dir):
    """Compare CE and FE with an electron coupled to phonon modes."""
    from tdisense.errors import TdiError
    from tdisense.experiment import emit, multilevel_sweep

    try:
        cfg = load_config(config_path, seed=seed, threads=threads, mode=mode, out_dir=out_dir)
        result = multilevel_sweep(cfg)
        paths = emit(result, stem='multilevel')
    except TdiError as e:
        _fail(e)

    for row in result.aggregates():
        click.echo(f"N={row['modes']} {row['strategy']:>13} eps={row['epsilon']:.3e} "
                   f"mean_mse={row['mean_mse']:.4e}")
    for step in result.extra['convergence']:
        change = step['relative_change']
        change = 'dimension cap' if change is None else f'{change:.2e}'
        status = 'converged' if step['converged'] else 'open'
        click.echo(f"N={step['modes']} {step['strategy']:>13} d={step['fock_dim']}->{step['next_fock_dim']} "
                   f"change={change} {status}")
    click.echo(f"Wrote {paths['csv']} and {paths['manifest']}")


def register_commands(app):
    """Register CLI commands with Flask app."""
    app.cli.add_command(sweep)
    app.cli.add_command(bounds)
    app.cli.add_command(worst_case)
    app.cli.add_command(multilevel)


def _make_app():
    from tdisense import create_app
    return create_app(os.environ.get('FLASK_CONFIG', 'production'))


# Console script entry point (tdi-sense)
cli = FlaskGroup(create_app=_make_app, add_default_commands=False)
