"""
Command-line interface.

    rabitherm [--config PATH] [--out DIR] [--seed N] [--threads N] [--precision MODE] COMMAND ...

Parameters resolve as defaults < --config document (or a previous manifest) < flags.
"""

import functools
import logging
from pathlib import Path

import click
import colorama
import numpy as np
import pandas as pd

from rabitherm import __version__, create_app
from rabitherm.exceptions import ConfigError, RabithermError
from rabitherm.exporters import curve_frame, write_csv, write_manifest
from rabitherm.forms import EnsembleForm, PeakRatioForm, load_document
from rabitherm.models import BrightProfile, PrecisionMode
from rabitherm.services import adiabatic, ensemble, exact, ideal, model as model_service, thermo

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64 - 1


class RunContext:
    """Global options plus the resolved runtime"""

    def __init__(self, app, config_path=None, out_dir='out', seed=None, threads=None, precision=None):
        self.app = app
        self.config_path = config_path
        self.out_dir = Path(out_dir)
        self.seed = seed
        self.threads = threads if threads is not None else app.get('THREADS', 1)
        self.precision = precision

    def document(self) -> dict:
        if not self.config_path:
            return {}
        document = load_document(self.config_path)
        if 'command' in document and isinstance(document.get('config'), dict):
            document = document['config']
        return document

    def resolve(self, defaults: dict, **flags) -> dict:
        resolved = {'seed': 0, 'precision': self.app.get('PRECISION', 'standard')}
        resolved.update(defaults)
        resolved.update({k: v for k, v in self.document().items() if k in resolved})
        overrides = dict(flags, seed=self.seed, precision=self.precision)
        resolved.update({k: v for k, v in overrides.items() if v is not None})
        return resolved

    def grid_defaults(self) -> dict:
        return {
            't_min_log10': self.app.get('T_MIN_LOG10', -3.0),
            't_max_log10': self.app.get('T_MAX_LOG10', 0.5),
            't_points': self.app.get('T_POINTS', 400),
        }

    def calculator(self, params: dict) -> thermo.QfiCalculator:
        try:
            precision = PrecisionMode(params['precision'])
        except ValueError as e:
            raise ConfigError(f"Unknown precision mode '{params['precision']}'") from e
        return thermo.QfiCalculator.from_settings(
            self.app.settings, theta=params.get('theta'), precision=precision
        )

    def oracle(self) -> exact.ExactOracle:
        return exact.ExactOracle.from_settings(self.app.settings)

    def finish(self, command: str, params: dict, files, extra=None):
        manifest = write_manifest(self.out_dir, command, params, files, extra)
        click.echo(f"{command}: wrote {len(files)} file(s) to {self.out_dir}")
        logger.info(f"{command} finished; manifest at {manifest}")


def handle_errors(command):
    """Map library errors to a one-line message and the matching exit code"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return command(*args, **kwargs)
        except RabithermError as e:
            logger.error(f"{ctx.command.name} failed: {e}")
            click.secho(f"Error: {e}", err=True, fg="red")
            ctx.exit(e.exit_code)
    return wrapper


def _float_list(value, name) -> list:
    if value is None:
        return []
    if isinstance(value, str):
        value = [item for item in value.split(',') if item.strip()]
    elif not isinstance(value, (list, tuple)):
        value = [value]
    try:
        return [float(item) for item in value]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name} must be a list of numbers: {e}") from e


def _int_list(value, name) -> list:
    values = _float_list(value, name)
    if any(v != int(v) for v in values):
        raise ConfigError(f"{name} must be a list of integers")
    return [int(v) for v in values]


def _temperatures(params, omega_f=1.0):
    return thermo.temperature_grid(float(params['t_min_log10']), float(params['t_max_log10']),
                                   int(params['t_points']), omega_f)


def _require_model(params):
    if not params.get('model'):
        raise ConfigError("A model file is required (--model or 'model' in the config document)")
    return model_service.load_model(params['model'])


@click.group()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='JSON parameter document or a previous manifest.json')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default='out', show_default=True)
@click.option('--seed', type=click.IntRange(0, MAX_SEED), default=None)
@click.option('--threads', type=click.IntRange(1), default=None, help='Worker threads (speed only)')
@click.option('--precision', type=click.Choice([mode.value for mode in PrecisionMode]), default=None)
@click.version_option(__version__)
@click.pass_context
def cli(ctx, config_path, out_dir, seed, threads, precision):
    """Thermal QFI thermometry of the multilevel quantum Rabi model"""
    try:
        app = create_app()
    except ConfigError as e:
        click.secho(f"Error: {e}", err=True, fg="red")
        ctx.exit(e.exit_code)
    ctx.obj = RunContext(app, config_path, out_dir, seed, threads, precision)


@cli.command()
@click.option('--model', 'model_path', type=click.Path(dir_okay=False), default=None)
@click.option('--g', 'g_values', default=None, help='Comma-separated coupling scales lambda_1 / omega_f')
@click.option('--theta', type=click.IntRange(0), default=None)
@click.option('--n-max', type=click.IntRange(1), default=None)
@click.option('--levels', type=click.IntRange(1), default=None, help='Exact levels kept per sweep point')
@click.pass_obj
@handle_errors
def spectrum(run, model_path, g_values, theta, n_max, levels):
    """AA and exact spectra over a coupling sweep"""
    params = run.resolve(
        {'model': None, 'g': None, 'theta': run.app.get('THETA', 5), 'n_max': None, 'levels': 40},
        model=model_path, g=g_values, theta=theta, n_max=n_max, levels=levels,
    )
    model = _require_model(params)
    sweep = _float_list(params['g'], 'g')
    if params['g'] is None:
        sweep = [float(np.linalg.norm(model.coupling, ord=2)) / model.omega_f]
    if not sweep:
        raise ConfigError("Coupling sweep is empty")
    params['g'] = sweep

    oracle = run.oracle()
    aa_frames, exact_frames = [], []
    for g in sweep:
        scaled = model_service.rescale_coupling(model, g * model.omega_f)
        decomp = model_service.svd_decompose(scaled, run.app.get('RANK_TOL'))
        frame = adiabatic.spectrum_frame(adiabatic.aa_spectrum(decomp, scaled, int(params['theta'])))
        frame.insert(0, 'g', g)
        aa_frames.append(frame)
        energies = oracle.exact_spectrum(scaled, params['n_max'])[:int(params['levels'])]
        frame = exact.spectrum_frame(energies, model.omega_f)
        frame.insert(0, 'g', g)
        exact_frames.append(frame)
        logger.debug(f"spectrum: g={g} done")

    files = [
        write_csv(pd.concat(aa_frames, ignore_index=True), run.out_dir / 'aa_spectrum.csv'),
        write_csv(pd.concat(exact_frames, ignore_index=True), run.out_dir / 'exact_spectrum.csv'),
    ]
    run.finish('spectrum', params, files)


@cli.command()
@click.option('--model', 'model_path', type=click.Path(dir_okay=False), default=None)
@click.option('--theta', type=click.IntRange(0), default=None)
@click.option('--t-min', 't_min_log10', type=float, default=None, help='log10(T / omega_f)')
@click.option('--t-max', 't_max_log10', type=float, default=None, help='log10(T / omega_f)')
@click.option('--t-points', type=click.IntRange(1), default=None)
@click.option('--with-exact/--no-exact', default=None)
@click.option('--n-max', type=click.IntRange(1), default=None)
@click.pass_obj
@handle_errors
def qfi(run, model_path, theta, t_min_log10, t_max_log10, t_points, with_exact, n_max):
    """AA QFI curve with components, TLS references and optional exact oracle"""
    defaults = {'model': None, 'theta': run.app.get('THETA', 5), 'with_exact': False, 'n_max': None}
    defaults.update(run.grid_defaults())
    params = run.resolve(defaults, model=model_path, theta=theta, t_min_log10=t_min_log10,
                         t_max_log10=t_max_log10, t_points=t_points, with_exact=with_exact, n_max=n_max)
    model = _require_model(params)
    temperatures = _temperatures(params, model.omega_f)
    decomp = model_service.svd_decompose(model, run.app.get('RANK_TOL'))
    curve = run.calculator(params).qfi_curve(decomp, model, temperatures)

    frame = curve_frame(curve, model.omega_f)
    scale = model.omega_f ** 2
    if params['with_exact']:
        frame['F_exact'] = run.oracle().exact_qfi(model, temperatures, params['n_max']).total * scale
    if decomp.m > 0:
        gap = thermo.lowest_doublet_gap(decomp, model)
        frame['F_tls_fixed'] = thermo.tls_qfi(gap, temperatures) * scale
    else:
        frame['F_tls_fixed'] = np.nan
    frame['F_schottky'] = thermo.schottky_trace(temperatures) * scale

    peaks = [{'T_star': p.t_star / model.omega_f, 'F_star': p.f_star * scale}
             for p in thermo.find_peaks(curve)]
    files = [write_csv(frame, run.out_dir / 'qfi.csv')]
    run.finish('qfi', params, files, {
        'peaks': peaks,
        'extended_points': int(np.count_nonzero(curve.extended_mask)),
        'max_component_deviation': thermo.qfi_components_consistency(curve).max_relative_deviation,
    })


@cli.command('exact')
@click.option('--model', 'model_path', type=click.Path(dir_okay=False), default=None)
@click.option('--n-max', type=click.IntRange(1), default=None)
@click.option('--t-min', 't_min_log10', type=float, default=None)
@click.option('--t-max', 't_max_log10', type=float, default=None)
@click.option('--t-points', type=click.IntRange(1), default=None)
@click.pass_obj
@handle_errors
def exact_command(run, model_path, n_max, t_min_log10, t_max_log10, t_points):
    """Exact-diagonalization spectrum and QFI"""
    defaults = {'model': None, 'n_max': None}
    defaults.update(run.grid_defaults())
    params = run.resolve(defaults, model=model_path, n_max=n_max, t_min_log10=t_min_log10,
                         t_max_log10=t_max_log10, t_points=t_points)
    model = _require_model(params)
    oracle = run.oracle()
    if params['n_max'] is None:
        params['n_max'] = oracle.auto_n_max(model)
        extra = {'cutoff_converged': True}
    else:
        extra = {'cutoff_converged': oracle.check_n_max(model, params['n_max'])}
    temperatures = _temperatures(params, model.omega_f)
    energies = oracle.exact_spectrum(model, params['n_max'], verify_cutoff=False)
    curve = oracle.exact_qfi(model, temperatures, params['n_max'], verify_cutoff=False)
    files = [
        write_csv(exact.spectrum_frame(energies, model.omega_f), run.out_dir / 'exact_spectrum.csv'),
        write_csv(curve_frame(curve, model.omega_f), run.out_dir / 'exact_qfi.csv'),
    ]
    run.finish('exact', params, files, extra)


@cli.command('ideal')
@click.option('--D', 'd_values', default=None, help='Comma-separated excited degeneracies')
@click.option('--E', 'gap', type=float, default=None)
@click.option('--t-min', 't_min_log10', type=float, default=None)
@click.option('--t-max', 't_max_log10', type=float, default=None)
@click.option('--t-points', type=click.IntRange(1), default=None)
@click.pass_obj
@handle_errors
def ideal_command(run, d_values, gap, t_min_log10, t_max_log10, t_points):
    """Ideal-thermometer peak table and curves"""
    defaults = {'D': [1, 50, 1000], 'E': 1.0, 't_min_log10': -2.0, 't_max_log10': 1.0, 't_points': 400}
    params = run.resolve(defaults, D=d_values, E=gap, t_min_log10=t_min_log10,
                         t_max_log10=t_max_log10, t_points=t_points)
    params['D'] = _int_list(params['D'], 'D')
    params['E'] = float(params['E'])
    table = ideal.ideal_table(params['D'], params['E'])

    temperatures = _temperatures(params)
    curves = pd.concat([
        pd.DataFrame({'D': D, 'T': temperatures,
                      'F': ideal.ideal_qfi(ideal.make_thermometer(params['E'], D), temperatures)})
        for D in params['D']
    ], ignore_index=True)
    files = [write_csv(table, run.out_dir / 'ideal.csv'),
             write_csv(curves, run.out_dir / 'ideal_curves.csv')]
    run.finish('ideal', params, files)


@cli.command()
@click.option('--m', 'm', type=click.IntRange(1), default=None)
@click.option('--n', 'n_dim', type=click.IntRange(1), default=None)
@click.option('--beta', 'beta_sym', type=float, default=None)
@click.option('--trials', type=click.IntRange(0), default=None)
@click.option('--bin-width', type=float, default=None)
@click.pass_obj
@handle_errors
def wishart(run, m, n_dim, beta_sym, trials, bin_width):
    """Laguerre-Wishart modes and their Monte Carlo check"""
    params = run.resolve({'m': 5, 'n': 10, 'beta': 2.0, 'trials': 10000, 'bin_width': 0.02},
                         m=m, n=n_dim, beta=beta_sym, trials=trials, bin_width=bin_width)
    modes = ensemble.laguerre_wishart_modes(int(params['m']), int(params['n']), float(params['beta']))
    table = pd.DataFrame({
        'k': np.arange(1, modes.m + 1),
        'X': modes.modes,
        'ratio': modes.modes / modes.modes[0] if modes.modes[0] > 0 else np.zeros(modes.m),
    })
    files = [write_csv(table, run.out_dir / 'wishart_modes.csv')]
    extra = {'stieltjes_residual': ensemble.stieltjes_residual(modes), 'alpha': modes.alpha}

    if int(params['trials']) > 0:
        if float(params['beta']) != 2.0:
            raise ConfigError("Monte Carlo draws are complex Ginibre only (beta = 2); use --trials 0")
        report = ensemble.wishart_monte_carlo(modes.m, modes.n_dim, int(params['trials']),
                                              int(params['seed']), float(params['bin_width']))
        files.append(write_csv(report.frame(), run.out_dir / 'wishart_histograms.csv'))
        extra['mode_offsets_bins'] = report.offsets.tolist()
        extra['mode_offsets_passed'] = report.passed()
        if not report.passed():
            logger.warning(f"wishart: mode offsets {report.offsets.tolist()} exceed "
                           f"{ensemble.MODE_OFFSET_BINS} bins")
    run.finish('wishart', params, files, extra)


@cli.command('ensemble')
@click.option('--spec', 'spec_path', type=click.Path(dir_okay=False), default=None,
              help='EnsembleSpec JSON document')
@click.option('--trials', type=click.IntRange(1), default=None)
@click.pass_obj
@handle_errors
def ensemble_command(run, spec_path, trials):
    """Random-coupling ensemble: heatmap, typical curve and per-trial peaks"""
    document = dict(run.document())
    if spec_path:
        document.update(load_document(spec_path))
    if trials is not None:
        document['trials'] = trials
    if run.seed is not None:
        document['master_seed'] = run.seed
    document.setdefault('t_min_log10', run.app.get('T_MIN_LOG10', -3.0))
    document.setdefault('t_max_log10', run.app.get('T_MAX_LOG10', 0.5))
    document.setdefault('t_points', run.app.get('T_POINTS', 400))
    document.setdefault('theta', run.app.get('THETA', 5))
    form = EnsembleForm(document)
    spec = form.to_spec()
    params = dict(spec.to_document(),
                  precision=run.precision or document.get('precision') or run.app.get('PRECISION', 'standard'))

    runner = ensemble.EnsembleRunner.from_settings(
        run.app.settings, calculator=run.calculator(params), threads=run.threads
    )
    result = runner.run_ensemble(spec)
    files = [
        write_csv(ensemble.heatmap_frame(result.heatmap), run.out_dir / 'heatmap.csv'),
        write_csv(curve_frame(result.typical_curve, spec.omega_f), run.out_dir / 'typical_curve.csv'),
        write_csv(ensemble.peaks_frame(result.peaks), run.out_dir / 'peaks.csv'),
    ]
    run.finish('ensemble', params, files, {
        'completed_trials': result.completed_trials,
        'exclusions': [{'trial': t, 'reason': reason} for t, reason in result.exclusions],
        'calibration_constant': result.calibration_constant,
        'edge_estimate': result.edge_estimate,
        'marked_bins': int(sum(result.marked_bins)),
    })


@cli.command('peak-ratio')
@click.option('--spec', 'spec_path', type=click.Path(dir_okay=False), default=None,
              help='Peak-ratio scan JSON document')
@click.pass_obj
@handle_errors
def peak_ratio(run, spec_path):
    """Bright-dark peak QFI against the matched ideal thermometer"""
    document = dict(run.document())
    if spec_path:
        document.update(load_document(spec_path))
    data = PeakRatioForm(document).cleaned_data
    params = {
        'd_g': data['d_g'], 'D': data['D'], 'g': data['g'], 'omega_a': float(data['omega_a']),
        'bright_profile': data['bright_profile'].value, 'theta': document.get('theta', run.app.get('THETA', 5)),
        'precision': run.precision or document.get('precision') or run.app.get('PRECISION', 'standard'),
    }
    params.update({key: document.get(key, value) for key, value in run.grid_defaults().items()})
    calculator = run.calculator(params)
    temperatures = _temperatures(params)

    frames = [
        ensemble.peak_ratio_scan(d_g, data['D'], g, data['omega_a'], calculator, temperatures,
                                 BrightProfile(params['bright_profile']))
        for d_g in data['d_g'] for g in data['g']
    ]
    table = pd.concat(frames, ignore_index=True)
    flagged = int(table['flagged'].sum())
    if flagged:
        logger.warning(f"peak-ratio: {flagged} row(s) without a bright-dark peak")
    files = [write_csv(table, run.out_dir / 'peak_ratio.csv')]
    run.finish('peak-ratio', params, files, {'flagged_rows': flagged})


def main():
    # ANSI colours for secho on legacy Windows consoles
    colorama.just_fix_windows_console()
    cli(prog_name='rabitherm')
