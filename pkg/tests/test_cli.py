"""
Tests for the rabitherm command-line interface
"""

import json

import pandas as pd
import pytest
from click.testing import CliRunner

from rabitherm import __version__
from rabitherm import cli as cli_module
from rabitherm.cli import cli
from rabitherm.exceptions import ConvergenceError
from rabitherm.exporters import sha256_digest
from rabitherm.services import exact


class TestCli:
    """End-to-end runs through CliRunner"""

    def setup_method(self):
        self.runner = CliRunner()

    def invoke(self, out_dir, *args):
        return self.runner.invoke(cli, ['--out', str(out_dir), *args])

    def test_version(self):
        result = self.runner.invoke(cli, ['--version'])
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_qfi_writes_curve_and_manifest(self, tmp_path, two_band_model, write_model):
        out = tmp_path / 'qfi'
        result = self.invoke(out, 'qfi', '--model', str(write_model(two_band_model)),
                             '--t-min', '-2', '--t-points', '30')
        assert result.exit_code == 0, result.output

        header = (out / 'qfi.csv').read_text().splitlines()[0]
        assert header == 'T,F_total,F_s1,F_bb,F_bd,F_dd,F_tls_fixed,F_schottky'
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['command'] == 'qfi'
        assert manifest['version'] == __version__
        assert manifest['config']['t_points'] == 30
        assert manifest['files']['qfi.csv'] == sha256_digest(out / 'qfi.csv')
        assert manifest['max_component_deviation'] <= 1e-10
        assert manifest['extended_points'] == 0

    def test_qfi_with_exact_oracle(self, tmp_path, two_band_model, write_model):
        out = tmp_path / 'qfi'
        result = self.invoke(out, 'qfi', '--model', str(write_model(two_band_model)),
                             '--t-min', '-1', '--t-points', '10', '--with-exact')
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(out / 'qfi.csv')
        assert 'F_exact' in frame.columns
        assert frame['F_exact'].notna().all()

    def test_rerun_from_manifest_is_byte_identical(self, tmp_path, two_band_model, write_model):
        first, second = tmp_path / 'first', tmp_path / 'second'
        result = self.invoke(first, 'qfi', '--model', str(write_model(two_band_model)),
                             '--t-min', '-2.5', '--t-points', '25')
        assert result.exit_code == 0, result.output
        result = self.invoke(second, '--config', str(first / 'manifest.json'), 'qfi')
        assert result.exit_code == 0, result.output
        assert (second / 'qfi.csv').read_bytes() == (first / 'qfi.csv').read_bytes()

    def test_out_of_range_detuning_exits_2(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps({'omega_f': 1.0, 'omega_a': 0.2, 'epsilon': 0.1,
                                    'delta_g': [1.5], 'delta_e': [0.0], 'coupling': [[0.5]]}))
        result = self.invoke(tmp_path / 'out', 'qfi', '--model', str(path))
        assert result.exit_code == 2
        assert 'detuning out of range' in result.stderr

    def test_missing_model_exits_2(self, tmp_path):
        result = self.invoke(tmp_path / 'out', 'qfi')
        assert result.exit_code == 2

    def test_empty_coupling_sweep_exits_2(self, tmp_path, qrm_model, write_model):
        result = self.invoke(tmp_path / 'out', 'spectrum', '--model', str(write_model(qrm_model(0.5))),
                             '--g', '')
        assert result.exit_code == 2
        assert 'empty' in result.stderr

    def test_zero_coupling_spectrum_is_free(self, tmp_path, qrm_model, write_model):
        out = tmp_path / 'spectrum'
        result = self.invoke(out, 'spectrum', '--model', str(write_model(qrm_model(0.5, 0.05))),
                             '--g', '0', '--n-max', '5', '--levels', '4', '--theta', '2')
        assert result.exit_code == 0, result.output
        exact_frame = pd.read_csv(out / 'exact_spectrum.csv')
        assert list(exact_frame.columns) == ['g', 'index', 'energy']
        assert exact_frame['energy'].tolist() == pytest.approx([0.0, 0.05, 1.0, 1.05], abs=1e-12)
        aa_frame = pd.read_csv(out / 'aa_spectrum.csv')
        assert set(aa_frame['kind']) == {'dark'}
        assert sorted(aa_frame['energy'])[:4] == pytest.approx([0.0, 0.05, 1.0, 1.05], abs=1e-12)

    def test_exact_command_records_cutoff(self, tmp_path, qrm_model, write_model):
        out = tmp_path / 'exact'
        result = self.invoke(out, 'exact', '--model', str(write_model(qrm_model(0.5))),
                             '--t-points', '10')
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['config']['n_max'] >= 25
        assert set(manifest['files']) == {'exact_spectrum.csv', 'exact_qfi.csv'}
        assert manifest['cutoff_converged'] is True

    def test_exact_command_flags_short_cutoff(self, tmp_path, qrm_model, write_model):
        out = tmp_path / 'exact'
        result = self.invoke(out, 'exact', '--model', str(write_model(qrm_model(5.0))),
                             '--n-max', '30', '--t-points', '10')
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['cutoff_converged'] is False

    def test_convergence_failure_exits_3(self, tmp_path, qrm_model, write_model, monkeypatch):
        def fail(self, model):
            raise ConvergenceError("Ground energy not converged below Fock cutoff 30")

        monkeypatch.setattr(exact.ExactOracle, 'auto_n_max', fail)
        result = self.invoke(tmp_path / 'out', 'exact', '--model', str(write_model(qrm_model(0.5))))
        assert result.exit_code == 3
        assert 'not converged' in result.stderr

    def test_ideal(self, tmp_path):
        out = tmp_path / 'ideal'
        result = self.invoke(out, 'ideal', '--D', '1,1000', '--t-points', '20')
        assert result.exit_code == 0, result.output
        table = pd.read_csv(out / 'ideal.csv')
        assert table['D'].tolist() == [1, 1000]
        assert len(pd.read_csv(out / 'ideal_curves.csv')) == 40

    def test_wishart(self, tmp_path):
        out = tmp_path / 'wishart'
        result = self.invoke(out, '--seed', '3', 'wishart', '--trials', '500')
        assert result.exit_code == 0, result.output
        modes = pd.read_csv(out / 'wishart_modes.csv')
        assert modes['k'].tolist() == [1, 2, 3, 4, 5]
        assert (out / 'wishart_histograms.csv').exists()
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['stieltjes_residual'] <= 1e-10

    def test_wishart_real_draws_rejected(self, tmp_path):
        result = self.invoke(tmp_path / 'out', 'wishart', '--m', '2', '--n', '5', '--beta', '1',
                             '--trials', '10')
        assert result.exit_code == 2

    def test_ensemble_single_trial(self, tmp_path):
        spec = tmp_path / 'spec.json'
        spec.write_text(json.dumps({'d_g': 2, 'D': 3, 'g': 1.0, 'omega_a': 0.2, 'epsilon': 0.05,
                                    't_min_log10': -2.0, 't_points': 40}))
        out = tmp_path / 'ensemble'
        result = self.invoke(out, '--seed', '11', 'ensemble', '--spec', str(spec), '--trials', '1')
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['completed_trials'] == 1
        assert manifest['config']['master_seed'] == 11
        assert manifest['config']['d_e'] == 5
        assert manifest['marked_bins'] > 0
        heatmap = pd.read_csv(out / 'heatmap.csv')
        assert heatmap['count'].sum() == manifest['marked_bins']

    def test_ensemble_bad_spec_exits_2(self, tmp_path):
        spec = tmp_path / 'spec.json'
        spec.write_text(json.dumps({'d_g': 2, 'g': 1.0, 'omega_a': 0.2}))
        result = self.invoke(tmp_path / 'out', 'ensemble', '--spec', str(spec))
        assert result.exit_code == 2

    def test_peak_ratio(self, tmp_path):
        spec = tmp_path / 'scan.json'
        spec.write_text(json.dumps({'d_g': 1, 'D': [10, 100], 'g': 0.1, 'omega_a': 0.2,
                                    't_min_log10': -2.5, 't_points': 100}))
        out = tmp_path / 'ratio'
        result = self.invoke(out, 'peak-ratio', '--spec', str(spec))
        assert result.exit_code == 0, result.output
        table = pd.read_csv(out / 'peak_ratio.csv')
        assert table['D'].tolist() == [10, 100]
        assert not table['flagged'].any()
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['flagged_rows'] == 0


class TestMain:

    def test_main_prepares_console(self, monkeypatch, capsys):
        calls = []
        monkeypatch.setattr(cli_module.colorama, 'just_fix_windows_console', lambda: calls.append(True))
        monkeypatch.setattr('sys.argv', ['rabitherm', '--version'])
        with pytest.raises(SystemExit) as exit_info:
            cli_module.main()
        assert exit_info.value.code == 0
        assert calls == [True]
        assert __version__ in capsys.readouterr().out
