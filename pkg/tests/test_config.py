"""
Tests for environment configuration, run files and the command-line entry point
"""
from pathlib import Path

import pandas as pd
import pytest
from pydantic import ValidationError

from src.config import Config, RunConfig, load_run_config
from src.main import EXIT_CHECK_FAILED, EXIT_ERROR, main
from src.solver.params import SOLVE_REPORT_COLUMNS


def test_configuration_valid():
    assert Config.validate()
    summary = Config.get_summary()
    assert summary['linear_solver'] in ('direct', 'gmres')
    assert summary['oracle_tol'] <= 1e-8


def test_invalid_configuration_lists_every_problem(monkeypatch):
    monkeypatch.setattr(Config, 'MAX_ITER', 0)
    monkeypatch.setattr(Config, 'LINEAR_SOLVER', 'cg')
    with pytest.raises(ValueError) as info:
        Config.validate()
    assert 'PMCF_MAX_ITER' in str(info.value)
    assert 'PMCF_LINEAR_SOLVER' in str(info.value)


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.domain == 'disk' and cfg.mode == 'newton'
        assert cfg.tol == Config.NONLINEAR_TOL

    def test_run_file(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text("# coarse disk\nk=3\nepsilon=0.5\nmesh.h=0.2\nschedule=2,1,0.5\ncoupled=false\n")
        cfg = load_run_config(path)
        assert cfg.k == 3.0
        assert cfg.mesh_h == 0.2
        assert cfg.schedule == [2.0, 1.0, 0.5]
        assert cfg.coupled is False

    def test_overrides_take_precedence(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text("epsilon=0.5\n")
        cfg = load_run_config(path, {'epsilon': '0.125', 'h_list': '0.2, 0.1'})
        assert cfg.epsilon == 0.125
        assert cfg.h_list == [0.2, 0.1]

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text("epsilon=0.5\nsmoothness=3\n")
        with pytest.raises(ValidationError):
            load_run_config(path)

    @pytest.mark.parametrize('key,value', [('k', '1'), ('epsilon', '0'), ('mode', 'picard'),
                                           ('grid_n', '10'), ('theta', '1')])
    def test_invalid_values(self, key, value):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({key: value})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValueError):
            load_run_config(tmp_path / 'absent.cfg')

    def test_relative_output_resolved_against_output_dir(self, monkeypatch, tmp_path):
        monkeypatch.setattr(Config, 'OUTPUT_DIR', tmp_path)
        assert RunConfig(output='runs/solve.csv').output_path == tmp_path / 'runs' / 'solve.csv'
        absolute = tmp_path / 'elsewhere.csv'
        assert RunConfig(output=str(absolute)).output_path == absolute
        assert RunConfig().output_path is None

    def test_run_file_found_in_data_dir(self, monkeypatch, tmp_path):
        monkeypatch.setattr(Config, 'DATA_DIR', tmp_path)
        (tmp_path / 'shipped.cfg').write_text("epsilon=0.5\n")
        assert load_run_config(Path('shipped.cfg')).epsilon == 0.5

    def test_shipped_run_files_validate(self):
        for path in sorted(Config.DATA_DIR.glob('*.cfg')):
            cfg = load_run_config(Path(path.name))
            assert cfg.output_path is None or cfg.output_path.parent == Config.OUTPUT_DIR


class TestMain:
    def test_schema(self, capsys):
        assert main(['--schema', 'converge-h']) == 0
        out = capsys.readouterr().out
        assert out.startswith('[converge-h]')
        assert 'h1mu_error' in out

    def test_no_command(self):
        assert main([]) == EXIT_ERROR

    def test_rates(self, capsys):
        assert main(['rates', '--set', 'gamma_max=7', '--thetas', '0,0.25']) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].split(',') == ['k', 'gamma', 'alpha', 's', 'r', 'beta1', 'beta2',
                                       'lambda(0)', 'lambda(0.25)']

    def test_infeasible_rates_fail(self):
        assert main(['rates', '--set', 'gamma_max=3']) == EXIT_ERROR

    def test_bad_override(self):
        assert main(['oracle', '--set', 'epsilon']) == EXIT_ERROR
        assert main(['oracle', '--set', 'smoothness=1']) == EXIT_ERROR

    def test_solve_writes_report_and_function(self, tmp_path):
        run = tmp_path / 'disk.cfg'
        run.write_text(f"epsilon=0.5\nmesh.h=0.3\nschedule=2,1,0.5\noutput={tmp_path / 'solve.csv'}\n")
        assert main(['solve', str(run)]) == 0
        table = pd.read_csv(tmp_path / 'solve.csv')
        assert list(table.columns) == SOLVE_REPORT_COLUMNS
        assert list(table['epsilon']) == [2.0, 1.0, 0.5]
        assert (tmp_path / 'solve.fun').read_text().startswith('pmcf-fun v1')

    def test_rerun_is_bit_identical(self, tmp_path):
        outputs = []
        for name in ('first.csv', 'second.csv'):
            path = tmp_path / name
            assert main(['oracle', '--set', 'epsilon=0.5', '--set', f'output={path}']) == 0
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1]

    def test_relative_output_goes_to_output_dir(self, monkeypatch, tmp_path):
        monkeypatch.setattr(Config, 'OUTPUT_DIR', tmp_path)
        assert main(['oracle', '--set', 'epsilon=0.5', '--set', 'output=profile.csv']) == 0
        assert (tmp_path / 'profile.csv').exists()

    @pytest.mark.parametrize('command,settings', [
        ('solve', ['epsilon=0.5', 'mesh.h=0.3', 'schedule=2,1,0.5']),
        ('converge-eps', ['theta=0.25', 'schedule=0.1,0.05']),
        ('converge-h', ['epsilon=0.5', 'h_list=0.3,0.2']),
        ('converge-coupled', ['beta=1', 'c_coupling=0.75', 'schedule=0.4']),
        ('rates', ['theta=0.25']),
    ])
    def test_command_rerun_is_bit_identical(self, tmp_path, command, settings):
        outputs, codes = [], []
        for name in ('first.csv', 'second.csv'):
            path = tmp_path / name
            args = [command]
            for item in settings + [f'output={path}']:
                args += ['--set', item]
            codes.append(main(args))
            outputs.append(path.read_bytes())
        assert codes[0] == codes[1]
        assert codes[0] in (0, EXIT_CHECK_FAILED)
        assert outputs[0] == outputs[1]
