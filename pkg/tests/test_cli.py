"""Driver tests: flag parsing, config-file merging, the thread cap, exit
codes on bad usage, and in-process happy paths on coarse grids. The verify
command's full-size panel and the subprocess-level byte-reproducibility
runs live in the acceptance suite.
"""

import argparse
import math
import os

import numpy as np
import pytest

from sidecast.cli import (UsageError, _apply_thread_cap, _load_config,
                          _merge_config, _params_from, _parse_grid,
                          _parse_points, main)
from sidecast.fields import GridSpec, sample, write_field
from sidecast.kernels import test_problem
from sidecast.regularizer import RegMode

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")

# coarse synthetic geometry shared by the happy-path runs
_DATA_GRID = "257,500,-10,0.078125,0.05,0.08"
_OUT_GRID = "33,33,0,0.03125,0.1,0.121875"


def _namespace(**kw):
    base = dict(config=None, problem=None, mode=None, epsilon=None,
                gamma=None, m=None, seed=None, data_grid=None, grid=None)
    base.update(kw)
    return argparse.Namespace(**base)


class TestParseGrid:
    def test_round_trip(self):
        g = _parse_grid(" 33 , 40 , -5.0 , 0.25 , 0.1 , 0.05 ")
        assert g == GridSpec(x0=-5.0, dx=0.25, nx=33, t0=0.1, dt=0.05, nt=40)

    def test_wrong_arity(self):
        with pytest.raises(UsageError, match="nx,nt,x0,dx,t0,dt"):
            _parse_grid("33,40,-5,0.25,0.1")

    def test_non_numeric(self):
        with pytest.raises(UsageError, match="bad grid"):
            _parse_grid("33,40,-5,zero,0.1,0.05")


class TestParsePoints:
    def test_list_with_trailing_separator(self):
        assert _parse_points("0,0; 1.5,-2 ;") == [(0.0, 0.0), (1.5, -2.0)]

    def test_wrong_arity(self):
        with pytest.raises(UsageError, match="points must be"):
            _parse_points("1;2,3")

    def test_non_numeric(self):
        with pytest.raises(UsageError, match="bad point"):
            _parse_points("1,oops")

    def test_empty(self):
        with pytest.raises(UsageError, match="empty point list"):
            _parse_points(" ; ")


class TestConfigFile:
    def test_load_and_merge(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# reproduces a run\n"
            "problem=p2\n"
            "epsilon=0.02\n"
            "noise_seed=7\n"
            "out_grid=%s\n"
            "kappa=6.28  # derived, ignored\n"
            "measured_error=0.1\n" % _OUT_GRID)
        ns = _namespace(config=str(cfg), epsilon=0.04)
        _merge_config(ns)
        assert ns.problem == "p2"
        assert ns.epsilon == 0.04          # flag beats config
        assert ns.seed == 7                # noise_seed aliases seed
        assert ns.grid == _OUT_GRID        # out_grid aliases grid
        assert not hasattr(ns, "kappa")    # unknown keys ignored

    def test_later_keys_win_within_the_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epsilon=0.01\nepsilon=0.005\n")
        assert _load_config(str(cfg))["epsilon"] == "0.005"

    def test_malformed_line_carries_position(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("problem=p1\nnot a pair\n")
        with pytest.raises(UsageError, match=r"run\.cfg:2: expected"):
            _load_config(str(cfg))

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError, match="cannot read config"):
            _load_config(str(tmp_path / "nope.cfg"))

    def test_bad_cast_is_reported(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epsilon=tiny\n")
        ns = _namespace(config=str(cfg))
        with pytest.raises(UsageError, match="bad value for epsilon"):
            _merge_config(ns)

    def test_keys_without_a_namespace_slot_are_skipped(self, tmp_path):
        # verify-style namespaces have no eps_list attribute; a config
        # written for another subcommand must not break them
        cfg = tmp_path / "run.cfg"
        cfg.write_text("eps_list=0.04,0.02\nproblem=p1\n")
        ns = _namespace(config=str(cfg))
        del ns.grid  # simulate a sparser namespace
        _merge_config(ns)
        assert ns.problem == "p1"
        assert not hasattr(ns, "eps_list")


class TestParamsFrom:
    def test_l2_defaults_gamma_to_one(self):
        p = _params_from(_namespace(epsilon=0.01))
        assert p.mode is RegMode.L2
        assert p.gamma == 1.0 and p.epsilon == 0.01

    def test_epsilon_required(self):
        with pytest.raises(UsageError, match="--epsilon is required"):
            _params_from(_namespace())

    def test_hm_requires_m(self):
        with pytest.raises(UsageError, match="--m is required"):
            _params_from(_namespace(mode="hm", epsilon=1e-3))

    def test_unknown_mode(self):
        with pytest.raises(UsageError, match="mode must be"):
            _params_from(_namespace(mode="x3", epsilon=0.01))

    def test_out_of_range_epsilon_becomes_usage_error(self):
        # the admissibility check lives in the parameter class; the driver
        # turns it into exit-code-2 material
        with pytest.raises(UsageError):
            _params_from(_namespace(epsilon=0.3, gamma=1.0))


class TestThreadCap:
    def _clear(self, monkeypatch):
        for var in _THREAD_VARS:
            monkeypatch.delenv(var, raising=False)

    def test_positive_cap_sets_all_pools(self, monkeypatch):
        self._clear(monkeypatch)
        monkeypatch.setenv("SIDECAST_THREADS", "2")
        _apply_thread_cap()
        for var in _THREAD_VARS:
            assert os.environ[var] == "2"

    def test_non_integer_warns_and_is_ignored(self, monkeypatch, capsys):
        self._clear(monkeypatch)
        monkeypatch.setenv("SIDECAST_THREADS", "abc")
        _apply_thread_cap()
        assert "ignoring non-integer" in capsys.readouterr().err
        assert "OMP_NUM_THREADS" not in os.environ

    @pytest.mark.parametrize("raw", ["0", "-4", "", "  "])
    def test_nonpositive_or_blank_is_a_no_op(self, monkeypatch, raw):
        self._clear(monkeypatch)
        monkeypatch.setenv("SIDECAST_THREADS", raw)
        _apply_thread_cap()
        for var in _THREAD_VARS:
            assert var not in os.environ

    def test_cap_applies_through_main(self, monkeypatch, capsys):
        self._clear(monkeypatch)
        monkeypatch.setenv("SIDECAST_THREADS", "3")
        assert main(["reconstruct", "--problem", "p1"]) == 2
        assert os.environ["OMP_NUM_THREADS"] == "3"
        capsys.readouterr()


class TestUsageExits:
    def test_no_subcommand_is_an_argparse_exit(self):
        with pytest.raises(SystemExit):
            main([])

    def test_missing_epsilon(self, capsys):
        assert main(["reconstruct", "--problem", "p1"]) == 2
        assert "--epsilon is required" in capsys.readouterr().err

    def test_problem_and_files_conflict(self, capsys):
        rc = main(["reconstruct", "--problem", "p1", "--epsilon", "0.01",
                   "--f", "f.grd", "--g", "g.grd"])
        assert rc == 2
        assert "not both" in capsys.readouterr().err

    def test_file_mode_needs_both_files(self, capsys):
        rc = main(["reconstruct", "--epsilon", "0.01", "--f", "f.grd"])
        assert rc == 2
        assert "both --f and --g" in capsys.readouterr().err

    def test_no_data_source(self, capsys):
        assert main(["reconstruct", "--epsilon", "0.01"]) == 2
        assert "need a data source" in capsys.readouterr().err

    def test_epsilon_out_of_range(self, capsys):
        rc = main(["reconstruct", "--problem", "p1", "--epsilon", "0.3"])
        assert rc == 2
        capsys.readouterr()

    def test_sinc_requires_index_radius(self, capsys):
        rc = main(["sinc", "--problem", "p1", "--epsilon", "0.02"])
        assert rc == 2
        assert "--N" in capsys.readouterr().err

    def test_convergence_requires_eps_list(self, capsys):
        assert main(["convergence", "--problem", "p1"]) == 2
        assert "--eps-list" in capsys.readouterr().err

    def test_convergence_rejects_blank_eps_list(self, capsys):
        rc = main(["convergence", "--problem", "p1", "--eps-list", " , "])
        assert rc == 2
        assert "empty" in capsys.readouterr().err


@pytest.fixture(scope="module")
def small_grd(tmp_path_factory):
    """A smooth stored reconstruction for the surrogate and file paths."""
    d = tmp_path_factory.mktemp("grd")
    g = GridSpec(x0=-5.0, dx=10.0 / 32, nx=33, t0=0.05, dt=0.1, nt=40)
    prob = test_problem("P1")
    paths = {}
    for name, fn in (("f", prob.f0), ("g", prob.g0), ("v", prob.v_exact)):
        path = str(d / (name + ".grd"))
        write_field(sample(fn, g), path)
        paths[name] = path
    return g, paths


class TestFileModeReconstruct:
    def test_missing_output_grid(self, small_grd, capsys):
        _, paths = small_grd
        rc = main(["reconstruct", "--epsilon", "0.01",
                   "--f", paths["f"], "--g", paths["g"]])
        assert rc == 2
        assert "--grid" in capsys.readouterr().err

    def test_mismatched_grids(self, small_grd, tmp_path, capsys):
        g, paths = small_grd
        other = GridSpec(x0=g.x0, dx=g.dx, nx=g.nx, t0=g.t0, dt=g.dt,
                         nt=g.nt - 1)
        bad = str(tmp_path / "bad.grd")
        write_field(sample(test_problem("P1").g0, other), bad)
        rc = main(["reconstruct", "--epsilon", "0.01",
                   "--f", paths["f"], "--g", bad,
                   "--grid", "9,9,0.2,0.1,0.5,0.3"])
        assert rc == 2
        assert "grids differ" in capsys.readouterr().err

    def test_happy_path_writes_artifacts(self, small_grd, tmp_path, capsys):
        _, paths = small_grd
        out = str(tmp_path / "filemode")
        rc = main(["reconstruct", "--epsilon", "0.01",
                   "--f", paths["f"], "--g", paths["g"],
                   "--grid", "9,9,0.2,0.1,0.5,0.3", "--out", out])
        assert rc == 0
        assert "wrote v_eps.grd" in capsys.readouterr().out
        for name in ("v_eps.grd", "v_eps.csv", "manifest.txt"):
            assert os.path.isfile(os.path.join(out, name))
        manifest = open(os.path.join(out, "manifest.txt")).read()
        assert manifest.startswith("f_file=")
        assert "kappa=%s" % ("%.17g" % (2 * math.pi)) in manifest


class TestSincCommand:
    def test_surrogate_path_square(self, small_grd, tmp_path, capsys):
        _, paths = small_grd
        out = str(tmp_path / "sq")
        rc = main(["sinc", "--v-eps", paths["v"], "--epsilon", "0.02",
                   "--N", "2", "--out", out])
        assert rc == 0
        text = capsys.readouterr().out
        assert "25 coefficients (square, N=2)" in text
        assert "deviation" not in text  # no reference inverse in this path
        assert os.path.isfile(os.path.join(out, "sinc.txt"))
        assert os.path.isfile(os.path.join(out, "sinc_eval.csv"))

    def test_surrogate_path_triangular(self, small_grd, tmp_path, capsys):
        _, paths = small_grd
        out = str(tmp_path / "tri")
        rc = main(["sinc", "--v-eps", paths["v"], "--epsilon", "0.02",
                   "--N", "2", "--index-set", "triangular", "--out", out])
        assert rc == 0
        text = capsys.readouterr().out
        assert "17 coefficients (triangular, N=2)" in text
        assert "dropped-index energy" in text

    def test_zero_radius_rejected(self, small_grd, tmp_path, capsys):
        # --out points at scratch: the directory is created before the
        # radius check fires, and must not land in the caller's cwd
        _, paths = small_grd
        rc = main(["sinc", "--v-eps", paths["v"], "--epsilon", "0.02",
                   "--N", "0", "--out", str(tmp_path / "zr")])
        assert rc == 2
        capsys.readouterr()

    def test_needs_some_source(self, capsys):
        rc = main(["sinc", "--epsilon", "0.02", "--N", "2"])
        assert rc == 2
        assert "need a source" in capsys.readouterr().err


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    rc = main(["reconstruct", "--problem", "p2", "--epsilon", "0.02",
               "--seed", "4", "--data-grid", _DATA_GRID,
               "--grid", _OUT_GRID, "--out", str(out)])
    assert rc == 0
    return out


class TestSyntheticReconstruct:
    def test_artifacts_and_stdout(self, synthetic_run, capsys):
        for name in ("v_eps.grd", "v_eps.csv", "manifest.txt"):
            assert (synthetic_run / name).is_file()

    def test_manifest_reproduces_the_run(self, synthetic_run, tmp_path,
                                         capsys):
        # the manifest doubles as a config file: derived keys are ignored,
        # the rest pin the run, so a rerun is byte-identical
        out2 = tmp_path / "again"
        rc = main(["reconstruct",
                   "--config", str(synthetic_run / "manifest.txt"),
                   "--out", str(out2)])
        assert rc == 0
        capsys.readouterr()
        for name in ("v_eps.grd", "v_eps.csv", "manifest.txt"):
            assert (synthetic_run / name).read_bytes() == \
                (out2 / name).read_bytes()


class TestConvergenceCommand:
    def test_coarse_table(self, tmp_path, capsys):
        out = str(tmp_path / "conv")
        rc = main(["convergence", "--problem", "p1",
                   "--eps-list", "0.04,0.02", "--seed", "1",
                   "--data-grid", _DATA_GRID,
                   "--grid", "17,17,0.25,0.065625,0.1,0.24375",
                   "--out", out])
        assert rc == 0
        text = capsys.readouterr().out
        assert "epsilon" in text and "measured" in text
        path = os.path.join(out, "convergence.csv")
        lines = open(path).read().strip().split("\n")
        assert lines[0] == ("epsilon,measured_error,bound,eta_hat,"
                            "runtime_seconds")
        assert len(lines) == 3
        eps_col = [float(ln.split(",")[0]) for ln in lines[1:]]
        assert eps_col == [0.04, 0.02]


class TestVerifyCommand:
    def test_quick_panel_passes(self, capsys):
        rc = main(["verify", "--quick"])
        text = capsys.readouterr().out
        assert rc == 0
        assert "overall: PASS" in text
        assert "identity residual P1" in text
        assert "identity residual P2" in text

    def test_corrupted_symbol_goes_red(self, capsys):
        rc = main(["verify", "--quick", "--break-shat", "--points", "0,0"])
        text = capsys.readouterr().out
        assert rc == 1
        assert "overall: FAIL" in text
        # only the symbol check fails; the rest of the panel stays green
        assert "symbol closed form vs quadrature  FAIL" in text
