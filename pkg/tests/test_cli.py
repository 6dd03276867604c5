import csv

import pytest

from causal_bald.cli import main
from causal_bald.config import OUT_ENV, ExperimentConfig, parse_config
from causal_bald.errors import ConfigError

QUICK = "warm_up_size = 5\nacquisition_size = 5\nacquisition_steps = 2\nn_pool = 100\nn_valid = 20\nn_test = 50\n"


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """Synthetic defaults with two seeds, shared by the tests below."""
    out = tmp_path_factory.mktemp("runs")
    assert main(["run", "--seed", "0,1", "--out", str(out)]) == 0
    return out


class TestConfigFile:
    def test_parse(self):
        cfg = parse_config("# comment\nacquisition = mu_rho_bald\nseeds = 3, 4\ntemperature = 0.5  # inline\n")
        assert cfg.acquisition.value == "mu_rho_bald"
        assert cfg.seeds == (3, 4)
        assert cfg.temperature == 0.5
        assert cfg.acquisition_steps == 30

    def test_dataset_defaults(self):
        cfg = ExperimentConfig(data_source="ihdp", data_path="x.csv")
        assert (cfg.warm_up_size, cfg.acquisition_size, cfg.acquisition_steps) == (100, 10, 38)
        cfg = ExperimentConfig(data_source="phi_surrogate")
        assert (cfg.warm_up_size, cfg.acquisition_size, cfg.acquisition_steps) == (250, 50, 55)

    @pytest.mark.parametrize("text", [
        "colour = blue", "seeds = 1, 1", "seeds =", "temperature = hot", "model = forest",
        "acquisition = batchbald", "data_source = ihdp", "no equals sign",
    ])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_output_precedence(self, monkeypatch):
        cfg = ExperimentConfig(out_dir="from_config")
        monkeypatch.delenv(OUT_ENV, raising=False)
        assert str(cfg.output_dir()) == "from_config"
        monkeypatch.setenv(OUT_ENV, "from_env")
        assert str(cfg.output_dir()) == "from_env"
        assert str(cfg.output_dir("from_flag")) == "from_flag"


class TestRun:
    def test_two_seed_default_run(self, default_run):
        files = sorted((default_run / "random").glob("seed_*.csv"))
        assert [f.name for f in files] == ["seed_0.csv", "seed_1.csv"]
        for f in files:
            body = rows(f)[1:]
            assert len(body) == 31
            assert body[-1][1] == "310"

    def test_aggregate(self, default_run, tmp_path):
        out = tmp_path / "curve.csv"
        assert main(["aggregate", str(default_run / "random"), "--out", str(out)]) == 0
        table = rows(out)
        assert table[0] == ["step", "n_train", "mean_pehe", "se_pehe", "n_seeds"]
        assert len(table) == 32
        assert all(r[4] == "2" for r in table[1:])

    def test_plotdata(self, default_run, capsys):
        assert main(["plotdata", str(default_run)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 32 and all(line.startswith("random,") for line in lines[1:])

    def test_config_file_and_env_override(self, tmp_path, monkeypatch):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(QUICK + "acquisition = tau_bald\nseeds = 7\n")
        monkeypatch.setenv(OUT_ENV, str(tmp_path / "env_out"))
        assert main(["run", "--config", str(cfg)]) == 0
        assert len(rows(tmp_path / "env_out" / "tau_bald" / "seed_7.csv")) == 4
        assert (tmp_path / "env_out" / "tau_bald" / "seed_7.meta.json").exists()

    def test_parallel_matches_serial(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(QUICK + "seeds = 1, 2\n")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
        for seed in (1, 2):
            name = f"random/seed_{seed}.csv"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_generate(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(QUICK)
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        pool = rows(tmp_path / "seed_0" / "pool.csv")
        assert pool[0][0].startswith("# source=")
        assert pool[1][:4] == ["treatment", "outcome", "mu0", "mu1"]
        assert len(pool) == 102


class TestDiagnostics:
    def test_budget_exceeds_pool(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("n_pool = 50\n")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 3
        assert "exceeds pool size 50" in capsys.readouterr().err
        assert not (tmp_path / "random").exists()

    def test_distinct_messages(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("colour = blue\n")
        codes, messages = [], []
        for argv in (["run", "--bogus"], ["run", "--config", str(tmp_path / "missing.cfg")], ["run", "--config", str(bad)]):
            codes.append(main(argv))
            messages.append(capsys.readouterr().err)
        assert codes == [2, 4, 3]
        assert "unrecognized arguments" in messages[0]
        assert "config file not found" in messages[1]
        assert "unknown key 'colour'" in messages[2]

    def test_missing_trajectories(self, tmp_path, capsys):
        assert main(["aggregate", str(tmp_path / "nothing")]) == 4
        assert "missing file" in capsys.readouterr().err

    def test_no_subcommand(self):
        assert main([]) == 2
