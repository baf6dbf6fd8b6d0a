import json
from pathlib import Path

import numpy as np

from hypermc.cli import main
from hypermc.formats import read_completed_matrix, read_network

MODEL_TOML = """
[model]
n = 12
m = 6
K = 2
theta = 0.0
p = 1.0
gamma = 0.5

[model.alpha]
2 = 0.95

[model.beta]
2 = 0.02
"""

SWEEP_TOML = MODEL_TOML + """
[sweep]
axis = "p_ratio"
grid = [0.8, 2.0]
trials = 3
variants = ["mch"]
master_seed = 7
"""

THRESHOLD_TOML = """
[model]
n = 1000
m = 500
K = 4
theta = 0.0
gamma = 0.2

[model.quality]
2 = 2.0
3 = 1.0
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def dir_digest(root: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


class TestGenerateSolve:
    def test_generate_and_solve_round_trip(self, tmp_path):
        config = write(tmp_path, "model.toml", MODEL_TOML)
        out = tmp_path / "inst"
        assert main(["generate", "--config", str(config), "--out", str(out),
                     "--seed", "3"]) == 0
        for name in ("network.txt", "observed.txt", "truth_matrix.txt",
                     "truth_clusters.txt", "instance.json"):
            assert (out / name).exists()
        sol = tmp_path / "sol"
        code = main(["solve", "--matrix", str(out / "observed.txt"),
                     "--network", str(out / "network.txt"), "--k", "2",
                     "--config", str(config), "--out", str(sol), "--seed", "3"])
        assert code == 0
        completed = read_completed_matrix(sol / "completed.txt")
        truth = read_completed_matrix(out / "truth_matrix.txt")
        assert np.array_equal(completed, truth)  # noiseless saturated instance

    def test_generate_deterministic(self, tmp_path):
        config = write(tmp_path, "model.toml", MODEL_TOML)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["generate", "--config", str(config), "--out", str(out),
                         "--seed", "5"]) == 0
            outs.append(dir_digest(out))
        assert outs[0] == outs[1]

    def test_solve_n_mismatch_names_both_values(self, tmp_path, capsys):
        config = write(tmp_path, "model.toml", MODEL_TOML)
        out = tmp_path / "inst"
        main(["generate", "--config", str(config), "--out", str(out)])
        (tmp_path / "small.txt").write_text("2 2\n+1 -1\n-1 +1\n")
        code = main(["solve", "--matrix", str(tmp_path / "small.txt"),
                     "--network", str(out / "network.txt"), "--k", "2",
                     "--out", str(tmp_path / "sol")])
        assert code == 1
        err = capsys.readouterr().err
        assert "12" in err and "2" in err

    def test_estimates_written_without_params(self, tmp_path):
        config = write(tmp_path, "model.toml", MODEL_TOML)
        out = tmp_path / "inst"
        main(["generate", "--config", str(config), "--out", str(out)])
        sol = tmp_path / "sol"
        assert main(["solve", "--matrix", str(out / "observed.txt"),
                     "--network", str(out / "network.txt"), "--k", "2",
                     "--out", str(sol)]) == 0
        payload = json.loads((sol / "estimates.json").read_text())
        assert payload["estimates"] is not None
        assert "2" in payload["estimates"]["alpha"]


class TestSweepCommand:
    def test_outputs_and_determinism(self, tmp_path):
        config = write(tmp_path, "sweep.toml", SWEEP_TOML)
        digests = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["sweep", "--config", str(config), "--out", str(out),
                         "--seed", "9"]) == 0
            for produced in ("sweep.csv", "manifest.json", "sweep.png"):
                assert (out / produced).exists()
            digests.append(dir_digest(out))
        assert digests[0] == digests[1]

    def test_threads_do_not_change_outputs(self, tmp_path):
        config = write(tmp_path, "sweep.toml", SWEEP_TOML)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["sweep", "--config", str(config), "--out", str(a)]) == 0
        assert main(["sweep", "--config", str(config), "--out", str(b),
                     "--threads", "2"]) == 0
        assert dir_digest(a) == dir_digest(b)

    def test_rerun_from_manifest_reproduces(self, tmp_path):
        config = write(tmp_path, "sweep.toml", SWEEP_TOML)
        first = tmp_path / "first"
        assert main(["sweep", "--config", str(config), "--out", str(first)]) == 0
        second = tmp_path / "second"
        assert main(["sweep", "--config", str(first / "manifest.json"),
                     "--out", str(second)]) == 0
        assert (first / "sweep.csv").read_bytes() == (second / "sweep.csv").read_bytes()

    def test_missing_sweep_table(self, tmp_path):
        config = write(tmp_path, "model.toml", MODEL_TOML)
        assert main(["sweep", "--config", str(config), "--out", str(tmp_path / "x")]) == 1


class TestThresholdCommand:
    def test_prints_values(self, tmp_path, capsys):
        config = write(tmp_path, "thr.toml", THRESHOLD_TOML)
        assert main(["threshold", "--config", str(config)]) == 0
        out = capsys.readouterr().out
        assert "p_star" in out and "g_star" in out

    def test_json_format(self, tmp_path, capsys):
        config = write(tmp_path, "thr.toml", THRESHOLD_TOML)
        assert main(["threshold", "--config", str(config), "--format", "json"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["p_star"] > 0
        assert record["regime"] in ("cluster-recovery", "vector-recovery")
        assert len(record["curve"]) >= 2

    def test_writes_curve_files(self, tmp_path):
        config = write(tmp_path, "thr.toml", THRESHOLD_TOML)
        out = tmp_path / "thr"
        assert main(["threshold", "--config", str(config), "--out", str(out)]) == 0
        for name in ("threshold_curve.csv", "threshold.json", "threshold.png"):
            assert (out / name).exists()


class TestNetworkCommands:
    def test_expand_and_degrade(self, tmp_path):
        net = tmp_path / "net.txt"
        net.write_text("1 2 3\n4 5\n#labels\n1 1\n2 1\n3 1\n4 2\n5 2\n")
        expanded = tmp_path / "expanded.txt"
        assert main(["expand", "--network", str(net), "--out-file", str(expanded)]) == 0
        parsed = read_network(expanded)
        assert parsed.bundle.layer(2).num_edges == 4
        assert parsed.labels is not None

        degraded = tmp_path / "deg.txt"
        assert main(["degrade", "--network", str(net), "--q", "1.0",
                     "--out-file", str(degraded), "--seed", "1"]) == 0
        kept = read_network(degraded)
        assert kept.bundle.total_edges == 2

        empty = tmp_path / "empty.txt"
        assert main(["degrade", "--network", str(net), "--q", "0.0",
                     "--out-file", str(empty), "--seed", "1"]) == 0
        assert read_network(empty).bundle.total_edges == 0

    def test_degrade_q_validation(self, tmp_path):
        net = tmp_path / "net.txt"
        net.write_text("1 2\n")
        assert main(["degrade", "--network", str(net), "--q", "1.5",
                     "--out-file", str(tmp_path / "o.txt")]) == 1


class TestSemirealCommand:
    def test_comparison_outputs(self, tmp_path):
        rng = np.random.default_rng(2)
        lines = []
        labels = [1] * 8 + [2] * 8
        for i in range(1, 17):
            for j in range(i + 1, 17):
                same = labels[i - 1] == labels[j - 1]
                if rng.random() < (0.85 if same else 0.05):
                    lines.append(f"{i} {j}")
        for _ in range(30):
            base = 0 if rng.random() < 0.5 else 8
            tri = rng.choice(np.arange(base + 1, base + 9), 3, replace=False)
            lines.append(" ".join(str(v) for v in sorted(tri.tolist())))
        lines.append("#labels")
        lines += [f"{i} {labels[i - 1]}" for i in range(1, 17)]
        net = tmp_path / "net.txt"
        net.write_text("\n".join(lines) + "\n")
        config = tmp_path / "semi.toml"
        config.write_text(
            f"""
[semi_real]
network = "{net}"
m = 8
gamma = 0.25
theta = 0.1
p = 0.8
q_grid = [1.0]
trials = 2
variants = ["mch", "graph"]
master_seed = 0
"""
        )
        out = tmp_path / "semi"
        assert main(["semireal", "--config", str(config), "--out", str(out)]) == 0
        for name in ("semireal.csv", "manifest.json", "semireal.png"):
            assert (out / name).exists()
        header = (out / "semireal.csv").read_text().splitlines()[0]
        assert header.startswith("q,variant,n_trials,err_prob,mean_mae")


class TestOracleCheckCommand:
    def test_report_runs(self, tmp_path, capsys):
        out = tmp_path / "oc"
        assert main(["oracle-check", "--trials", "5", "--seed", "0",
                     "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "5 trials" in text
        assert (out / "oracle_check.csv").exists()


class TestDispatch:
    def test_unknown_subcommand_exits_one(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_flag_exits_one(self, capsys):
        assert main(["threshold", "--bogus"]) == 1

    def test_no_command_prints_usage(self, capsys):
        assert main([]) == 1

    def test_missing_config_is_validation_error(self, capsys):
        assert main(["sweep"]) == 1
        assert "config" in capsys.readouterr().err

    def test_missing_file_is_validation_error(self, tmp_path):
        assert main(["expand", "--network", str(tmp_path / "nope.txt"),
                     "--out-file", str(tmp_path / "o.txt")]) == 1
