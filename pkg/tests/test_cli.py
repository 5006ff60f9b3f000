import os

from freqface import imaging
from freqface.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestPipeline:
    def test_full_pipeline(self, tmp_path, capsys):
        data = str(tmp_path / "data")
        out = str(tmp_path / "run")

        code, stdout, _ = run_cli(capsys, "prepare-data", "--synthetic", "2",
                                  "--out", data, "--scale", "4", "--hr-size", "32",
                                  "--seed", "3")
        assert code == 0
        assert "wrote 2 entries" in stdout

        code, stdout, _ = run_cli(
            capsys, "train", "--data-dir", data, "--out-dir", out, "--steps", "2",
            "--batch-size", "2", "--hr-size", "32", "--channels", "6",
            "--modules-per-stage", "1", "--blocks-per-module", "1",
            "--structure-blocks", "1", "--freq-channels", "8", "--freq-hidden", "8",
            "--disc-widths", "4,4", "--disc-strides", "2,2", "--disc-dense", "8")
        assert code == 0
        assert "trained to step 2" in stdout
        ck = os.path.join(out, "checkpoint_final")
        assert os.path.isdir(ck)

        sr_path = str(tmp_path / "sr.png")
        code, stdout, _ = run_cli(capsys, "infer", "--checkpoint", ck,
                                  "--input", os.path.join(data, "synthetic000_lr.ppm"),
                                  "--output", sr_path)
        assert code == 0
        assert imaging.load_image(sr_path).shape == (32, 32, 3)

        csv_path = str(tmp_path / "eval.csv")
        code, stdout, _ = run_cli(capsys, "evaluate", "--checkpoint", ck,
                                  "--data", data, "--out", csv_path)
        assert code == 0
        assert "mean" in stdout
        assert os.path.exists(csv_path)

    def test_config_file_and_overrides(self, tmp_path, capsys):
        data = str(tmp_path / "data")
        run_cli(capsys, "prepare-data", "--synthetic", "2", "--out", data,
                "--hr-size", "32", "--seed", "3")
        config = tmp_path / "run.cfg"
        config.write_text(
            "data_dir=%s\nout_dir=%s\nsteps=5\nbatch_size=2\nhr_size=32\nchannels=6\n"
            "modules_per_stage=1\nblocks_per_module=1\nstructure_blocks=1\n"
            "freq_channels=8\nfreq_hidden=8\ndisc_widths=4,4\ndisc_strides=2,2\n"
            "disc_dense=8\n" % (data, tmp_path / "run"))
        code, stdout, _ = run_cli(capsys, "train", "--config", str(config), "--steps", "1")
        assert code == 0
        assert "trained to step 1" in stdout  # flag overrides the file


class TestGradcheckCommand:
    def test_dct_suite_passes(self, capsys):
        code, stdout, _ = run_cli(capsys, "gradcheck", "--suite", "dct")
        assert code == 0
        assert "PASS" in stdout and "FAIL" not in stdout


class TestErrorReporting:
    def test_missing_data_dir(self, tmp_path, capsys):
        code, _, stderr = run_cli(capsys, "train", "--out-dir", str(tmp_path / "o"))
        assert code == 1
        assert stderr.startswith("error: ")
        assert "\n" == stderr[stderr.index("\n"):]  # single line

    def test_unknown_config_key(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("mystery_knob=1\n")
        code, _, stderr = run_cli(capsys, "train", "--config", str(bad))
        assert code == 1
        assert "mystery_knob" in stderr

    def test_infer_missing_checkpoint(self, tmp_path, capsys):
        code, _, stderr = run_cli(capsys, "infer", "--checkpoint", str(tmp_path / "nope"),
                                  "--input", "x.png", "--output", "y.png")
        assert code == 1
        assert stderr.startswith("error: ")
