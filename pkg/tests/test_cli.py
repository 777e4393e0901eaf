import csv

import numpy as np
import pytest

from fusebench.bench import CSV_COLUMNS, TABLE_NOTE
from fusebench.cli import main, parse_space
from fusebench.errors import ConfigurationError
from fusebench.fusion import FusionMethod, StackingMethod
from fusebench.imgcore import Image, save_image

from conftest import write_scene


def run(*argv):
    return main([str(a) for a in argv])


def stdout_dict(capsys):
    """key=value stdout lines as a dict; later lines win."""
    out = capsys.readouterr().out
    pairs = (line.partition("=") for line in out.splitlines() if "=" in line)
    return {k: v for k, _, v in pairs}


class TestFuseCommand:
    def test_happy_path(self, tmp_path, capsys):
        scene = write_scene(tmp_path / "scene", width=48, height=32)
        out = tmp_path / "fused.png"
        code = run("fuse", scene, "--method", "mertens", "--out", out)
        assert code == 0
        assert out.is_file()
        printed = stdout_dict(capsys)
        assert printed["out"] == str(out)
        assert float(printed["runtime_s"]) > 0
        assert int(printed["peak_alloc_bytes"]) >= 1

    def test_multi_frame_with_stacking(self, tmp_path, capsys):
        scene = write_scene(tmp_path / "scene", width=48, height=32)
        out = tmp_path / "fused.png"
        code = run("fuse", scene, "--method", "ssf-yuv", "--frames", "3",
                   "--stacking", "median", "--weights", "C+E", "--out", out)
        assert code == 0
        assert out.is_file()

    def test_stacking_single_frame_is_usage_error(self, tmp_path, capsys):
        scene = write_scene(tmp_path / "scene", width=48, height=32)
        code = run("fuse", scene, "--method", "mertens", "--frames", "1",
                   "--stacking", "mean", "--out", tmp_path / "x.png")
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_saturation_on_yuv_method_is_usage_error(self, tmp_path, capsys):
        scene = write_scene(tmp_path / "scene", width=48, height=32)
        code = run("fuse", scene, "--method", "fast-yuv", "--weights", "S+E",
                   "--out", tmp_path / "x.png")
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_scene_without_negative_frame_is_io_error(self, tmp_path, capsys):
        scene = write_scene(tmp_path / "scene", width=48, height=32,
                            evs=(0, 1, 2))
        code = run("fuse", scene, "--method", "mertens",
                   "--out", tmp_path / "x.png")
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_scene_dir_is_io_error(self, tmp_path, capsys):
        code = run("fuse", tmp_path / "nope", "--method", "mertens",
                   "--out", tmp_path / "x.png")
        assert code == 1

    def test_unknown_method_is_argparse_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            run("fuse", tmp_path, "--method", "average",
                "--out", tmp_path / "x.png")
        assert exc.value.code == 2


class TestMetricsCommand:
    def _save_gray(self, path, value, shape=(64, 64)):
        save_image(Image(np.full(shape, value)), path)
        return path

    def test_identical_images(self, tmp_path, capsys):
        rng = np.random.default_rng(5)
        img = Image(rng.random((32, 32, 3)))
        path = tmp_path / "a.png"
        save_image(img, path)
        code = run("metrics", path, path)
        assert code == 0
        printed = stdout_dict(capsys)
        assert printed["ms_ssim"] == "1.000000"
        assert printed["psnr_db"] == "99.000000"
        assert printed["ergas"] == "0.000000"

    def test_gray_offset_pair(self, tmp_path, capsys):
        # 0.5 and 0.6 quantize to 128/255 and 153/255 in the files, so
        # ergas is 100 * 25/128 on the nose
        test = self._save_gray(tmp_path / "t.png", 0.6)
        ref = self._save_gray(tmp_path / "r.png", 0.5)
        code = run("metrics", test, ref)
        assert code == 0
        assert stdout_dict(capsys)["ergas"] == "19.531250"

    def test_shape_mismatch_is_usage_error(self, tmp_path, capsys):
        a = self._save_gray(tmp_path / "a.png", 0.5, (32, 32))
        b = self._save_gray(tmp_path / "b.png", 0.5, (32, 48))
        code = run("metrics", a, b)
        assert code == 2

    def test_missing_file_is_io_error(self, tmp_path, capsys):
        a = self._save_gray(tmp_path / "a.png", 0.5)
        assert run("metrics", a, tmp_path / "gone.png") == 1


class TestSynthCommand:
    def test_layout_and_counts(self, tmp_path, capsys):
        out = tmp_path / "data"
        code = run("synth", "--scenes", "2", "--size", "32x24",
                   "--evs=-24,0,1", "--seed", "7", "--out", out)
        assert code == 0
        printed = stdout_dict(capsys)
        assert printed["scenes"] == "2"
        for k in range(2):
            scene = out / f"scene_{k:02d}"
            names = sorted(p.name for p in scene.iterdir())
            assert names == ["ev_-24.png", "ev_0.png", "ev_1.png", "gt.png"]

    def test_size_is_width_by_height(self, tmp_path):
        from fusebench.imgcore import load_image
        out = tmp_path / "data"
        run("synth", "--scenes", "1", "--size", "40x24",
            "--evs=-24,0", "--out", out)
        img = load_image(out / "scene_00" / "gt.png")
        assert img.data.shape == (24, 40, 3)

    def test_deterministic_across_runs(self, tmp_path):
        for name in ("one", "two"):
            run("synth", "--scenes", "2", "--size", "32x24",
                "--evs=-24,0,1", "--seed", "7", "--out", tmp_path / name)
        for rel in ("scene_00/ev_-24.png", "scene_00/gt.png",
                    "scene_01/ev_1.png"):
            a = (tmp_path / "one" / rel).read_bytes()
            b = (tmp_path / "two" / rel).read_bytes()
            assert a == b, rel

    def test_zero_scenes_is_usage_error(self, tmp_path, capsys):
        assert run("synth", "--scenes", "0", "--out", tmp_path / "d") == 2

    def test_malformed_size_is_usage_error(self, tmp_path, capsys):
        code = run("synth", "--size", "32x", "--out", tmp_path / "d")
        assert code == 2
        assert "WIDTHxHEIGHT" in capsys.readouterr().err

    def test_malformed_evs_is_usage_error(self, tmp_path, capsys):
        code = run("synth", "--evs", "0,x", "--out", tmp_path / "d")
        assert code == 2


class TestParseSpace:
    def test_full_keyword(self):
        space = parse_space("full")
        assert len(space.methods) == 4
        assert space.weight_policy == "exclude-one"

    def test_space_file(self, tmp_path):
        path = tmp_path / "space.cfg"
        path.write_text("# comment\nmethods = fast-yuv, ssf-yuv\n"
                        "frames = 1,2\nstackings = mean\nweights = full\n")
        space = parse_space(str(path))
        assert space.methods == (FusionMethod.FAST_YUV, FusionMethod.SSF_YUV)
        assert space.n_positive_values == (1, 2)
        assert space.stackings == (StackingMethod.MEAN,)
        assert space.weight_policy == "full"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            parse_space(str(tmp_path / "gone.cfg"))

    def test_line_without_equals(self, tmp_path):
        path = tmp_path / "space.cfg"
        path.write_text("frames 1,2\n")
        with pytest.raises(ConfigurationError, match="space.cfg:1"):
            parse_space(str(path))

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "space.cfg"
        path.write_text("cores = 4\n")
        with pytest.raises(ConfigurationError, match="unknown key"):
            parse_space(str(path))

    def test_bad_method_name(self, tmp_path):
        path = tmp_path / "space.cfg"
        path.write_text("methods = averaging\n")
        with pytest.raises(ConfigurationError, match="space.cfg:1"):
            parse_space(str(path))


class TestBenchCommand:
    def _dataset(self, tmp_path, scenes=2):
        root = tmp_path / "data"
        for k in range(scenes):
            write_scene(root / f"scene_{k:02d}", width=48, height=32, seed=k)
        return root

    def _space_file(self, tmp_path):
        path = tmp_path / "space.cfg"
        path.write_text("methods = fast-yuv\nframes = 1,2\n")
        return path

    def test_happy_path(self, tmp_path, capsys):
        root = self._dataset(tmp_path)
        out = tmp_path / "runs.csv"
        code = run("bench", root, "--space", self._space_file(tmp_path),
                   "--repeats", "1", "--out", out)
        assert code == 0
        captured = capsys.readouterr().out
        printed = dict(line.partition("=")[::2] for line in
                       captured.splitlines() if "=" in line and
                       not line.startswith(("#", " ")))
        assert printed["scenes"] == "2"
        assert printed["configs"] == "12"
        assert printed["records"] == "24"
        assert TABLE_NOTE in captured
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 25
        grouped = tmp_path / "runs.grouped.csv"
        assert grouped.is_file()
        assert grouped.read_text().startswith("group,count,")

    def test_report_mode_full(self, tmp_path, capsys):
        root = self._dataset(tmp_path, scenes=1)
        code = run("bench", root, "--space", self._space_file(tmp_path),
                   "--repeats", "1", "--out", tmp_path / "r.csv",
                   "--report", "full")
        assert code == 0
        assert "n=1 none" in capsys.readouterr().out

    def test_zero_repeats_is_usage_error(self, tmp_path, capsys):
        root = self._dataset(tmp_path, scenes=1)
        code = run("bench", root, "--repeats", "0",
                   "--out", tmp_path / "r.csv")
        assert code == 2

    def test_missing_dataset_is_environment_error(self, tmp_path, capsys):
        code = run("bench", tmp_path / "nope",
                   "--space", self._space_file(tmp_path),
                   "--repeats", "1", "--out", tmp_path / "r.csv")
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_malformed_space_is_usage_error(self, tmp_path, capsys):
        root = self._dataset(tmp_path, scenes=1)
        space = tmp_path / "space.cfg"
        space.write_text("methods fast-yuv\n")
        code = run("bench", root, "--space", space,
                   "--repeats", "1", "--out", tmp_path / "r.csv")
        assert code == 2

    def test_bad_report_choice_is_argparse_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("bench", tmp_path, "--report", "by_scene")
        assert exc.value.code == 2
