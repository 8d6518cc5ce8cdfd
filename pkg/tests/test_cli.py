"""CLI subcommands compose through files exactly like the library does."""

import json

import numpy as np
import pytest

from mvmask import wire
from mvmask.cli import build_parser, main
from mvmask.geometry import (
    project_ground_to_pixel,
    project_pixel_to_ground,
    save_calibration,
)
from mvmask.imageio import (
    RasterImage,
    SegMask,
    image_to_bytes,
    load_image,
    save_image,
)
from mvmask.masking import activity_map, sample_unmasked, selection_distribution
from mvmask.patch_grid import make_grid
from mvmask.reconstruct import fill_baseline
from mvmask.sim import parse_scenario, run


@pytest.fixture()
def inputs(tmp_path):
    rng = np.random.default_rng(41)
    img = RasterImage(rng.integers(0, 256, size=(60, 80, 3), dtype=np.uint8))
    mask = SegMask((rng.random((60, 80)) < 0.2).astype(np.uint8))
    img_path = tmp_path / "img.ppm"
    mask_path = tmp_path / "mask.pgm"
    save_image(img, img_path)
    save_image(mask.to_raster(), mask_path)
    return img, mask, str(img_path), str(mask_path)


def _library_plan(img, mask, seed=5):
    grid = make_grid(img.width, img.height, 20)
    dist = selection_distribution(activity_map(mask, grid), 0.15)
    return sample_unmasked(dist, grid, 0.7, seed)


def test_encode_decode_fill_pipeline(tmp_path, inputs, capsys):
    img, mask, img_path, mask_path = inputs
    frame_path = str(tmp_path / "frame.bin")
    assert (
        main(
            ["encode", img_path, mask_path, "-o", frame_path,
             "--downscale", "0", "--seed", "5", "--camera-id", "3"]
        )
        == 0
    )
    plan = _library_plan(img, mask)
    frame = (tmp_path / "frame.bin").read_bytes()
    assert frame == wire.encode(img, plan, camera_id=3)
    assert f"{len(frame)} bytes" in capsys.readouterr().out

    prefix = str(tmp_path / "dec")
    assert main(["decode", frame_path, "-o", prefix]) == 0
    rplan, sparse = wire.decode(frame)
    assert (tmp_path / "dec.ppm").read_bytes() == image_to_bytes(RasterImage(sparse.pixels))
    known = load_image(tmp_path / "dec_known.pgm")
    assert ((known.pixels == 255) == sparse.known).all()
    assert wire.decode_plan((tmp_path / "dec_plan.bin").read_bytes()) == plan

    filled_path = str(tmp_path / "filled.ppm")
    assert main(["fill", frame_path, "-o", filled_path, "--fill-method", "global-mean"]) == 0
    assert load_image(filled_path) == fill_baseline(sparse, rplan, "global-mean")


def test_mask_then_encode_with_saved_plan(tmp_path, inputs, capsys):
    img, mask, img_path, mask_path = inputs
    plan_path = str(tmp_path / "plan.bin")
    assert (
        main(["mask", img_path, mask_path, "-o", plan_path, "--downscale", "0", "--seed", "5"])
        == 0
    )
    assert "keep 4/12 patches" in capsys.readouterr().out
    plan = _library_plan(img, mask)
    assert wire.decode_plan((tmp_path / "plan.bin").read_bytes()) == plan

    frame_path = str(tmp_path / "frame.bin")
    assert (
        main(
            ["encode", img_path, "-o", frame_path,
             "--plan", plan_path, "--downscale", "0"]
        )
        == 0
    )
    assert (tmp_path / "frame.bin").read_bytes() == wire.encode(img, plan)


def test_default_downscale_is_one_step(tmp_path, inputs, capsys):
    _, _, img_path, mask_path = inputs
    plan_path = str(tmp_path / "plan.bin")
    assert main(["mask", img_path, mask_path, "-o", plan_path]) == 0
    plan = wire.decode_plan((tmp_path / "plan.bin").read_bytes())
    assert (plan.grid.image_width, plan.grid.image_height) == (40, 30)


def test_report_prints_reference_volume(capsys):
    assert main(["report"]) == 0
    assert capsys.readouterr().out == "11.63 Mb\n"
    assert main(["report", "--cameras", "6"]) == 0
    assert capsys.readouterr().out == "9.96 Mb\n"


def test_report_verbose_and_original_size(capsys):
    assert main(["report", "--original-size", "1280x720", "-v"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("11.63 Mb\n")
    body = json.loads(out.split("\n", 1)[1])
    assert body["total_bits"] == 11_625_600
    assert body["baseline_full_bits"] == 7 * 1280 * 720 * 24
    assert body["reduction_factor"] == pytest.approx(13.3179, abs=5e-5)


def test_report_bad_original_size_is_a_data_error(capsys):
    assert main(["report", "--original-size", "wide"]) == 2
    assert "--original-size" in capsys.readouterr().err


def test_usage_errors_exit_one():
    with pytest.raises(SystemExit) as exc:
        main(["report", "--no-such-flag"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def test_missing_input_file_exits_two(tmp_path, capsys):
    assert main(["encode", str(tmp_path / "nope.ppm"), "-o", str(tmp_path / "f.bin")]) == 2
    assert "mvmask:" in capsys.readouterr().err


def test_corrupt_frame_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX" + bytes(40))
    assert main(["decode", str(bad), "-o", str(tmp_path / "out")]) == 2
    assert "bad magic" in capsys.readouterr().err


def test_project_command(tmp_path, scene, capsys):
    cam = scene.camera_models()[1]
    calib = tmp_path / "cam.txt"
    save_calibration(cam, calib)
    assert main(["project", str(calib), "0.5", "-0.25"]) == 0
    u, v = (float(tok) for tok in capsys.readouterr().out.split())
    wu, wv = project_ground_to_pixel(cam, 0.5, -0.25)
    assert (u, v) == (wu, wv)  # repr round-trips doubles exactly

    assert main(
        ["project", str(calib), str(u), str(v), "--direction", "pixel-to-ground"]
    ) == 0
    gx, gy = (float(tok) for tok in capsys.readouterr().out.split())
    assert (gx, gy) == project_pixel_to_ground(cam, u, v)


def test_simulate_is_deterministic_across_invocations(tmp_path, capsys):
    scen = tmp_path / "scen.txt"
    scen.write_text(
        "frames = 2\npatch_size = 10\nsynthetic_cameras = 2\n"
        "synthetic_width = 160\nsynthetic_height = 96\n"
        "synthetic_pedestrians = 3\nsynthetic_seed = 1\n"
        "bev_rows = 20\nbev_cols = 20\nbev_cell_size = 0.4\n"
        "bev_origin_x = -4.0\nbev_origin_y = -4.0\n"
    )
    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    csv_path = tmp_path / "frames.csv"
    assert main(["simulate", str(scen), "-o", str(out_a), "--frames-csv", str(csv_path)]) == 0
    assert "frames=2" in capsys.readouterr().err
    assert main(["simulate", str(scen), "-o", str(out_b), "--workers", "3"]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()

    want = run(parse_scenario(scen.read_text(), base_dir=tmp_path))
    assert out_a.read_text() == want.to_json() + "\n"
    assert csv_path.read_text() == want.to_frames_csv()


def test_simulate_writes_bev_dir(tmp_path, capsys):
    scen = tmp_path / "scen.txt"
    scen.write_text(
        "frames = 1\npatch_size = 10\nsynthetic_cameras = 2\n"
        "synthetic_width = 160\nsynthetic_height = 96\n"
        "synthetic_pedestrians = 3\nbev_rows = 10\nbev_cols = 10\n"
        "bev_cell_size = 0.8\nbev_origin_x = -4.0\nbev_origin_y = -4.0\n"
    )
    bev_dir = tmp_path / "bev"
    assert main(["simulate", str(scen), "--bev-dir", str(bev_dir)]) == 0
    capsys.readouterr()
    assert sorted(p.name for p in bev_dir.iterdir()) == ["bev_00000.pgm"]


def test_sweep_stdout_and_file(tmp_path, inputs, capsys):
    _, _, _, mask_path = inputs
    assert main(["sweep", mask_path, "--r-values", "0.5", "--seeds", "0,1"]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0] == "mode,r,kappa,seed,frame,retention_ratio,payload_bits"
    assert len(lines) == 5  # 2 modes x 1 r x 2 seeds

    csv_path = tmp_path / "sweep.csv"
    assert main(["sweep", mask_path, "--r-values", "0.5", "-o", str(csv_path)]) == 0
    assert "2 rows" in capsys.readouterr().out
    assert csv_path.read_text().splitlines()[0] == lines[0]


def test_parser_exposes_serve_without_running_it():
    args = build_parser().parse_args(["serve", "--port", "9009"])
    assert args.command == "serve"
    assert args.port == 9009
    assert args.host == "127.0.0.1"
