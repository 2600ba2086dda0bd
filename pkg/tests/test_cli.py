import json

import numpy as np
import pytest

from faceinpaint.cli import main
from faceinpaint.data import save_face_dataset, synthetic_face_dataset
from faceinpaint.imaging import load_image, save_mask, generate_center_mask

SIZE = 64


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    dataset = synthetic_face_dataset(4, SIZE, seed=4)
    data_dir = root / "data"
    save_face_dataset(dataset, data_dir)
    config = root / "desk.cfg"
    config.write_text(
        "image_size = 64\n"
        "channel_divisor = 4\n"
        "feature_extractor = identity\n"
        "max_steps = 2\n"
        "batch_landmark = 2\n"
        "batch_inpaint = 2\n"
    )
    return root, data_dir, config


@pytest.fixture(scope="module")
def trained(workspace, capsys_disabled=None):
    root, data_dir, config = workspace
    assert (
        main(
            [
                "train-landmarks",
                "--data", str(data_dir),
                "--out", str(root / "lmk"),
                "--config", str(config),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "train-inpaint",
                "--data", str(data_dir),
                "--out", str(root / "inp"),
                "--config", str(config),
            ]
        )
        == 0
    )
    return root / "inp" / "inpaint.ckpt", root / "lmk" / "landmark.ckpt"


def test_training_commands_produce_checkpoints_and_logs(workspace, trained):
    root, _, _ = workspace
    inp_ckpt, lmk_ckpt = trained
    assert inp_ckpt.exists() and lmk_ckpt.exists()
    assert (root / "lmk" / "landmark_loss.csv").exists()
    assert (root / "inp" / "inpaint_loss.csv").read_text().startswith("step,l_pixel")


def test_inpaint_command_writes_result_and_overlay(workspace, trained, tmp_path):
    root, data_dir, _ = workspace
    inp_ckpt, lmk_ckpt = trained
    image_path = sorted(data_dir.glob("*.png"))[0]
    mask_path = tmp_path / "mask.png"
    save_mask(generate_center_mask(SIZE, SIZE), mask_path)
    out = tmp_path / "result.png"
    code = main(
        [
            "inpaint",
            "--image", str(image_path),
            "--mask", str(mask_path),
            "--checkpoint", str(inp_ckpt),
            "--landmark-checkpoint", str(lmk_ckpt),
            "--out", str(out),
        ]
    )
    assert code == 0
    assert out.exists()
    overlay = tmp_path / "result_landmarks.png"
    assert overlay.exists()
    # Observed region preserved through the PNG round trip.
    original = load_image(image_path)
    completed = load_image(out)
    hole = generate_center_mask(SIZE, SIZE).pixels.astype(bool)
    np.testing.assert_array_equal(
        completed.pixels[~hole], original.pixels[~hole]
    )


def test_inpaint_command_accepts_landmark_file(workspace, trained, tmp_path):
    root, data_dir, _ = workspace
    inp_ckpt, _ = trained
    image_path = sorted(data_dir.glob("*.png"))[0]
    landmarks_path = sorted(data_dir.glob("*.json"))[0]
    mask_path = tmp_path / "mask.png"
    save_mask(generate_center_mask(SIZE, SIZE), mask_path)
    out = tmp_path / "templated.png"
    code = main(
        [
            "inpaint",
            "--image", str(image_path),
            "--mask", str(mask_path),
            "--landmarks", str(landmarks_path),
            "--checkpoint", str(inp_ckpt),
            "--out", str(out),
        ]
    )
    assert code == 0 and out.exists()


def test_inpaint_without_any_landmark_source_fails(workspace, trained, tmp_path, capsys):
    _, data_dir, _ = workspace
    inp_ckpt, _ = trained
    image_path = sorted(data_dir.glob("*.png"))[0]
    mask_path = tmp_path / "m.png"
    save_mask(generate_center_mask(SIZE, SIZE), mask_path)
    with pytest.raises(SystemExit):
        main(
            [
                "inpaint",
                "--image", str(image_path),
                "--mask", str(mask_path),
                "--checkpoint", str(inp_ckpt),
                "--out", str(tmp_path / "x.png"),
            ]
        )


def test_evaluate_command_writes_report(workspace, trained, tmp_path, capsys):
    _, data_dir, _ = workspace
    inp_ckpt, lmk_ckpt = trained
    out = tmp_path / "report.csv"
    code = main(
        [
            "evaluate",
            "--data", str(data_dir),
            "--checkpoint", str(inp_ckpt),
            "--landmark-checkpoint", str(lmk_ckpt),
            "--out", str(out),
        ]
    )
    assert code == 0
    assert out.read_text().startswith("bucket,psnr,ssim,fid,count")
    assert "Mask" in capsys.readouterr().out


def test_evaluate_empty_directory_fails_cleanly(trained, tmp_path, capsys):
    inp_ckpt, lmk_ckpt = trained
    empty = tmp_path / "empty"
    empty.mkdir()
    code = main(
        [
            "evaluate",
            "--data", str(empty),
            "--checkpoint", str(inp_ckpt),
            "--landmark-checkpoint", str(lmk_ckpt),
            "--out", str(tmp_path / "r.csv"),
        ]
    )
    assert code == 1
    err = capsys.readouterr().err
    assert "no samples" in err
    assert "Traceback" not in err


def test_augment_command_writes_manifest(workspace, trained, tmp_path):
    _, data_dir, _ = workspace
    inp_ckpt, _ = trained
    out = tmp_path / "aug"
    code = main(
        [
            "augment",
            "--data", str(data_dir),
            "--checkpoint", str(inp_ckpt),
            "--out", str(out),
        ]
    )
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["samples"]) == 4


def test_unknown_checkpoint_is_one_line_error(tmp_path, capsys):
    code = main(
        [
            "inpaint",
            "--image", "x.png",
            "--mask", "y.png",
            "--checkpoint", str(tmp_path / "missing.ckpt"),
            "--out", str(tmp_path / "o.png"),
        ]
    )
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("inpaint:")
    assert "Traceback" not in err
