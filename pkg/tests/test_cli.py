import json

import numpy as np
import pytest

from pointseg import io as pio
from pointseg.cli import main
from pointseg.datasets import DatasetManifest, TileEntry


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 else None), out.err


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["synth", "--out-dir", str(out), "--n-tiles", "2", "--height", "96", "--width", "96",
                 "--nuclei-min", "6", "--nuclei-max", "8", "--seed", "1"]) == 0
    return out


def test_synth_summary(corpus_dir):
    manifest = pio.read_manifest(corpus_dir / "manifest.json")
    assert len(manifest.tiles) == 2
    assert all(t.label_source == "true" for t in manifest.tiles)


def test_pipeline_subcommands(tmp_path, corpus_dir, capsys):
    img = corpus_dir / "images" / "tile_0000.png"
    pts = corpus_dir / "points" / "tile_0000.csv"
    gt = corpus_dir / "labels" / "tile_0000.png"
    code, summary, _ = run(capsys, "gen-labels", "--image", img, "--points", pts, "--out", tmp_path / "ps.png",
                           "--trimask-out", tmp_path / "tri.png", "--color-out", tmp_path / "color.png")
    assert code == 0 and summary["command"] == "gen-labels"
    assert {"flags", "config_hash", "seed", "warnings"} <= summary.keys()
    assert set(np.unique(pio.read_trimask(tmp_path / "tri.png"))) <= {0, 1, 2}

    code, summary, _ = run(capsys, "refine", "--mask", tmp_path / "ps.png", "--points", pts, "--out", tmp_path / "ref.png")
    assert code == 0
    code, summary, _ = run(capsys, "instances", "--mask", tmp_path / "ref.png", "--points", pts, "--out", tmp_path / "inst.png")
    assert code == 0 and summary["n_instances"] > 0

    code, summary, _ = run(capsys, "metrics", "--pred", tmp_path / "inst.png", "--gt", pts, "--mode", "dq-point")
    assert code == 0 and summary["value"] >= 0.8

    code, summary, _ = run(capsys, "targets", "--image", img, "--instances", gt, "--points", pts,
                           "--out-dir", tmp_path / "t", "--encoding", "gaussian", "--radius", "2")
    assert code == 0
    hover = pio.read_float_raster(tmp_path / "t" / "hover.npns")
    assert hover.shape == (96, 96, 2)
    assert json.loads((tmp_path / "t" / "record.json").read_text())["config_hash"] == summary["config_hash"]

    seg = (pio.read_instances(gt) > 0).astype(np.float32)
    pio.write_float_raster(tmp_path / "seg.npns", seg)
    code, summary, _ = run(capsys, "reconstruct", "--seg", tmp_path / "seg.npns", "--hover", tmp_path / "t" / "hover.npns",
                           "--out", tmp_path / "rec.png")
    assert code == 0
    code, summary, _ = run(capsys, "metrics", "--pred", tmp_path / "rec.png", "--gt", gt, "--mode", "dq-classic")
    assert summary["value"] == 1.0

    code, summary, _ = run(capsys, "render", "--image", img, "--instances", gt, "--out", tmp_path / "ov.png")
    assert code == 0 and pio.read_image(tmp_path / "ov.png").shape == (96, 96, 3)


def test_metrics_dice_identical(tmp_path, capsys):
    m = np.zeros((8, 8), bool)
    m[2:5, 2:6] = True
    pio.write_mask(tmp_path / "p.png", m)
    pio.write_mask(tmp_path / "g.png", m)
    code, summary, _ = run(capsys, "metrics", "--pred", tmp_path / "p.png", "--gt", tmp_path / "g.png", "--mode", "dice")
    assert code == 0 and summary["value"] == 1.0


def test_perturb_epsilon_zero(corpus_dir, tmp_path, capsys):
    gt = corpus_dir / "labels" / "tile_0001.png"
    out = tmp_path / "p.csv"
    code, summary, _ = run(capsys, "perturb", "--instances", gt, "--epsilon", "0", "--seed", "7", "--out", out,
                           "--report", tmp_path / "r.json")
    assert code == 0 and summary["seed"] == 7
    np.testing.assert_array_equal(pio.read_points(out), pio.read_points(corpus_dir / "points" / "tile_0001.csv"))


def test_mix_seven_tenths(tmp_path, capsys):
    tiles = tuple(TileEntry(f"t{i}", f"{i}.png", f"{i}_l.png") for i in range(16))
    pio.write_manifest(tmp_path / "m.json", DatasetManifest(tiles))
    code, summary, _ = run(capsys, "mix", "--manifest", tmp_path / "m.json", "--rate", "0.7", "--seed", "1")
    assert code == 0 and summary["n_pseudo"] == 11
    mixed = pio.read_manifest(tmp_path / "m.mixed.json")
    assert mixed.n_pseudo == 11
    first = (tmp_path / "m.mixed.json").read_bytes()
    run(capsys, "mix", "--manifest", tmp_path / "m.json", "--rate", "0.7", "--seed", "1")
    assert (tmp_path / "m.mixed.json").read_bytes() == first


def test_sweep_subcommand(corpus_dir, tmp_path, capsys):
    code, summary, _ = run(capsys, "sweep", "--manifest", corpus_dir / "manifest.json", "--variable", "pseudo_rate",
                           "--values", "0,1", "--replicates", "1", "--out", tmp_path / "s.csv")
    assert code == 0 and summary["rows"][0]["dice_mean"] == 1.0
    assert (tmp_path / "s.csv").read_text().startswith("# label-quality sweep")


def test_error_paths(tmp_path, capsys):
    code, _, err = run(capsys, "refine", "--mask", tmp_path / "missing.png", "--points", "x.csv", "--out", tmp_path / "o.png")
    assert code == 1 and "missing.png" in err
    bad = tmp_path / "bad.npns"
    bad.write_bytes(b"JUNK" + bytes(29))
    hover = tmp_path / "h.npns"
    pio.write_float_raster(hover, np.zeros((2, 2, 2)))
    code, _, err = run(capsys, "reconstruct", "--seg", bad, "--hover", hover, "--out", tmp_path / "o.png")
    assert code == 1 and "magic" in err
    pio.write_float_raster(tmp_path / "s.npns", np.zeros((3, 3)))
    code, _, err = run(capsys, "reconstruct", "--seg", tmp_path / "s.npns", "--hover", hover, "--out", tmp_path / "o.png")
    assert code == 1 and "dimension mismatch" in err
    with pytest.raises(SystemExit) as exc:
        main(["metrics", "--bogus"])
    assert exc.value.code == 2
