"""Smoke test for the geovqa extension module: geometry, SAR deburst, dataset helpers, pipeline."""

import json
import pathlib
import sys
import tempfile

import geovqa


def check_geometry():
    square = geovqa.Polygon([(0, 0), (10, 0), (10, 10), (0, 10)])
    assert square.area() == 100.0
    assert square.centroid() == (5.0, 5.0)
    extent = geovqa.Extent(5, 0, 15, 10)
    assert abs(square.clipped_area(extent) - 50.0) < 1e-9
    assert geovqa.Extent(0, 0, 3, 3).grid_cell(0.5, 2.5) == "top-left"
    assert geovqa.octagon_sector((0, 0), (0, 5)) == "north"


def check_sar():
    # burst 1 ends with a row repeated at the top of burst 2, across one black row
    rows = [[8.0, 9.0], [9.0, 8.0], [7.0, 8.0], [0.0, 0.0], [7.0, 8.0], [9.0, 9.0]]
    vv, vh, layout = geovqa.deburst(rows, rows)
    assert vv == [[8.0, 9.0], [9.0, 8.0], [7.0, 8.0], [9.0, 9.0]], vv
    assert layout["provenance"] == [0, 1, 4, 5]
    assert geovqa.to_db([10.0, 0.0], 1.0) == [20.0, 0.0]


def check_dataset():
    assert geovqa.split_sizes(10) == (6, 2, 2)
    vocab = geovqa.build_vocab(["yes", "yes", "yes", "no", "no", "5"], 2)
    assert [a["answer"] for a in vocab["answers"]] == ["yes", "no"]
    assert abs(vocab["coverage"] - 5 / 6) < 1e-12


def check_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        config = geovqa.write_miniworld(pathlib.Path(tmp) / "world", 11)
        pipe = geovqa.Pipeline(config)
        pipe.validate()
        summary = pipe.run("all")
        assert summary["images"] == 21 and summary["question_types"] == 21, summary
        train = json.loads((pathlib.Path(pipe.output_dir) / "dataset" / "train.json").read_text())
        assert train["split"] == "train" and train["questions"]
        try:
            pipe.run("nonsense")
        except ValueError:
            pass
        else:
            raise AssertionError("unknown command accepted")


def main():
    for check in (check_geometry, check_sar, check_dataset, check_pipeline):
        check()
        print(f"ok  {check.__name__}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
