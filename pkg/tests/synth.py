"""Deterministic fixture builders for the test suite.

Run ``python tests/synth.py`` to regenerate the committed files under
``tests/fixtures/``.  Builders are pure functions of their arguments, so the
files are reproducible byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"

# Annotation counts per class in the bundled summary fixture.
CENSUS_COUNTS = {
    "placking_low": 120,
    "placking_medium": 121,
    "placking_high": 403,
    "compression": 827,
    "core_out": 278,
    "chafing": 54,
}


def rect_xy(x: float, y: float, w: float, h: float) -> tuple[list, list]:
    return [x, x + w, x + w, x], [y, y, y + h, y + h]


def region(label: str, xs: list, ys: list) -> dict:
    return {
        "shape_attributes": {"name": "polygon", "all_points_x": xs, "all_points_y": ys},
        "region_attributes": {"label": label},
    }


def entry(file_name: str, regions: list) -> dict:
    return {"filename": file_name, "size": -1, "regions": regions}


def census_via() -> dict:
    """1803 images, one annotation each, matching the documented class counts."""
    doc = {}
    i = 0
    for label, count in CENSUS_COUNTS.items():
        for _ in range(count):
            name = f"rope_{i:04d}.png"
            xs, ys = rect_xy(
                100 + (i % 13) * 40,
                80 + (i % 7) * 60,
                60 + (i % 5) * 8,
                50 + (i % 3) * 10,
            )
            doc[f"{name}-1"] = entry(name, [region(label, xs, ys)])
            i += 1
    return doc


def ap_via() -> dict:
    """10 images, 3 classes, 12 instances with varied sizes for strata tests."""
    H, C, F = "placking_high", "compression", "chafing"
    doc = {}

    def img(i: int, regions: list) -> None:
        name = f"apx_{i:02d}.png"
        doc[f"{name}-1"] = entry(name, regions)

    img(0, [region(H, *rect_xy(100, 100, 40, 40)), region(C, *rect_xy(300, 100, 120, 110))])
    img(1, [region(H, *rect_xy(100, 100, 40, 40)), region(C, *rect_xy(300, 300, 120, 110))])
    img(2, [region(H, *rect_xy(200, 200, 40, 40))])
    img(3, [region(C, *rect_xy(500, 500, 120, 110))])
    img(4, [])
    img(5, [region(F, *rect_xy(150, 400, 40, 40))])
    img(6, [region(C, *rect_xy(800, 100, 100, 100))])
    img(7, [region(H, *rect_xy(600, 600, 20, 20))])
    img(8, [region(F, *rect_xy(100, 700, 40, 40))])
    img(9, [region(F, *rect_xy(300, 700, 40, 40)), region(C, *rect_xy(500, 200, 120, 110))])
    return doc


def ap_predictions() -> list:
    """Hand-placed detections against ``ap_via``.

    Shifting a w-wide rectangle by dx gives IoU (w - dx) / (w + dx), which
    puts detections on both sides of the 0.50 and 0.75 thresholds.  Image 6
    pairs a triangle detection with a square truth so box IoU is 1.0 while
    mask IoU falls just under 0.5; images 8 and 9 carry a three-way score
    tie broken by image name and then input order.
    """
    H, C, F = "placking_high", "compression", "chafing"

    def seg(xs: list, ys: list) -> dict:
        return {"all_points_x": xs, "all_points_y": ys}

    def pred(image: str, category: str, score: float, xs: list, ys: list) -> dict:
        return {"image": image, "category": category, "score": score, "segmentation": seg(xs, ys)}

    records = [
        # IoU 38/42 and 114/126, comfortably above 0.75
        pred("apx_00.png", H, 0.95, *rect_xy(102, 100, 40, 40)),
        pred("apx_00.png", C, 0.90, *rect_xy(306, 100, 120, 110)),
        # IoU 30/50 and 90/150 = 0.6: true at 0.50..0.60, false above
        pred("apx_01.png", H, 0.85, *rect_xy(110, 100, 40, 40)),
        pred("apx_01.png", C, 0.80, *rect_xy(330, 300, 120, 110)),
        # duplicate pair on one truth: the higher score claims it
        pred("apx_02.png", H, 0.75, *rect_xy(204, 200, 40, 40)),
        pred("apx_02.png", H, 0.70, *rect_xy(208, 200, 40, 40)),
        # unmatched detections, equal scores, tie broken by input order
        pred("apx_04.png", H, 0.60, *rect_xy(700, 700, 40, 40)),
        pred("apx_04.png", F, 0.60, *rect_xy(900, 200, 40, 40)),
        # right class shape, wrong class label
        pred("apx_05.png", H, 0.88, *rect_xy(150, 400, 40, 40)),
        # triangle on a square: box IoU 1.0, mask IoU 4950/10000
        pred("apx_06.png", C, 0.72, [800, 900, 800], [100, 100, 200]),
        # small instance: inside "all", outside medium and large
        pred("apx_07.png", H, 0.68, *rect_xy(602, 600, 20, 20)),
        pred("apx_08.png", F, 0.55, *rect_xy(104, 700, 40, 40)),
        pred("apx_09.png", F, 0.55, *rect_xy(304, 700, 40, 40)),
        pred("apx_09.png", C, 0.55, *rect_xy(900, 900, 120, 110)),
    ]
    return records


def perfect_predictions(via_doc: dict) -> list:
    """Every annotation echoed back as a score-1.0 detection."""
    records = []
    for item in via_doc.values():
        for reg in item["regions"]:
            shape = reg["shape_attributes"]
            records.append(
                {
                    "image": item["filename"],
                    "category": reg["region_attributes"]["label"],
                    "score": 1.0,
                    "segmentation": {
                        "all_points_x": shape["all_points_x"],
                        "all_points_y": shape["all_points_y"],
                    },
                }
            )
    return records


def accuracy_via(n_images: int = 157) -> dict:
    doc = {}
    for i in range(n_images):
        name = f"acc_{i:03d}.png"
        doc[f"{name}-1"] = entry(name, [region("compression", *rect_xy(400, 300, 80, 60))])
    return doc


def accuracy_predictions(n_images: int = 157, n_qualifying: int = 154) -> list:
    """All images defective; the last three get no qualifying detection.

    One scores below the 0.70 threshold, one hits a non-defect class, one is
    absent entirely.
    """
    records = []
    xs, ys = rect_xy(400, 300, 80, 60)
    for i in range(n_qualifying):
        records.append(
            {
                "image": f"acc_{i:03d}.png",
                "category": "compression",
                "score": 0.9,
                "segmentation": {"all_points_x": xs, "all_points_y": ys},
            }
        )
    records.append(
        {
            "image": f"acc_{n_qualifying:03d}.png",
            "category": "compression",
            "score": 0.65,
            "segmentation": {"all_points_x": xs, "all_points_y": ys},
        }
    )
    records.append(
        {
            "image": f"acc_{n_qualifying + 1:03d}.png",
            "category": "normal",
            "score": 0.9,
            "segmentation": {"all_points_x": xs, "all_points_y": ys},
        }
    )
    return records


def invalid_via() -> dict:
    """A polygon escaping its (manifest-declared) 64x48 frame by far."""
    return {
        "bad_frame.png-1": entry(
            "bad_frame.png", [region("chafing", *rect_xy(10, 10, 200, 150))]
        )
    }


def invalid_manifest() -> str:
    return "bad_frame.png,64,48\n"


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)

    def dump(name: str, obj, compact: bool = False) -> None:
        path = FIXTURES / name
        if compact:
            text = json.dumps(obj, separators=(",", ":"))
        else:
            text = json.dumps(obj, indent=2)
        path.write_text(text + "\n", encoding="utf-8")

    dump("census_via.json", census_via(), compact=True)
    dump("ap_gt_via.json", ap_via())
    dump("ap_pred.json", ap_predictions())
    dump("ap_pred_perfect.json", perfect_predictions(ap_via()))
    dump("acc_gt_via.json", accuracy_via(), compact=True)
    dump("acc_pred.json", accuracy_predictions(), compact=True)
    dump("via_invalid.json", invalid_via())
    (FIXTURES / "invalid_manifest.csv").write_text(invalid_manifest(), encoding="utf-8")


if __name__ == "__main__":
    main()
