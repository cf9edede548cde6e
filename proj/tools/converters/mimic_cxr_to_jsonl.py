#!/usr/bin/env python3
"""Convert a local MIMIC-CXR download into the neutral corpus jsonl.

Expects the PhysioNet layout:
  <root>/files/pXX/pXXXXXXXX/sYYYYYYYY.txt        (report text)
  <root>/files/pXX/pXXXXXXXX/sYYYYYYYY/*.jpg      (study images, jpg release)
  <root>/mimic-cxr-2.0.0-split.csv                (official split, optional)

The official train/validate/test division is carried into the corpus "split"
field when the split csv is present (validate maps to train, since this
artifact has no validation stage). MIMIC-CXR is credentialed data; this script
ships untested against the real files.
"""

import argparse
import csv
import json
import sys
from pathlib import Path


def read_split(root: Path) -> dict:
    split_csv = root / "mimic-cxr-2.0.0-split.csv"
    if not split_csv.exists():
        return {}
    mapping = {}
    with split_csv.open(newline="") as fh:
        for row in csv.DictReader(fh):
            label = row["split"]
            mapping[f"s{row['study_id']}"] = "test" if label == "test" else "train"
    return mapping


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("root", type=Path, help="MIMIC-CXR download directory")
    parser.add_argument("out", type=Path, help="output corpus .jsonl")
    parser.add_argument("--limit", type=int, default=0, help="stop after N studies (0 = all)")
    args = parser.parse_args()

    files_root = args.root / "files"
    if not files_root.exists():
        print(f"missing {files_root}", file=sys.stderr)
        return 2

    split_of = read_split(args.root)
    written = 0
    with args.out.open("w") as out:
        for report_path in sorted(files_root.glob("p*/p*/s*.txt")):
            study = report_path.stem
            report = report_path.read_text(errors="replace").strip()
            if not report:
                continue
            image_dir = report_path.with_suffix("")
            images = sorted(str(p) for p in image_dir.glob("*.jpg")) if image_dir.is_dir() else []
            record = {"case_id": f"mimic-{study}", "images": images, "report": report}
            if study in split_of:
                record["split"] = split_of[study]
            out.write(json.dumps(record) + "\n")
            written += 1
            if args.limit and written >= args.limit:
                break
    print(f"wrote {written} cases to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
