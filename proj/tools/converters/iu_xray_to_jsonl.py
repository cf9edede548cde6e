#!/usr/bin/env python3
"""Convert a local IU X-Ray download into the neutral corpus jsonl.

Expects the common distribution layout:
  <root>/indiana_reports.csv   (uid, findings/impression columns)
  <root>/indiana_projections.csv  (uid, filename)
  <root>/images/

Only the report text and image filenames are carried over. The dataset itself
is not redistributable, so this script is shipped untested against the real
files; adjust the column names below if your copy differs.
"""

import argparse
import csv
import json
import sys
from collections import defaultdict
from pathlib import Path


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("root", type=Path, help="IU X-Ray download directory")
    parser.add_argument("out", type=Path, help="output corpus .jsonl")
    parser.add_argument("--report-column", default="findings",
                        help="column holding the report text (default: findings)")
    args = parser.parse_args()

    reports_csv = args.root / "indiana_reports.csv"
    projections_csv = args.root / "indiana_projections.csv"
    if not reports_csv.exists():
        print(f"missing {reports_csv}", file=sys.stderr)
        return 2

    images = defaultdict(list)
    if projections_csv.exists():
        with projections_csv.open(newline="") as fh:
            for row in csv.DictReader(fh):
                images[row["uid"]].append(str(args.root / "images" / row["filename"]))

    written = 0
    with reports_csv.open(newline="") as fh, args.out.open("w") as out:
        for row in csv.DictReader(fh):
            report = (row.get(args.report_column) or "").strip()
            if not report:
                continue  # cases without findings text are unusable downstream
            record = {
                "case_id": f"iu-{row['uid']}",
                "images": images.get(row["uid"], []),
                "report": report,
            }
            out.write(json.dumps(record) + "\n")
            written += 1
    print(f"wrote {written} cases to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
