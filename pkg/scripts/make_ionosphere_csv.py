"""Recode an ionosphere data file into the 34-feature CSV used by the benchmark.

Accepts either the UCI ``ionosphere.data`` layout (34 features + g/b label) or
the KEEL layout (33 features, constant second attribute dropped). In the
latter case the all-zero column is restored so the feature count is 34.
Label ``g`` becomes 1 and ``b`` becomes 0.

    python scripts/make_ionosphere_csv.py ionosphere.dat data/ionosphere.csv
"""
import argparse
import csv


def recode(src, dst):
    rows = []
    with open(src) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("@"):
                continue
            cells = [c.strip() for c in line.split(",")]
            *feats, label = cells
            if len(feats) == 33:
                feats.insert(1, "0")
            if len(feats) != 34:
                raise ValueError(f"unexpected field count {len(feats) + 1}: {line[:40]}")
            rows.append([repr(float(v)) for v in feats] + [{"g": "1", "b": "0"}[label]])
    with open(dst, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"a{i:02d}" for i in range(1, 35)] + ["target"])
        w.writerows(rows)
    return len(rows)


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("src")
    ap.add_argument("dst")
    a = ap.parse_args()
    print(recode(a.src, a.dst), "rows written")
