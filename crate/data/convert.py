#!/usr/bin/env python3
"""One-time conversion of the benchmark datasets into the CSV dialect read by
the `gbrff` crate (comma separated, header row, label column `class`).

Sources are two PyPI wheels that vendor the UCI/KEEL files:

  * keel-ds 0.2.5               (wine, sonar, heart, bupa, ionosphere, wdbc,
                                 australian, pima, splice, spambase,
                                 new-thyroid1)
  * imbalanced-databases 0.1.1  (UCI glass.data, UCI german.data-numeric)

balance-scale is generated: the UCI file is the full enumeration of the four
attributes over 1..5 with the class given by comparing torques.

Usage:
    pip download --no-deps keel-ds==0.2.5 imbalanced-databases==0.1.1 -d wheels
    python3 data/convert.py wheels/keel_ds-0.2.5-py3-none-any.whl \
        wheels/imbalanced_databases-0.1.1-py3-none-any.whl
"""

import csv
import io
import itertools
import os
import sys
import zipfile

HERE = os.path.dirname(os.path.abspath(__file__))
CSV_DIR = os.path.join(HERE, "csv")
SPEC_DIR = os.path.join(HERE, "specs")

KEEL = "keel_ds/data/balanced/raw/"
IMB = "imbalanced_databases/data/"


def keel_rows(text):
    rows = []
    for line in io.StringIO(text):
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([t.strip() for t in line.split(",")])
    return rows


def write_csv(name, rows):
    d = len(rows[0]) - 1
    path = os.path.join(CSV_DIR, name + ".csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["x%d" % (i + 1) for i in range(d)] + ["class"])
        for r in rows:
            assert len(r) == d + 1, (name, r)
            w.writerow(r)
    print("%-11s n=%-5d d=%d" % (name, len(rows), d))


def write_spec(name, negative, positive, note=None):
    path = os.path.join(SPEC_DIR, name + ".toml")
    q = lambda xs: "[" + ", ".join('"%s"' % x for x in xs) + "]"
    with open(path, "w") as f:
        if note:
            for line in note.splitlines():
                f.write("# %s\n" % line)
        f.write('name = "%s"\n' % name)
        f.write('source_path = "../csv/%s.csv"\n' % name)
        f.write('label_column = "class"\n')
        f.write("negative_classes = %s\n" % q(negative))
        f.write("positive_classes = %s\n" % q(positive))


def relabel(rows, mapping):
    return [r[:-1] + [mapping[r[-1]]] for r in rows]


def main(keel_wheel, imb_wheel):
    os.makedirs(CSV_DIR, exist_ok=True)
    os.makedirs(SPEC_DIR, exist_ok=True)
    keel = zipfile.ZipFile(keel_wheel)
    imb = zipfile.ZipFile(imb_wheel)
    kread = lambda f: keel.read(KEEL + f).decode("utf-8")

    write_csv("wine", keel_rows(kread("wine.dat")))
    write_spec("wine", ["2", "3"], ["1"])

    write_csv("sonar", keel_rows(kread("sonar.dat")))
    write_spec("sonar", ["M"], ["R"])

    # UCI glass.data: Id, 9 oxide measurements, class.
    glass = [l.split(",") for l in imb.read(IMB + "glass/glass.data.txt").decode().split()]
    write_csv("glass", [[t.strip() for t in r[1:]] for r in glass])
    write_spec("glass", ["2", "3", "5", "6", "7"], ["1"],
               "UCI glass.data with the Id column dropped (9 features).")

    # Only the class-2-vs-rest KEEL file is available; its negatives mix the
    # normal and hypothyroid patients.
    nt = keel_rows(imb.read(IMB + "new_thyroid1/new-thyroid1.dat").decode())
    write_csv("newthyroid", nt)
    write_spec("newthyroid", ["negative"], ["positive"],
               "KEEL new-thyroid1: positive = hyperthyroid, negative = normal + hypothyroid.")

    write_csv("heart", keel_rows(kread("heart.dat")))
    write_spec("heart", ["1"], ["2"])

    write_csv("bupa", keel_rows(kread("bupa.dat")))
    write_spec("bupa", ["2"], ["1"])

    write_csv("iono", keel_rows(kread("ionosphere.dat")))
    write_spec("iono", ["g"], ["b"], "KEEL ionosphere drops the constant second attribute (33 features).")

    write_csv("wdbc", keel_rows(kread("wdbc.dat")))
    write_spec("wdbc", ["B"], ["M"])

    balance = []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        cls = "L" if left > right else ("R" if left < right else "B")
        balance.append([str(lw), str(ld), str(rw), str(rd), cls])
    write_csv("balance", balance)
    write_spec("balance", ["B", "R"], ["L"])

    write_csv("australian", keel_rows(kread("australian.dat")))
    write_spec("australian", ["0"], ["1"])

    pima = relabel(keel_rows(kread("pima.dat")), {"tested_negative": "0", "tested_positive": "1"})
    write_csv("pima", pima)
    write_spec("pima", ["0"], ["1"])

    german = [l.split() for l in imb.read(IMB + "german/german.data-numeric.txt").decode().splitlines() if l.strip()]
    write_csv("german", german)
    write_spec("german", ["1"], ["2"], "UCI german.data-numeric (24 features).")

    # UCI splice-junction sequences; rows with ambiguity codes (D, N, S, R)
    # are dropped and the two boundary classes merged.
    code = {"A": "1", "C": "2", "G": "3", "T": "4"}
    splice = []
    for r in keel_rows(kread("splice.dat")):
        seq, cls = r[:-1], r[-1]
        if any(s not in code for s in seq):
            continue
        splice.append([code[s] for s in seq] + ["+1" if cls in ("EI", "IE") else "-1"])
    write_csv("splice", splice)
    write_spec("splice", ["+1"], ["-1"],
               "+1 = exon/intron boundary (EI or IE), -1 = neither; nucleotides coded A=1 C=2 G=3 T=4.")

    write_csv("spambase", keel_rows(kread("spambase.dat")))
    write_spec("spambase", ["0"], ["1"])


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
