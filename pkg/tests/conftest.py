import csv
import os
from pathlib import Path

import numpy as np
import pytest

from metric_forge import make_population

DATA_DIR = Path(os.environ.get("METRIC_FORGE_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))


@pytest.fixture
def m1():
    # two cells, p = 0.5; tau = [2, 1]
    return make_population([0, 1], [0.5, 0.5], mu0=[-2.0, 0.0], mu1=[0.0, 1.0], n=100)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------------------
# synthetic stand-ins for the two clinical files (same layout, made-up values)
# ---------------------------------------------------------------------------

HC_CAT_FIELDS = (2, 7, 8, 9, 10, 11, 12, 13, 14, 15, 17, 18, 21)
HC_NUM_FIELDS = (4, 5, 6, 16, 19, 20, 22)


def write_horse_colic(path, n=120, seed=0, missing_rate=0.15):
    """Whitespace records with 28 fields; field 1 surgery, field 23 outcome."""
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n):
        f = ["?"] * 28
        surgery = 1 if rng.random() < 0.6 else 2
        f[0] = str(surgery)
        f[2] = str(500000 + i)
        for fld in HC_CAT_FIELDS:
            f[fld - 1] = str(int(rng.integers(1, 4))) if fld != 2 else ("1" if rng.random() < 0.9 else "9")
        for fld in HC_NUM_FIELDS:
            f[fld - 1] = f"{rng.normal(40 + fld, 5):.1f}"
        for fld in HC_CAT_FIELDS[1:] + HC_NUM_FIELDS:
            if rng.random() < missing_rate:
                f[fld - 1] = "?"
        score = (float(f[4]) - 45 if f[4] != "?" else 0.0) / 5 + (1.0 if surgery == 1 else -0.5)
        lived = rng.random() < 1 / (1 + np.exp(-score))
        f[22] = "1" if lived else "2"
        if rng.random() < 0.1:
            f[22] = "3"
        for fld in range(24, 29):
            f[fld - 1] = str(int(rng.integers(1, 3)))
        lines.append(" ".join(f))
    Path(path).write_text("\n".join(lines) + "\n")
    return path


IST_CAT = ["RCONSC", "SEX", "RSLEEP", "RATRIAL", "RCT", "RVISINF", "RHEP24", "RASP3",
           "RDEF1", "RDEF2", "RDEF3", "RDEF4", "RDEF5", "RDEF6", "RDEF7", "RDEF8", "STYPE"]
IST_NUM = ["RDELAY", "AGE", "RSBP"]
IST_OUT = ["DDEAD", "DRSISC", "DRSUNK", "DPE", "DRSH", "DSIDE", "FRECOVER", "DALIVE", "TD"]
IST_HEADER = ["HOSPNUM", "RDATE", "HOURLOCAL", "MINLOCAL", "DAYLOCAL"] + IST_CAT + IST_NUM + ["RXASP", "RXHEP"] + IST_OUT


def ist_record(rng, rxasp, rxhep):
    row = {"HOSPNUM": str(int(rng.integers(1, 500))), "RDATE": "Jan-92", "HOURLOCAL": "10",
           "MINLOCAL": "30", "DAYLOCAL": "3", "RXASP": rxasp, "RXHEP": rxhep}
    for c in IST_CAT:
        row[c] = str(rng.choice(["Y", "N"])) if c != "SEX" else str(rng.choice(["M", "F"]))
    if rng.random() < 0.1:
        row["RATRIAL"] = ""
    row["STYPE"] = str(rng.choice(["TACI", "PACI", "LACI", "POCI"]))
    row["RDELAY"] = str(int(rng.integers(1, 48)))
    row["AGE"] = str(int(rng.integers(40, 90)))
    row["RSBP"] = str(int(rng.integers(100, 200)))
    for c in IST_OUT[:-1]:
        row[c] = str(rng.choice(["Y", "N", "U"], p=[0.2, 0.75, 0.05]))
    row["TD"] = str(int(rng.integers(1, 30)))
    return row


def write_ist(path, n=400, seed=0):
    """Factorial-style arms: (RXASP, RXHEP) in {Y,N} x {M,H,L,N}."""
    rng = np.random.default_rng(seed)
    arms = [("Y", "M"), ("Y", "H"), ("Y", "L"), ("Y", "N"), ("N", "M"), ("N", "L"), ("N", "N"), ("Y", "N")]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=IST_HEADER)
        w.writeheader()
        for _ in range(n):
            a, h = arms[int(rng.integers(len(arms)))]
            w.writerow(ist_record(rng, a, h))
    return path


@pytest.fixture
def horse_colic_file(tmp_path):
    return write_horse_colic(tmp_path / "horse-colic.data")


@pytest.fixture
def ist_file(tmp_path):
    return write_ist(tmp_path / "ist.csv")
