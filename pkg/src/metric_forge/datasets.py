"""Clinical dataset loaders and empirical populations built from fitted outcome models.

Column choices live in the JSON manifests shipped under ``manifests/`` so the
mapping from raw fields to features, treatment and outcome is auditable and
can be overridden without code changes.
"""

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    CountMismatch,
    EmptyDataset,
    MalformedRecord,
    MissingIndicator,
    UnknownLevelAtPredictTime,
    WidthMismatch,
)
from .glm import CATEGORICAL, NUMERIC, predict_mu
from .population import EmpiricalPopulation, make_population

MISSING = "missing"
HORSE_COLIC_FIELDS = 28

# weights of the composite stroke outcome
COMPOSITE_WEIGHTS = {
    "death": -2.0,
    "recurrent_stroke": -1.0,
    "pe_or_bleed": -0.5,
    "side_effects": -0.5,
    "recovered_6m": 2.0,
    "discharged_14d": 1.0,
}


@dataclass(frozen=True)
class ClinicalRow:
    features: dict
    treatment: int
    outcome: float

    def __post_init__(self):
        if self.treatment not in (0, 1):
            raise MalformedRecord(f"treatment must be 0 or 1, got {self.treatment!r}")
        if not math.isfinite(self.outcome):
            raise MalformedRecord(f"outcome must be finite, got {self.outcome!r}")

    def __getitem__(self, name):
        return self.features[name]


def load_manifest(name_or_path):
    """A shipped manifest (``"horse_colic"`` / ``"ist"``) or a JSON file path."""
    if isinstance(name_or_path, dict):
        return name_or_path
    p = Path(name_or_path)
    if p.suffix == ".json" and p.exists():
        return json.loads(p.read_text())
    ref = resources.files("metric_forge") / "manifests" / f"{name_or_path}.json"
    return json.loads(ref.read_text())


def schema_of(manifest):
    """Ordered ``(feature, kind)`` list: categorical features, then numeric."""
    cat = manifest["categorical"]
    num = manifest["numeric"]
    names = lambda items: [c["name"] if isinstance(c, dict) else c for c in items]  # noqa: E731
    return [(n, CATEGORICAL) for n in names(cat)] + [(n, NUMERIC) for n in names(num)]


def _impute(records, schema, impute):
    """Fill ``None`` values: numeric medians and a ``missing`` level, or drop the row."""
    if impute not in ("median", "drop"):
        raise ValueError(f"unknown imputation strategy {impute!r}")
    if impute == "drop":
        return [r for r in records if all(r[0][name] is not None for name, _ in schema)]
    medians = {}
    for name, kind in schema:
        if kind != NUMERIC:
            continue
        vals = [r[0][name] for r in records if r[0][name] is not None]
        medians[name] = float(np.median(vals)) if vals else 0.0
    out = []
    for feats, t, y in records:
        filled = {}
        for name, kind in schema:
            v = feats[name]
            if v is None:
                v = medians[name] if kind == NUMERIC else MISSING
            filled[name] = v
        out.append((filled, t, y))
    return out


def _float_or_none(token, line, name):
    if token in ("?", ""):
        return None
    try:
        return float(token)
    except ValueError:
        raise MalformedRecord(f"{name}: not a number: {token!r}", line=line) from None


def load_horse_colic(path, impute="median", manifest="horse_colic"):
    """Rows of the UCI horse colic training file.

    T = 1 iff surgery; Y = +1 if the horse lived, -1 if it died. Euthanized
    cases and records with a missing surgery or outcome code are dropped.
    """
    spec = load_manifest(manifest)
    tr, oc = spec["treatment"], spec["outcome"]
    schema = schema_of(spec)
    fields = {c["name"]: c["field"] for c in spec["categorical"] + spec["numeric"]}
    kinds = dict(schema)
    records = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            tokens = raw.split()
            if not tokens:
                continue
            if len(tokens) != HORSE_COLIC_FIELDS:
                raise MalformedRecord(
                    f"expected {HORSE_COLIC_FIELDS} fields, found {len(tokens)}", line=line_no
                )
            surgery, outcome = tokens[tr["field"] - 1], tokens[oc["field"] - 1]
            if outcome in ("?", oc["euthanized"]) or surgery == "?":
                continue
            if surgery not in (tr["treated"], tr["control"]):
                raise MalformedRecord(f"surgery code {surgery!r}", line=line_no)
            if outcome not in (oc["lived"], oc["died"]):
                raise MalformedRecord(f"outcome code {outcome!r}", line=line_no)
            feats = {}
            for name, field in fields.items():
                tok = tokens[field - 1]
                if kinds[name] == NUMERIC:
                    feats[name] = _float_or_none(tok, line_no, name)
                else:
                    feats[name] = None if tok == "?" else tok
            t = 1 if surgery == tr["treated"] else 0
            y = 1.0 if outcome == oc["lived"] else -1.0
            records.append((feats, t, y))
    if not records:
        raise EmptyDataset(f"no usable records in {path}")
    return [ClinicalRow(f, t, y) for f, t, y in _impute(records, schema, impute)]


def composite_outcome(record):
    """Weighted sum of the six stroke-outcome indicators; lies in [-4, 3]."""
    total = 0.0
    for name, weight in COMPOSITE_WEIGHTS.items():
        try:
            value = record[name]
        except (KeyError, IndexError):
            raise MissingIndicator(f"indicator {name!r} is missing") from None
        if value is None:
            raise MissingIndicator(f"indicator {name!r} is missing")
        if value not in (0, 1, True, False):
            raise MissingIndicator(f"indicator {name!r} must be 0/1, got {value!r}")
        total += weight * float(value)
    return total


def _test(row, column, op, value):
    cell = row.get(column, "")
    cell = "" if cell is None else cell.strip()
    if op == "eq":
        return cell == value
    if op == "in":
        return cell in value
    if op in ("le", "lt", "ge", "gt"):
        try:
            x = float(cell)
        except ValueError:
            return False
        return {"le": x <= value, "lt": x < value, "ge": x >= value, "gt": x > value}[op]
    raise ValueError(f"unknown manifest operator {op!r}")


def indicators_from_row(row, manifest):
    """Evaluate the manifest's indicator rules on one raw CSV row.

    Unknown or blank cells fail every test, so they count as 0.
    """
    out = {}
    for name, rule in manifest["indicators"].items():
        (mode, tests), = rule.items()
        hits = (_test(row, *t) for t in tests)
        out[name] = int(any(hits) if mode == "any" else all(hits))
    return out


def _in_arm(row, arm):
    return all(row.get(col, "").strip() in vals for col, vals in arm.items())


def load_ist(path, manifest="ist", impute="median", check_counts=True):
    """Rows of the International Stroke Trial CSV restricted to two aspirin arms.

    T = 1 for heparin at the higher dose plus aspirin, T = 0 for aspirin
    alone. Other arms are dropped. Y is :func:`composite_outcome`.
    With ``check_counts`` the row count and treatment rate are checked
    against the manifest's expected values.
    """
    spec = load_manifest(manifest)
    schema = schema_of(spec)
    arms = spec["arms"]
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = [n for n, _ in schema] + list(arms["treated"])
        missing = [c for c in needed if c not in (reader.fieldnames or [])]
        if missing:
            raise MalformedRecord(f"missing columns: {', '.join(missing)}", line=1)
        for line_no, row in enumerate(reader, start=2):
            if _in_arm(row, arms["treated"]):
                t = 1
            elif _in_arm(row, arms["control"]):
                t = 0
            else:
                continue
            feats = {}
            for name, kind in schema:
                cell = (row.get(name) or "").strip()
                if kind == NUMERIC:
                    feats[name] = _float_or_none(cell, line_no, name)
                else:
                    feats[name] = cell or None
            y = composite_outcome(indicators_from_row(row, spec))
            records.append((feats, t, y))
    if not records:
        raise EmptyDataset(f"no patients in the selected arms in {path}")
    rows = [ClinicalRow(f, t, y) for f, t, y in _impute(records, schema, impute)]
    if check_counts:
        exp = spec["expected"]
        n = len(rows)
        rate = sum(r.treatment for r in rows) / n
        if abs(n - exp["n"]) > exp["n_tolerance"] or abs(rate - exp["treat_rate"]) > exp["rate_tolerance"]:
            raise CountMismatch(
                f"arm filter kept n={n} at treatment rate {rate:.4f}; "
                f"expected n={exp['n']} and rate {exp['treat_rate']}"
            )
    return rows


def load_dataset(name, path, impute="median", check_counts=True):
    """Dispatch on the dataset name; returns ``(rows, schema, family, manifest)``."""
    if name == "horse-colic":
        spec = load_manifest("horse_colic")
        return load_horse_colic(path, impute, spec), schema_of(spec), "logistic", spec
    if name == "ist":
        spec = load_manifest("ist")
        return load_ist(path, spec, impute, check_counts), schema_of(spec), "linear", spec
    raise ValueError(f"unknown dataset {name!r}")


def treatment_rate(rows):
    rows = list(rows)
    if not rows:
        raise EmptyDataset("no rows")
    return sum(r.treatment for r in rows) / len(rows)


def build_empirical_model(rows, fit, schema=None):
    """Empirical population with synthetic potential outcomes from ``fit``.

    Identical feature vectors are merged (weights summed), support points keep
    first-appearance order, and ``mu_t`` is the fitted mean outcome. Feature
    columns of the result code categorical levels by their index in the fit's
    encoding.
    """
    rows = list(rows)
    if not rows:
        raise EmptyDataset("no rows")
    enc = fit.encoding
    if enc is None:
        raise WidthMismatch("fit carries no encoding metadata")
    if schema is not None and tuple(tuple(s) for s in schema) != enc.schema:
        raise WidthMismatch("schema differs from the fit's encoding")
    names = enc.feature_names
    lookup = {name: {lvl: j for j, lvl in enumerate(lv)} for name, lv in enc.levels.items()}
    order, counts, coded = {}, [], []
    for r in rows:
        key = []
        for name, kind in enc.schema:
            v = r.features[name]
            key.append(float(v) if kind == NUMERIC else str(v))
        key = tuple(key)
        if key in order:
            counts[order[key]] += 1
            continue
        order[key] = len(counts)
        counts.append(1)
        coded.append(key)
    firsts = [dict(zip(names, key)) for key in coded]
    design = enc.transform(firsts)
    if design.shape[1] != fit.width:
        raise WidthMismatch("encoding width differs from the fitted coefficients")
    counts = np.asarray(counts, dtype=np.int64)
    features = np.array(
        [
            [v if kind == NUMERIC else _level_code(lookup[name], v) for (name, kind), v in zip(enc.schema, key)]
            for key in coded
        ],
        dtype=np.float64,
    ).reshape(len(coded), len(names))
    model = make_population(
        list(range(len(coded))),
        counts / counts.sum(),
        predict_mu(fit, design, 0.0),
        predict_mu(fit, design, 1.0),
        int(counts.sum()),
    )
    return EmpiricalPopulation(model, features, names, counts)


def _level_code(levels, value):
    try:
        return float(levels[value])
    except KeyError:
        raise UnknownLevelAtPredictTime(f"level {value!r} was not seen in training") from None


def benefit_count(emp):
    """Number of units (rows) whose synthetic effect is positive."""
    counts = emp.counts if emp.counts is not None else np.round(emp.model.probs * emp.model.n)
    return int(np.sum(np.asarray(counts)[emp.model.tau > 0.0]))
