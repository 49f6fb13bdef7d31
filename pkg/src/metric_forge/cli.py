"""``metric-forge``: fit outcome models, evaluate rewards, audit rankings, trace asymmetry."""

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .asymmetry import (
    asym_regret,
    feature_curve,
    importance_order,
    induced_joint_model,
    principal_view,
)
from .checks import run_suite
from .datasets import benefit_count, build_empirical_model, load_dataset, treatment_rate
from .errors import MetricForgeError
from .glm import FitResult, fit_linear, fit_logistic, one_hot_encode
from .population import EmpiricalPopulation, PolicyClass, PopulationModel
from .ranking import AgentProfile, audit_rankings
from .response import regret
from .rewards import RewardKind, make_spec

EXIT_OK, EXIT_PROPERTY, EXIT_INPUT = 0, 1, 2
DATA_ENV = "METRIC_FORGE_DATA_DIR"
DATA_FILES = {
    "horse-colic": ("horse-colic.data",),
    "ist": ("IST_corrected.csv", "ist.csv", "IST.csv"),
}
TABLE1_ROWS = ("ATO", "ATT", "TO", "TT", "TT (no info)", "TT (demographic)")


@dataclass
class RunConfig:
    command: str
    dataset: str = "horse-colic"
    data_path: Optional[str] = None
    impute: str = "median"
    ridge: float = 1e-6
    seed: int = 0
    out: Optional[str] = None
    format: str = "json"
    check_counts: bool = True
    visible: tuple = ()
    source: str = "auxiliary"
    epsilon: float = 0.05
    order: str = "ascending"
    models: int = 1000
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# experiment pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Experiment:
    """A fitted dataset: outcome model, empirical population and bookkeeping."""

    dataset: str
    fit: FitResult
    population: EmpiricalPopulation
    demographic: tuple
    data_treat_rate: float
    impute: str

    def to_dict(self):
        return {
            "dataset": self.dataset,
            "impute": self.impute,
            "data_treat_rate": self.data_treat_rate,
            "demographic": list(self.demographic),
            "fit": self.fit.to_dict(),
            "population": self.population.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["dataset"],
            FitResult.from_dict(data["fit"]),
            EmpiricalPopulation.from_dict(data["population"]),
            tuple(data.get("demographic", ())),
            float(data["data_treat_rate"]),
            data.get("impute", "median"),
        )


def default_data_path(name):
    root = Path(os.environ.get(DATA_ENV, "data"))
    for fname in DATA_FILES[name]:
        if (root / fname).exists():
            return root / fname
    return root / DATA_FILES[name][0]


def run_experiment(name, path=None, impute="median", ridge=1e-6, check_counts=True):
    """Load, encode, fit and build the empirical population for a named dataset."""
    path = default_data_path(name) if path is None else path
    rows, schema, family, manifest = load_dataset(name, path, impute, check_counts)
    design, enc = one_hot_encode(rows, schema)
    t = [r.treatment for r in rows]
    y = [r.outcome for r in rows]
    if family == "logistic":
        fit = fit_logistic(design, t, y, ridge=ridge, encoding=enc)
    else:
        fit = fit_linear(design, t, y, encoding=enc)
    emp = build_empirical_model(rows, fit)
    return Experiment(name, fit, emp, tuple(manifest.get("demographic", ())), treatment_rate(rows), impute)


def load_experiment(cfg):
    if cfg.dataset in DATA_FILES:
        return run_experiment(cfg.dataset, cfg.data_path, cfg.impute, cfg.ridge, cfg.check_counts)
    data = json.loads(Path(cfg.dataset).read_text())
    if "fit" not in data:
        raise MetricForgeError(f"{cfg.dataset} is not a fitted model file (run `metric-forge fit`)")
    return Experiment.from_dict(data)


@dataclass(frozen=True)
class Table1Row:
    reward: str
    utility: float
    regret: float
    treat_rate: float


@dataclass(frozen=True)
class Table1Report:
    dataset: str
    rows: tuple
    diagnostics: dict
    benefit: int
    n: int
    data_treat_rate: float

    def to_dict(self):
        return {
            "dataset": self.dataset,
            "n": self.n,
            "data_treat_rate": self.data_treat_rate,
            "benefit_count": self.benefit,
            "diagnostics": dict(self.diagnostics),
            "rows": [r.__dict__ for r in self.rows],
        }

    def row(self, reward):
        return next(r for r in self.rows if r.reward == reward)


def table1(exp):
    emp = exp.population
    m = emp.model
    rows = []
    for kind in (RewardKind.ATO, RewardKind.ATT, RewardKind.TO, RewardKind.TT):
        rep = regret(make_spec(kind, m), m)
        rate = float(rep.best_response.treat_prob @ m.probs)
        rows.append(Table1Row(kind.value, rep.utility, rep.regret, rate))
    for label, feats in (("TT (no info)", []), ("TT (demographic)", list(exp.demographic))):
        view = principal_view(emp, feats)
        rows.append(Table1Row(label, view.utility, view.regret, view.treat_rate))
    return Table1Report(
        exp.dataset, tuple(rows), dict(exp.fit.diagnostics), benefit_count(emp), m.n, exp.data_treat_rate
    )


def cmd_evaluate(cfg):
    return table1(load_experiment(cfg))


def curve_report(exp, order="ascending"):
    emp = exp.population
    names, singles = importance_order(emp)
    if order == "descending":
        names = names[::-1]
    elif order == "column":
        names = list(emp.feature_names)
    points = feature_curve(emp, names)
    by_name = {s.feature: s for s in singles}
    half = len(names) // 2
    return {
        "dataset": exp.dataset,
        "order": names,
        "single": [
            {"feature": s.feature, "gamma_marg": s.gamma_marg, "regret": s.regret} for s in singles
        ],
        "curve": [
            {
                "prefix_size": p.prefix_size,
                "feature_name": p.feature,
                "gamma_marg": p.gamma_marg,
                "gamma_max": p.gamma_max,
                "regret": p.regret,
                "single_gamma_marg": None if p.feature is None else by_name[p.feature].gamma_marg,
                "single_regret": None if p.feature is None else by_name[p.feature].regret,
            }
            for p in points
        ],
        "half": {"prefix_size": half, "regret": points[half].regret, "none_regret": points[0].regret},
    }


def cmd_curve(cfg):
    return curve_report(load_experiment(cfg), cfg.order)


def _joint_from_file(path):
    data = json.loads(Path(path).read_text())
    if "fit" in data:
        return None, Experiment.from_dict(data)
    return PopulationModel.from_dict(data.get("model", data)), None


def cmd_asym(cfg):
    if cfg.dataset in DATA_FILES:
        joint, exp = None, load_experiment(cfg)
    else:
        joint, exp = _joint_from_file(cfg.dataset)
    if joint is None:
        joint = induced_joint_model(exp.population, list(cfg.visible))
    if not joint.has_u:
        raise MetricForgeError("asym needs a joint (x, u) model")
    cls = PolicyClass.positivity(cfg.epsilon, upper=True) if cfg.source == "agent-untreated" else None
    return asym_regret(joint, cfg.source, cls)


def cmd_rank(cfg):
    data = json.loads(Path(cfg.dataset).read_text())
    agents = [AgentProfile.from_dict(a) for a in data["agents"]]
    return audit_rankings(agents, data["reference"], data.get("reweight", True))


def cmd_fit(cfg):
    return load_experiment(cfg)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _g6(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_g6(v) for v in r])
    return buf.getvalue()


def to_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def render(cfg, result):
    cmd = cfg.command
    if cfg.format == "json":
        if cmd == "check":
            return to_json([r.__dict__ for r in result])
        return to_json(result.to_dict() if hasattr(result, "to_dict") else result)
    if cmd == "evaluate":
        return to_csv(
            ("reward", "utility", "regret", "treat_rate"),
            [(r.reward, r.utility, r.regret, r.treat_rate) for r in result.rows],
        )
    if cmd == "curve":
        cols = ("prefix_size", "feature_name", "gamma_marg", "regret", "gamma_max", "single_gamma_marg", "single_regret")
        return to_csv(cols, [tuple(p[c] for c in cols) for p in result["curve"]])
    if cmd == "rank":
        return to_csv(("id", "score", "rank", "uniform_violation", "relative_violation"), result.leaderboard())
    if cmd == "asym":
        d = result.to_dict()
        keys = ("estimator_source", "gamma_marg", "gamma_max", "regret", "bound_marg", "bound_max",
                "slack_marg", "slack_max", "utility", "optimal_utility", "treat_rate", "converged", "iterations")
        return to_csv(keys, [tuple(d[k] for k in keys)])
    if cmd == "check":
        return to_csv(("property", "passed", "worst", "detail"), [(r.name, r.passed, r.worst, r.detail) for r in result])
    if cmd == "fit":
        d = result.fit.diagnostics
        return to_csv(
            ("dataset", "family", "n", "support", "benefit_count", "converged", *sorted(d)),
            [(result.dataset, result.fit.family, result.population.model.n, result.population.model.size,
              benefit_count(result.population), result.fit.converged, *(d[k] for k in sorted(d)))],
        )
    raise ValueError(f"no csv rendering for {cmd}")


COMMANDS = {
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "rank": cmd_rank,
    "asym": cmd_asym,
    "curve": cmd_curve,
    "check": lambda cfg: run_suite(cfg.seed, cfg.models, cfg.models, max(1, cfg.models // 5)),
}


def build_parser():
    p = argparse.ArgumentParser(prog="metric-forge", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--dataset", default="horse-colic",
                   help="horse-colic, ist, or a JSON file (fitted model, joint model or agent set)")
    p.add_argument("--data", dest="data_path", help="raw data file (default: $%s/<standard name>)" % DATA_ENV)
    p.add_argument("--impute", choices=("median", "drop"), default="median")
    p.add_argument("--ridge", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--no-count-check", dest="check_counts", action="store_false",
                   help="skip the IST row count / treatment rate check")
    p.add_argument("--visible", default="", help="asym: comma-separated features the principal sees")
    p.add_argument("--source", choices=("auxiliary", "agent-untreated"), default="auxiliary")
    p.add_argument("--epsilon", type=float, default=0.05, help="asym: positivity margin")
    p.add_argument("--order", choices=("ascending", "descending", "column"), default="ascending",
                   help="curve: feature order by single-feature gamma_marg")
    p.add_argument("--models", type=int, default=1000, help="check: random models per property")
    return p


def parse_config(argv=None):
    ns = build_parser().parse_args(argv)
    d = vars(ns)
    d["visible"] = tuple(v for v in d["visible"].split(",") if v)
    return RunConfig(**d)


def main(argv=None):
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    start = time.perf_counter()
    try:
        result = COMMANDS[cfg.command](cfg)
        text = render(cfg, result)
    except (MetricForgeError, OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"metric-forge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    if cfg.command == "check":
        for r in result:
            print(r.line(), file=sys.stderr)
        print(f"{time.perf_counter() - start:.1f}s", file=sys.stderr)
        if not all(r.passed for r in result):
            return EXIT_PROPERTY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
