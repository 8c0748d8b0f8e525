"""End-to-end check of systolic, spectral and diameter inequalities for a metric."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

from . import metrics as M
from .geodesics import SystoleSearchError, find_systole_upper
from .nirenberg import beta_delta_bound, log_beta_delta_bound

SCHEMA = "reeb-systole/1"
HOLDS_TOL = 1e-7
PINCHING_SHARP = (4.0 + math.sqrt(7.0)) / 8.0
CROSSOVER_BETA = math.pi / 32.0

INCONCLUSIVE = "inconclusive (upper bound too large?)"


@dataclass
class VerifyConfig:
    starts: int = 512
    seed: int = 0
    closure_tol: float = 1e-9
    diameter_resolution: int = 64
    eigen_band_limit: int = 16
    holds_tol: float = HOLDS_TOL


@dataclass
class Entry:
    id: str
    statement: str
    lhs: float | None
    rhs: float | None
    inputs_used: list
    conservative: bool = False
    status: str = ""
    margin: float | None = None
    normalized_margin: float | None = None
    holds: bool | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _judge(e: Entry, tol: float) -> Entry:
    e.margin = e.rhs - e.lhs
    e.normalized_margin = e.margin / max(abs(e.lhs), abs(e.rhs), 1.0)
    e.holds = e.normalized_margin >= -tol
    if e.holds:
        e.status = "holds"
    else:
        e.status = INCONCLUSIVE if e.conservative else "fails"
    return e


@dataclass
class InequalityReport:
    entries: list
    metric_digest: dict
    quantities: dict
    beta_delta: dict | None = None
    crossover: dict = field(default_factory=dict)

    @property
    def applicable(self) -> list:
        return [e for e in self.entries
                if not e.status.startswith("skipped") and e.status != "informational"]

    @property
    def all_hold(self) -> bool:
        return all(e.holds is True for e in self.applicable)

    def entry(self, id_: str) -> Entry:
        for e in self.entries:
            if e.id == id_:
                return e
        raise KeyError(id_)

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "metric": self.metric_digest,
                "quantities": self.quantities, "entries": [e.to_dict() for e in self.entries],
                "beta_delta": self.beta_delta, "crossover": self.crossover,
                "all_hold": self.all_hold}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    def write_csv(self, path) -> None:
        cols = ["id", "status", "lhs", "rhs", "margin", "normalized_margin", "holds",
                "conservative", "inputs_used", "statement"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for e in self.entries:
                d = e.to_dict()
                d["inputs_used"] = ";".join(e.inputs_used)
                w.writerow(["" if d[c] is None else (repr(d[c]) if isinstance(d[c], float) else d[c])
                            for c in cols])


def area_bound_crossover(beta: float) -> dict:
    """Compare pi/beta against the universal constant 32 (both multiply the area)."""
    balance_rhs = math.pi / beta
    return {"beta": beta, "balance_coefficient": balance_rhs, "universal_coefficient": 32.0,
            "balance_finer": balance_rhs < 32.0, "threshold": CROSSOVER_BETA}


def compare_beta_delta(metric: M.MetricModel, curv: M.CurvatureStats | None = None,
                       bal: M.FiberBalance | None = None) -> dict:
    """Actual fiber balance against the pinching lower bound."""
    curv = M.curvature(metric) if curv is None else curv
    if not metric.is_antipodal() or not curv.positive:
        return {"applicable": False,
                "reason": "needs an antipodally symmetric, positively curved metric"}
    bal = M.balance(metric) if bal is None else bal
    delta = min(1.0, curv.delta)
    bound = beta_delta_bound(delta)
    return {"applicable": True, "delta": delta, "beta_actual": bal.beta,
            "beta_bound": bound, "log_beta_bound": log_beta_delta_bound(delta),
            "bound_holds": bal.beta > bound}


def verify(metric: M.MetricModel, config: VerifyConfig | None = None) -> InequalityReport:
    cfg = VerifyConfig() if config is None else config
    area = M.area(metric)
    vol = 2.0 * math.pi * area
    bal = M.balance(metric)
    beta = bal.beta
    curv = M.curvature(metric)
    lam = M.lambda1(metric, cfg.eigen_band_limit)
    diam = M.diameter(metric, cfg.diameter_resolution)
    D = diam.value
    try:
        sys_est = find_systole_upper(metric, cfg.starts, cfg.seed, cfg.closure_tol)
        L = sys_est.value
    except SystoleSearchError:
        sys_est, L = None, None

    q = {"area": area, "volume_disk_bundle": vol, "inradius": bal.inradius,
         "circumradius": bal.circumradius, "beta": beta, "lambda1": lam,
         "diameter": D, "diameter_error": diam.error_estimate,
         "k_min": curv.k_min, "k_max": curv.k_max, "delta": curv.delta,
         "systole_upper": L, "systole_source": None if sys_est is None else sys_est.source,
         "systole_candidates": [] if sys_est is None else sys_est.to_dict()["candidates"][:8]}

    nonneg = curv.k_min >= 0
    specs = [
        ("systole_circumradius", "L_min <= 2 pi R (circumradius)", True,
         lambda: (L, 2 * math.pi * bal.circumradius), ["systole", "circumradius"], True),
        ("systole_volume", "L_min^2 <= Vol(disk bundle) / (2 beta)", True,
         lambda: (L * L, vol / (2 * beta)), ["systole", "volume", "beta"], True),
        ("systole_area_balance", "L_min^2 <= (pi / beta) Area", True,
         lambda: (L * L, math.pi * area / beta), ["systole", "area", "beta"], True),
        ("systole_area_universal", "L_min^2 <= 32 Area (Rotman)", True,
         lambda: (L * L, 32 * area), ["systole", "area"], True),
        ("eigenvalue_area", "lambda_1 <= 8 pi / Area (Hersch)", False,
         lambda: (lam, 8 * math.pi / area), ["lambda1", "area"], True),
        ("systole_eigenvalue", "L_min^2 <= 8 pi^2 / (beta lambda_1)", True,
         lambda: (L * L, 8 * math.pi ** 2 / (beta * lam)), ["systole", "beta", "lambda1"], True),
        ("systole_diameter_universal", "L_min <= 4 D (Nabutovsky-Rotman, Sabourau)", True,
         lambda: (L, 4 * D), ["systole", "diameter"], True),
        ("area_diameter", "Area <= (8 / pi) D^2, K >= 0 (Calabi-Cao)", False,
         lambda: (area, 8 / math.pi * D * D), ["area", "diameter"], nonneg),
        ("systole_diameter_balance", "L_min <= (2 sqrt 2 / sqrt beta) D, K >= 0", True,
         lambda: (L, 2 * math.sqrt(2) / math.sqrt(beta) * D), ["systole", "beta", "diameter"],
         nonneg),
        ("systole_diameter_nonneg", "L_min <= 3 D, K >= 0 (Adelstein-Pallete)", True,
         lambda: (L, 3 * D), ["systole", "diameter"], nonneg),
    ]
    entries = []
    for id_, text, uses_L, fn, inputs, hyp in specs:
        e = Entry(id_, text, None, None, inputs, conservative=uses_L)
        if not hyp:
            e.status = "skipped: hypothesis unmet (K_min < 0)"
        elif uses_L and L is None:
            e.status = "indeterminate: systole search failed"
            e.holds = None
        else:
            e.lhs, e.rhs = fn()
            _judge(e, cfg.holds_tol)
        entries.append(e)

    if curv.delta is not None and curv.delta > PINCHING_SHARP and L is not None:
        for id_, text, fn, inputs in [
            ("systole_area_sharp", "L_min^2 <= pi Area for pinching above (4+sqrt 7)/8",
             lambda: (L * L, math.pi * area), ["systole", "area"]),
            ("systole_diameter_sharp", "L_min <= (2 / sqrt delta) D for pinching above (4+sqrt 7)/8",
             lambda: (L, 2 / math.sqrt(curv.delta) * D), ["systole", "delta", "diameter"]),
        ]:
            e = Entry(id_, text, *fn(), inputs, conservative=True)
            _judge(e, cfg.holds_tol)
            e.note = e.status
            e.status = "informational"
            entries.append(e)

    bd = compare_beta_delta(metric, curv, bal)
    if bd["applicable"]:
        e = Entry("balance_pinching", "beta > exp(-2 sqrt(7 (pi^2/3 + 2)) sqrt(e^(e/delta + 1) / delta^2 - 1))",
                  bd["beta_bound"], bd["beta_actual"], ["beta", "delta"])
        _judge(e, 0.0)
        e.holds = bd["bound_holds"]
        e.status = "holds" if e.holds else "fails"
        entries.append(e)

    return InequalityReport(entries, metric.digest(), q, bd, area_bound_crossover(beta))
