"""Scenario files, task orchestration, reports and plot tables."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .corona import (
    co_outer_necessary_check,
    generalized_inverse_from_projections,
    nikolski_left_inverse,
    pointwise_left_inverse,
    projections_from_generalized_inverse,
)
from .disk import DiskGrid, green_potential_grid, green_potential_sup
from .field import AnalyticMatrixField, FieldError, c1_refinement, corona_delta, opnorm
from .hankel import (
    PipelineResult,
    embedding_constant,
    main_estimate_constant,
    projection_norm_cap,
    run_pipeline,
)
from .projection import (
    complementary_duality_check,
    dbar_formula,
    kernel_projection,
    logdet_admissible,
    necessity_checks,
    pdp_identity_report,
    range_projection,
    subharmonic_witness,
    verify_projection,
    witness_soundness,
)

TASKS = ("check", "project", "invert", "geninvert")
WITNESS_KINDS = ("logdet", "trace")
DEFAULT_TOLERANCES = {"alg": 1e-10, "grid": 1e-8, "trunc": 1e-6}
DRIFT_TOL = 0.10
PDP_TOL = 1e-6
COMMUTATOR_TOL = 1e-5


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario input."""


@dataclass
class Scenario:
    name: str
    coefficients: np.ndarray
    radial_nodes: int = 64
    angular_count: int = 256
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    witness: str = "logdet"
    witness_C: float | None = None
    modes: int = 16
    symbol_modes: int | None = None
    dilation: float = 1.0
    tasks: list = field(default_factory=lambda: list(TASKS))
    seed: int = 0

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        self.validate()

    def validate(self):
        c = self.coefficients
        if c.ndim != 3 or 0 in c.shape:
            raise ScenarioError("coefficients must be indexed [degree][row][col]")
        if not np.all(np.isfinite(c)):
            raise ScenarioError("coefficients must be finite")
        if self.radial_nodes < 2 or self.angular_count < 4 or self.angular_count % 2:
            raise ScenarioError("grid needs radial_nodes >= 2 and an even angular_count >= 4")
        if self.witness not in WITNESS_KINDS:
            raise ScenarioError(f"witness must be one of {WITNESS_KINDS}")
        if self.witness_C is not None and not self.witness_C > 0:
            raise ScenarioError("witness constant must be positive")
        if not 0.0 < self.dilation <= 1.0:
            raise ScenarioError("dilation radius must lie in (0, 1]")
        if self.modes < 1 or self.modes > self.angular_count // 4:
            raise ScenarioError("modes must lie in [1, angular_count/4]")
        if self.symbol_modes is not None and not 0 <= self.symbol_modes < self.angular_count // 2:
            raise ScenarioError("symbol_modes must lie in [0, angular_count/2)")
        bad = [t for t in self.tasks if t not in TASKS]
        if bad:
            raise ScenarioError(f"unknown tasks {bad}")
        for key in DEFAULT_TOLERANCES:
            if key not in self.tolerances or not self.tolerances[key] > 0:
                raise ScenarioError(f"tolerance '{key}' must be positive")

    @property
    def field(self):
        return AnalyticMatrixField(self.coefficients)

    @property
    def grid(self):
        return DiskGrid(self.radial_nodes, self.angular_count)

    def to_dict(self):
        return {
            "name": self.name,
            "coefficients": [[[[float(v.real), float(v.imag)] for v in row] for row in A]
                             for A in self.coefficients],
            "grid": {"radial_nodes": self.radial_nodes, "angular_count": self.angular_count},
            "tolerances": {k: float(self.tolerances[k]) for k in sorted(self.tolerances)},
            "witness": {"kind": self.witness, "C": self.witness_C},
            "modes": self.modes,
            "symbol_modes": self.symbol_modes,
            "dilation": self.dilation,
            "tasks": list(self.tasks),
            "seed": self.seed,
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a JSON object")
        try:
            raw = d["coefficients"]
            coef = _parse_coefficients(raw)
            grid = d.get("grid", {})
            witness = d.get("witness", {})
            if isinstance(witness, str):
                witness = {"kind": witness}
            tol = dict(DEFAULT_TOLERANCES)
            tol.update({k: float(v) for k, v in d.get("tolerances", {}).items()})
            sm = d.get("symbol_modes")
            wc = witness.get("C")
            return cls(
                name=str(d["name"]),
                coefficients=coef,
                radial_nodes=_as_int(grid.get("radial_nodes", 64)),
                angular_count=_as_int(grid.get("angular_count", 256)),
                tolerances=tol,
                witness=str(witness.get("kind", "logdet")),
                witness_C=None if wc is None else float(wc),
                modes=_as_int(d.get("modes", 16)),
                symbol_modes=None if sm is None else _as_int(sm),
                dilation=float(d.get("dilation", 1.0)),
                tasks=list(d.get("tasks", list(TASKS))),
                seed=_as_int(d.get("seed", 0)),
            )
        except KeyError as exc:
            raise ScenarioError(f"missing field {exc}") from None
        except (TypeError, AttributeError) as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from None

    @classmethod
    def loads(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from None

    def replace(self, **changes):
        d = {**self.__dict__, **changes}
        return Scenario(**d)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _as_int(v):
    if isinstance(v, bool) or int(v) != v:
        raise ScenarioError(f"expected an integer, got {v!r}")
    return int(v)


def _parse_coefficients(raw):
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError("coefficients must be a rectangular array of [re, im] pairs") from None
    if arr.ndim != 4 or arr.shape[-1] != 2:
        raise ScenarioError("coefficients must be indexed [degree][row][col] with [re, im] entries")
    return arr[..., 0] + 1j * arr[..., 1]


def bundled_scenarios():
    root = resources.files("opcorona") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(path_or_name):
    """Parse a scenario file, or a bundled scenario by name."""
    p = Path(path_or_name)
    if p.is_file():
        return Scenario.loads(p.read_text())
    root = resources.files("opcorona") / "scenarios" / f"{path_or_name}.json"
    if root.is_file():
        return Scenario.loads(root.read_text())
    raise ScenarioError(f"no scenario file or bundled scenario named {path_or_name!r}")


def _clean(x):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    return x


@dataclass
class RunReport:
    """Per-task statuses and numbers plus arrays kept for plot tables.

    ``to_json`` is deterministic; wall-clock timings live in ``timings`` and
    are written to a separate file.
    """

    scenario: Scenario
    tasks: dict
    grid: dict
    timings: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)
    exports: dict = field(default_factory=dict)

    @property
    def statuses(self):
        return {k: v["status"] for k, v in self.tasks.items()}

    @property
    def passed(self):
        return all(s == "pass" for s in self.statuses.values())

    def as_dict(self):
        return _clean({
            "scenario": self.scenario.name,
            "config": self.scenario.to_dict(),
            "grid": self.grid,
            "status": "pass" if self.passed else "fail",
            "tasks": self.tasks,
        })

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "timings.json").write_text(json.dumps(_clean(self.timings), indent=2, sort_keys=True) + "\n")
        paths = emit_plot_data(self, out)
        for name, (header, rows) in self.exports.items():
            _write_csv(out / name, header, rows)
            paths.append(out / name)
        return paths


def _num(v):
    return format(float(v), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])


def emit_plot_data(report: RunReport, out_dir):
    """Write ``(x, y, value)`` node tables and the ``(theta, value)`` boundary table."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = DiskGrid(report.scenario.radial_nodes, report.scenario.angular_count)
    x, y = grid.points.real.ravel(), grid.points.imag.ravel()
    written = []
    for key, fname in (("dPi_norm", "dpi_norm.csv"), ("phi", "phi.csv"),
                       ("defect", "defect.csv"), ("green_potential", "green_potential.csv")):
        vals = report.arrays.get(key, np.zeros(grid.shape))
        vals = np.asarray(vals, dtype=float).ravel()
        _write_csv(out / fname, ["x", "y", "value"], zip(x, y, vals))
        written.append(out / fname)
    bvals = np.asarray(report.arrays.get("projection_norm", np.zeros(grid.angular_count)), dtype=float)
    _write_csv(out / "projection_boundary.csv", ["theta", "value"], zip(grid.angles, bvals))
    written.append(out / "projection_boundary.csv")
    return written


def _matrix_rows(M):
    return [(i, j, float(M[i, j].real), float(M[i, j].imag))
            for i in range(M.shape[0]) for j in range(M.shape[1])]


def _coef_rows(coefs):
    return [(n, i, j, float(C[i, j].real), float(C[i, j].imag))
            for n, C in coefs for i in range(C.shape[0]) for j in range(C.shape[1])]


class _Runner:
    def __init__(self, scenario: Scenario):
        self.s = scenario
        self.F = scenario.field
        self.grid = scenario.grid
        self.tol = scenario.tolerances
        self.pipelines = {}
        self.arrays = {}
        self.exports = {}
        self.timings = {}

    def witness_kind(self, F):
        if self.s.witness == "logdet" and not logdet_admissible(F, self.grid):
            return "trace", "log det witness impossible (F*F singular); trace witness used"
        return self.s.witness, None

    def pipeline(self, which="F"):
        if which in self.pipelines:
            return self.pipelines[which]
        F = self.F if which == "F" else self.F.transpose()
        kind, note = self.witness_kind(F)
        t = time.perf_counter()
        try:
            res = run_pipeline(F, self.grid, self.s.modes, self.s.symbol_modes, kind,
                               self.s.witness_C, dilation=self.s.dilation, tol=self.tol["trunc"])
            if note:
                res.notes.insert(0, note)
        except FieldError as exc:
            res = exc
        self.timings[f"pipeline_{which}"] = time.perf_counter() - t
        self.pipelines[which] = res
        return res

    # tasks ---------------------------------------------------------------
    def check(self):
        F, grid, alg = self.F, self.grid, self.tol["alg"]
        out = {}
        deltas = corona_delta(F, grid)
        out["deltas"] = deltas.as_dict()
        c1 = c1_refinement(F, [grid, grid.refined()])
        out["c1_refinement"] = c1
        notes = [c1["note"]] if c1["note"] else []
        ok = c1["passed"]
        if not deltas.rank_constant:
            out["notes"] = notes + ["numerical rank of F varies across the grid; scenario rejected"]
            return "fail", out
        try:
            P = range_projection(F, grid)
        except FieldError as exc:
            out["notes"] = notes + [str(exc)]
            return "fail", out
        vp = verify_projection(P, F)
        out["range_projection"] = vp.__dict__
        ok &= vp.passed(alg)
        db = dbar_formula(F, P)
        out["dbar_crosscheck"] = db.crosscheck
        ok &= not db.flagged
        pdp = pdp_identity_report(P)
        out["pdp_identities"] = pdp
        ok &= all(v <= PDP_TOL for k, v in pdp.items() if k != "laplacian_commutator")
        ok &= pdp["laplacian_commutator"] <= COMMUTATOR_TOL
        dual = complementary_duality_check(P)
        out["complementary_duality"] = dual
        ok &= max(dual["dPi_plus_dPic"], dual["Pic_dbarPic"]) <= PDP_TOL and dual["norm_spread"] <= alg
        if deltas.rank < F.cols:
            PK = kernel_projection(F, grid, range_field=P)
            vk = verify_projection(PK, F)
            out["kernel_projection"] = vk.__dict__
            out["kernel_pdp_identities"] = pdp_identity_report(PK)
            ok &= vk.passed(alg)
        kind, note = self.witness_kind(F)
        if note:
            notes.append(note)
        W = subharmonic_witness(F, P, kind, self.s.witness_C if kind == "trace" else None)
        out["witness"] = {
            "kind": W.kind, "C": W.C, "K": W.K, "min_defect": W.min_defect,
            "embedding_constant": embedding_constant(W.K),
            "main_estimate_constant": main_estimate_constant(W.K),
            "projection_norm_cap": projection_norm_cap(W.K),
        }
        if kind == "logdet":
            out["witness"]["logdet_equality_gap_exploratory"] = float(np.abs(W.defect).max())
        ok &= W.passes(alg)
        dnorm = P.dPi_norm()
        out["green_potential"] = witness_soundness(P, W)
        ok &= out["green_potential"]["holds"]
        nec = necessity_checks(F, P)
        fine = grid.refined()
        nec_fine = necessity_checks(F, range_projection(F, fine))
        drift = {}
        for key in ("sup_growth_dF", "sup_growth_dPi", "dPi_over_dF"):
            drift[key] = _rel(nec[key], nec_fine[key])
        for key in ("carleson_dF", "carleson_dPi"):
            drift[key] = _rel(nec[key], nec_fine[key])
        out["necessity"] = {"coarse": nec, "refined": nec_fine, "drift": drift}
        stable = all(d <= DRIFT_TOL for d in drift.values())
        if not stable:
            notes.append("necessity quantities drift by more than 10% under refinement")
        ok &= stable
        out["co_outer"] = co_outer_necessary_check(F, grid, seed=self.s.seed)
        out["notes"] = notes
        self.arrays["dPi_norm"] = dnorm
        self.arrays["phi"] = W.phi
        self.arrays["defect"] = W.defect
        self.arrays["green_potential"] = np.abs(green_potential_grid(dnorm**2, grid))
        return ("pass" if ok else "fail"), out

    def project(self):
        res = self.pipeline("F")
        if isinstance(res, FieldError):
            return "fail", {"notes": [str(res)]}
        out = res.summary()
        self._export_pipeline(res)
        if res.certificate.certified and res.passed:
            return "pass", out
        return ("not-certified" if not res.certificate.certified else "fail"), out

    def _export_pipeline(self, res: PipelineResult, prefix=""):
        self.arrays.setdefault("projection_norm", opnorm(res.certificate.boundary))
        d = res.discretization
        self.exports[f"{prefix}L_matrix.csv"] = (["p", "q", "re", "im"], _matrix_rows(d.L_matrix))
        self.exports[f"{prefix}gamma.csv"] = (["p", "q", "re", "im"], _matrix_rows(d.Gamma))
        if res.fit is not None:
            coefs = sorted(res.fit.coefficients.items())
            self.exports[f"{prefix}symbol_coefficients.csv"] = (["n", "row", "col", "re", "im"], _coef_rows(coefs))

    def invert(self):
        F, grid = self.F, self.grid
        deltas = corona_delta(F, grid)
        if not deltas.kernel_trivial:
            return "fail", {"notes": ["F(z) has a nontrivial kernel; no left inverse exists"]}
        res = self.pipeline("F")
        if isinstance(res, FieldError) or not res.certificate.certified:
            why = str(res) if isinstance(res, FieldError) else res.certificate.reason
            return "not-certified", {"notes": [why]}
        Fr = res.field
        try:
            rep = nikolski_left_inverse(Fr, res.certificate.extension, grid, tol=self.tol["trunc"])
        except FieldError as exc:
            return "fail", {"notes": [str(exc)]}
        dag = pointwise_left_inverse(Fr, grid)
        co = co_outer_necessary_check(Fr, grid, seed=self.s.seed)
        out = {
            "dilation": res.dilation,
            "nikolski": rep.as_dict(),
            "pointwise_norm": float(opnorm(dag.boundary).max()),
            "pointwise_bound": 1.0 / corona_delta(Fr, grid).delta_tilde,
            "co_outer_trivial_kernel": co["trivial_kernel"],
        }
        if rep.coefficients is not None:
            self.exports["left_inverse_coefficients.csv"] = (
                ["n", "row", "col", "re", "im"], _coef_rows(enumerate(rep.coefficients.coefficients)))
        ok = rep.passed and co["trivial_kernel"]
        return ("pass" if ok else "fail"), out

    def geninvert(self):
        F, grid = self.F, self.grid
        deltas = corona_delta(F, grid)
        res = self.pipeline("F")
        if isinstance(res, FieldError) or not res.certificate.certified:
            why = str(res) if isinstance(res, FieldError) else res.certificate.reason
            return "not-certified", {"notes": [f"range projection: {why}"]}
        Fr = res.field
        P_R = res.certificate.extension
        k = F.cols
        if deltas.rank < k:
            rt = self.pipeline("FT")
            if isinstance(rt, FieldError) or not rt.certificate.certified:
                why = str(rt) if isinstance(rt, FieldError) else rt.certificate.reason
                return "not-certified", {"notes": [f"kernel projection: {why}"]}
            P_K = AnalyticMatrixField.constant(np.eye(k)) - rt.certificate.extension.transpose()
        else:
            P_K = AnalyticMatrixField.constant(np.zeros((k, k)))
        try:
            rep = generalized_inverse_from_projections(Fr, P_R, P_K, grid, tol=self.tol["trunc"])
            G = rep.coefficients
            pair = projections_from_generalized_inverse(Fr, G, grid)
            again = generalized_inverse_from_projections(Fr, pair.P_R, pair.P_K, grid, tol=self.tol["trunc"])
        except FieldError as exc:
            return "fail", {"notes": [str(exc)]}
        Fi = Fr.eval(grid.boundary_nodes)
        G1, G2 = rep.G.boundary, again.G.boundary
        round_trip = max(float(opnorm(Fi @ G1 - Fi @ G2).max()), float(opnorm(G1 @ Fi - G2 @ Fi).max()))
        out = {
            "generalized_inverse": rep.as_dict(),
            "round_trip": {"projection_residuals": pair.residuals, "ranks": list(pair.ranks),
                           "FG_and_GF_gap": round_trip},
        }
        if G is not None:
            self.exports["generalized_inverse_coefficients.csv"] = (
                ["n", "row", "col", "re", "im"], _coef_rows(enumerate(G.coefficients)))
        ok = rep.passed and again.passed and round_trip <= 1e-8
        return ("pass" if ok else "fail"), out


def _rel(a, b):
    a, b = float(a), float(b)
    top = max(abs(a), abs(b))
    return 0.0 if top <= 1e-12 else abs(a - b) / top


def run_scenario(scenario, tasks=None, out_dir=None):
    """Run the requested tasks (dependency order) and optionally write outputs."""
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    wanted = list(scenario.tasks if tasks is None else tasks)
    bad = [t for t in wanted if t not in TASKS]
    if bad:
        raise ScenarioError(f"unknown tasks {bad}")
    runner = _Runner(scenario)
    results = {}
    for name in TASKS:
        if name not in wanted:
            continue
        t = time.perf_counter()
        status, body = getattr(runner, name)()
        runner.timings[name] = time.perf_counter() - t
        results[name] = {"status": status, **body}
    report = RunReport(scenario, results, scenario.grid.metadata(), runner.timings,
                       runner.arrays, runner.exports)
    if out_dir is not None:
        report.write(out_dir)
    return report


def _flatten(d, prefix=""):
    out = {}
    if isinstance(d, dict):
        for k, v in d.items():
            out.update(_flatten(v, f"{prefix}{k}."))
    elif isinstance(d, list) and d and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in d):
        for i, v in enumerate(d):
            out[f"{prefix}{i}"] = float(v)
    elif isinstance(d, (int, float)) and not isinstance(d, bool):
        out[prefix[:-1]] = float(d)
    return out


# refinement diagnostics already computed inside one run
_META_KEYS = (".drift.", ".relative_drop.")


def compare_reports(a, b, threshold=DRIFT_TOL, floor=1e-6):
    """Relative change of every numeric quantity between two runs.

    Quantities below ``floor`` in both reports count as stable (residual
    noise); in-run refinement diagnostics (drifts, drops) are skipped.
    Returns ``{"changes": {...}, "unstable": [...]}``; identical reports
    give an empty change table.
    """
    a = a.as_dict() if isinstance(a, RunReport) else a
    b = b.as_dict() if isinstance(b, RunReport) else b
    if a.get("scenario") != b.get("scenario"):
        raise ScenarioError("reports come from different scenarios")
    fa, fb = _flatten(a.get("tasks", {})), _flatten(b.get("tasks", {}))
    changes, unstable = {}, []
    for key in sorted(set(fa) & set(fb)):
        if any(tag in key for tag in _META_KEYS):
            continue
        x, y = fa[key], fb[key]
        if x == y:
            continue
        if abs(x) <= floor and abs(y) <= floor:
            rel = 0.0
        else:
            rel = abs(x - y) / max(abs(x), abs(y))
        changes[key] = rel
        if rel > threshold:
            unstable.append(key)
    return {"changes": changes, "unstable": unstable}
