"""Experiment catalog, configuration and orchestration.

A run is described by a flat :class:`ExperimentConfig`; catalog entries
supply defaults and the expected behaviour their verdicts are judged
against.  :func:`run_experiment` writes one directory per run containing
``report.json`` (deterministic for a fixed config), ``timing.json``, CSV
slices, ``.dat`` plot files and the evolved field.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, currents
from .chardata import build_transversal_jet, perturb_trace
from .errors import (BlowUpError, ConfigError, DataError, ExtensionError, LabError,
                     NonConvergenceError, StepError)
from .geometry import DomainSpec, Grid, WeightVector, build_grid
from .models import EquationSpec, check_exponents, default_weights, nonlinearity_split
from .profiles import Profile, ode_residual, solve_self_similar_profile
from .solver import FieldGrid, convergence_study, evolve, evolve_boundary, run_manufactured

log = logging.getLogger(__name__)

OUTPUT_ENV = "CAUCHYLAB_OUT"
EXIT_OK, EXIT_VERDICT, EXIT_VALIDATION, EXIT_BLOWUP, EXIT_NONCONVERGENCE = 0, 1, 2, 3, 4


class ValidationError(ConfigError):
    """Configuration rejected before any computation."""


# ---------------------------------------------------------------------------
# catalog


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    kind: str
    description: str
    expectation: str
    defaults: dict


CATALOG: dict[str, CatalogEntry] = {e.id: e for e in [
    CatalogEntry(
        "nw-d3-p5-typeII", "power_tail",
        "Quintic focusing wave in d=3 with a singular power trace r^a_zero on the backward cone",
        "horizon rate: psi - psi|CH ~ |u|^(a_zero+1) for trace r^a_zero, energy-critical quintic",
        {"family": "NW", "d": 3, "p": 5, "a_zero": 0.25, "amplitude": 1.0, "v_max": 0.1,
         "diagnostics": ["sharp", "trace", "extension", "norms", "currents"]}),
    CatalogEntry(
        "wm-d3-typeI-corotational", "typeI",
        "Corotational wave map d=3 perturbed around the self-similar shrinker",
        "self-similar profile regular through the cone and smooth at the axis; perturbation extends past CH",
        {"family": "WMS", "d": 3, "K": 1, "background": "typeI", "a_zero": 0.5, "amplitude": 0.1,
         "v_max": 0.2, "diagnostics": ["profile", "trace", "extension", "norms"]}),
    CatalogEntry(
        "wm-d2-typeII", "typeII",
        "Corotational wave map d=2 with a Type II tail of exponent nu on the backward cone",
        "Type II tail: deviation of the cone trace from pi is O(r^(nu-1))",
        {"family": "WMS", "d": 2, "K": 1, "background": "constant", "nu": 2.0, "v_max": 0.2,
         "diagnostics": ["tail", "trace", "extension"]}),
    CatalogEntry(
        "calib-freewave-d3", "freewave",
        "Radial free wave (F(u)+G(v))/r in d=3 with polynomial F, G",
        "closed-form free wave reproduced to round-off; horizon trace F(0)+G(v)",
        {"family": "LINEAR", "d": 3, "v_max": 0.5, "u_eps": 1e-5, "v_min": 1e-6,
         "diagnostics": ["exact", "trace", "extension", "currents"]}),
    CatalogEntry(
        "manufactured", "manufactured",
        "Manufactured forcing for every family; second-order convergence of the marching scheme",
        "diamond scheme is second order",
        {"family": "NW", "d": 3, "p": 5, "Nu": 33, "Nv": 33, "diagnostics": ["order"]}),
]}


def list_experiments() -> list[dict]:
    return [{"id": e.id, "kind": e.kind, "description": e.description, "expectation": e.expectation}
            for e in CATALOG.values()]


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    experiment: str
    family: str = "NW"
    d: int = 3
    p: int | None = None
    K: int | None = None
    background: str = "zero"
    a_zero: float | None = None
    a_minus: float | None = None
    a_plus: float | None = None
    amplitude: float = 1.0
    subleading: list = field(default_factory=list)
    nu: float | None = None
    u_left: float = -1.0
    v_max: float = 0.1
    v_min: float = 1e-8
    u_eps: float = 1e-6
    Nu: int = 257
    Nv: int = 257
    stretching: str = "geometric"
    peel_order: int | None = None
    jet_order: int = 2
    diagnostics: list = field(default_factory=list)
    probe_v: float | None = None
    delta: float = 0.25
    extension_seed: str = "zero"
    cbar: float = 0.0
    output_dir: str | None = None
    seed: int = 0

    # -- construction ------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        if "experiment" not in raw:
            raise ValidationError("config needs an 'experiment' id")
        eid = raw["experiment"]
        if eid not in CATALOG:
            raise ValidationError(f"unknown experiment {eid!r}")
        merged = {**CATALOG[eid].defaults, **raw}
        _schema_check(merged)
        cfg = cls(**merged)
        cfg.subleading = [list(map(float, t)) for t in cfg.subleading]
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def override(self, **kw) -> "ExperimentConfig":
        return ExperimentConfig.from_dict({**self.to_dict(), **{k: v for k, v in kw.items() if v is not None}})

    # -- derived objects ---------------------------------------------------
    @property
    def kind(self) -> str:
        return CATALOG[self.experiment].kind

    def equation(self) -> EquationSpec:
        return EquationSpec(self.family, self.d, p=self.p, K=self.K, background=self.background)

    def domain(self) -> DomainSpec:
        return DomainSpec(d=self.d, u_left=self.u_left, v_max=self.v_max, v_min=self.v_min,
                          Nu=self.Nu, Nv=self.Nv, stretching=self.stretching, u_eps=self.u_eps)

    def effective_a_zero(self) -> float | None:
        if self.kind == "typeII":
            return self.nu - 1.0
        return self.a_zero

    def weights(self) -> WeightVector | None:
        spec = self.equation()
        a0 = self.effective_a_zero()
        if a0 is None:
            return None
        base = default_weights(spec, self.background)
        am = self.a_minus if self.a_minus is not None else max(base.a_minus, a0 + spec.k + 1.0)
        ap = self.a_plus if self.a_plus is not None else base.a_plus
        return WeightVector(a_minus=am, a_zero=a0, a_plus=ap)

    def validate(self):
        """Build the equation and domain and gate the weights; raises ValidationError."""
        try:
            spec = self.equation()
            if self.kind != "manufactured":
                self.domain()
        except ConfigError as exc:
            raise ValidationError(str(exc)) from exc
        if self.kind == "typeII" and (self.nu is None or self.nu <= 1):
            raise ValidationError("Type II tails need nu > 1")
        w = self.weights()
        if w is not None:
            bg = {"typeI": "typeI", "constant": "constant"}.get(self.background, self.background)
            verdict = check_exponents(spec, w, bg)
            if not verdict:
                raise ValidationError(f"inadmissible weights {w.as_dict()}: {verdict.reason}")
            return verdict
        return None


def schema() -> dict:
    return json.loads(resources.files("cauchylab").joinpath("config_schema.json").read_text())


def _schema_check(cfg: dict):
    import jsonschema

    try:
        jsonschema.validate(cfg, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "config"
        raise ValidationError(f"{where}: {exc.message}") from exc


# ---------------------------------------------------------------------------
# run reports


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    expected: str
    source: str

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass
class RunReport:
    config: dict
    status: str = "ok"
    exit_code: int = EXIT_OK
    solve: dict | None = None
    norms: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)
    currents: dict | None = None
    checks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    error: str | None = None
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(c.passed for c in self.checks)

    def as_dict(self):
        out = dataclasses.asdict(self)
        out.pop("timing")
        out["checks"] = [c.as_dict() for c in self.checks]
        out["passed"] = self.passed
        return out


def _clean(o):
    """Recursively turn numpy values into JSON-friendly Python values."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (np.floating, float)):
        x = float(o)
        return x if math.isfinite(x) else str(x)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if hasattr(o, "as_dict"):
        return _clean(o.as_dict())
    return o


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def run_dir_for(cfg: ExperimentConfig) -> Path:
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return output_root() / cfg.experiment


# ---------------------------------------------------------------------------
# building blocks per experiment kind


def _free_wave():
    F = lambda u: u**3 + 0.5 * u**2 - u
    G = lambda v: 0.3 * v**2 + v**3
    return F, G


def _build_field(cfg: ExperimentConfig, rep: RunReport):
    spec = cfg.equation()
    dom = cfg.domain()
    if cfg.kind == "freewave":
        F, G = _free_wave()
        F2, G2 = (lambda u: cfg.amplitude * F(u)), (lambda v: cfg.amplitude * G(v))
        split = nonlinearity_split(spec)
        grid = build_grid(dom)
        fg = evolve_boundary(grid, split, lambda v: F2(grid.u[0]) + G2(v), lambda u: F2(u) + G2(grid.v[0]),
                             meta={"case_id": cfg.experiment})
        exact = F2(grid.U) + G2(grid.V)
        rep.extra["exact_error"] = float(np.max(np.abs(fg.psi - exact)))
        rep.extra["exact_trace"] = lambda v: F2(0.0) + G2(v)
        return fg, split, None
    if cfg.kind == "power_tail":
        base = Profile.zero(cfg.d)
        data = perturb_trace(base, "power_tail", a=cfg.a_zero, amplitude=cfg.amplitude, d=cfg.d,
                             u_left=cfg.u_left, m=cfg.jet_order,
                             subleading=[tuple(t) for t in cfg.subleading] or None,
                             case_id=cfg.experiment)
    elif cfg.kind == "typeI":
        base = solve_self_similar_profile(d=cfg.d, K=cfg.K or 1)
        rep.extra["profile"] = {"ode_residual": ode_residual(base),
                                "axis_value": float(base.Phi(np.array([0.0]))[0]),
                                "shooting_parameter": base.meta.get("shooting_parameter")}
        split0 = nonlinearity_split(spec, base)
        data = perturb_trace(base, "power_tail", a=cfg.a_zero, amplitude=cfg.amplitude, d=cfg.d,
                             u_left=cfg.u_left, m=cfg.jet_order, split=split0, case_id=cfg.experiment)
    elif cfg.kind == "typeII":
        base = Profile.type_ii_tail(cfg.nu, d=cfg.d)
        data = perturb_trace(base, "profile", d=cfg.d, u_left=cfg.u_left, m=cfg.jet_order,
                             amplitude=cfg.amplitude, case_id=cfg.experiment)
    else:
        raise ConfigError(f"experiment kind {cfg.kind!r} has no field")
    split = nonlinearity_split(spec, data.background)
    data = build_transversal_jet(data, split, cfg.jet_order)
    fg = evolve(data, split, dom, peel_order=cfg.peel_order)
    return fg, split, base


def _tol_check(name, value, target, tol, source):
    ok = value is not None and math.isfinite(value) and abs(value - target) <= tol
    return Check(name, bool(ok), value, f"{target} +- {tol}", source)


def _diagnostics(cfg: ExperimentConfig, fg: FieldGrid, split, base, rep: RunReport, outdir: Path):
    entry = CATALOG[cfg.experiment]
    src = f"{entry.id}: {entry.expectation}"
    diags = set(cfg.diagnostics)
    g = fg.grid
    rep.solve = _clean(fg.report.as_dict()) if fg.report else None
    if rep.solve:
        rep.timing["solve_wall_time"] = rep.solve.pop("wall_time", None)
    trace = None
    if "exact" in diags and "exact_error" in rep.extra:
        rep.checks.append(Check("closed_form_error", rep.extra["exact_error"] < 1e-8,
                                rep.extra["exact_error"], "< 1e-8", src))
    if diags & {"trace", "sharp", "extension"}:
        trace = analysis.ch_trace(fg)
        ok = trace.valid if trace.valid is not None else np.ones_like(trace.v, bool)
        upper = ok & (trace.v >= 0.5 * g.v[-1])
        dv = np.abs(trace.derivative(trace.v[upper]))
        rep.rates["ch_trace"] = {"max_error_estimate": float(np.max(trace.error[ok])),
                                 "max_value": float(np.max(np.abs(trace.values[upper]))),
                                 "max_dv": float(np.max(dv)), "method": trace.method}
        rep.checks.append(Check("ch_trace_bounded",
                                bool(np.all(np.isfinite(trace.values[upper])) and np.all(np.isfinite(dv))),
                                rep.rates["ch_trace"]["max_dv"], "finite and C1-bounded on [v1/2, v1]", src))
        exact_tr = rep.extra.pop("exact_trace", None)
        if exact_tr is not None:
            err = float(np.max(np.abs(trace.values[ok] - exact_tr(trace.v[ok]))))
            rep.checks.append(Check("ch_trace_exact", err < 1e-8, err, "< 1e-8", src))
        analysis.write_dat(outdir / "ch_trace.dat",
                           {"v": trace.v[ok], "psi_CH": trace.values[ok], "error": trace.error[ok]})
    if "sharp" in diags:
        probe = analysis.sharp_regularity_probe(fg, cfg.a_zero, v=cfg.probe_v, delta=cfg.delta, trace=trace)
        rep.rates["sharp_probe"] = _clean(probe.as_dict())
        if probe.raw is not None:
            rep.checks.append(_tol_check("sharp_raw_exponent", probe.raw.exponent, cfg.a_zero + 1, 0.1, src))
        rep.checks.append(Check("sharp_verdict", probe.verdict == "sharp", probe.verdict, "sharp", src))
        au, rp, D = analysis.horizon_deviation(fg, probe.v if math.isfinite(probe.v) else 0.5 * g.v[-1], trace)
        sel = D != 0
        analysis.ratefit_csv(au[sel], D[sel], outdir / "ch_deviation.csv")
        analysis.write_dat(outdir / "ch_deviation.dat", {"abs_u": au, "rho_plus": rp, "deviation": D})
    if "tail" in diags and base is not None:
        u = -np.geomspace(1e-4, 1.0, 400) * abs(cfg.u_left)
        dev = base.value(u, np.zeros_like(u)) - np.pi
        fit = analysis.fit_rate(np.abs(u), dev, "C")
        rep.rates["tail"] = fit.as_dict()
        rep.checks.append(_tol_check("tail_exponent", fit.exponent, cfg.nu - 1.0, 0.05, src))
        analysis.write_dat(outdir / "tail.dat", {"r": np.abs(u), "deviation": dev})
    if "profile" in diags and "profile" in rep.extra:
        pr = rep.extra["profile"]
        rep.checks.append(Check("profile_ode_residual", pr["ode_residual"] < 1e-6, pr["ode_residual"], "< 1e-6", src))
        rep.checks.append(Check("profile_axis_value", pr["axis_value"] == 0.0, pr["axis_value"], "exactly 0", src))
    if "extension" in diags:
        try:
            ext = analysis.extend_across_ch(fg, cfg.extension_seed, split=split)
            rel = float(np.max(np.abs(ext.residuals) / np.maximum(ext.scales, 1e-300)))
            rep.extra["extension"] = {**_clean(ext.as_dict()), "relative": rel}
            rep.checks.append(Check("weak_extension", rel < 1e-3, rel, "relative weak residual < 1e-3", src))
        except ExtensionError as exc:
            rep.extra["extension"] = {"error": str(exc)}
            rep.checks.append(Check("weak_extension", False, str(exc), "extension exists", src))
    if "norms" in diags:
        w = cfg.weights()
        if w is not None:
            # measured against the data weight with a small margin
            wm = WeightVector(0.0, w.a_zero - 0.05, min(w.a_plus, 0.0))
            rep.norms = [_clean(analysis.weighted_norm(fg, k, wm).as_dict()) for k in (0, 1)]
            finite = all(math.isfinite(n["value"]) if isinstance(n["value"], float) else False for n in rep.norms)
            rep.checks.append(Check("weighted_norms_finite", finite, [n["value"] for n in rep.norms],
                                    "finite", src))
    if "currents" in diags:
        a0 = cfg.a_zero if cfg.a_zero is not None else 0.0
        mults = currents.default_multipliers(a_zero=a0, cbar=cfg.cbar)
        rep.currents = _clean(currents.audit(fg, mults))
    fg.slice_csv(outdir / "slice_v_max.csv", "v", g.v[-1])
    fg.slice_csv(outdir / "slice_u_last.csv", "u", g.u[-1])
    analysis.write_dat(outdir / "last_u_line.dat", {"v": g.v, "psi": fg.psi[-1], "phi": fg.phi[-1]})


def _manufactured(cfg: ExperimentConfig, rep: RunReport, outdir: Path):
    entry = CATALOG[cfg.experiment]
    src = f"{entry.id}: {entry.expectation}"
    spec = cfg.equation()
    ns = [cfg.Nu, 2 * cfg.Nu - 1, 4 * cfg.Nu - 3]
    errs = [run_manufactured(spec, n)[1] for n in ns]
    orders = [math.log(errs[i] / errs[i + 1]) / math.log((ns[i + 1] - 1) / (ns[i] - 1)) for i in range(2)]
    rep.rates["manufactured"] = {"resolutions": ns, "errors": errs, "orders": orders}
    rep.checks.append(_tol_check("manufactured_order", orders[-1], 2.0, 0.1, src))
    analysis.write_dat(outdir / "manufactured.dat", {"n": ns, "error": errs})


# ---------------------------------------------------------------------------
# orchestration


def run_experiment(cfg: ExperimentConfig, outdir: Path | None = None, save_field: bool = True) -> RunReport:
    """Validate, run and write reports.  Never raises for runtime failures.

    Validation failures do raise :class:`ValidationError` (exit status 2 in
    the CLI); blow-up and nonconvergence are recorded in the report with
    the matching exit code.
    """
    cfg.validate()
    outdir = Path(outdir) if outdir is not None else run_dir_for(cfg)
    outdir.mkdir(parents=True, exist_ok=True)
    rep = RunReport(config=cfg.to_dict())
    t0 = time.perf_counter()
    np.random.seed(cfg.seed)
    try:
        if cfg.kind == "manufactured":
            _manufactured(cfg, rep, outdir)
        else:
            fg, split, base = _build_field(cfg, rep)
            if save_field:
                fg.save(outdir / "field")
            _diagnostics(cfg, fg, split, base, rep, outdir)
    except (BlowUpError, StepError) as exc:
        rep.status, rep.exit_code, rep.error = "blow-up", EXIT_BLOWUP, str(exc)
        loc = getattr(exc, "location", None) or getattr(exc, "cell", None)
        rep.extra["blowup_location"] = _clean(loc)
    except NonConvergenceError as exc:
        rep.status, rep.exit_code, rep.error = "nonconvergence", EXIT_NONCONVERGENCE, str(exc)
    except DataError as exc:
        rep.status, rep.exit_code, rep.error = "diagnostic-failure", EXIT_VERDICT, str(exc)
    rep.extra = {k: v for k, v in rep.extra.items() if not callable(v)}
    if rep.status == "ok" and not rep.passed:
        rep.exit_code = EXIT_VERDICT
    rep.timing["total_wall_time"] = time.perf_counter() - t0
    rep.timing["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    (outdir / "report.json").write_text(json.dumps(_clean(rep.as_dict()), indent=2, sort_keys=True))
    (outdir / "timing.json").write_text(json.dumps(_clean(rep.timing), indent=2, sort_keys=True))
    (outdir / "config.json").write_text(cfg.dumps())
    return rep


def _sweep_one(args):
    idx, raw, outdir = args
    row = dict(raw)
    try:
        cfg = ExperimentConfig.from_dict(raw)
        rep = run_experiment(cfg, outdir, save_field=False)
        row.update(status=rep.status, exit_code=rep.exit_code, passed=rep.passed)
        for c in rep.checks:
            row[f"check:{c.name}"] = c.passed
            if isinstance(c.value, (int, float)) and not isinstance(c.value, bool):
                row[f"value:{c.name}"] = c.value
        probe = rep.rates.get("sharp_probe")
        if probe and probe.get("raw"):
            row["exponent"] = probe["raw"]["exponent"]
        if "tail" in rep.rates:
            row["exponent"] = rep.rates["tail"]["exponent"]
        # the free-wave field is exact to round-off; the horizon trace carries the
        # resolution-dependent error
        for c in rep.checks:
            if c.name == "ch_trace_exact":
                row["error"] = c.value
        if "exact_error" in rep.extra:
            row["field_error"] = rep.extra["exact_error"]
    except ValidationError as exc:
        row.update(status="invalid", exit_code=EXIT_VALIDATION, passed=False, error=str(exc))
    except LabError as exc:
        row.update(status="error", exit_code=EXIT_VERDICT, passed=False, error=str(exc))
    return idx, row


def expand_grid(grid: dict) -> list[dict]:
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], list) or not grid[k]:
            raise ValidationError(f"sweep parameter {k!r} needs a nonempty list")
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


def sweep(template: dict, grid: dict, outdir: Path, workers: int | None = None,
          csv_path: Path | None = None) -> list[dict]:
    """Run the template over the cartesian grid; rows come back in grid order."""
    points = expand_grid(grid)
    outdir = Path(outdir)
    jobs = []
    for i, pt in enumerate(points):
        raw = {**template, **pt}
        raw.pop("output_dir", None)
        jobs.append((i, raw, outdir / f"run_{i:04d}"))
    rows: list = [None] * len(jobs)
    if workers == 1 or len(jobs) == 1:
        results = map(_sweep_one, jobs)
    else:
        ex = ProcessPoolExecutor(max_workers=workers)
        results = ex.map(_sweep_one, jobs)
    for i, row in results:
        rows[i] = row
    if workers != 1 and len(jobs) > 1:
        ex.shutdown()
    cols = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    csv_path = csv_path or outdir / "sweep.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in row.items()})
    return rows


def existence_threshold(template: dict, v1_values, amplitudes, outdir: Path, workers: int | None = None,
                        diagnostics=("trace",)) -> dict:
    """Largest ``v1`` such that every run with ``v_max <= v1`` completes and passes.

    Returned per amplitude, for the ascending list ``v1_values``; ``None``
    when even the smallest ``v1`` fails.  By default only the horizon-trace
    checks gate a run, so the threshold reflects existence rather than the
    resolution needed by the finer diagnostics.
    """
    v1_values = sorted(v1_values)
    template = dict(template)
    if diagnostics is not None:
        template["diagnostics"] = list(diagnostics)
    rows = sweep(template, {"amplitude": list(amplitudes), "v_max": v1_values}, outdir, workers)
    out = {}
    for a in amplitudes:
        ok = [r["passed"] for r in rows if r["amplitude"] == a]
        thr = None
        for v1, good in zip(v1_values, ok):
            if not good:
                break
            thr = v1
        out[a] = thr
    return {"thresholds": out, "rows": rows}
