"""Command line entry point: ``cauchylab {list,run,sweep,audit-currents,report}``.

Exit codes: 0 all checks pass, 1 some check failed, 2 invalid
configuration, 3 blow-up, 4 nonconvergence.  Output goes below
``$CAUCHYLAB_OUT`` (default ``./runs``) unless ``--out`` is given.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import currents, experiments
from .errors import LabError
from .experiments import (EXIT_OK, EXIT_VALIDATION, EXIT_VERDICT, ExperimentConfig, ValidationError,
                          output_root)
from .solver import FieldGrid

log = logging.getLogger("cauchylab")

OVERRIDES = {
    "a_zero": float, "amplitude": float, "nu": float, "v_max": float, "v_min": float,
    "u_eps": float, "Nu": int, "Nv": int, "p": int, "K": int, "d": int, "family": str,
    "peel_order": int, "jet_order": int, "probe_v": float, "delta": float, "extension_seed": str,
    "a_minus": float, "a_plus": float, "cbar": float, "seed": int,
}


def _load_config(arg: str) -> dict:
    """A config file path, or a bare catalog id."""
    path = Path(arg)
    if path.exists():
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{arg}: {exc}") from exc
    if arg in experiments.CATALOG:
        return {"experiment": arg}
    raise ValidationError(f"{arg!r} is neither a config file nor a catalog id")


def cmd_list(args) -> int:
    rows = experiments.list_experiments()
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    width = max(len(r["id"]) for r in rows)
    for r in rows:
        print(f"{r['id']:<{width}}  {r['description']}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        raw = _load_config(args.config)
        for key in OVERRIDES:
            val = getattr(args, key, None)
            if val is not None:
                raw[key] = val
        if args.out:
            raw["output_dir"] = args.out
        cfg = ExperimentConfig.from_dict(raw)
        rep = experiments.run_experiment(cfg)
    except ValidationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    outdir = experiments.run_dir_for(cfg)
    for c in rep.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.value!r} (expected {c.expected})")
    if rep.error:
        print(f"{rep.status}: {rep.error}", file=sys.stderr)
    print(f"report: {outdir / 'report.json'}")
    return rep.exit_code


def cmd_sweep(args) -> int:
    try:
        template = _load_config(args.template)
        grid = json.loads(Path(args.grid).read_text()) if Path(args.grid).exists() else json.loads(args.grid)
        ExperimentConfig.from_dict(template)
    except (ValidationError, json.JSONDecodeError) as exc:
        print(f"invalid sweep: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out) if args.out else output_root() / f"sweep-{template['experiment']}"
    try:
        rows = experiments.sweep(template, grid, out, workers=args.workers)
    except ValidationError as exc:
        print(f"invalid sweep: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    ok = sum(bool(r.get("passed")) for r in rows)
    print(f"{ok}/{len(rows)} runs passed; table: {out / 'sweep.csv'}")
    return EXIT_OK if ok == len(rows) else EXIT_VERDICT


def cmd_audit(args) -> int:
    try:
        fg = FieldGrid.load(args.field)
    except (OSError, KeyError, ValueError) as exc:
        print(f"cannot read field: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    a0 = args.a_zero if args.a_zero is not None else float(fg.meta.get("a_zero") or 0.0)
    try:
        res = currents.audit(fg, currents.default_multipliers(a_zero=a0, cbar=args.cbar))
    except LabError as exc:
        print(f"audit failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out) if args.out else Path(args.field).with_name("currents_audit.json")
    out.write_text(json.dumps(experiments._clean(res), indent=2, sort_keys=True))
    for name, entry in res.items():
        coer = entry.get("coercivity", {})
        const = coer.get("constant", "-") if isinstance(coer, dict) else "-"
        print(f"{name:8s} max residual {entry['divergence_residual']['max']:.3e}  "
              f"flux mismatch {entry['flux']['relative']:.3e}  C {const}")
    print(f"audit: {out}")
    return EXIT_OK


def _read_dat(path: Path):
    with path.open() as fh:
        names = fh.readline().lstrip("#").split()
    data = np.loadtxt(path, ndmin=2)
    return {n: data[:, i] for i, n in enumerate(names)}


def cmd_report(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    run = Path(args.run_dir)
    rep_path = run / "report.json"
    if not rep_path.exists():
        print(f"no report.json in {run}", file=sys.stderr)
        return EXIT_VALIDATION
    rep = json.loads(rep_path.read_text())
    print(f"{rep['config']['experiment']}: status {rep['status']}, passed {rep['passed']}")
    for c in rep["checks"]:
        print(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}: {c['value']}")
    made = []
    dev = run / "ch_deviation.dat"
    if dev.exists():
        d = _read_dat(dev)
        m = d["deviation"] != 0
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(d["abs_u"][m], np.abs(d["deviation"][m]), ".", ms=3, label="|psi - psi_CH|")
        probe = rep.get("rates", {}).get("sharp_probe", {})
        if probe.get("raw"):
            x = d["abs_u"][m]
            ax.loglog(x, np.exp(probe["raw"]["intercept"]) * x ** probe["raw"]["exponent"], "-",
                      label=f"slope {probe['raw']['exponent']:.3f}")
        ax.set_xlabel("|u|")
        ax.legend()
        fig.tight_layout()
        fig.savefig(run / "ch_deviation.png", dpi=120)
        plt.close(fig)
        made.append("ch_deviation.png")
    for name, xk, yk in (("ch_trace", "v", "psi_CH"), ("tail", "r", "deviation"),
                         ("last_u_line", "v", "psi"), ("manufactured", "n", "error")):
        p = run / f"{name}.dat"
        if not p.exists():
            continue
        d = _read_dat(p)
        fig, ax = plt.subplots(figsize=(5, 4))
        if name in ("tail", "manufactured"):
            ax.loglog(d[xk], np.abs(d[yk]), "o-" if name == "manufactured" else "-")
        else:
            ax.plot(d[xk], d[yk])
        ax.set_xlabel(xk)
        ax.set_ylabel(yk)
        fig.tight_layout()
        fig.savefig(run / f"{name}.png", dpi=120)
        plt.close(fig)
        made.append(f"{name}.png")
    print("figures: " + (", ".join(made) if made else "none"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cauchylab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("list", help="show the experiment catalog")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("config", help="JSON config file or catalog id")
    p.add_argument("--out", help="run directory (default $CAUCHYLAB_OUT/<id>)")
    for key, typ in OVERRIDES.items():
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a template over a parameter grid")
    p.add_argument("template", help="JSON config file or catalog id")
    p.add_argument("grid", help='JSON file or inline JSON, e.g. {"Nu": [65, 129]}')
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("audit-currents", help="divergence, coercivity and flux audit of a saved field")
    p.add_argument("field", help="field.npz written by run")
    p.add_argument("--a-zero", dest="a_zero", type=float, default=None)
    p.add_argument("--cbar", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("report", help="summarize a run directory and render figures")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return int(args.func(args))


if __name__ == "__main__":
    sys.exit(main())
