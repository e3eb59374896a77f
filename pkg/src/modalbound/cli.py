"""Command-line entry point: ``modalbound <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from ._rng import stream
from .bounds import (BoundConstants, LinearClass, bound_check, rademacher_linear_exact,
                     rademacher_mc_oracle, theorem1_components, theorem2_components)
from .composite import FusionOp, LinearComposite, ModelSpec, load_model, save_model
from .exceptions import ModalboundError
from .latent_quality import EtaEstimate, eta_closed_form, eta_empirical, gamma
from .modal_data import ModalitySubset, load_dataset, save_dataset
from .synthgen import (LinearGenConfig, OverlapConfig, generate_linear, generate_overlap,
                       random_orthonormal, random_spd)
from .training import TrainConfig, erm_train, two_stage_train

log = logging.getLogger("modalbound")

EXIT_OK, EXIT_INVALID, EXIT_ASSERT = 0, 1, 2


class AssertionFailed(Exception):
    pass


def _dump(obj, out: str | None, name: str):
    text = json.dumps(obj, indent=1, default=harness._json_default)
    print(text)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / name).write_text(text + "\n")


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModalboundError(f"cannot read JSON from {path}: {exc}") from exc


def _dims(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(","))


# subcommands -----------------------------------------------------------------

def cmd_generate(args):
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    if args.family == "overlap":
        ds = generate_overlap(OverlapConfig(args.w, args.n, args.dim, 4, args.seed))
        truth = None
    else:
        dims = _dims(args.dims)
        d = sum(dims)
        A = random_orthonormal(d, d, args.seed)
        beta = stream(args.seed, "instance").standard_normal(d)
        Sigma = random_spd(d, args.seed) if args.random_sigma else None
        cfg = LinearGenConfig(dims, A, beta, args.noise_var, args.n, args.seed, Sigma)
        ds = generate_linear(cfg)
        truth = {"dims": list(dims), "A_star": A.tolist(), "beta_star": beta.tolist(),
                 "Sigma": cfg.covariance.tolist(), "noise_var": args.noise_var}
    save_dataset(ds, out / "data.csv")
    if truth is not None:
        (out / "truth.json").write_text(json.dumps(truth))
    print(json.dumps({"data": str(out / "data.csv"), "m": len(ds), "dims": list(ds.schema.dims),
                      "digest": ds.metadata.get("digest")}))


def cmd_train(args):
    ds = load_dataset(args.data)
    subset = ModalitySubset.parse(ds.schema, args.subset)
    kind = "linear" if args.method == "closed_form" else args.kind
    latent = min(args.latent_dim, ds.schema.d) if kind == "linear" else args.latent_dim
    spec = ModelSpec(kind, latent, FusionOp(args.fusion), args.activation)
    cfg = TrainConfig(subset, args.lr, args.momentum, args.batch_size, args.steps, args.seed,
                      method="closed_form" if args.method == "closed_form" else "sgd")
    result = (two_stage_train(ds, subset, spec, cfg) if args.method == "two_stage"
              else erm_train(ds, spec, cfg))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out / "model.json",
               {"data": ds.metadata.get("digest"), "subset": subset.label, "method": args.method,
                "seed": args.seed})
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "risk"])
        w.writerows((s, repr(r)) for s, r in result.trajectory)
    _dump(result.summary(), str(out), "result.json")


def cmd_eta(args):
    model = load_model(args.model)
    if args.truth:
        truth = _load_json(args.truth)
        if not isinstance(model, LinearComposite):
            raise ModalboundError("the closed form needs a linear model")
        schema = model.schema
        subset = ModalitySubset.parse(schema, args.subset)
        est = eta_closed_form(model.effective_matrix(subset), np.array(truth["A_star"]),
                              np.array(truth["beta_star"]), np.array(truth["Sigma"]))
    else:
        if not args.data or not args.head_data:
            raise ModalboundError("empirical eta needs --data and --head-data (or --truth)")
        eval_ds, fit_ds = load_dataset(args.data), load_dataset(args.head_data)
        subset = ModalitySubset.parse(eval_ds.schema, args.subset)
        est = eta_empirical(model, subset, eval_ds, fit_ds, args.oracle_risk)
    payload = est.to_dict()
    payload["provenance"] = {"model": str(args.model), "subset": subset.label}
    _dump(payload, args.out, "eta.json")


def cmd_gamma(args):
    eta_m = EtaEstimate.from_dict(_load_json(args.eta_m))
    eta_n = EtaEstimate.from_dict(_load_json(args.eta_n))
    _dump({"gamma": gamma(eta_m, eta_n), "eta_M": eta_m.value, "eta_N": eta_n.value}, args.out,
          "gamma.json")


def cmd_rademacher(args):
    ds = load_dataset(args.data)
    subset = ModalitySubset.parse(ds.schema, args.subset)
    if args.oracle == "linear_exact":
        est = rademacher_linear_exact(ds, subset, args.cb, args.draws, args.seed)
    else:
        est = rademacher_mc_oracle(ds, LinearClass(subset, args.cb), "mc_ascent", args.draws,
                                   args.seed, args.restarts)
    _dump(est.to_dict(), args.out, "rademacher.json")


def cmd_bound_check(args):
    spec = _load_json(args.inputs)
    theorem = str(spec.get("theorem", "1"))
    consts = BoundConstants(spec["L"], spec["C"], spec.get("delta", 0.05))
    m = int(spec["m"])
    if theorem in ("1", "theorem1"):
        comps = theorem1_components(spec["gamma"], spec["rad_M"], consts, m)
        name = "theorem1"
    else:
        comps = theorem2_components(spec["rad_M"], spec["rad_full"], consts, m,
                                    spec.get("centered_gap", 0.0), args.variant)
        name = "theorem2"
    report = bound_check(spec["lhs"], comps, name, spec.get("lhs_digest"), spec.get("rhs_digest"),
                         bool(spec.get("lower_estimates", False)))
    _dump(report.to_dict(), args.out, "bound_report.json")
    if args.assert_ and not report.holds:
        raise AssertionFailed(f"{name}: lhs {report.lhs:.6g} > rhs {report.rhs:.6g}")


def cmd_reproduce(args):
    data = _load_json(args.config) if args.config else {}
    if args.scenario:
        data["scenario"] = args.scenario
    for key in ("seed", "workers"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    if args.fast:
        data["fast"] = True
    if args.variant:
        data["variant"] = args.variant
    if args.out:
        data["out"] = args.out
    if "scenario" not in data:
        raise ModalboundError("reproduce needs --scenario or a config with a scenario")
    spec = harness.ExperimentSpec.from_dict(data)
    table = harness.run(spec)
    formats = ("csv", "json", "svg") if args.plot else ("csv", "json")
    paths = harness.emit(table, spec.out or ".", formats)
    print(table.to_csv(), end="")
    print(json.dumps({"written": [str(p) for p in paths], "checks": table.checks,
                      "summary": table.summary}, default=harness._json_default))
    if args.assert_ and not table.passed:
        failed = [k for k, v in table.checks.items() if not v]
        raise AssertionFailed(f"failed checks: {failed}")


# parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modalbound",
                                description="Multi-modal latent quality and generalization-bound laboratory.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--assert", dest="assert_", action="store_true",
                        help="exit with status 2 when a check fails")

    g = sub.add_parser("generate", help="generate a synthetic dataset")
    common(g)
    g.add_argument("--family", choices=["overlap", "linear"], default="overlap")
    g.add_argument("--w", type=float, default=0.5)
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--dim", type=int, default=100)
    g.add_argument("--dims", default="2,2,2", help="linear family block sizes")
    g.add_argument("--noise-var", type=float, default=0.25)
    g.add_argument("--random-sigma", action="store_true")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="ERM over a modality subset")
    common(t)
    t.add_argument("--data", required=True)
    t.add_argument("--subset", default="all")
    t.add_argument("--method", choices=["closed_form", "sgd", "two_stage"], default="closed_form")
    t.add_argument("--kind", choices=["mlp", "linear"], default="mlp")
    t.add_argument("--latent-dim", type=int, default=10)
    t.add_argument("--fusion", choices=[f.value for f in FusionOp], default="sum")
    t.add_argument("--activation", choices=["identity", "relu"], default="identity")
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--batch-size", type=int, default=10000)
    t.add_argument("--steps", type=int, default=10000)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eta", help="latent representation quality of a trained encoder")
    common(e)
    e.add_argument("--model", required=True)
    e.add_argument("--subset", default="all")
    e.add_argument("--data", help="evaluation dataset")
    e.add_argument("--head-data", help="head-fit dataset")
    e.add_argument("--oracle-risk", type=float)
    e.add_argument("--truth", help="truth.json from `generate --family linear` for the closed form")
    e.set_defaults(func=cmd_eta)

    gm = sub.add_parser("gamma", help="difference of two eta estimates")
    common(gm)
    gm.add_argument("--eta-m", required=True)
    gm.add_argument("--eta-n", required=True)
    gm.set_defaults(func=cmd_gamma)

    r = sub.add_parser("rademacher", help="empirical Rademacher complexity of the linear class")
    common(r)
    r.add_argument("--data", required=True)
    r.add_argument("--subset", default="all")
    r.add_argument("--cb", type=float, required=True)
    r.add_argument("--draws", type=int, default=200)
    r.add_argument("--oracle", choices=["linear_exact", "mc_ascent"], default="linear_exact")
    r.add_argument("--restarts", type=int, default=8)
    r.set_defaults(func=cmd_rademacher)

    b = sub.add_parser("bound-check", help="evaluate a bound against a measured lhs")
    common(b)
    b.add_argument("--inputs", required=True, help="JSON with theorem, lhs, L, C, m, ...")
    b.add_argument("--variant", choices=["body", "appendix"], default="body")
    b.set_defaults(func=cmd_bound_check)

    rp = sub.add_parser("reproduce", help="run an experiment scenario")
    rp.add_argument("--scenario", choices=list(harness.SCENARIOS))
    rp.add_argument("--config", help="JSON file with experiment fields")
    rp.add_argument("--out")
    rp.add_argument("--fast", action="store_true")
    rp.add_argument("--seed", type=int)
    rp.add_argument("--workers", type=int)
    rp.add_argument("--variant", choices=["body", "appendix"])
    rp.add_argument("--plot", action="store_true", help="also write SVG figures")
    rp.add_argument("--assert", dest="assert_", action="store_true")
    rp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except AssertionFailed as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (ModalboundError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
