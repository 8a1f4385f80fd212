"""Command-line interface: ``setbarrier {train,verify,bench,export-levelset}``.

Exit codes: 0 verified, 1 not verified, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import torch

from .dynsys.benchmarks import benchmark
from .dynsys.systems import SystemSpec, load_system
from .errors import ResourceLimitError, SafetyViolation, SetBarrierError
from .neural.network import load_model, save_model
from .reference import REFERENCE
from .setcore import zono_interval_hull
from .trainer import REFINE_BOX_CAP, TrainConfig, config_for, simulate_check, train, verify
from .zeroset import ZeroParams, enclose_zero_set

EXIT_OK, EXIT_UNVERIFIED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _seeds(text: str) -> list[int]:
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            seeds = list(range(int(a), int(b) + 1))
        else:
            seeds = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must look like '0..9' or '1,4,7', got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _common(p: argparse.ArgumentParser, model: bool = False) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--benchmark", help="built-in benchmark name")
    src.add_argument("--spec", help="JSON system description")
    p.add_argument("--size", type=int, help="state dimension for peruffo / ratschan")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--arch", help="N1, N2, N3 or comma-separated hidden widths")
    p.add_argument("--eta", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--zero", help="zero-set parameters iota,s,sdim (e.g. 2,8,n)")
    p.add_argument("--lie-subsplits", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--box-cap", type=int, help="largest zero-set cover before giving up")
    p.add_argument("--out", default="runs", help="output directory")
    if model:
        p.add_argument("--model", required=True, help="model JSON written by 'train'")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="setbarrier",
                                 description="Set-based training of neural barrier certificates.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", help="train one certificate")
    _common(p)
    p = sub.add_parser("verify", help="re-check a saved certificate")
    _common(p, model=True)
    p.add_argument("--refine", type=int, default=0, help="extra zero-set iterations")
    p = sub.add_parser("bench", help="multi-seed campaign with a summary row")
    _common(p)
    p.add_argument("--seeds", type=_seeds, default=list(range(10)))
    p.add_argument("--check", action="store_true",
                   help="also re-verify at iota+1 and simulate each verified model")
    p = sub.add_parser("export-levelset", help="grid, cover and set CSVs for plotting")
    _common(p, model=True)
    p.add_argument("--resolution", type=int, default=201)
    p.add_argument("--dims", type=int, nargs=2, metavar=("I", "J"),
                   help="1-based state indices of the slice for n > 2")
    return ap


# ------------------------------------------------------------ helpers

def _system(args, meta: dict | None = None) -> SystemSpec:
    if args.spec:
        return load_system(args.spec)
    name = args.benchmark
    size = args.size
    if name is None and meta:
        name = meta.get("benchmark_key")
        size = size if size is not None else meta.get("size")
    if name is None:
        raise UsageError("one of --benchmark or --spec is required")
    return benchmark(name, size)


def _config(args, sys_: SystemSpec) -> TrainConfig:
    zero = ZeroParams.parse(args.zero) if args.zero else None
    return config_for(sys_, arch=args.arch, eta=args.eta, beta1=args.beta1, eps=args.eps,
                      zero=zero, lie_subsplits=args.lie_subsplits,
                      max_epochs=args.max_epochs, box_cap=args.box_cap, seed=args.seed)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _meta(args, sys_: SystemSpec, cfg: TrainConfig) -> dict:
    return {"benchmark": sys_.name, "benchmark_key": args.benchmark, "size": args.size,
            "spec": args.spec, "config": cfg.to_dict()}


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _load(args):
    net, meta = load_model(args.model)
    sys_ = _system(args, meta)
    if net.input_dim != sys_.dim:
        raise UsageError(f"model has {net.input_dim} inputs but {sys_.name} has dimension {sys_.dim}")
    return net, meta, sys_


# ------------------------------------------------------------ commands

def cmd_train(args) -> int:
    sys_ = _system(args)
    cfg = _config(args, sys_)
    net, report = train(sys_, cfg)
    out = _outdir(args)
    stem = f"{sys_.name}_seed{cfg.seed}"
    save_model(net, out / f"{stem}_model.json", _meta(args, sys_, cfg))
    report.save(out / f"{stem}_report.json")
    print(f"{sys_.name} seed {cfg.seed}: verified={report.verified} epochs={report.epochs_run} "
          f"time={report.wall_time_s:.2f}s")
    print(f"  {report.final}")
    return EXIT_OK if report.verified else EXIT_UNVERIFIED


def cmd_verify(args) -> int:
    net, meta, sys_ = _load(args)
    if args.refine < 0:
        raise UsageError("--refine must be >= 0")
    cfg = _config(args, sys_)
    if not args.zero and meta.get("config", {}).get("zero"):
        cfg = cfg.with_(zero=ZeroParams.parse(meta["config"]["zero"]))
    report = verify(net, sys_, cfg, refine=args.refine)
    f = report.final
    print(f"{sys_.name}: lU={f['lU']:.6g} lI={f['lI']:.6g} l0={f['l0']:.6g} "
          f"total={f['total']:.6g} cover={f['coverN']} zero={report.config['zero']} "
          f"verified={report.verified}")
    return EXIT_OK if report.verified else EXIT_UNVERIFIED


def _stats(values) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


def cmd_bench(args) -> int:
    sys_ = _system(args)
    base = _config(args, sys_)
    out = _outdir(args)
    runs = []
    for seed in args.seeds:
        cfg = base.with_(seed=seed)
        try:
            net, report = train(sys_, cfg)
        except ResourceLimitError as exc:
            runs.append({"seed": seed, "verified": False, "epochs": None, "time_s": None,
                         "error": str(exc)})
            print(f"seed {seed}: {exc}", flush=True)
            continue
        stem = f"{sys_.name}_seed{seed}"
        save_model(net, out / f"{stem}_model.json", _meta(args, sys_, cfg))
        report.save(out / f"{stem}_report.json")
        row = {"seed": seed, "verified": report.verified, "epochs": report.epochs_run,
               "time_s": report.wall_time_s}
        if args.check and report.verified:
            # one more round multiplies boxes by s^s_dim, hence the roomier cap
            wide = cfg.with_(box_cap=max(cfg.box_cap, REFINE_BOX_CAP))
            row["refined_verified"] = verify(net, sys_, wide, refine=1).verified
            try:
                simulate_check(net, sys_, seed=seed)
                row["simulation_ok"] = True
            except SafetyViolation as exc:
                row["simulation_ok"] = False
                row["simulation_error"] = str(exc)
        runs.append(row)
        print(f"seed {seed}: verified={report.verified} epochs={report.epochs_run} "
              f"time={report.wall_time_s:.2f}s", flush=True)
    ok = [r for r in runs if r["verified"]]
    t_mean, t_std = _stats([r["time_s"] for r in ok])
    e_mean, e_std = _stats([r["epochs"] for r in ok])
    ref = REFERENCE.get(sys_.name)
    summary = {
        "benchmark": sys_.name, "dim": sys_.dim, "config": base.to_dict(), "seeds": args.seeds,
        "success_pct": 100.0 * len(ok) / len(runs),
        "time_mean_s": t_mean, "time_std_s": t_std,
        "epochs_mean": e_mean, "epochs_std": e_std,
        "reference": None if ref is None else vars(ref),
        "runs": runs,
    }
    (out / f"{sys_.name}_summary.json").write_text(json.dumps(summary, indent=1) + "\n",
                                                   encoding="utf-8")
    cols = ["benchmark", "n", "success_pct", "time_mean_s", "time_std_s", "epochs_mean",
            "epochs_std", "ref_success_pct", "ref_time_s", "ref_time_std", "ref_epochs",
            "ref_epochs_std"]
    refv = [None] * 5 if ref is None else [ref.success_pct, ref.time_s, ref.time_std,
                                           ref.epochs, ref.epochs_std]
    _write_csv(out / f"{sys_.name}_summary.csv", cols,
               [[sys_.name, sys_.dim, summary["success_pct"], t_mean, t_std, e_mean, e_std, *refv]])
    print(f"{sys_.name}: success {summary['success_pct']:.0f}% epochs {e_mean} time {t_mean}")
    checks_ok = all(r.get("refined_verified", True) and r.get("simulation_ok", True) for r in ok)
    return EXIT_OK if len(ok) == len(runs) and checks_ok else EXIT_UNVERIFIED


def cmd_export_levelset(args) -> int:
    net, meta, sys_ = _load(args)
    n = sys_.dim
    if args.resolution < 2:
        raise UsageError("--resolution must be >= 2")
    if args.dims is None:
        if n != 2:
            raise UsageError(f"--dims i j is required for a {n}-D system")
        i, j = 0, 1
    else:
        i, j = args.dims[0] - 1, args.dims[1] - 1
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise UsageError(f"--dims must be two distinct indices in 1..{n}")
    X = sys_.state_space
    cfg = _config(args, sys_)
    if not args.zero and meta.get("config", {}).get("zero"):
        cfg = cfg.with_(zero=ZeroParams.parse(meta["config"]["zero"]))
    out = _outdir(args)
    mid = 0.5 * (X.lo + X.hi)
    gi = np.linspace(X.lo[i], X.hi[i], args.resolution)
    gj = np.linspace(X.lo[j], X.hi[j], args.resolution)
    A, B = np.meshgrid(gi, gj, indexing="ij")
    pts = np.tile(mid, (A.size, 1))
    pts[:, i], pts[:, j] = A.ravel(), B.ravel()
    vals = net(pts)
    stem = sys_.name
    _write_csv(out / f"{stem}_levelset.csv", [f"x{i + 1}", f"x{j + 1}", "B"],
               [[repr(float(a)), repr(float(b)), repr(float(v))]
                for a, b, v in zip(pts[:, i], pts[:, j], vals)])
    cover = enclose_zero_set(net, X, cfg.zero, cap=cfg.box_cap)
    names = [f"x{k + 1}" for k in range(n)]
    _write_csv(out / f"{stem}_cover.csv", [f"{c}_lo" for c in names] + [f"{c}_hi" for c in names],
               [[repr(float(v)) for v in (*lo, *hi)] for lo, hi in zip(cover.lo, cover.hi)])
    rows = []
    for kind, sets in (("initial", sys_.initial_sets), ("unsafe", sys_.unsafe_sets)):
        for k, Z in enumerate(sets):
            h = zono_interval_hull(Z)
            rows.append([kind, k, *[repr(float(v)) for v in (*h.lo, *h.hi)]])
    rows.append(["state_space", 0, *[repr(float(v)) for v in (*X.lo, *X.hi)]])
    _write_csv(out / f"{stem}_sets.csv",
               ["kind", "index"] + [f"{c}_lo" for c in names] + [f"{c}_hi" for c in names], rows)
    print(f"wrote {stem}_levelset.csv ({A.size} rows), {stem}_cover.csv ({len(cover)} boxes), "
          f"{stem}_sets.csv to {out}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "verify": cmd_verify, "bench": cmd_bench,
            "export-levelset": cmd_export_levelset}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    torch.set_num_threads(1)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SetBarrierError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"setbarrier {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
