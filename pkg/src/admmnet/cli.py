"""Command-line interface: data generation, training, reconstruction,
evaluation and gradient checking.

Every command takes ``--config`` (JSON, validated against the documented
schema), ``--profile`` presets and flag overrides; flags win over the
config file. All runs are deterministic given config plus seed.
"""

import argparse
import csv
import os
import sys
import time

import numpy as np

from .basic import basic_forward
from .config import ConfigError, load_config
from .data import (
    dataset_from_records,
    dataset_to_records,
    make_dataset,
    pseudo_radial_mask,
    read_container,
    write_container,
    write_pgm,
)
from .estimator import AdmmNetReconstructor
from .generic import generic_forward
from .plf import plf_from_soft_threshold
from .signal import dct_filter_bank, zero_filled
from .solvers import Solver1Config, Solver2Config, admm_solver1, admm_solver2
from .training import (
    TrainConfig,
    finite_diff_check,
    nmse_loss,
    params_from_records,
    params_to_records,
    psnr,
    train_net,
)

__all__ = ["main"]


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--profile", choices=["tiny", "paper"], help="preset bundle")
    parser.add_argument("--net", choices=["basic", "generic", "complex"])
    parser.add_argument("--size", type=int, help="grid size n (n x n)")
    parser.add_argument("--filters", type=int, help="filter count L")
    parser.add_argument("--filter-size", type=int, dest="filter_size")
    parser.add_argument("--stages", type=int, help="stage count")
    parser.add_argument("--subiters", type=int, help="inner denoising iterations")
    parser.add_argument("--controls", type=int, help="PLF control points")
    parser.add_argument("--rate", type=float, dest="sampling_rate")
    parser.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    parser.add_argument("--noise-sigma-max", type=float, dest="noise_sigma_max")
    parser.add_argument("--init", choices=["model", "random"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--data-dir", dest="data_dir")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--max-iters", type=int, dest="max_iters")


def _config_from_args(args, baseline=None):
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "net",
            "size",
            "filters",
            "filter_size",
            "stages",
            "subiters",
            "controls",
            "sampling_rate",
            "noise_sigma",
            "noise_sigma_max",
            "init",
            "seed",
            "threads",
        )
    }
    paths = {}
    if getattr(args, "data_dir", None):
        paths["data_dir"] = args.data_dir
    if getattr(args, "out_dir", None):
        paths["out_dir"] = args.out_dir
    if paths:
        overrides["paths"] = paths
    if getattr(args, "max_iters", None):
        overrides["train"] = {"max_iters": args.max_iters}
    if baseline:
        merged = dict(baseline)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        overrides = merged
    return load_config(args.config, args.profile, overrides)


def _estimator(cfg):
    return AdmmNetReconstructor(
        net=cfg.net,
        n_stages=cfg.stages,
        n_filters=cfg.filters,
        filter_size=cfg.filter_size,
        n_subiters=cfg.subiters,
        n_controls=cfg.controls,
        fusion_size=cfg.fusion_size,
        init=cfg.init,
        rho=cfg.rho,
        lam=cfg.lam,
        step=cfg.step,
        eta=cfg.eta,
        seed=cfg.seed,
        threads=cfg.threads,
    )


def cmd_make_data(args):
    cfg = _config_from_args(args)
    os.makedirs(cfg.paths["data_dir"], exist_ok=True)
    mask = pseudo_radial_mask(cfg.size, cfg.sampling_rate)
    splits = [
        ("train", cfg.counts["train"], cfg.seed),
        ("val", cfg.counts["val"], cfg.seed + 1),
        ("test", cfg.counts["test"], cfg.seed + 2),
    ]
    achieved = float(mask.mean())
    print(f"achieved sampling rate: {achieved:.4f} (target {cfg.sampling_rate})")
    for name, count, seed in splits:
        if count == 0:
            continue
        ds = make_dataset(
            cfg.size,
            count,
            cfg.sampling_rate,
            seed=seed,
            noise_sigma=cfg.noise_sigma,
            noise_sigma_max=cfg.noise_sigma_max,
            with_phase=cfg.with_phase,
            mask=mask,
        )
        path = os.path.join(cfg.paths["data_dir"], f"{name}.admm")
        write_container(path, dataset_to_records(ds))
        print(f"wrote {path}: {count} samples of {cfg.size}x{cfg.size}")
    return 0


def cmd_train(args):
    cfg = _config_from_args(args)
    os.makedirs(cfg.paths["out_dir"], exist_ok=True)
    train_path = os.path.join(cfg.paths["data_dir"], "train.admm")
    dataset = dataset_from_records(read_container(train_path))
    if args.resume:
        params = params_from_records(read_container(args.resume))
        print(f"resuming from {args.resume}")
    else:
        params = _estimator(cfg)._initial_params()
    tc = TrainConfig(**cfg.train)
    csv_path = os.path.join(cfg.paths["out_dir"], "metrics.csv")
    t0 = time.perf_counter()
    trained, result = train_net(params, dataset, tc, csv_path=csv_path, threads=cfg.threads)
    params_path = os.path.join(cfg.paths["out_dir"], "params.admm")
    write_container(params_path, params_to_records(trained))
    print(
        f"status {result.status}: loss {result.history[0][1]:.6f} -> "
        f"{result.value:.6f} in {result.n_iters} iterations "
        f"({time.perf_counter() - t0:.1f}s)"
    )
    print(f"wrote {params_path} and {csv_path}")
    return 0 if result.status in ("converged", "max_iters") else 3


def _solver_reconstruct(cfg, dataset, which):
    bank = dct_filter_bank(cfg.filter_size)
    L = bank.shape[0]
    outs = []
    if which == "admm1":
        scfg = Solver1Config(
            filters=bank,
            rho=np.full(L, cfg.rho),
            eta=np.full(L, cfg.eta),
            theta=np.full(L, cfg.lam / cfg.rho),
            iterations=cfg.stages + 1,
        )
        for i in range(len(dataset)):
            outs.append(admm_solver1(dataset.y[i], dataset.mask, scfg)[-1])
    else:
        scfg = Solver2Config(
            filters=bank,
            rho=cfg.rho,
            eta=cfg.eta,
            mu1=1.0 - cfg.step * cfg.rho,
            mu2=cfg.step * cfg.rho,
            lambdas=np.full(L, cfg.step * cfg.lam),
            inner_iterations=cfg.subiters,
            iterations=cfg.stages + 1,
            shrink=plf_from_soft_threshold(cfg.lam / cfg.rho, cfg.controls),
        )
        for i in range(len(dataset)):
            outs.append(admm_solver2(dataset.y[i], dataset.mask, scfg)[-1])
    return np.stack(outs)


def _net_reconstruct(params, dataset):
    forward = basic_forward if type(params).__name__.startswith("Basic") else generic_forward
    outs = []
    times = []
    for i in range(len(dataset)):
        t0 = time.perf_counter()
        outs.append(forward(dataset.y[i], dataset.mask, params))
        times.append(1000.0 * (time.perf_counter() - t0))
    return np.stack(outs), times


def _metrics_rows(outs, dataset, times):
    rows = []
    for i in range(len(dataset)):
        rows.append(
            {
                "id": i,
                "nmse": nmse_loss(outs[i], dataset.xgt[i]),
                "psnr": psnr(outs[i], dataset.xgt[i]),
                "ms": times[i],
            }
        )
    return rows


def cmd_reconstruct(args):
    cfg = _config_from_args(args)
    dataset = dataset_from_records(read_container(args.input))
    os.makedirs(cfg.paths["out_dir"], exist_ok=True)
    if args.solver == "net":
        params = params_from_records(read_container(args.params))
        outs, times = _net_reconstruct(params, dataset)
    else:
        t0 = time.perf_counter()
        outs = _solver_reconstruct(cfg, dataset, args.solver)
        per = 1000.0 * (time.perf_counter() - t0) / len(dataset)
        times = [per] * len(dataset)
    rows = _metrics_rows(outs, dataset, times)
    table_path = os.path.join(cfg.paths["out_dir"], "reconstruction.csv")
    with open(table_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id", "nmse", "psnr", "ms"])
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    "id": row["id"],
                    "nmse": f"{row['nmse']:.6f}",
                    "psnr": f"{row['psnr']:.3f}",
                    "ms": f"{row['ms']:.2f}",
                }
            )
    for i in range(len(dataset)):
        write_pgm(os.path.join(cfg.paths["out_dir"], f"recon_{i:03d}.pgm"), outs[i])
    mean_nmse = float(np.mean([r["nmse"] for r in rows]))
    print(f"reconstructed {len(dataset)} samples; mean NMSE {mean_nmse:.6f}")
    print(f"wrote {table_path} and recon_*.pgm")
    return 0


def cmd_eval(args):
    cfg = _config_from_args(args)
    dataset = dataset_from_records(read_container(args.input))
    params = params_from_records(read_container(args.params))
    outs, times = _net_reconstruct(params, dataset)
    rows = _metrics_rows(outs, dataset, times)
    zf = np.stack([zero_filled(dataset.y[i], dataset.mask) for i in range(len(dataset))])
    zf_nmse = float(np.mean([nmse_loss(zf[i], dataset.xgt[i]) for i in range(len(dataset))]))
    print(f"{'id':>4} {'nmse':>10} {'psnr':>8} {'ms':>8}")
    for row in rows:
        print(f"{row['id']:>4} {row['nmse']:>10.6f} {row['psnr']:>8.3f} {row['ms']:>8.2f}")
    mean_nmse = float(np.mean([r["nmse"] for r in rows]))
    mean_psnr = float(np.mean([r["psnr"] for r in rows]))
    print(f"mean NMSE {mean_nmse:.6f}  mean PSNR {mean_psnr:.3f} dB")
    print(f"zero-filling baseline NMSE {zf_nmse:.6f}")
    return 0


_GRADCHECK_TINY = {
    "size": 8,
    "filters": 2,
    "stages": 2,
    "subiters": 2,
    "controls": 11,
    "init": "random",
    "sampling_rate": 0.3,
}


def cmd_gradcheck(args):
    cfg = _config_from_args(args, baseline=_GRADCHECK_TINY)
    from admmnet.data import make_dataset as _mk

    dataset = _mk(
        cfg.size,
        2,
        cfg.sampling_rate,
        seed=cfg.seed,
        with_phase=cfg.with_phase,
    )
    params = _estimator(cfg)._initial_params()
    report = finite_diff_check(
        params,
        dataset,
        h=args.h,
        kink_radius=args.kink_radius,
        corrupt_class=args.corrupt,
        seed=cfg.seed,
    )
    for line in report.lines():
        print(line)
    tol = args.tolerance
    status = "PASS" if report.passed(tol) else "FAIL"
    print(f"{status}: max relative error {report.max_rel_err:.3e} (tolerance {tol})")
    return 0 if report.passed(tol) else 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="admmnet",
        description="Unrolled ADMM networks for compressive-sensing MRI reconstruction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-data", help="generate train/val/test containers")
    _add_common(p)
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser("train", help="train a network with L-BFGS")
    _add_common(p)
    p.add_argument("--resume", help="params container to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="reconstruct a dataset container")
    _add_common(p)
    p.add_argument("--params", help="trained params container")
    p.add_argument("--input", required=True, help="dataset container")
    p.add_argument(
        "--solver",
        choices=["net", "admm1", "admm2"],
        default="net",
        help="use the trained net or a classical solver",
    )
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="metrics table for a params/dataset pair")
    _add_common(p)
    p.add_argument("--params", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    _add_common(p)
    p.add_argument("--h", type=float, default=1e-6, help="central-difference step")
    p.add_argument("--kink-radius", type=float, default=1e-4, dest="kink_radius")
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--corrupt", help="flip one class's analytic gradient (self-test)")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "reconstruct" and args.solver == "net" and not args.params:
        parser.error("reconstruct --solver net requires --params")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
