"""Command line pipeline: sample -> calibrate -> embed -> train -> generate, plus verify-bounds.

Every subcommand exits 0 on success.  Failures print a JSON object
``{"error": ..., "message": ..., "exit_code": ...}`` on stderr and exit with a
code specific to the failure class (see ``EXIT_CODES``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import BoundInputs, monte_carlo_verify
from .data import SyntheticDatasetSpec, sample_dataset
from .embedding import NoiseCovariance, embed, embed_labeled, privatize
from .exceptions import (CalibrationError, DomainError, FormatError, ShapeError, TrainingError,
                         UnsupportedVersionError)
from .features import FeatureMap
from .io import (load_dataset, load_embedding, load_generator, load_json, save_dataset,
                 save_embedding, save_generator, save_json)
from .privacy import PrivacySpec, calibrate_sigma, effective_sigma, parse_ratios
from .training import (DEFAULT_SIGMA_STOPPING_RATIO, EarlyStopConfig, Generator, TrainingConfig,
                       make_proxy_target, make_seeds, train)

EXIT_CODES = {
    UnsupportedVersionError: 8,
    FormatError: 7,
    TrainingError: 6,
    CalibrationError: 5,
    ShapeError: 4,
    DomainError: 3,
    OSError: 9,
}
EXIT_BOUNDS_FAILED = 10

DEFAULT_BOUNDS_CONFIG = {
    "seed": 0,
    "draws": 10_000,
    "rhos": [0.05, 0.2],
    "instances": [
        {"moments": 1, "dim": 5, "m": 10, "sigma": 1.0, "a_scale": 0.0},
        {"moments": 1, "dim": 32, "m": 50, "sigma": 4.0, "a_scale": 0.1},
        {"moments": 2, "dim": 16, "m": 100, "sigma": 5.0, "a_scale": 0.05},
        {"moments": 2, "dim": 64, "m": 100, "sigma": 2.0, "a_scale": 0.2},
    ],
}


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


def cmd_sample(args):
    spec = SyntheticDatasetSpec.from_dict(load_json(args.config))
    if args.labeled:
        spec.labeled = True
    X, labels = sample_dataset(spec, args.seed)
    save_dataset(args.out, X, labels, {"spec": spec.to_dict(), "seed": args.seed})
    _emit({"out": str(args.out), "num_samples": int(X.shape[0]), "labeled": labels is not None})


def cmd_calibrate(args):
    spec = PrivacySpec.from_ratios(args.epsilon, args.delta, parse_ratios(args.releases))
    sigma = calibrate_sigma(spec)
    _emit({"sigma": sigma, "sigma_eff": effective_sigma(spec.releases, sigma)})


def _feature_map_from_args(args, input_dim):
    if args.feature_map is not None:
        config = load_json(args.feature_map)
        config.setdefault("input_dim", input_dim)
    else:
        config = {"kind": "random", "input_dim": input_dim,
                  "widths": [int(w) for w in parse_ratios(args.widths)], "seed": args.feature_seed}
    if args.moments is not None:
        config["moments"] = args.moments
    fmap = FeatureMap.from_config(config)
    if fmap.input_dim != input_dim:
        raise ShapeError(f"feature map expects dimension {fmap.input_dim}, data has {input_dim}")
    return fmap


def cmd_embed(args):
    X, labels, _ = load_dataset(args.data)
    fmap = _feature_map_from_args(args, X.shape[1])
    ratios = [1.0] * fmap.moments
    if args.early_stopping:
        if args.proxy_out is None:
            raise DomainError("--early-stopping requires --proxy-out")
        ratios += [args.sigma_stopping_ratio] * 2
    privacy = {"releases": ratios}
    if args.sigma is not None:
        if args.sigma < 0:
            raise DomainError("--sigma must be >= 0")
        sigma = args.sigma
    else:
        if args.epsilon is None or args.delta is None:
            raise DomainError("give --epsilon and --delta, or --sigma")
        spec = PrivacySpec.from_ratios(args.epsilon, args.delta, ratios)
        sigma = calibrate_sigma(spec)
        privacy.update(epsilon=args.epsilon, delta=args.delta,
                       sigma_eff=effective_sigma(spec.releases, sigma))
    privacy["sigma"] = sigma

    if args.labeled:
        if labels is None:
            raise DomainError("--labeled given but the dataset has no labels")
        K = int(labels.max()) + 1 if args.num_classes is None else args.num_classes
        clean = embed_labeled(fmap, X, labels, K)
    else:
        clean = embed(fmap, X)
    released = privatize(clean, sigma, args.seed)
    save_embedding(args.out, released, {"privacy": privacy, "role": "target"})
    summary = {"out": str(args.out), "sigma": sigma, "releases": ratios,
               "dim": clean.dim, "num_classes": clean.num_classes, "moments": clean.moments}
    if args.early_stopping:
        proxy = make_proxy_target(fmap, X, args.sigma_stopping_ratio * sigma, args.seed + 1)
        save_embedding(args.proxy_out, proxy, {"privacy": privacy, "role": "proxy",
                                               "sigma_stopping_ratio": args.sigma_stopping_ratio})
        summary["proxy_out"] = str(args.proxy_out)
    if args.clean_out is not None:
        save_embedding(args.clean_out, clean, {"role": "clean"})
        summary["clean_out"] = str(args.clean_out)
    _emit(summary)


def _load_train_config(args):
    raw = load_json(args.config)
    gen_cfg = dict(raw.get("generator", {}))
    training = dict(raw.get("training", {}))
    if args.seed is not None:
        training["seed"] = args.seed
    if args.iterations is not None:
        training["iterations"] = args.iterations
    if args.eval_every is not None:
        training["eval_every"] = args.eval_every
    return gen_cfg, TrainingConfig.from_dict(training)


def cmd_train(args):
    gen_cfg, cfg = _load_train_config(args)
    target, target_header = load_embedding(args.target)
    if target.feature_config is None:
        raise FormatError("target embedding does not record its feature map")
    fmap = FeatureMap.from_config(target.feature_config)
    proxy = None
    if cfg.early_stopping is not None:
        if args.proxy is None:
            raise DomainError("early stopping configured but no --proxy embedding given")
        proxy, _ = load_embedding(args.proxy)
        expected = cfg.early_stopping.sigma_stopping(target.sigma)
        if not np.isclose(proxy.sigma, expected, rtol=1e-12, atol=0.0):
            raise DomainError(f"proxy sigma {proxy.sigma} differs from "
                              f"{cfg.early_stopping.sigma_stopping_ratio} x target sigma {target.sigma}")
    true_target = load_embedding(args.true_target)[0] if args.true_target else None

    gen = Generator.random(int(gen_cfg.get("latent_dim", 2)), fmap.input_dim,
                           tuple(gen_cfg.get("hidden", (32,))), int(gen_cfg.get("seed", 0)),
                           num_classes=target.num_classes)
    result = train(gen, target, fmap, cfg, proxy_target=proxy, true_target=true_target)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "history.jsonl", "w") as fh:
        for record in result.history:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    save_generator(out / "theta_final.bin", gen, result.theta, {"iteration": cfg.iterations})
    save_generator(out / "theta_selected.bin", gen, result.selected_theta,
                   {"iteration": result.selected_iteration})
    summary = {
        "selected_iter": result.selected_iteration,
        "final_private_loss": result.history[-1]["private_loss"],
        "proxy_scores": result.proxy_scores,
    }
    save_json(out / "summary.json", summary)
    artifacts = ["history.jsonl", "theta_final.bin", "theta_selected.bin", "summary.json"]
    manifest = {
        "tool_version": __version__,
        "command": "train",
        "config": {"generator": gen_cfg, "training": cfg.to_dict()},
        "seeds": {"training": cfg.seed, "generator_init": int(gen_cfg.get("seed", 0)),
                  "target_noise": target.noise_seed, "proxy_noise": None if proxy is None else proxy.noise_seed},
        "privacy": target_header.get("privacy"),
        "inputs": {"target": str(args.target), "proxy": None if args.proxy is None else str(args.proxy),
                   "true_target": None if args.true_target is None else str(args.true_target)},
        "artifacts": artifacts + ["manifest.json"],
    }
    save_json(out / "manifest.json", manifest)
    _emit({"out": str(out), "selected_iter": result.selected_iteration,
           "final_private_loss": summary["final_private_loss"]})


def cmd_generate(args):
    gen, header = load_generator(args.generator)
    seeds, labels = make_seeds(args.num_samples, gen.latent_dim, args.seed, gen.num_classes)
    X = gen.forward(seeds)
    save_dataset(args.out, X, labels, {"generated_from": str(args.generator), "seed": args.seed})
    _emit({"out": str(args.out), "num_samples": int(X.shape[0])})


def run_bounds_verification(config):
    """Monte-Carlo check of the fixed-dataset and uniform bounds on each configured instance."""
    draws = int(config.get("draws", 10_000))
    rhos = [float(r) for r in config.get("rhos", [0.05])]
    master = int(config.get("seed", 0))
    results = []
    for idx, inst in enumerate(config["instances"]):
        cov = NoiseCovariance(float(inst["sigma"]), int(inst["m"]), int(inst["dim"]), int(inst["moments"]))
        rng = np.random.default_rng([master, idx])
        a = float(inst.get("a_scale", 0.0)) * rng.standard_normal(cov.moments * cov.dim)
        inputs = BoundInputs.from_difference(cov, a)
        base = {"instance": idx, **inst, "sigma_a": inputs.sigma_a}
        seed = master * 1000 + idx * 10
        rep = monte_carlo_verify("expected", cov, a, draws, seed=seed)
        results.append({**base, "check": "expected_abs_error", **rep.to_dict()})
        for j, rho in enumerate(rhos):
            for k, kind in enumerate(("high_prob", "uniform")):
                rep = monte_carlo_verify(kind, cov, a, draws, rho=rho, seed=seed + 1 + 2 * j + k)
                name = "high_prob_error" if kind == "high_prob" else "uniform_error"
                results.append({**base, "check": name, **rep.to_dict()})
    return {"all_passed": all(r["passed"] for r in results), "results": results,
            "config": config, "tool_version": __version__}


def cmd_verify_bounds(args):
    config = DEFAULT_BOUNDS_CONFIG if args.config is None else load_json(args.config)
    report = run_bounds_verification(config)
    save_json(args.out, report)
    _emit({"out": str(args.out), "all_passed": report["all_passed"],
           "checks": len(report["results"])})
    return 0 if report["all_passed"] else EXIT_BOUNDS_FAILED


def build_parser():
    parser = argparse.ArgumentParser(prog="dpmepf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a seeded Gaussian-mixture dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("calibrate", help="noise multiplier for a target (epsilon, delta)")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--releases", default="1", help='comma separated noise ratios, e.g. "1,1,10"')
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("embed", help="compute and privatize the target mean embedding")
    p.add_argument("--data", required=True)
    p.add_argument("--feature-map", help="feature map JSON config")
    p.add_argument("--widths", default="32,32")
    p.add_argument("--feature-seed", type=int, default=0)
    p.add_argument("--moments", type=int, choices=(1, 2))
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--num-classes", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--sigma", type=float, help="explicit noise multiplier (0 = non-private)")
    p.add_argument("--early-stopping", action="store_true", help="also release a proxy embedding")
    p.add_argument("--sigma-stopping-ratio", type=float, default=DEFAULT_SIGMA_STOPPING_RATIO)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--proxy-out")
    p.add_argument("--clean-out", help="also save the non-private embedding (not DP)")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="train a generator on a privatized embedding")
    p.add_argument("--config", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--proxy")
    p.add_argument("--true-target")
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample from a trained generator")
    p.add_argument("--generator", required=True)
    p.add_argument("--num-samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify-bounds", help="Monte-Carlo check of the error bounds")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify_bounds)
    return parser


def _exit_code(exc):
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    threads = os.environ.get("DP_EMBED_THREADS")
    try:
        if threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=int(threads)):
                code = args.func(args)
        else:
            code = args.func(args)
    except (DomainError, ShapeError, CalibrationError, TrainingError, FormatError, OSError) as exc:
        code = _exit_code(exc)
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        if isinstance(exc, TrainingError):
            err["iteration"] = exc.iteration
        print(json.dumps(err), file=sys.stderr)
        return code
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
