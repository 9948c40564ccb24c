"""Command line experiment runner.

Subcommands: ``train``, ``eval``, ``attack-eval``, ``saliency``, ``minima``.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics
from .attacks import PerturbationSpec, attack_batch
from .config import ExperimentConfig, build_split, preset
from .errors import ConfigurationError, DataError, ModelFileError, NumericError, UsageError
from .interpret import local_minimum, occlusion1
from .model import anomaly_score, reconstruct
from .modelfile import load_model, save_model
from .training import train

log = logging.getLogger("arae")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

MODEL_FILE = "model.arae"
LOG_FILE = "train_log.csv"
CONFIG_FILE = "config.json"

EVAL_FIELDS = ("dataset", "normal_classes", "protocol", "variant", "auc", "f1", "f1_threshold",
               "fpr_at_99.5_tpr", "n_train", "n_test", "n_test_anomalous")


# config resolution -----------------------------------------------------------

def resolve_config(args) -> ExperimentConfig:
    model_dir = Path(args.model).parent if getattr(args, "model", None) else None
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    elif model_dir is not None and (model_dir / CONFIG_FILE).exists():
        cfg = ExperimentConfig.load(model_dir / CONFIG_FILE)
    else:
        cfg = preset("bars")
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.train.seed = args.seed
    if args.data_dir:
        cfg.dataset.data_dir = args.data_dir
    if args.normal_classes:
        cfg.protocol.normal_classes = _classes(args.normal_classes)
    if getattr(args, "epsilon", None) is not None:
        cfg.train.epsilon = args.epsilon
    if getattr(args, "gamma", None) is not None:
        cfg.train.gamma = args.gamma
    if getattr(args, "variant", None):
        cfg.train.variant = args.variant
    if getattr(args, "epochs", None):
        cfg.train.epochs = args.epochs
    if getattr(args, "eps_list", None):
        cfg.attack_epsilons = tuple(float(e) for e in args.eps_list.split(","))
    # re-validate after overrides
    cfg = ExperimentConfig.from_dict(cfg.to_dict())
    if args.out:
        cfg.out_dir = args.out
    elif model_dir is not None:
        cfg.out_dir = str(model_dir)
    return cfg


def _classes(text) -> tuple:
    try:
        return tuple(int(c) for c in str(text).replace("+", ",").split(",") if c != "")
    except ValueError as e:
        raise ConfigurationError(f"bad class list {text!r}") from e


def _validation(cfg, split):
    if not cfg.validate or split.test_anomalous.all() or not split.test_anomalous.any():
        return None
    return split.test_normals, split.test_anomalies


# commands --------------------------------------------------------------------

def cmd_train(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / CONFIG_FILE)
    split = build_split(cfg)
    ae, train_log = train(split.train_normals, cfg.train, _validation(cfg, split))
    save_model(ae, out / MODEL_FILE)
    train_log.write_csv(out / LOG_FILE)
    log.info("wrote %s", out)
    return EXIT_OK


def _check_dims(ae, split):
    if ae.input_dim != split.test_samples.pixels.shape[1]:
        raise DataError(
            f"model expects {ae.input_dim} pixels but the data has "
            f"{split.test_samples.pixels.shape[1]}"
        )


def evaluate(ae, cfg, split) -> tuple[dict, np.ndarray]:
    scores = anomaly_score(ae, split.test_samples)
    labels = split.test_anomalous
    if cfg.f1_positive == "normal":
        f1_set = metrics.ScoredSet(scores, ~labels, "normal")
    else:
        f1_set = metrics.ScoredSet(scores, labels, "anomalous")
    f1, thr = metrics.best_f1(f1_set)
    row = {
        "dataset": cfg.dataset.name,
        "normal_classes": "+".join(str(c) for c in cfg.protocol.normal_classes),
        "protocol": cfg.protocol.kind,
        "variant": cfg.train.variant,
        "auc": f"{metrics.roc_auc(scores, labels):.4f}",
        "f1": f"{f1:.4f}",
        "f1_threshold": repr(thr),
        "fpr_at_99.5_tpr": f"{metrics.fpr_at_tpr(scores, labels, 0.995):.4f}",
        "n_train": len(split.train_normals),
        "n_test": len(split.test_samples),
        "n_test_anomalous": int(labels.sum()),
    }
    return row, scores


def _write_rows(path, fields, rows):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)


def write_scores(path, split, scores):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "label", "anomalous", "score"])
        for i, (lab, anom, s) in enumerate(zip(split.test_samples.labels, split.test_anomalous, scores)):
            w.writerow([i, int(lab), int(anom), repr(float(s))])


def cmd_eval(model_path, cfg: ExperimentConfig) -> int:
    ae = load_model(model_path)
    split = build_split(cfg)
    _check_dims(ae, split)
    row, scores = evaluate(ae, cfg, split)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "eval.csv", EVAL_FIELDS, [row])
    write_scores(out / "scores.csv", split, scores)
    print(",".join(str(row[k]) for k in EVAL_FIELDS))
    return EXIT_OK


def attacked_auc(ae, split, epsilon, steps=10):
    """AUC after replacing every normal test sample by an adversarial copy.

    The attack maximises the anomaly score of the perturbed input under an
    l-inf budget, so normal scores can only rise.
    """
    scores = anomaly_score(ae, split.test_samples)
    normal_idx = np.flatnonzero(~split.test_anomalous)
    spec = PerturbationSpec("recon_linf", epsilon, steps=steps, target="self")
    x_adv, adv_scores = attack_batch(ae, split.test_samples.pixels[normal_idx], spec)
    attacked = scores.copy()
    attacked[normal_idx] = anomaly_score(ae, x_adv)
    return metrics.roc_auc(attacked, split.test_anomalous), metrics.roc_auc(scores, split.test_anomalous)


def cmd_attack_eval(model_path, cfg: ExperimentConfig) -> int:
    ae = load_model(model_path)
    split = build_split(cfg)
    _check_dims(ae, split)
    rows = []
    for eps in cfg.attack_epsilons:
        auc, clean = attacked_auc(ae, split, eps, cfg.attack_steps)
        rows.append({"epsilon": eps, "attacked_auc": f"{auc:.4f}", "clean_auc": f"{clean:.4f}",
                     "n_attacked": int((~split.test_anomalous).sum())})
        print(f"epsilon={eps}: attacked AUC {auc:.4f} (clean {clean:.4f})")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "attack_eval.csv", ("epsilon", "attacked_auc", "clean_auc", "n_attacked"), rows)
    return EXIT_OK


def write_pgm(path, pixels, height, width):
    img = np.rint(np.clip(pixels, 0.0, 1.0) * 255).astype(np.uint8).reshape(height, width)
    Path(path).write_bytes(f"P5\n{width} {height}\n255\n".encode() + img.tobytes())


def write_ppm(path, rgb):
    h, w, _ = rgb.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + rgb.astype(np.uint8).tobytes())


def cmd_saliency(model_path, cfg: ExperimentConfig, index=0, count=5, noise=0.4) -> int:
    ae = load_model(model_path)
    split = build_split(cfg)
    _check_dims(ae, split)
    rng = cfg.rng("interpret")
    normals = split.test_normals
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h, w = normals.shape
    for k in range(index, min(index + count, len(normals))):
        x = normals.pixels[k]
        if noise > 0:
            x = np.clip(x + rng.uniform(0.0, noise, size=x.shape), 0.0, 1.0)
        smap = occlusion1(ae, x, (h, w))
        write_pgm(out / f"input_{k}.pgm", x, h, w)
        write_pgm(out / f"recon_{k}.pgm", reconstruct(ae, x), h, w)
        write_ppm(out / f"saliency_{k}.ppm", smap.rgb())
        np.savetxt(out / f"saliency_{k}.csv", smap.deltas.reshape(h, w), delimiter=",", fmt="%.17g")
    return EXIT_OK


def cmd_minima(model_path, cfg: ExperimentConfig, count=4, lr=0.1, max_iters=2000, tol=1e-8,
               shape=None) -> int:
    ae = load_model(model_path)
    if shape is None:
        side = int(round(np.sqrt(ae.input_dim)))
        shape = (side, side) if side * side == ae.input_dim else (1, ae.input_dim)
    rng = cfg.rng("interpret")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for k in range(count):
        x, losses = local_minimum(ae, rng, lr, max_iters, tol)
        write_pgm(out / f"minimum_{k}.pgm", x, *shape)
        rows.append({"index": k, "iterations": len(losses) - 1,
                     "initial_loss": repr(losses[0]), "final_loss": repr(losses[-1])})
    _write_rows(out / "minima.csv", ("index", "iterations", "initial_loss", "final_loss"), rows)
    return EXIT_OK


def _sweep_job(payload):
    cfg_dict, model_only = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    cmd_train(cfg)
    if not model_only:
        cmd_eval(Path(cfg.out_dir) / MODEL_FILE, cfg)
    return cfg.out_dir


def cmd_sweep(cfg: ExperimentConfig, class_sets, jobs=1) -> int:
    """Train and evaluate one run per normal-class set, each in its own directory."""
    root = Path(cfg.out_dir)
    payloads = []
    for cs in class_sets:
        sub = ExperimentConfig.from_dict(cfg.to_dict())
        sub.protocol.normal_classes = _classes(cs)
        sub.out_dir = str(root / ("class_" + "+".join(map(str, sub.protocol.normal_classes))))
        payloads.append((sub.to_dict(), False))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            dirs = list(pool.map(_sweep_job, payloads))
    else:
        dirs = [_sweep_job(p) for p in payloads]
    rows = []
    for d in dirs:
        with open(Path(d) / "eval.csv", newline="") as f:
            rows.extend(csv.DictReader(f))
    _write_rows(root / "summary.csv", EVAL_FIELDS, rows)
    return EXIT_OK


# argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arae", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=False):
        sp.add_argument("--config", help="experiment config JSON")
        sp.add_argument("--preset", help="named preset: bars, mnist8-mini, mnist8-full")
        sp.add_argument("--data-dir")
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--normal-classes", help="comma separated, e.g. 8 or 4,5")
        if model:
            sp.add_argument("--model", required=True)

    t = sub.add_parser("train", help="train a model")
    common(t)
    t.add_argument("--epsilon", type=float)
    t.add_argument("--gamma", type=float)
    t.add_argument("--variant", choices=("arae", "arae_a", "arae_r", "dae", "plain"))
    t.add_argument("--epochs", type=int)
    t.add_argument("--sweep", nargs="+", metavar="CLASSES",
                   help="one run per class set (use 4+5 for pairs); runs eval too")
    t.add_argument("--jobs", type=int, default=1)

    e = sub.add_parser("eval", help="score a trained model")
    common(e, model=True)

    a = sub.add_parser("attack-eval", help="AUC with adversarially perturbed normals")
    common(a, model=True)
    a.add_argument("--epsilon", dest="eps_list", help="comma separated budgets")

    s = sub.add_parser("saliency", help="occlusion-1 saliency maps")
    common(s, model=True)
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--count", type=int, default=5)
    s.add_argument("--noise", type=float, default=0.4, help="Uniform[0, noise] input noise")

    m = sub.add_parser("minima", help="local minima of the reconstruction error")
    common(m, model=True)
    m.add_argument("--count", type=int, default=4)
    m.add_argument("--lr", type=float, default=0.1)
    m.add_argument("--max-iters", type=int, default=2000)
    m.add_argument("--tol", type=float, default=1e-8)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "train":
            if args.sweep:
                return cmd_sweep(cfg, args.sweep, args.jobs)
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(args.model, cfg)
        if args.command == "attack-eval":
            return cmd_attack_eval(args.model, cfg)
        if args.command == "saliency":
            return cmd_saliency(args.model, cfg, args.index, args.count, args.noise)
        return cmd_minima(args.model, cfg, args.count, args.lr, args.max_iters, args.tol)
    except (ConfigurationError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFileError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(run())
