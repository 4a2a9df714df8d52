"""Command-line entry point: make-gt, train, infer, eval, colorize.

Exit codes are a stable scripting contract: 0 success, 1 usage error,
2 data error (unreadable/malformed inputs), 3 internal error.
"""

import os

# Cap BLAS pools before numpy loads; also caps our own worker threads.
_THREADS = os.environ.get("SCENEEDNET_THREADS")
if _THREADS:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = _THREADS

import argparse
import logging
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .dataset import (
    SPLITS,
    RecordDataset,
    index_dataset,
    load_flow_and_disparity,
    load_sample,
    read_camera_config,
)
from .geometry import reconstruct_scene_flow
from .images import normalize_rgb, read_rgb, write_png
from .network import build_network, default_network_spec, load_checkpoint, save_checkpoint
from .ops import concat_channels
from .pfm import read_pfm_file, write_pfm_file
from .training import TrainConfig, fit, masked_epe
from .validation import CheckpointError, DataError, ParseError
from .viz import colorize_field

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def worker_count() -> int:
    if _THREADS:
        return max(1, int(_THREADS))
    return max(1, os.cpu_count() or 1)


def build_parser() -> _Parser:
    parser = _Parser(prog="sceneednet", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("make-gt", help="reconstruct scene-flow ground truth for a dataset tree")
    p.add_argument("--root", required=True, help="dataset root directory")
    p.add_argument("--camera", required=True, help="camera config file")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="train from scratch")
    p.add_argument("--root", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--out", required=True, help="checkpoints and log directory")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--momentum", type=float, default=0.5)
    p.add_argument("--decay", type=float, default=None)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-root", default=None, help="root whose val split is scored per epoch")

    p = sub.add_parser("infer", help="predict one stereo pair")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--left-t", required=True)
    p.add_argument("--right-t", required=True)
    p.add_argument("--left-t1", required=True)
    p.add_argument("--right-t1", required=True)
    p.add_argument("--out", required=True, help="output PFM path")

    p = sub.add_parser("eval", help="mean 3D end-point error")
    p.add_argument("--checkpoint")
    p.add_argument("--root")
    p.add_argument("--camera")
    p.add_argument("--pred-dir")
    p.add_argument("--gt-dir")

    p = sub.add_parser("colorize", help="render a 3-channel field as per-axis PNGs")
    p.add_argument("--field", required=True, help="3-channel PFM path")
    p.add_argument("--out-prefix", required=True)
    return parser


def _load_input_tensor(paths) -> np.ndarray:
    images = []
    shape = None
    for path in paths:
        img = read_rgb(path)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise DataError(f"{path}: resolution {img.shape[1:]} != {shape[1:]}")
        images.append(normalize_rgb(img))
    return concat_channels(images)


def cmd_make_gt(args) -> int:
    config = read_camera_config(args.camera)
    root = Path(args.root)
    out = Path(args.out)
    jobs = []
    for split in SPLITS:
        if not (root / split).is_dir():
            continue
        try:
            jobs.extend((split, rec) for rec in index_dataset(root, split))
        except DataError as e:
            logger.warning("%s", e)
    if not jobs:
        raise DataError(f"no usable samples under {root}")

    def process(job):
        split, rec = job
        isf = load_flow_and_disparity(rec, config.negate_disparity)
        field = reconstruct_scene_flow(isf.u, isf.v, isf.d0, isf.d1, config.intrinsics)
        base = out / split / rec.scene
        flow_path = base / "scene_flow" / "left" / f"{rec.frame}.pfm"
        valid_path = base / "scene_flow_valid" / "left" / f"{rec.frame}.pfm"
        flow_path.parent.mkdir(parents=True, exist_ok=True)
        valid_path.parent.mkdir(parents=True, exist_ok=True)
        write_pfm_file(flow_path, field.flow.astype(np.float32), -1.0)
        write_pfm_file(valid_path, field.valid.astype(np.float32)[None], -1.0)

    written = 0
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        for job, result in zip(jobs, pool.map(lambda j: _try(process, j), jobs)):
            if result is None:
                written += 1
            else:
                logger.warning("skipping %s/%s: %s", job[1].scene, job[1].frame, result)
    if written == 0:
        raise DataError("no ground-truth fields could be written")
    print(f"wrote {written} scene-flow fields")
    return EXIT_OK


def _try(fn, arg):
    try:
        fn(arg)
        return None
    except Exception as e:  # reported per record, not fatal
        return e


def cmd_train(args) -> int:
    config = read_camera_config(args.camera)
    dataset = RecordDataset(index_dataset(args.root, "train"), config)
    val_dataset = None
    if args.val_root is not None:
        val_dataset = RecordDataset(index_dataset(args.val_root, "val"), config)
    cfg = TrainConfig(
        lr0=args.lr,
        momentum=args.momentum,
        epochs=args.epochs,
        decay=args.decay,
        seed=args.seed,
        batch_size=args.batch,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    net = build_network(default_network_spec(), seed=args.seed)

    train_logger = logging.getLogger("sceneednet.training")
    handler = logging.FileHandler(out / "train.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(message)s"))  # no timestamps: log is reproducible
    old_level, old_propagate = train_logger.level, train_logger.propagate
    train_logger.addHandler(handler)
    train_logger.setLevel(logging.INFO)
    train_logger.propagate = False  # epoch lines go to the file and stdout, not stderr
    try:
        net, history = fit(net, dataset, cfg, val_dataset=val_dataset, checkpoint_dir=out)
    finally:
        train_logger.removeHandler(handler)
        train_logger.setLevel(old_level)
        train_logger.propagate = old_propagate
        handler.close()

    final = out / "final.sedn"
    save_checkpoint(final, net, epoch=cfg.epochs)
    for entry in history:
        line = f"epoch={entry['epoch']} lr={entry['lr']:.8g} train_loss={entry['train_loss']:.6f}"
        if "val_loss" in entry:
            line += f" val_loss={entry['val_loss']:.6f}"
        print(line)
    print(f"wrote {final}")
    return EXIT_OK


def cmd_infer(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    x = _load_input_tensor((args.left_t, args.right_t, args.left_t1, args.right_t1))
    start = time.perf_counter()
    out, _ = ck.net.forward(x, want_cache=False)
    elapsed = time.perf_counter() - start
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_pfm_file(out_path, out.astype(np.float32, copy=False), -1.0)
    print(f"forward_seconds={elapsed:.3f}")
    print(f"wrote {out_path}")
    return EXIT_OK


def _eval_checkpoint_mode(args) -> float:
    config = read_camera_config(args.camera)
    ck = load_checkpoint(args.checkpoint)
    records = None
    for split in ("test", "val", "train"):  # first populated split wins
        try:
            records = index_dataset(args.root, split)
            break
        except DataError:
            continue
    if records is None:
        raise DataError(f"no usable samples under {args.root}")
    total = 0.0
    for rec in records:
        sample = load_sample(rec, config)
        out, _ = ck.net.forward(sample.input, want_cache=False)
        total += masked_epe(out, sample.target)
    return total / len(records)


def _eval_dirs_mode(args) -> float:
    pred_dir = Path(args.pred_dir)
    gt_dir = Path(args.gt_dir)
    gt_files = sorted(
        p for p in gt_dir.rglob("*.pfm") if "scene_flow_valid" not in p.parts
    )
    if not gt_files:
        raise DataError(f"no ground-truth PFMs under {gt_dir}")
    scores = []
    for gt_path in gt_files:
        rel = gt_path.relative_to(gt_dir)
        pred_path = pred_dir / rel
        if not pred_path.is_file():
            raise DataError(f"missing prediction for {rel} under {pred_dir}")
        gt, _ = read_pfm_file(gt_path)
        pred, _ = read_pfm_file(pred_path)
        if gt.shape[0] != 3 or pred.shape != gt.shape:
            raise DataError(f"{rel}: prediction/ground-truth shapes {pred.shape} vs {gt.shape}")
        valid = np.ones(gt.shape[1:], dtype=bool)
        if "scene_flow" in rel.parts:
            parts = list(rel.parts)
            parts[parts.index("scene_flow")] = "scene_flow_valid"
            valid_path = gt_dir.joinpath(*parts)
            if valid_path.is_file():
                vmask, _ = read_pfm_file(valid_path)
                valid = vmask[0] > 0.5
        n = int(valid.sum())
        if n == 0:
            continue
        diff = pred.astype(np.float64) - gt.astype(np.float64)
        dist = np.sqrt((diff * diff).sum(axis=0))
        scores.append(float(dist[valid].sum() / n))
    if not scores:
        raise DataError("every ground-truth field is fully invalid")
    return sum(scores) / len(scores)


def cmd_eval(args) -> int:
    ck_mode = args.checkpoint is not None
    dir_mode = args.pred_dir is not None or args.gt_dir is not None
    if ck_mode and not dir_mode:
        if args.root is None or args.camera is None:
            raise _UsageError("eval --checkpoint requires --root and --camera")
        epe = _eval_checkpoint_mode(args)
    elif dir_mode and not ck_mode:
        if args.pred_dir is None or args.gt_dir is None:
            raise _UsageError("eval needs both --pred-dir and --gt-dir")
        epe = _eval_dirs_mode(args)
    else:
        raise _UsageError("eval takes either --checkpoint/--root/--camera or --pred-dir/--gt-dir")
    print(f"epe={epe:.6f}")
    return EXIT_OK


def cmd_colorize(args) -> int:
    tensor, _ = read_pfm_file(args.field)
    if tensor.shape[0] != 3:
        raise DataError(f"{args.field}: expected a 3-channel field, got {tensor.shape[0]}")
    images = colorize_field(tensor.astype(np.float64))
    Path(args.out_prefix).parent.mkdir(parents=True, exist_ok=True)
    for axis, img in images.items():
        write_png(f"{args.out_prefix}_{axis}.png", img)
    print(f"wrote {args.out_prefix}_{{x,y,z}}.png")
    return EXIT_OK


_HANDLERS = {
    "make-gt": cmd_make_gt,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "colorize": cmd_colorize,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required")
        return _HANDLERS[args.command](args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, CheckpointError, DataError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
