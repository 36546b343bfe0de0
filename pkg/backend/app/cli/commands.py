"""
Command-line interface
train | prune-direct | prune-progressive | eval | export-sparse | report | compare
"""

import argparse
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional

from ..config import get_settings
from ..errors import (
    BudgetError, CheckpointError, ConfigError, DatasetFormatError, InvariantError, NumericError,
    ShapeMismatchError,
)
from ..metrics import write_metrics
from ..model_io.checkpoint import Checkpoint, CheckpointMeta, load_checkpoint, save_checkpoint
from ..model_io.report import render_csv, render_text, report_from_spec
from ..model_io.sparse import export_sparse, save_sparse
from ..nn_core.training import evaluate
from ..pruning.progressive import run_progressive
from ..schemas import (
    ComparisonRecord, CurvePoint, EpochRecord, EvalRecord, IndexMode, PhaseRecord, RunConfig, StageRecord,
)
from ..utils import atomic_write_text, format_bytes, format_rate
from .comparison import compare
from .experiments import (
    accuracy_drop, fit_splits, load_config, load_splits, phase_rows, run_direct, train_baseline,
)

settings = get_settings()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _seed(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def _config(args) -> RunConfig:
    return load_config(args.config, args.seed)


def _out_dir(args, config: RunConfig) -> Path:
    out = Path(args.out) if args.out else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finite_rate(model) -> float:
    """Achieved rate, with an emptied model recorded at its total weight count"""
    rate = model.achieved_rate
    return rate if math.isfinite(rate) else float(model.net.weight_count())


def _require_input(args) -> Checkpoint:
    if not args.input:
        raise ConfigError(f"{args.command} needs --in <checkpoint>")
    return load_checkpoint(args.input)


# ============ Commands ============

def cmd_train(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    splits = load_splits(config.dataset)
    net, splits, rows = train_baseline(config, splits)

    val = evaluate(net, splits.val)
    test = evaluate(net, splits.test) if splits.test is not None else None
    meta = CheckpointMeta(
        seed=config.seed,
        stage="dense",
        val_accuracy=val.accuracy,
        test_accuracy=test.accuracy if test is not None else None,
        baseline_val_accuracy=val.accuracy,
        baseline_test_accuracy=test.accuracy if test is not None else None,
    )
    save_checkpoint(Checkpoint(net, metadata=meta), out / "baseline.ckpt")
    write_metrics(out / "train_metrics.csv", rows, EpochRecord)
    print(f"val_acc={val.accuracy:.4f}" + (f" test_acc={test.accuracy:.4f}" if test is not None else ""))
    return EXIT_OK


def cmd_prune_direct(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    ckpt = _require_input(args)
    splits = fit_splits(load_splits(config.dataset), ckpt.net.input_shape)

    outcome = run_direct(ckpt.net, config, splits)
    base = ckpt.metadata
    accuracy_drop(base.baseline_test_accuracy, outcome.test_accuracy, "test")
    accuracy_drop(base.baseline_val_accuracy, outcome.val_accuracy, "validation")
    meta = CheckpointMeta(
        seed=config.seed,
        stage="direct",
        rate=config.budget.rate or _finite_rate(outcome.model),
        val_accuracy=outcome.val_accuracy,
        test_accuracy=outcome.test_accuracy,
        baseline_val_accuracy=base.baseline_val_accuracy,
        baseline_test_accuracy=base.baseline_test_accuracy,
    )
    save_checkpoint(Checkpoint.from_model(outcome.model, meta, outcome.admm_state), out / "pruned.ckpt")
    write_metrics(out / "direct_metrics.csv", phase_rows(outcome), PhaseRecord)
    print(f"rate={format_rate(outcome.model.achieved_rate)} val_acc={outcome.val_accuracy:.4f}"
          + (f" test_acc={outcome.test_accuracy:.4f}" if outcome.test_accuracy is not None else ""))
    return EXIT_OK


def cmd_prune_progressive(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    ckpt = _require_input(args)
    splits = fit_splits(load_splits(config.dataset), ckpt.net.input_shape)

    result = run_progressive(ckpt.net, config.schedule, config.prune_config(), splits)
    base = ckpt.metadata
    final = result.final
    accuracy_drop(base.baseline_test_accuracy, final.outcome.test_accuracy, "test")

    def meta_for(entry, stage: str) -> CheckpointMeta:
        return CheckpointMeta(
            seed=config.seed,
            stage=stage,
            rate=entry.rate,
            val_accuracy=entry.val_accuracy,
            test_accuracy=entry.outcome.test_accuracy if entry.outcome else None,
            baseline_val_accuracy=base.baseline_val_accuracy,
            baseline_test_accuracy=base.baseline_test_accuracy,
            lineage=entry.lineage,
        )

    for entry in result.pool.entries:
        save_checkpoint(Checkpoint.from_model(entry.model, meta_for(entry, entry.stage.stage_kind.value)),
                        out / f"pool_{entry.rate:g}x.ckpt")
    save_checkpoint(Checkpoint.from_model(final.model, meta_for(final, "progressive")), out / "progressive.ckpt")
    write_metrics(out / "history.csv", result.history, StageRecord)
    print(f"rate={format_rate(final.model.achieved_rate)} lineage={final.lineage} val_acc={final.val_accuracy:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _config(args)
    ckpt = _require_input(args)
    splits = fit_splits(load_splits(config.dataset), ckpt.net.input_shape)
    rows: List[EvalRecord] = []
    for name, data in (("val", splits.val), ("test", splits.test)):
        if data is None:
            continue
        result = evaluate(ckpt.net, data)
        rows.append(EvalRecord(split=name, samples=len(data), loss=result.loss, accuracy=result.accuracy))
        print(f"{name}: loss={result.loss:.6f} accuracy={result.accuracy:.4f}")
    if args.out:
        write_metrics(_out_dir(args, config) / "eval.csv", rows, EvalRecord)
    return EXIT_OK


def cmd_export_sparse(args) -> int:
    ckpt = _require_input(args)
    out = Path(args.out) if args.out else Path(args.input).parent
    sparse = export_sparse(ckpt.net)
    save_sparse(sparse, out / "sparse.bin")
    print(f"{sparse.nnz} nonzero weights in {len(sparse.layers)} layers")
    return EXIT_OK


def cmd_report(args) -> int:
    config = _config(args)
    ckpt = _require_input(args)
    overrides = {}
    if args.weight_bits is not None:
        overrides["weight_bits"] = args.weight_bits
    if args.index_mode:
        overrides["index_mode"] = IndexMode(args.index_mode)
    report = report_from_spec(ckpt.net, config.report.model_copy(update=overrides))
    print(render_text(report))
    print(f"Total data size {format_bytes(report.data_bytes)} / compress rate {format_rate(report.rate)}; "
          f"total size w. index {format_bytes(report.total_bytes)}")
    if args.out:
        out = Path(args.out)
        atomic_write_text(out / "report.csv", render_csv(report))
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    splits = load_splits(config.dataset)
    dense = load_checkpoint(args.input).net if args.input else None
    result = compare(config, splits, dense)
    write_metrics(out / "comparison.csv", result.records, ComparisonRecord)
    write_metrics(out / "curves.csv", result.curves, CurvePoint)
    for method, medians in result.summary().items():
        print(f"{method}: median final train loss {medians['final_train_loss']:.6f}, "
              f"median val accuracy {medians['val_accuracy']:.4f}")
    return EXIT_OK


COMMANDS: Dict[str, Callable] = {
    "train": cmd_train,
    "prune-direct": cmd_prune_direct,
    "prune-progressive": cmd_prune_progressive,
    "eval": cmd_eval,
    "export-sparse": cmd_export_sparse,
    "report": cmd_report,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="run.py",
        description=f"{settings.APP_NAME}: ADMM weight pruning with a progressive pool schedule",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="RunConfig JSON document")
        p.add_argument("--in", dest="input", type=Path, default=None, help="Input checkpoint")
        p.add_argument("--out", type=Path, default=None, help="Output directory")
        p.add_argument("--seed", type=_seed, default=None, help="Run seed (unsigned 64-bit)")
        if name == "report":
            p.add_argument("--weight-bits", type=int, default=None, help="Bits per stored weight")
            p.add_argument("--index-mode", choices=[m.value for m in IndexMode], default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code"""
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, BudgetError, ShapeMismatchError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except DatasetFormatError as e:
        logger.error(f"Dataset error: {e}")
        return EXIT_CONFIG
    except (NumericError, InvariantError) as e:
        logger.error(f"Numeric failure: {e}")
        return EXIT_NUMERIC
    except (CheckpointError, OSError) as e:
        logger.error(f"I/O failure: {e}")
        return EXIT_IO
