"""
Main entry point for the MOHSA toolkit.
Provides command-line interface for schedules, cost accounting, training,
evaluation, numerical checks and plotting.
"""

import argparse
import sys
from pathlib import Path

from config.settings import MohsaError, settings


def cmd_schedule(args) -> int:
    from src.attention import build_schedule, parse_policy
    from src.models import load_model_config

    depth, head_dim = args.depth, args.head_dim
    if args.model:
        cfg = load_model_config(args.model)
        depth = depth or cfg.depth
        head_dim = head_dim or cfg.head_dim
    schedule = build_schedule(parse_policy(args.policy), depth or 12, head_dim or 16)
    print(schedule.format())
    return 0


def cmd_count(args) -> int:
    from src.models import load_model_config
    from src.tools.accounting import CSV_HEADER, cost_report, csv_row, render_report, render_variant_table

    overrides = {}
    if args.targets:
        overrides["targets"] = args.targets
    if args.policies:
        rows = []
        for policy in [p.strip() for p in args.policies.split(",") if p.strip()]:
            cfg = load_model_config(args.model, {**overrides, "policy": policy})
            rows.append((policy, cost_report(cfg, args.image_size)))
        print(render_variant_table(rows))
        return 0

    if args.policy:
        overrides["policy"] = args.policy
    cfg = load_model_config(args.model, overrides)
    report = cost_report(cfg, args.image_size)
    title = f"{args.model}  policy={cfg.policy}  targets={cfg.targets}  image={report.image_size}"
    print(render_report(report, title, detailed=args.detailed))
    print()
    print(CSV_HEADER)
    print(csv_row(Path(args.model).stem, cfg, report))
    return 0


def cmd_train(args) -> int:
    from src.models import load_model_config, load_train_config
    from src.trainer import Trainer

    train_cfg = load_train_config(args.train)
    updates = {}
    if args.model:
        updates["model"] = args.model
    if args.output:
        updates["output_dir"] = args.output
    if updates:
        train_cfg = train_cfg.model_copy(update=updates)
    model_overrides = {"policy": args.policy} if args.policy else None
    model_cfg = load_model_config(train_cfg.model, model_overrides)

    result = Trainer(train_cfg, model_cfg).train()
    final_train, final_val = result.records[-2], result.records[-1]
    print(f"\n📊 Training Summary:")
    print(f"✅ Epochs: {train_cfg.epochs}")
    print(f"📉 Final train loss: {final_train.loss:.4f}  acc: {final_train.acc:.4f}")
    print(f"🎯 Final val loss: {final_val.loss:.4f}  acc: {final_val.acc:.4f}")
    print(f"🏆 Best val acc: {result.best_val_acc:.4f} (epoch {result.best_epoch})")
    print(f"📁 Metrics: {result.paths.metrics_csv}")
    return 0


def cmd_eval(args) -> int:
    from src.trainer import evaluate

    record = evaluate(args.ckpt, args.data, args.batch_size)
    print(f"epoch={record.epoch} loss={record.loss:.6f} acc={record.acc:.6f}")
    return 0


def cmd_gradcheck(args) -> int:
    from src.models import load_model_config
    from src.tools.oracle import SWEEPS, format_results, gradcheck_model, gradcheck_sweep, require_passed

    if args.scale in ("tiny", "all"):
        results = gradcheck_model(load_model_config(args.model), seed=args.seed)
        print(format_results(results, f"end-to-end gradcheck ({args.model})"))
        require_passed(results, "end-to-end gradcheck")
    if args.scale in ("layer", "all"):
        results = gradcheck_sweep(SWEEPS[args.sweep])
        print(format_results(results, f"MOHSA layer gradcheck ({args.sweep} sweep)"))
        require_passed(results, "MOHSA layer gradcheck")
    return 0


def cmd_oracle(args) -> int:
    from src.models import load_model_config
    from src.tools.oracle import SWEEPS, degeneracy_check, forward_sweep, format_results, model_forward_check, require_passed

    sections = [
        ("MOHSA vs scalar oracle", forward_sweep(SWEEPS[args.sweep])),
        ("o=0 vs reference MHSA (bitwise)", degeneracy_check(args.degeneracy_cases)),
        ("ViT forward vs scalar oracle", [model_forward_check(load_model_config(args.model))]),
    ]
    for title, results in sections:
        print(format_results(results, title))
    for title, results in sections:
        require_passed(results, title)
    return 0


def cmd_plot(args) -> int:
    from src.tools.plotting import render_curves
    from src.utils.file_manager import file_manager

    svg = render_curves(args.csv, title=args.title, metric=args.metric)
    out = file_manager.save_text(Path(args.out), svg)
    print(f"📁 Plot saved: {out}")
    return 0


def cmd_models(args) -> int:
    from src.models import load_model_config

    print("📋 Model presets:")
    for name in settings.get_available_presets():
        cfg = load_model_config(name)
        print(f"  {name:<10} image {cfg.image_size}/{cfg.patch_size}  dim {cfg.dim}  depth {cfg.depth}  "
              f"heads {cfg.heads}  classes {cfg.num_classes}")
    return 0


def setup_environment() -> bool:
    """Check configuration and create the results tree."""
    from src.utils.file_manager import file_manager

    print("🔧 Setting up MOHSA toolkit...")
    env_file = Path(__file__).parent / ".env"
    if not env_file.exists():
        print("ℹ️ No .env file; using defaults (copy config/env.example to .env to change them)")
    file_manager.create_directories()
    print(f"✅ Results directory: {settings.results_dir}")
    print(f"📂 Data directory: {settings.data_dir}")
    print(f"🧵 Evaluation workers: {settings.max_workers}")
    return True


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="MOHSA: multi-overlapped-head self-attention toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Overlap dims per layer
  python main.py schedule "inc-0 (2)" --depth 12

  # Params / FLOPs of ViT-Tiny with half overlap
  python main.py count --model vit-tiny --policy "fixed half"

  # Params / FLOPs for several policies at once
  python main.py count --model vit-tiny --policies "original,fixed 1,fixed half,inc-0 (1)"

  # Train on CIFAR-10 or synthetic data
  python main.py train --train config/train_cifar10.cfg --model config/vit_micro_fixed1.cfg --output results/runs/cifar10-fixed1
  python main.py train --train config/train_synthetic.cfg

  # Evaluate a checkpoint
  python main.py eval --ckpt results/runs/default/checkpoints/best.ckpt --data data/cifar-10-batches-bin

  # Numerical checks
  python main.py gradcheck --scale tiny
  python main.py oracle --sweep small

  # Accuracy curves
  python main.py plot --csv runs/o0/metrics.csv runs/fixed1/metrics.csv --out curves.svg
        """
    )

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    schedule_parser = subparsers.add_parser('schedule', help='Print the overlap dimension of every layer')
    schedule_parser.add_argument('policy', help='fixed <k> | fixed half | inc-<0|1> (<x>) | dec-<0|1> (<x>)')
    schedule_parser.add_argument('--depth', type=int, help='Number of layers (default 12)')
    schedule_parser.add_argument('--head-dim', type=int, help='Head width (default 16)')
    schedule_parser.add_argument('--model', help='Preset or model config supplying depth and head width')
    schedule_parser.set_defaults(handler=cmd_schedule)

    count_parser = subparsers.add_parser('count', help='Exact params and MACs')
    count_parser.add_argument('--model', required=True, help='Preset name or model config file')
    count_parser.add_argument('--policy', help='Override the schedule policy')
    count_parser.add_argument('--policies', help='Comma-separated policies for a variant table')
    count_parser.add_argument('--targets', help='Override the overlap targets (QKV, QK, V)')
    count_parser.add_argument('--image-size', type=int, help='Image size for MACs (default: model image size)')
    count_parser.add_argument('--detailed', action='store_true', help='Show every component')
    count_parser.set_defaults(handler=cmd_count)

    train_parser = subparsers.add_parser('train', help='Train a model')
    train_parser.add_argument('--train', required=True, help='Train config file')
    train_parser.add_argument('--model', help='Preset or model config (overrides the train config)')
    train_parser.add_argument('--policy', help='Override the schedule policy')
    train_parser.add_argument('--output', help='Run directory (overrides the train config)')
    train_parser.set_defaults(handler=cmd_train)

    eval_parser = subparsers.add_parser('eval', help='Evaluate a checkpoint')
    eval_parser.add_argument('--ckpt', required=True, help='Checkpoint file')
    eval_parser.add_argument('--data', required=True, help='CIFAR-10 directory or SYNTHETIC')
    eval_parser.add_argument('--batch-size', type=int, default=256)
    eval_parser.set_defaults(handler=cmd_eval)

    gradcheck_parser = subparsers.add_parser('gradcheck', help='Analytic vs central-difference gradients')
    gradcheck_parser.add_argument('--scale', choices=['tiny', 'layer', 'all'], default='tiny')
    gradcheck_parser.add_argument('--model', default='vit-toy', help='Model for the end-to-end check')
    gradcheck_parser.add_argument('--sweep', choices=['small', 'smoke'], default='small')
    gradcheck_parser.add_argument('--seed', type=int, default=settings.default_seed)
    gradcheck_parser.set_defaults(handler=cmd_gradcheck)

    oracle_parser = subparsers.add_parser('oracle', help='Engine vs scalar-loop references')
    oracle_parser.add_argument('--sweep', choices=['small', 'smoke'], default='small')
    oracle_parser.add_argument('--model', default='vit-toy', help='Model for the end-to-end forward check')
    oracle_parser.add_argument('--degeneracy-cases', type=int, default=50)
    oracle_parser.set_defaults(handler=cmd_oracle)

    plot_parser = subparsers.add_parser('plot', help='Render metrics CSVs as SVG curves')
    plot_parser.add_argument('--csv', nargs='+', required=True, help='One or more metrics.csv files')
    plot_parser.add_argument('--out', required=True, help='Output SVG path')
    plot_parser.add_argument('--metric', choices=['acc', 'loss'], default='acc')
    plot_parser.add_argument('--title', default='Accuracy during training')
    plot_parser.set_defaults(handler=cmd_plot)

    model_parser = subparsers.add_parser('models', help='Model presets')
    model_parser.add_argument('--list', action='store_true', required=True, help='List model presets')
    model_parser.set_defaults(handler=cmd_models)

    setup_parser = subparsers.add_parser('setup', help='Setup and check configuration')
    setup_parser.set_defaults(handler=lambda args: 0 if setup_environment() else 1)

    return parser


def main(argv=None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 1

    try:
        return args.handler(args)
    except MohsaError as e:
        from src.utils.logger import run_logger
        run_logger.log_error(args.command, str(e), type(e).__name__)
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
