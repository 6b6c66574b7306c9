#!/usr/bin/env python3
"""
Example runner for the MOHSA toolkit.
Prints the cost of ViT-Tiny under a few overlap policies, then trains a small
model with and without overlap on synthetic data and plots both runs.
"""

import sys
from pathlib import Path

# Add the repository root to the Python path
sys.path.insert(0, str(Path(__file__).parent))


def run_example() -> bool:
    """Run the desk-scale demonstration."""
    from config.settings import MohsaError, settings
    from src.models import TrainConfig, load_model_config
    from src.tools.accounting import cost_report, render_variant_table
    from src.tools.plotting import render_curves
    from src.trainer import train
    from src.utils.file_manager import file_manager

    print("🚀 MOHSA toolkit - Example Runner")
    print("=" * 60)

    print("\n📐 ViT-Tiny cost per overlap policy (image 224):")
    rows = [(p, cost_report(load_model_config("vit-tiny", {"policy": p}))) for p in
            ("original", "fixed 1", "fixed half", "inc-0 (1)", "dec-1 (1)")]
    print(render_variant_table(rows))

    runs_dir = settings.results_dir / "runs" / "example"
    csvs = []
    try:
        for label, policy in (("original", "fixed 0"), ("fixed-1", "fixed 1")):
            print(f"\n🧪 Training toy model, policy {policy!r} ...")
            model_cfg = load_model_config("vit-micro", {"policy": policy, "depth": 2, "dim": 48})
            train_cfg = TrainConfig(epochs=4, warmup_epochs=1, batch_size=64, base_lr=2e-3, scale_lr=False,
                                    synthetic_train=512, synthetic_val=256, synthetic_snr=8.0,
                                    output_dir=str(runs_dir / label))
            result = train(train_cfg, model_cfg)
            csvs.append(result.paths.metrics_csv)
            print(f"✅ val acc {result.records[-1].acc:.3f}")
    except MohsaError as e:
        print(f"❌ Example failed: {e}")
        return False

    svg = file_manager.save_text(file_manager.plot_path("example_curves.svg"), render_curves(csvs))
    print(f"\n📁 Curves saved: {svg}")
    return True


def main():
    """Main entry point for example runner."""
    try:
        success = run_example()
        if success:
            print("\n🎉 Example completed! Check the results/ directory for outputs.")
        else:
            print("\n⚠️ Example encountered issues. Please check configuration.")
            sys.exit(1)
    except KeyboardInterrupt:
        print("\n⏹️ Example interrupted by user.")
        sys.exit(0)


if __name__ == "__main__":
    main()
