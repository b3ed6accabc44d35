"""Run the four experiment protocols at toy scale and show the aggregate tables.

Result CSVs land in ./demo_results; rerunning reproduces them byte for byte.
"""
from gesturehmm.experiments import (ExperimentConfig, compare_orders, crossval, sweep_complexity,
                                    sweep_training_size)
from gesturehmm.synth import chain_config

config = ExperimentConfig(synth=chain_config(seed=3, noise_std=3.0, gestures_per_session=20), synth_sessions=40,
                          train_per_class=12, test_per_class=12, n_states=[2, 4], n_mix=[1, 2], repetitions=2,
                          train_sizes=[4, 12], size_repetitions=2, fixed_n_states=4, fixed_n_mix=1,
                          orders=[0, 1, 2], folds=4, max_iter=20, output_dir="demo_results")

for fn in (sweep_complexity, sweep_training_size, compare_orders, crossval):
    result = fn(config)
    print(f"\n{fn.__name__}")
    for row in result.aggregate:
        print(f"  N={row['n_states']} M={row['n_mix']} size={row['train_size'] or '-'} order={row['order']}: "
              f"{float(row['accuracy_mean']):.3f} +/- {float(row['accuracy_std']):.3f} over {row['runs']} runs")
