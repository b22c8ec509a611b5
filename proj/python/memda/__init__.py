"""Memory-based drift adaptation for multivariate urban time-series forecasting.

Thin wrapper over the compiled extension. Typical flow::

    import memda

    series = memda.generate(drift_kind="sudden", drift_time=480, magnitude=2.0,
                            base_period=24, noise_std=0.1, n_nodes=8, n_days=30, seed=1)
    data = memda.prepare_dataset(series, train_end=384, val_fraction=0.2, alpha=12, K=2)
    model = memda.Model(memda.ModelConfig(variant="memda", alpha=12, K=2,
                                          C_e=64, hidden=32, L=8, D=16, seed=1))
    history = memda.train(model, data, memda.TrainConfig(max_epochs=40, seed=1))
    report = memda.evaluate_online(model, data, metrics_from=480)
"""

from ._core import (
    ConfigError,
    Dataset,
    DriftAwareInput,
    Model,
    ModelConfig,
    Series,
    ShapeError,
    TrainConfig,
    WindowError,
    build_input,
    earliest_anchor,
    evaluate_copy_last_day,
    evaluate_online,
    generate,
    load_checkpoint,
    load_csv,
    prepare_dataset,
    save_checkpoint,
    save_csv,
    train,
    variant_names,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "DriftAwareInput",
    "Model",
    "ModelConfig",
    "Series",
    "ShapeError",
    "TrainConfig",
    "WindowError",
    "build_input",
    "earliest_anchor",
    "evaluate_copy_last_day",
    "evaluate_online",
    "generate",
    "load_checkpoint",
    "load_csv",
    "prepare_dataset",
    "save_checkpoint",
    "save_csv",
    "train",
    "variant_names",
]
