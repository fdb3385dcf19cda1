"""
Per-tensor update policies on a small MLP
=========================================

A two-layer classifier on Gaussian blobs, trained with AdamW entirely in
BF16. Each parameter tensor can use its own update policy; here the weight
matrices use Kahan summation and the biases stochastic rounding.
"""

import tempfile

from lprec.errors import ConfigError
from lprec.floatsim import BF16
from lprec.harness import ExperimentConfig, run_experiment
from lprec.optim import AdamWConfig, quantize_hparams

# beta2 = 0.999 is not a BF16 value and rounds to exactly 1, which would
# freeze the second moment; the nearest usable value is 0.99609375
try:
    quantize_hparams(AdamWConfig(beta2=0.999), BF16)
except ConfigError as exc:
    print("rejected:", exc)

cfg = ExperimentConfig.for_kind(
    "mlp-demo",
    optimizer="adamw",
    optimizer_config={"lr": 0.01, "beta1": 0.875, "beta2": 0.99609375, "eps": 1e-6},
    policy="kahan",
    policy_overrides={"b1": "stochastic", "b2": "stochastic"},
    steps=1000,
    log_every=10,
)
with tempfile.TemporaryDirectory() as out:
    for arm in run_experiment(cfg, out).arms:
        print(arm.summary_line())
