"""SpiralMLP: spiral-offset token mixing on a small self-contained numpy stack.

Set ``SPIRALMLP_THREADS`` before launching to pin the BLAS thread count; the
variable is propagated to the usual knobs here, before numpy first loads.
"""

import os as _os

_threads = _os.environ.get("SPIRALMLP_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .offsets import (OffsetTable, Rounding, SpiralConfig, amplitude,  # noqa: E402
                      amplitude_partitioned, axial_offsets, cycle_offsets,
                      random_offsets, spiral_offsets)
from .tensor import Module, Parameter  # noqa: E402
from . import ops  # noqa: E402
from .gradcheck import grad_check, grad_check_fn  # noqa: E402
from .spiral_fc import SpiralFC, masked_conv_oracle, receptive_field, spiral_fc_macs  # noqa: E402
from .blocks import ChannelMixing, MergeHead, SpiralBlock, SpiralMixing  # noqa: E402
from .model import (ModelConfig, SpiralMLPModel, StageConfig, build,  # noqa: E402
                    config_from_dict, config_to_dict, model_forward,
                    param_count, preset)
from .data import Dataset, load_cifar10, synth_dataset  # noqa: E402
from .optim import AdamW  # noqa: E402
from .train import (Checkpoint, TrainConfig, checkpoint_load, checkpoint_save,  # noqa: E402
                    evaluate, restore_model, train)
from .bench import (complexity_scan, env_stamp, latency_bench,  # noqa: E402
                    resolution_compat, throughput_bench, trajectory_emit)

__version__ = "0.1.0"
