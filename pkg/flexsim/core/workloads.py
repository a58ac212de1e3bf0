"""Built-in benchmark workloads and their measured reference figures.

Synthetic rows reproduce the single-layer benchmarks (CNN 3x3 at 8/4/2 bit,
blockwise-sparse CNNs, batched dense, deconvolution). Real-time rows are
layer-chain stand-ins with the shapes of the deployed models: a dilated TCN
for keyword spotting, a convolutional autoencoder, a ResNet-8-like chain and
a one-class SVM. All tensors are random with a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from flexsim.core.accel_sim import CycleReport, SimKnobs, run
from flexsim.core.compiler import MemConfig, link_program
from flexsim.core.energy_model import CalibrationTarget, OperatingPoint, resolve_op_point
from flexsim.core.errors import WorkloadError
from flexsim.core.workload_ir import (
    Activation,
    Layer,
    LayerDescriptor,
    LayerKind,
    SparsityIndexMap,
    SvmModel,
    Workload,
    random_tensor,
)
from flexsim.utils.logger import logger

# --------------------------------------------------------------------------- #
# Builders
# --------------------------------------------------------------------------- #


def requant_shift_for(desc: LayerDescriptor) -> int:
    """Shift that maps a typical accumulator back into the operand range."""
    reduction = desc.C * desc.FY * desc.FX
    return max(0, min(31, int(round(0.5 * math.log2(reduction) + desc.precision - 2))))


def _layer(rng: np.random.Generator, desc: LayerDescriptor) -> Layer:
    if desc.kind not in (LayerKind.MAXPOOL, LayerKind.SVM_NORM) and desc.requant_shift == 0:
        desc = replace(desc, requant_shift=requant_shift_for(desc))
    weights = random_tensor(rng, desc.weight_shape, desc.precision) if desc.weight_shape else None
    return Layer(desc=desc, weights=weights)


def _chain(name: str, seed: int, descs: Sequence[LayerDescriptor]) -> Workload:
    rng = np.random.default_rng(seed)
    first = descs[0]
    inputs = random_tensor(rng, first.input_shape, first.precision)
    return Workload(name=name, input=inputs, layers=tuple(_layer(rng, d) for d in descs))


def cnn3x3(precision: int = 8, pruned_channels: int = 0, *, seed: int = 0) -> Workload:
    """32 -> 32 channel 3x3 convolution on a 16x16 map ("same" padding).

    ``pruned_channels`` input channels are pruned in every block of 8 filters.
    """
    sparsity = None
    if pruned_channels:
        sparsity = SparsityIndexMap.from_pruned_channels(32, 32, range(pruned_channels))
    desc = LayerDescriptor(
        kind=LayerKind.CONV2D,
        C=32,
        K=32,
        OX=16,
        OY=16,
        FX=3,
        FY=3,
        IX=16,
        IY=16,
        precision=precision,
        activation=Activation.RELU,
        sparsity=sparsity,
        name="cnn3x3",
    )
    suffix = f"-sparse{pruned_channels}" if pruned_channels else ""
    return _chain(f"cnn3x3-int{precision}{suffix}", seed, [desc])


def dense_batch16(*, seed: int = 0) -> Workload:
    desc = LayerDescriptor(kind=LayerKind.DENSE, C=16, K=64, batch=16, activation=Activation.RELU, name="fc")
    return _chain("fc-batch16", seed, [desc])


def deconv8(*, seed: int = 0) -> Workload:
    """3x3 deconvolution with 2x upsampling, 32 -> 32 channels, 3x3 input to 7x7 output."""
    desc = LayerDescriptor(
        kind=LayerKind.DECONV2D,
        C=32,
        K=32,
        OX=7,
        OY=7,
        FX=3,
        FY=3,
        upsample=2,
        IX=3,
        IY=3,
        activation=Activation.RELU,
        name="deconv",
    )
    return _chain("deconv-int8", seed, [desc])


def tcn_kws(*, seed: int = 0) -> Workload:
    """Dilated 1-D TCN over 256 frames of 64 features with a frame-wise 12-class head."""
    descs: List[LayerDescriptor] = [
        LayerDescriptor(
            kind=LayerKind.CONV1D_DILATED,
            C=64,
            K=64,
            OX=256,
            FX=3,
            dilation=dilation,
            IX=256,
            activation=Activation.RELU,
            name=f"tcn{index}",
        )
        for index, dilation in enumerate((1, 2, 4, 8, 1, 2, 4))
    ]
    descs.append(
        LayerDescriptor(kind=LayerKind.CONV1D_DILATED, C=64, K=12, OX=256, FX=1, IX=256, name="head")
    )
    return _chain("tcn-kws", seed, descs)


def _conv(name: str, C: int, K: int, size: int) -> LayerDescriptor:
    return LayerDescriptor(
        kind=LayerKind.CONV2D,
        C=C,
        K=K,
        OX=size,
        OY=size,
        FX=3,
        FY=3,
        IX=size,
        IY=size,
        activation=Activation.RELU,
        name=name,
    )


def _pool(name: str, C: int, size: int) -> LayerDescriptor:
    return LayerDescriptor(
        kind=LayerKind.MAXPOOL, C=C, K=C, OX=size // 2, OY=size // 2, FX=2, FY=2, stride=2, name=name
    )


def cae(*, seed: int = 0) -> Workload:
    """Convolutional autoencoder over an 8 x 16 x 16 spectrogram patch."""
    descs = [
        _conv("enc1", 8, 16, 16),
        _pool("pool1", 16, 16),
        _conv("enc2", 16, 32, 8),
        LayerDescriptor(
            kind=LayerKind.DECONV2D,
            C=32,
            K=16,
            OX=15,
            OY=15,
            FX=3,
            FY=3,
            upsample=2,
            IX=8,
            IY=8,
            activation=Activation.RELU,
            name="dec1",
        ),
        _conv("dec2", 16, 8, 15),
    ]
    return _chain("cae", seed, descs)


def resnet8(*, seed: int = 0) -> Workload:
    """ResNet-8-shaped chain on a 3 x 32 x 32 image; residual adds run on the host."""
    descs = [
        _conv("conv1", 3, 16, 32),
        _conv("conv2", 16, 16, 32),
        _pool("pool1", 16, 32),
        _conv("conv3", 16, 32, 16),
        _conv("conv4", 32, 32, 16),
        _pool("pool2", 32, 16),
        _conv("conv5", 32, 64, 8),
        _conv("conv6", 64, 64, 8),
        _pool("pool3", 64, 8),
        LayerDescriptor(kind=LayerKind.DENSE, C=64 * 4 * 4, K=10, name="fc"),
    ]
    return _chain("resnet8", seed, descs)


def oc_svm(*, seed: int = 0, batch: int = 16) -> Workload:
    """One-class SVM: 64 support vectors of 16 features, ``batch`` query vectors."""
    rng = np.random.default_rng(seed)
    support = random_tensor(rng, (64, 16), 8)
    model = SvmModel(
        support_vectors=support,
        alphas=tuple(float(a) for a in rng.uniform(0.1, 1.0, size=64)),
        sigma=256.0,
        bias=0.5,
    )
    desc = model.layer(batch=batch, name="svm")
    inputs = random_tensor(rng, desc.input_shape, 8)
    return Workload(name="oc-svm", input=inputs, layers=(Layer(desc=desc, svm=model),))


# --------------------------------------------------------------------------- #
# Suite
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class BenchCase:
    """A benchmark row: workload builder plus its measured reference figures."""

    name: str
    build: Callable[[], Workload]
    power_uw: float
    gops: float
    resident: bool = True
    group: str = "synthetic"


SUITE: Tuple[BenchCase, ...] = (
    BenchCase("CNN@8b", lambda: cnn3x3(8), 237.0, 0.586),
    BenchCase("CNN@4b", lambda: cnn3x3(4), 197.0, 1.17),
    BenchCase("CNN@2b", lambda: cnn3x3(2), 197.0, 2.35),
    BenchCase("CNN@8b 50% sparse", lambda: cnn3x3(8, 16), 239.0, 1.03),
    BenchCase("CNN@8b 87.5% sparse", lambda: cnn3x3(8, 28), 212.0, 3.64),
    BenchCase("FC batch=16", dense_batch16, 140.0, 0.116, resident=False),
    BenchCase("Deconv@8b", deconv8, 235.0, 1.36),
    BenchCase("TCN (KWS)", tcn_kws, 193.0, 0.204, resident=False, group="real-time"),
    BenchCase("CAE", cae, 209.0, 0.442, resident=False, group="real-time"),
    BenchCase("ResNet-8", resnet8, 228.0, 0.267, resident=False, group="real-time"),
    BenchCase("OC-SVM", oc_svm, 129.0, 0.126, resident=False, group="real-time"),
)

CALIBRATION_ROWS = ("CNN@8b", "CNN@4b", "CNN@2b", "FC batch=16")
PREDICTION_ROWS = ("TCN (KWS)", "ResNet-8", "CAE", "OC-SVM")

WORKLOADS: Dict[str, Callable[[], Workload]] = {
    "cnn3x3": cnn3x3,
    "cnn3x3-int4": lambda: cnn3x3(4),
    "cnn3x3-int2": lambda: cnn3x3(2),
    "cnn3x3-sparse50": lambda: cnn3x3(8, 16),
    "cnn3x3-sparse87": lambda: cnn3x3(8, 28),
    "fc-batch16": dense_batch16,
    "deconv": deconv8,
    "tcn-kws": tcn_kws,
    "cae": cae,
    "resnet8": resnet8,
    "oc-svm": oc_svm,
}


def get_case(name: str) -> BenchCase:
    for case in SUITE:
        if case.name == name:
            return case
    raise WorkloadError("UNKNOWN_WORKLOAD", f"no benchmark row named '{name}'")


def get_workload(name: str) -> Workload:
    try:
        return WORKLOADS[name]()
    except KeyError:
        known = ", ".join(sorted(WORKLOADS))
        raise WorkloadError("UNKNOWN_WORKLOAD", f"unknown workload '{name}' (known: {known})") from None


def simulate_case(
    case: BenchCase,
    *,
    knobs: Optional[Dict[str, object]] = None,
    mem_config: Optional[MemConfig] = None,
) -> CycleReport:
    """Timing-only run of a suite row; synthetic rows keep their operands in L1."""
    image, _ = link_program(case.build(), mem_config)
    row_knobs = SimKnobs.from_mapping({**(knobs or {}), "l1_resident": case.resident})
    _, report = run(image, row_knobs, functional=False)
    logger.debug("Suite row %s: %d cycles", case.name, report.total_cycles)
    return report


def calibration_targets(
    names: Sequence[str] = CALIBRATION_ROWS,
    *,
    knobs: Optional[Dict[str, object]] = None,
    op_point: Optional[OperatingPoint] = None,
    mem_config: Optional[MemConfig] = None,
) -> List[CalibrationTarget]:
    """Simulate the named rows (timing only) and pair them with their measured power."""
    point = op_point or resolve_op_point("efficiency")
    targets: List[CalibrationTarget] = []
    for name in names:
        case = get_case(name)
        report = simulate_case(case, knobs=knobs, mem_config=mem_config)
        targets.append(CalibrationTarget(case.name, report, point, case.power_uw * 1e-6))
    return targets


__all__ = [
    "BenchCase",
    "CALIBRATION_ROWS",
    "PREDICTION_ROWS",
    "SUITE",
    "WORKLOADS",
    "cae",
    "calibration_targets",
    "cnn3x3",
    "deconv8",
    "dense_batch16",
    "get_case",
    "get_workload",
    "oc_svm",
    "requant_shift_for",
    "resnet8",
    "simulate_case",
    "tcn_kws",
]
