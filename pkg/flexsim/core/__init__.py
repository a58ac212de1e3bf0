"""
Subpackage containing the simulator core (workload IR, compiler, simulator, energy and power-management models).
"""

__all__ = [
    "accel_sim",
    "compiler",
    "config_loader",
    "energy_model",
    "errors",
    "image_io",
    "manifest",
    "nlfg",
    "oracle",
    "scenario",
    "tensor_io",
    "ucode",
    "workload_ir",
    "workloads",
    "wuc",
]
