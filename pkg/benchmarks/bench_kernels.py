"""Compare the compiled convolution backend against the pure-NumPy one.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times the forward and backward channelwise convolution on shapes drawn
from the default model, checks both backends agree to 1e-12, and prints
a small table. The reference backend is always available; the native one
only if the extension compiled at install time.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fedhar.kernels import active_backend, reference

try:
    from fedhar.kernels import _native as native
except ImportError:
    native = None

SHAPES = (
    # (batch, channels, maps_in, time, maps_out, kernel, stride)
    (32, 12, 1, 100, 8, 9, 2),
    (32, 12, 8, 46, 16, 9, 2),
    (128, 12, 1, 100, 8, 9, 2),
)


def _time_call(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = [("reference", reference)]
    if native is not None:
        backends.append(("native", native))
    print(f"active backend: {active_backend()}")
    print(f"{'shape':<34}{'backend':<12}{'forward':>12}{'backward':>12}")

    rng = np.random.default_rng(0)
    for shape in SHAPES:
        batch, channels, maps_in, t_len, maps_out, kernel, stride = shape
        x = rng.standard_normal((batch, channels, maps_in, t_len))
        w = rng.standard_normal((maps_out, maps_in, kernel))
        b = rng.standard_normal(maps_out)
        t_out = (t_len - kernel) // stride + 1
        dz = rng.standard_normal((batch, channels, maps_out, t_out))

        outputs = {}
        for name, module in backends:
            fwd = _time_call(module.conv1d_forward, x, w, b, stride, repeats=args.repeats)
            bwd = _time_call(module.conv1d_backward, x, w, stride, dz, repeats=args.repeats)
            outputs[name] = module.conv1d_forward(x, w, b, stride)
            label = "x".join(str(d) for d in shape)
            print(f"{label:<34}{name:<12}{fwd * 1e3:>10.2f}ms{bwd * 1e3:>10.2f}ms")
        if len(outputs) == 2:
            gap = float(np.abs(np.asarray(outputs["reference"]) - np.asarray(outputs["native"])).max())
            status = "OK" if gap < 1e-12 else "MISMATCH"
            print(f"{'':<34}agreement {gap:.2e} {status}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
