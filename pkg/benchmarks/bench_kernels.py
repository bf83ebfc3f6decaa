"""Compare the compiled kernel backend against the NumPy fallback.

Run after installing the package:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from particul_ood._kernels import _pykernels

try:
    from particul_ood._kernels import _ckernels
except ImportError:
    _ckernels = None

from particul_ood.detectors import DetectorTrainConfig, train_vanilla


def timeit(fn, repeat=200):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def bench_primitives(backend, name):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(32, 32, 3))
    w1 = rng.normal(size=(3, 3, 3, 8))
    b1 = rng.normal(size=8)
    y = backend.conv2d_forward(x, w1, b1, 2, 1)
    gy = rng.normal(size=y.shape)
    fmap = rng.normal(size=(4, 4, 32))
    kernels = rng.normal(size=(4, 32))
    maps = rng.normal(size=(4, 4, 4))

    rows = [
        ("conv2d_forward 32x32x3 -> 16x16x8",
         timeit(lambda: backend.conv2d_forward(x, w1, b1, 2, 1))),
        ("conv2d_input_grad",
         timeit(lambda: backend.conv2d_input_grad(gy, w1, 2, 1, 32, 32))),
        ("conv2d_param_grad",
         timeit(lambda: backend.conv2d_param_grad(x, gy, 2, 1, 3))),
        ("correlate_maps 4x4x32 x 4 kernels",
         timeit(lambda: backend.correlate_maps(fmap, kernels), repeat=2000)),
        ("box3_sum 4x4x4",
         timeit(lambda: backend.box3_sum(maps), repeat=2000)),
    ]
    print(f"\n[{name}]")
    for label, dt in rows:
        print(f"  {label:<38s} {dt * 1e6:9.1f} us")
    return dict(rows)


def bench_training(n_maps=60, epochs=30):
    rng = np.random.default_rng(1)
    fmaps = [rng.normal(size=(4, 4, 32)) for _ in range(n_maps)]
    cfg = DetectorTrainConfig(epochs=epochs, seed=0)
    start = time.perf_counter()
    train_vanilla(fmaps, 4, cfg)
    return time.perf_counter() - start


def main():
    import os

    py = bench_primitives(_pykernels, "numpy fallback")
    if _ckernels is None:
        print("\ncompiled backend not built; install with a C compiler to compare")
        return
    cy = bench_primitives(_ckernels, "cython extension")
    print("\n[speedup cython vs numpy]")
    for label in py:
        print(f"  {label:<38s} {py[label] / cy[label]:9.2f}x")

    print(f"\n[detector training, 60 maps x 30 epochs, active backend "
          f"({'numpy' if os.environ.get('PARTICUL_OOD_PURE_PYTHON') else 'cython'})]")
    print(f"  {bench_training():.2f} s")
    print("\nSet PARTICUL_OOD_PURE_PYTHON=1 to run the pipeline on the fallback.")


if __name__ == "__main__":
    main()
