"""Compare the compiled and NumPy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--steps 200000]

Each kernel is timed with :mod:`timeit` on identical inputs; the best of
``--repeat`` runs is reported together with the speed-up of each backend over
the NumPy fallback and the largest difference between their outputs.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from qsl._kernels import backends
from qsl.models.periodic import PeriodicParams, floquet_magnus_coefficients, initial_state


def unitary_inputs(steps: int, dim: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(steps, dim, dim)) + 1j * rng.normal(size=(steps, dim, dim))
    U, _ = np.linalg.qr(a)
    psi0 = np.zeros(dim, dtype=complex)
    psi0[0] = 1.0
    return np.ascontiguousarray(U), psi0


def trace_inputs(steps: int):
    p = PeriodicParams(1.0, 0.2, 20.0)
    psi0 = np.ascontiguousarray(initial_state(p))
    t = np.ascontiguousarray(np.linspace(0.0, 10 * p.period, steps + 1))
    return (*floquet_magnus_coefficients(p), p.delta, p.h, p.omega, psi0, psi0, t, 32)


def best_time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--steps", type=int, default=200_000)
    args = parser.parse_args(argv)

    found = backends()
    if "cython" not in found:
        print("compiled extension not built; only the NumPy backend is available")

    U2, psi2 = unitary_inputs(args.steps, 2)
    U4, psi4 = unitary_inputs(args.steps // 4, 4, seed=1)
    cases = {
        "apply_unitaries d=2": lambda mod: mod.apply_unitaries(U2, psi2, 16),
        "apply_unitaries d=4": lambda mod: mod.apply_unitaries(U4, psi4, 16),
        "fixed_reference_trace": lambda mod: mod.fixed_reference_trace(*trace_inputs(args.steps)),
    }

    print(f"{'kernel':<24}{'backend':<10}{'best [ms]':>12}{'speed-up':>10}{'max |diff|':>14}")
    for label, call in cases.items():
        reference = call(found["python"])
        base = best_time(lambda: call(found["python"]), args.repeat)
        for name, mod in sorted(found.items(), key=lambda kv: kv[0] != "python"):
            elapsed = base if name == "python" else best_time(lambda: call(mod), args.repeat)
            out = call(mod)
            pairs = zip(out, reference) if isinstance(out, tuple) else [(out, reference)]
            diff = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in pairs)
            print(f"{label:<24}{name:<10}{1e3 * elapsed:>12.2f}{base / elapsed:>10.1f}{diff:>14.1e}")


if __name__ == "__main__":
    main()
