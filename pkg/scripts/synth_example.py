"""Synthesize a few second-chaos paths and report their regularity statistics."""

import numpy as np

from rieszchaos import TruncationSpec, derive_params, synth_paths
from rieszchaos.analysis import holder_estimate, modulus_stability
from rieszchaos.synthesis import resolve_truncation


def main(H=0.7, d=2, n=2**12 + 1, n_paths=3, seed=1):
    params = derive_params(H, d)
    grid = np.linspace(0.0, 1.0, n)
    trunc = resolve_truncation(params, TruncationSpec.for_grid(n - 1))
    for p in synth_paths(params, grid, trunc, seed, n_paths):
        rep = holder_estimate(p)
        mod = modulus_stability(p)
        print(f"path {p.path_index}: X(1) = {p.total[-1]:+.4f}, median Holder exponent {rep.global_exponent:.3f}, "
              f"modulus ratio {mod['ratio']:.3f}")
    print(f"levels {trunc.j_min}..{trunc.j_max}, estimated relative tail {trunc.tail_report['total']:.2e}")


if __name__ == "__main__":
    main()
