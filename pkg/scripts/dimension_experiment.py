"""Box-counting dimensions of graphs and ranges against the closed-form bounds."""

import dataclasses

import numpy as np

from rieszchaos import TruncationSpec, derive_params
from rieszchaos.analysis import box_dimension, dimension_bounds, graph_points
from rieszchaos.synthesis import fbm_reference, resolve_truncation, synth_path


def main(n=2**14 + 1, reps=4, seed=3):
    grid = np.linspace(0.0, 1.0, n)
    for H in (0.6, 0.7, 0.8):
        syn, ref = [], []
        params = derive_params(H, 1)
        tr = resolve_truncation(params, TruncationSpec(j_max=15, tail_budget=1e-2))
        for r in range(reps):
            syn.append(box_dimension(graph_points(grid, synth_path(params, grid, tr, seed, r).total))[0])
        for b in fbm_reference(H, grid, reps, seed):
            ref.append(box_dimension(graph_points(grid, b))[0])
        print(f"graph H={H}: 2-H = {2 - H:.2f}, synthesized {np.mean(syn):.3f}, fBm reference {np.mean(ref):.3f}")
    for d in (1, 2):
        rep = dimension_bounds((0.6, 0.8), d)
        comps = []
        for c, H in enumerate((0.6, 0.8)):
            params = derive_params(H, d)
            tr = resolve_truncation(params, dataclasses.replace(TruncationSpec(j_max=15), tail_budget=1e-2))
            comps.append(synth_path(params, grid, tr, seed + 10, c).total)
        est = box_dimension(np.column_stack(comps))
        print(f"range d={d}: bounds [{rep.lower_range:.3f}, {rep.upper_range:.3f}], box estimate {est[0]:.3f} "
              f"+- {est[1]:.3f}")


if __name__ == "__main__":
    main()
