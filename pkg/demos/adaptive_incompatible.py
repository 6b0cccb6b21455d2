"""Adaptive refinement for incompatible data: u0 = 1 against zero lateral values.

The exact solution jumps between the initial datum and the boundary
condition at the two bottom corners of the space-time rectangle.  The
adaptive loop localizes exactly there: the share of elements near t = 0
grows far beyond the area share, the smallest elements shrink
geometrically at the corners, and the estimator decreases on every level
(slowly - this singularity caps the achievable rate).

Writes runlog.csv and mesh_final.txt next to this script unless an output
directory is given on the command line.
"""

import sys
from pathlib import Path

import numpy as np

from stfosls import (
    MarkingConfig,
    MarkStrategy,
    StopCriteria,
    adaptive_run,
    make_problem,
    uniform_initial_mesh,
    write_runlog_csv,
)
from stfosls.mesh import element_measures, write_mesh


def main(out_dir=None):
    out = Path(out_dir) if out_dir else Path(__file__).parent / "out_incompatible"
    out.mkdir(parents=True, exist_ok=True)

    problem, _ = make_problem("incompatible")
    mesh0 = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    marking = MarkingConfig(MarkStrategy.DOERFLER, 0.5)
    log = adaptive_run(problem, mesh0, 1, marking, StopCriteria(max_iterations=18))

    print(f"{'level':>5} {'dofs':>7} {'elements':>9} {'estimator':>12} {'marked':>7}")
    for record in log.records:
        print(
            f"{record.level:5d} {record.dofs:7d} {record.elements:9d} "
            f"{record.estimator:12.4e} {record.marked:7d}"
        )

    final = log.final_mesh
    tmin = final.element_coords()[:, :, 0].min(axis=1)
    share = float(np.mean(tmin < 0.1))
    print(f"\nfinal mesh: {final.n_elements} elements")
    print(f"share of elements touching t < 0.1: {share:.2f} (area share is 0.10)")
    print(f"smallest element diameter: {np.sqrt(2.0 * element_measures(final).min()):.2e}")
    print(f"estimator reduced by factor {log.records[0].estimator / log.records[-1].estimator:.2f}")

    write_runlog_csv(log, out / "runlog.csv")
    write_mesh(final, out / "mesh_final.txt")
    print(f"wrote {out / 'runlog.csv'} and {out / 'mesh_final.txt'}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
