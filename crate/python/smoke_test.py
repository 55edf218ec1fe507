"""Smoke test for the pyrydberg extension module.

Build and run from the workspace root:

    cargo build --release -p rydberg-ghz-py --features extension-module
    cp target/release/libpyrydberg.so python/pyrydberg.so
    python3 python/smoke_test.py
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import pyrydberg


def main():
    names = [n for n, _ in pyrydberg.list_experiments()]
    assert "table1-ghz-scaling" in names, names
    for n in names:
        assert pyrydberg.default_config(n).startswith("experiment")

    v = pyrydberg.vdw_interaction_mhz(5.36e3, 8.030)
    assert abs(v - 20.0) < 0.2, v
    dv = pyrydberg.interaction_fluctuation_mhz(5.36e3, 8.030, 1e-3)
    assert abs(abs(dv) - 0.015) < 0.001, dv

    run = pyrydberg.simulate(
        N=2, model="effective", steps_per_stage=400, outputs_per_stage=20
    )
    f = run.fidelity
    assert f["best_phase"] > 0.99, f
    assert len(run.times_ns) == len(run.series("F_best"))
    labels, rho = run.density_matrix()
    trace = sum(rho[i][i].real for i in range(len(labels)))
    assert math.isclose(trace, 1.0, abs_tol=1e-6), trace
    assert "00" in labels and run.n_atoms == 2

    sweep = pyrydberg.run_experiment(
        'experiment = "custom"\n[parameters]\nmodel = "effective"\nerror_kind = "global"\n'
        "epsilon = 0.0\nsteps_per_stage = 400\n[sweep]\nlambda = [0.0, 5.0]\nepsilon = [0.1]\n",
        threads=2,
    )
    rows = sweep.rows()
    assert len(sweep) == 2 and sweep.axes == ["lambda", "epsilon"]
    assert rows[1]["metrics"]["F_best"] > rows[0]["metrics"]["F_best"], rows

    report = pyrydberg.verify('experiment = "fig3-populations"\n')
    assert report["passed"], report

    try:
        pyrydberg.simulate(V_MHz=3.0)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")

    print("pyrydberg", pyrydberg.__version__, "smoke test passed:", run)


if __name__ == "__main__":
    main()
