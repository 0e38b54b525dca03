"""Acceptance suite: one pass/fail line per criterion at the stated tolerances.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from conftest import (  # noqa: E402
    env_commuting_coupling,
    random_density,
    random_hermitian,
    sys_commuting_coupling,
)

from meanforce.dynamics import (  # noqa: E402
    DrivenHamiltonianSpec,
    JointInitialState,
    OpenSystem,
    driven_effective_hamiltonians,
    evolve_joint_exact,
    integrate_projection,
    propagate_env_commuting,
    system_populations,
    thermodynamic_trajectory,
    trajectory_deviation,
)
from meanforce.gibbs import (  # noqa: E402
    mean_force_hamiltonian,
    partition_function,
    relative_entropy,
    stationary_thermo,
)
from meanforce.jaynes_cummings import (  # noqa: E402
    JCParams,
    jc_density_trajectory,
    jc_effective_hamiltonians,
    jc_system_hamiltonian_spec,
    jc_thermo,
)
from meanforce.operators import TensorSpace, sigma_x  # noqa: E402

RESULTS: list[str] = []
THERMO_FIELDS = ("internal_energy", "free_energy", "entropy", "heat", "work", "second_law_slack")
_cache: dict = {}


def jc_baseline():
    if "jc" not in _cache:
        start = time.perf_counter()
        run = jc_thermo(JCParams())
        _cache["jc"] = (run, time.perf_counter() - start)
    return _cache["jc"]


def random_product_runs():
    """Ten random product-initial-condition runs, literal mode, t in [0, 5]."""
    if "evolve" not in _cache:
        rng = np.random.default_rng(2718)
        runs = []
        for i in range(10):
            d_e = 2 + i % 3
            system = OpenSystem(random_hermitian(rng, 2), random_hermitian(rng, d_e), random_hermitian(rng, 2 * d_e, 0.3))
            init = JointInitialState.product(random_density(rng, 2), 1.0)
            runs.append(thermodynamic_trajectory(system, init, np.linspace(0, 5, 26), 1.0))
        _cache["evolve"] = runs
    return _cache["evolve"]


def driven_run():
    if "driven" not in _cache:
        rng = np.random.default_rng(31)
        h_s = random_hermitian(rng, 2)
        system = OpenSystem(h_s, random_hermitian(rng, 3), random_hermitian(rng, 6, 0.3))
        drive = DrivenHamiltonianSpec(h_s, lambda t: h_s + 0.3 * math.sin(t) * sigma_x(),
                                      lambda t: 0.3 * math.cos(t) * sigma_x())
        init = JointInitialState.product(random_density(rng, 2), 1.0)
        _cache["driven"] = thermodynamic_trajectory(system, init, np.linspace(0, 3, 31), 1.0, drive=drive, step=1e-2)
    return _cache["driven"]


# -- criteria -----------------------------------------------------------------


def criterion_1():
    start = time.perf_counter()
    h_s = np.diag([0.0, 1.0]).astype(complex)
    h_e = random_hermitian(np.random.default_rng(1), 4)
    worst_h = worst_z = worst_ef = 0.0
    for beta in (0.5, 1.0, 2.0):
        eff = mean_force_hamiltonian(h_s, h_e, np.zeros((8, 8)), TensorSpace(2, 4), beta)
        th = stationary_thermo(eff, beta)
        z_s = partition_function(h_s, beta)
        worst_h = max(worst_h, float(np.linalg.norm(eff.matrix - h_s)))
        worst_z = max(worst_z, abs(eff.effective_partition - z_s) / z_s)
        e = math.exp(-beta) / (1 + math.exp(-beta))
        f = -math.log(1 + math.exp(-beta)) / beta
        worst_ef = max(worst_ef, abs(th.internal_energy - e), abs(th.free_energy - f))
    elapsed = time.perf_counter() - start
    ok = worst_h <= 1e-10 and worst_z <= 1e-10 and worst_ef <= 1e-9 and elapsed < 1
    return ok, f"|H-H_S|={worst_h:.1e} dZ/Z={worst_z:.1e} dE,dF={worst_ef:.1e} time={elapsed:.2f}s"


def criterion_2():
    start = time.perf_counter()
    rng = np.random.default_rng(22)
    worst = 0.0
    for d_e in (2, 4):
        for _ in range(20):
            h_s, h_e, h_se = random_hermitian(rng, 2), random_hermitian(rng, d_e), random_hermitian(rng, 2 * d_e, 0.5)
            beta = rng.uniform(0.3, 3.0)
            eff = mean_force_hamiltonian(h_s, h_e, h_se, TensorSpace(2, d_e), beta, with_derivative=False)
            expected, _ = oracles.mean_force(h_s, h_e, h_se, beta)
            worst = max(worst, float(np.linalg.norm(eff.matrix - expected)))
    elapsed = time.perf_counter() - start
    return worst <= 1e-9 and elapsed < 5, f"max Frobenius deviation {worst:.1e} over 40 draws, time={elapsed:.2f}s"


def criterion_3():
    start = time.perf_counter()
    rng = np.random.default_rng(33)
    times = np.linspace(0, 5, 11)
    worst = 0.0
    order_ok = True
    ratios = []
    for d_e in range(2, 7):
        h_s = random_hermitian(rng, 2)
        scale = 0.5 * np.linalg.norm(h_s) / np.sqrt(2 * d_e)
        system = OpenSystem(h_s, random_hermitian(rng, d_e), random_hermitian(rng, 2 * d_e, scale))
        init = JointInitialState.product(random_density(rng, 2), 1.0)
        exact = evolve_joint_exact(system, init, times)
        devs = {h: trajectory_deviation(integrate_projection(system, init, times, h), exact)
                for h in (0.02, 0.01, 1e-3, 5e-4)}
        worst = max(worst, devs[1e-3])
        for coarse, fine in ((0.02, 0.01), (1e-3, 5e-4)):
            # halving must gain 8x unless both deviations already sit at the 1e-10 floor
            if devs[coarse] > 1e-10:
                ratios.append(devs[coarse] / devs[fine])
                order_ok &= devs[coarse] / devs[fine] >= 8
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and order_ok and elapsed < 60
    return ok, f"max deviation at h=1e-3 {worst:.1e}; min halving ratio {min(ratios):.1f}; time={elapsed:.1f}s"


def criterion_4():
    rng = np.random.default_rng(44)
    h_e = random_hermitian(rng, 3)
    system = OpenSystem(random_hermitian(rng, 2), h_e, env_commuting_coupling(rng, h_e, 2))
    init = JointInitialState.product(random_density(rng, 2), 1.0)
    times = np.linspace(0, 10, 41)
    env_dev = trajectory_deviation(propagate_env_commuting(system, init, times), evolve_joint_exact(system, init, times))
    h_s = random_hermitian(rng, 2)
    system = OpenSystem(h_s, random_hermitian(rng, 3), sys_commuting_coupling(rng, h_s, 3))
    pops = system_populations(evolve_joint_exact(system, JointInitialState.product(random_density(rng, 2), 1.0), times), h_s)
    drift = float(np.max(np.abs(pops - pops[0])))
    return env_dev <= 1e-8 and drift <= 1e-8, f"env_commuting deviation {env_dev:.1e}; sys_commuting population drift {drift:.1e}"


def criterion_5_jc():
    run, _ = jc_baseline()
    worst = min(r.second_law_slack for r in run.records)
    return worst >= -1e-6, f"JC baseline min slack {worst:.3e}"


def criterion_5_evolve():
    slacks = [min(r.second_law_slack for r in run.records) for run in random_product_runs()]
    failing = sum(s < -1e-6 for s in slacks)
    return failing == 0, f"min slack {min(slacks):.3e}, {failing}/10 below -1e-6"


def criterion_6():
    worst = 0.0
    for run in random_product_runs() + [driven_run()]:
        e0 = run.records[0].internal_energy
        worst = max(worst, max(abs(r.internal_energy - e0 - r.heat - r.work) for r in run.records))
    jc, _ = jc_baseline()
    spread = float(np.ptp(jc.first_law_residual))
    ok = worst <= 1e-12 and spread <= 1e-8
    return ok, f"evolve closure {worst:.1e}; JC residual {jc.first_law_residual[0]:.6f} with spread {spread:.1e}"


def criterion_7():
    rng = np.random.default_rng(77)
    anchor = e0_dev = 0.0
    for mode in ("literal", "log_form", "driven"):
        h_s = random_hermitian(rng, 2)
        system = OpenSystem(h_s, random_hermitian(rng, 3), random_hermitian(rng, 6, 0.3))
        rho0 = random_density(rng, 2)
        init = JointInitialState.product(rho0, 1.0)
        times = np.linspace(0, 1, 11)
        if mode == "driven":
            drive = DrivenHamiltonianSpec(h_s, lambda t, h=h_s: h + t * sigma_x(), lambda t: sigma_x())
            run = thermodynamic_trajectory(system, init, times, 1.0, drive=drive, step=1e-2)
        else:
            run = thermodynamic_trajectory(system, init, times, 1.0, mode=mode)
        anchor = max(anchor, float(np.max(np.abs(run.effective[0].matrix - h_s))))
        e0_dev = max(e0_dev, abs(run.records[0].internal_energy - np.trace(rho0 @ h_s).real))
    jc, _ = jc_baseline()
    jc_off = abs(jc.effective[0].matrix[0, 1]) + abs(jc.effective[0].matrix[1, 0])
    ok = anchor <= 1e-12 and e0_dev <= 1e-10 and jc_off <= 1e-12
    return ok, f"|H(0)-H_S| {anchor:.1e} (literal, log_form, driven); E_int(0) deviation {e0_dev:.1e}; JC off-diagonals {jc_off:.1e}"


def criterion_8():
    worst_margin = -math.inf
    rng = np.random.default_rng(88)
    for beta in (0.1, 0.5, 1.0, 2.0, 5.0):
        eff = mean_force_hamiltonian(random_hermitian(rng, 2), random_hermitian(rng, 3), random_hermitian(rng, 6, 0.4),
                                     TensorSpace(2, 3), beta)
        tol = 10 * (1e-4 * beta) ** 2 + 1e-9
        worst_margin = max(worst_margin, abs(stationary_thermo(eff, beta).identity_residual(beta)) / tol)
    jc, _ = jc_baseline()
    runs = random_product_runs() + [driven_run()]
    for records, beta in [(run.records, 1.0) for run in runs] + [(jc.records, 1.0)]:
        tol = 10 * (1e-4 * beta) ** 2 + 1e-9
        for r in records:
            worst_margin = max(worst_margin, abs(r.internal_energy - r.free_energy - r.entropy / beta) / tol)
    return worst_margin <= 1, f"worst |E-F-Sigma/beta| is {worst_margin:.2e} of the tolerance"


def criterion_9_paths():
    params = JCParams()
    traj = jc_density_trajectory(params)
    a = np.array([e.matrix for e in jc_effective_hamiltonians(params, traj)])
    b = np.array([e.matrix for e in driven_effective_hamiltonians(traj.as_reduced(), jc_system_hamiltonian_spec(params), params.beta)])
    full = float(np.max(np.abs(a - b)))
    off = float(max(np.max(np.abs(a[:, 0, 1] - b[:, 0, 1])), np.max(np.abs(a[:, 1, 0] - b[:, 1, 0]))))
    return full <= 1e-6, f"max element difference {full:.2e} (off-diagonal {off:.1e}; diagonals differ)"


def criterion_9_cutoff_runtime():
    run, elapsed = jc_baseline()
    raised = jc_thermo(JCParams().with_n_max(80))
    worst = max(
        abs(getattr(x, f) - getattr(y, f)) for x, y in zip(run.records, raised.records) for f in THERMO_FIELDS
    )
    return worst < 1e-8 and elapsed < 60, f"n_max 60->80 max change {worst:.1e}; baseline runtime {elapsed:.2f}s"


def criterion_10():
    rng = np.random.default_rng(1010)
    worst_neg = math.inf
    worst_self = worst_oracle = 0.0
    for i in range(100):
        d = 2 if i % 2 else 4
        r1, r2 = random_density(rng, d), random_density(rng, d)
        value = relative_entropy(r1, r2)
        worst_neg = min(worst_neg, value)
        worst_self = max(worst_self, abs(relative_entropy(r1, r1)))
        worst_oracle = max(worst_oracle, abs(value - oracles.relative_entropy_double_sum(r1, r2)))
    ok = worst_neg >= 0 and worst_self <= 1e-10 and worst_oracle <= 1e-9
    return ok, f"min value {worst_neg:.2e}; self {worst_self:.1e}; oracle deviation {worst_oracle:.1e}"


CRITERIA = [
    ("1", "decoupled-limit exactness", criterion_1),
    ("2", "mean-force oracle", criterion_2),
    ("3", "reduced-dynamics oracle and RK4 order", criterion_3),
    ("4", "commutation special cases", criterion_4),
    ("5a", "second law, JC baseline", criterion_5_jc),
    ("5b", "second law, random product runs", criterion_5_evolve),
    ("6", "first law", criterion_6),
    ("7", "t=0 anchors", criterion_7),
    ("8", "thermodynamic identity", criterion_8),
    ("9a", "JC effective Hamiltonian, two constructions", criterion_9_paths),
    ("9b", "JC cutoff stability and runtime", criterion_9_cutoff_runtime),
    ("10", "relative entropy", criterion_10),
]


def report(label, name, ok, detail):
    line = f"criterion {label:<3} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS.append(line)
    return line


@pytest.mark.parametrize("label,name,check", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(label, name, check):
    ok, detail = check()
    report(label, name, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failures = 0
    for label, name, check in CRITERIA:
        ok, detail = check()
        print(report(label, name, ok, detail), flush=True)
        failures += not ok
    sys.exit(1 if failures else 0)
