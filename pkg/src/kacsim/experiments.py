"""Experiment orchestration: replica farms, convergence studies, validation.

The unknown limiting law has no closed form for these kernels, so convergence
of the empirical measure is measured against an independent high-resolution
particle run (self-convergence): the reference ensemble must be at least
twice the largest ladder size so its own error stays subdominant, and each
ladder cloud is compared with same-size disjoint blocks of the reference.
The supremum over the horizon is approximated by the max over the snapshot
grid (the state is piecewise constant, so grid values are exact).

Everything is deterministic given (plan, base_seed): replica seeds derive
from distinct entropy paths and results are canonically sorted before
emission, so worker scheduling never changes output bytes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import coupling as coupling_mod
from . import geometry, kernels, transport
from . import initial as initial_mod
from . import simulator as simulator_mod
from .errors import ConfigError, DomainError
from .initial import InitialLaw, IsotropicGaussian, TwoPointMixture, UniformBall, normalize_ensemble
from .kernels import Family, KernelSpec
from .seeding import (
    ROLE_EVENTS,
    ROLE_INITIAL,
    ROLE_REFERENCE_EVENTS,
    ROLE_REFERENCE_INITIAL,
    derive_seed,
)
from .simulator import SimConfig, run, write_snapshots
from .stats import loglog_slope
from .transport import subsample_compare

MODES = ("simulate", "converge", "couple", "validate")


@dataclass(frozen=True)
class ExperimentPlan:
    """Declarative description of one study; validated per mode."""

    mode: str
    kernel: KernelSpec = field(default_factory=kernels.hard_sphere)
    initial: InitialLaw = field(default_factory=IsotropicGaussian)
    n_particles: int = 0
    n_ladder: tuple[int, ...] = ()
    reference_n: int = 0
    cutoff_k: float = math.inf
    k_ladder: tuple[float, ...] = ()
    k_max: float = math.inf
    tanaka_alignment: bool = True
    horizon_t: float = 1.0
    snapshot_times: tuple[float, ...] = ()
    replicas: int = 1
    base_seed: int = 0
    output_path: str = "out"
    normalize: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.horizon_t < 0.0:
            raise ConfigError("horizon must be nonnegative")
        if self.kernel.family is Family.POWER_LAW and self.mode in ("simulate", "converge"):
            if not math.isfinite(self.cutoff_k):
                raise ConfigError("power-law kernels require a finite cutoff_k")
        if self.mode == "simulate" and self.n_particles < 2:
            raise ConfigError("simulate mode needs n_particles >= 2")
        if self.mode == "converge":
            if len(self.n_ladder) < 3:
                raise ConfigError("converge mode needs at least 3 ladder sizes")
            if any(b <= a for a, b in zip(self.n_ladder, self.n_ladder[1:])):
                raise ConfigError("n_ladder must be strictly increasing")
            if self.reference_n < 2 * max(self.n_ladder):
                raise ConfigError("reference size must be at least twice the largest ladder size")
        if self.mode == "couple":
            if self.kernel.family is not Family.POWER_LAW:
                raise ConfigError("couple mode requires a power-law kernel")
            if self.n_particles < 2:
                raise ConfigError("couple mode needs n_particles >= 2")
            if len(self.k_ladder) < 2:
                raise ConfigError("couple mode needs a cutoff ladder with >= 2 levels")
            if not math.isfinite(self.k_max):
                raise ConfigError("couple mode needs a finite reference cutoff k_max")

    def snapshot_grid(self) -> tuple[float, ...]:
        if self.snapshot_times:
            return self.snapshot_times
        t = self.horizon_t
        return (0.0, 0.25 * t, 0.5 * t, 0.75 * t, t)


def plan_to_dict(plan: ExperimentPlan) -> dict:
    """Plain-JSON echo of the plan (kernel and initial law rendered by kind)."""
    kernel = {"family": plan.kernel.family.value, "gamma": plan.kernel.gamma}
    if plan.kernel.nu is not None:
        kernel["nu"] = plan.kernel.nu
    init = plan.initial
    if isinstance(init, IsotropicGaussian):
        law = {"kind": "gaussian", "energy": init.energy_per_particle}
    elif isinstance(init, UniformBall):
        law = {"kind": "uniform_ball", "radius": init.radius}
    elif isinstance(init, TwoPointMixture):
        law = {
            "kind": "two_point",
            "u1": list(init.u1),
            "u2": list(init.u2),
            "weight": init.weight,
        }
    else:
        law = {"kind": "unknown"}
    out = dataclasses.asdict(plan)
    out["kernel"] = kernel
    out["initial"] = law
    out["n_ladder"] = list(plan.n_ladder)
    out["k_ladder"] = list(plan.k_ladder)
    out["snapshot_times"] = list(plan.snapshot_grid())
    for key in ("cutoff_k", "k_max"):
        if not math.isfinite(out[key]):
            out[key] = "inf"
    return out


def config_digest(plan: ExperimentPlan) -> str:
    blob = json.dumps(plan_to_dict(plan), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class ConvergenceReport:
    """Rows (N, replica, t, squared W2) plus the fitted log-log decay."""

    rows: list[tuple[int, int, float, float]]
    fitted_slope: float | None
    slope_stderr: float | None
    reference_spec: str
    per_n_mean: dict[int, float]
    max_bias_bound: float
    diagnostics: list[str]
    plan: ExperimentPlan | None = None


def _sampled_velocities(plan: ExperimentPlan, n: int, seed: int) -> np.ndarray:
    law = dataclasses.replace(plan.initial, seed=seed)
    vel = initial_mod.sample_initial(law, n)
    return normalize_ensemble(vel) if plan.normalize else vel


def _block_rows(ref_clouds, sim_clouds, times, n, replica):
    """Mean blockwise squared W2 of the reference against one run's snapshots."""
    rows = []
    worst_bias = 0.0
    for t, ref, cloud in zip(times, ref_clouds, sim_clouds):
        value, bias = subsample_compare(ref, cloud, n)
        worst_bias = max(worst_bias, bias)
        rows.append((n, replica, float(t), value))
    return rows, worst_bias


def run_convergence_study(plan: ExperimentPlan, threads: int = 1) -> ConvergenceReport:
    """Self-convergence study of the empirical measure against a reference run."""
    if plan.mode != "converge":
        raise ConfigError("plan mode must be 'converge'")
    times = plan.snapshot_grid()

    ref_cfg = SimConfig(
        n_particles=plan.reference_n,
        kernel=plan.kernel,
        cutoff_k=plan.cutoff_k,
        horizon_t=plan.horizon_t,
        snapshot_times=times,
        seed=derive_seed(plan.base_seed, ROLE_REFERENCE_EVENTS, plan.reference_n, 0),
    )
    ref_vel = _sampled_velocities(
        plan, plan.reference_n, derive_seed(plan.base_seed, ROLE_REFERENCE_INITIAL, plan.reference_n, 0)
    )
    ref_clouds = [s.velocities for s in run(ref_cfg, ref_vel)]

    def one(task):
        n, rep = task
        cfg = SimConfig(
            n_particles=n,
            kernel=plan.kernel,
            cutoff_k=plan.cutoff_k,
            horizon_t=plan.horizon_t,
            snapshot_times=times,
            seed=derive_seed(plan.base_seed, ROLE_EVENTS, n, rep),
        )
        vel = _sampled_velocities(plan, n, derive_seed(plan.base_seed, ROLE_INITIAL, n, rep))
        snaps = run(cfg, vel)
        return _block_rows(ref_clouds, [s.velocities for s in snaps], times, n, rep)

    tasks = [(n, rep) for n in plan.n_ladder for rep in range(plan.replicas)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, tasks))
    else:
        results = [one(task) for task in tasks]

    rows: list[tuple[int, int, float, float]] = []
    max_bias = 0.0
    sup_by_task: dict[tuple[int, int], float] = {}
    for task, (task_rows, bias) in zip(tasks, results):
        rows.extend(task_rows)
        max_bias = max(max_bias, bias)
        sup_by_task[task] = max(v for *_, v in task_rows)
    rows.sort(key=lambda r: (r[0], r[1], r[2]))

    per_n_mean = {
        n: float(np.mean([sup_by_task[(n, rep)] for rep in range(plan.replicas)]))
        for n in plan.n_ladder
    }
    diagnostics = [
        "sup over [0, T] approximated by the max over the snapshot grid",
    ]
    try:
        slope, stderr = loglog_slope(list(per_n_mean), list(per_n_mean.values()))
    except DomainError as exc:
        slope = stderr = None
        diagnostics.append(str(exc))
    reference_spec = (
        f"independent run, n={plan.reference_n}, same kernel/cutoff/horizon, "
        "disjoint same-size blocks"
    )
    return ConvergenceReport(rows, slope, stderr, reference_spec, per_n_mean, max_bias, diagnostics, plan)


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def emit_results(report: ConvergenceReport, out_dir: str) -> tuple[str, str]:
    """Write the normative CSV and the JSON summary; byte-stable given inputs."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "convergence.csv")
    json_path = os.path.join(out_dir, "convergence.json")
    try:
        with open(csv_path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("N,replica,t,w2_squared\n")
            for n, rep, t, value in report.rows:
                fh.write(f"{n},{rep},{t!r},{value!r}\n")
        plan = report.plan
        summary = {
            "slope": _json_safe(report.fitted_slope),
            "stderr": _json_safe(report.slope_stderr),
            "per_n_mean": {str(k): v for k, v in report.per_n_mean.items()},
            "reference": report.reference_spec,
            "max_bias_bound": report.max_bias_bound,
            "diagnostics": report.diagnostics,
            "config": plan_to_dict(plan) if plan else None,
            "config_sha256": config_digest(plan) if plan else None,
            "seed": plan.base_seed if plan else None,
        }
        with open(json_path, "w", encoding="ascii", newline="\n") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise ConfigError(f"cannot write results under {out_dir!r}: {exc}") from exc
    return csv_path, json_path


def run_simulate(plan: ExperimentPlan, threads: int = 1) -> tuple[str, str]:
    """Replica farm of plain simulations; emits the snapshot CSV and a summary."""
    if plan.mode != "simulate":
        raise ConfigError("plan mode must be 'simulate'")
    times = plan.snapshot_grid()
    all_snaps = []
    for rep in range(plan.replicas):
        cfg = SimConfig(
            n_particles=plan.n_particles,
            kernel=plan.kernel,
            cutoff_k=plan.cutoff_k,
            horizon_t=plan.horizon_t,
            snapshot_times=times,
            seed=derive_seed(plan.base_seed, ROLE_EVENTS, plan.n_particles, rep),
        )
        vel = _sampled_velocities(
            plan, plan.n_particles, derive_seed(plan.base_seed, ROLE_INITIAL, plan.n_particles, rep)
        )
        all_snaps.append(run(cfg, vel))
    os.makedirs(plan.output_path, exist_ok=True)
    csv_path = os.path.join(plan.output_path, "snapshots.csv")
    with open(csv_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("replica_id,t,particle_id,vx,vy,vz\n")
        for rep, snaps in enumerate(all_snaps):
            for snap in snaps:
                for pid, v in enumerate(snap.velocities):
                    fh.write(f"{rep},{snap.time!r},{pid},{v[0]!r},{v[1]!r},{v[2]!r}\n")
    json_path = os.path.join(plan.output_path, "simulate.json")
    summary = {
        "config": plan_to_dict(plan),
        "config_sha256": config_digest(plan),
        "seed": plan.base_seed,
        "events": [int(snaps[-1].event_count) for snaps in all_snaps],
        "proposals": [int(snaps[-1].proposal_count) for snaps in all_snaps],
    }
    with open(json_path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")
    return csv_path, json_path


def run_couple(plan: ExperimentPlan, threads: int = 1) -> tuple[str, str]:
    """Cutoff-error ladder study; emits (K, replica, h_T) rows and a summary."""
    if plan.mode != "couple":
        raise ConfigError("plan mode must be 'couple'")
    report = coupling_mod.cutoff_scaling_study(
        plan.kernel,
        plan.n_particles,
        plan.k_ladder,
        plan.horizon_t,
        plan.replicas,
        plan.base_seed,
        plan.k_max,
        initial=plan.initial,
        align=plan.tanaka_alignment,
        normalize=plan.normalize,
    )
    os.makedirs(plan.output_path, exist_ok=True)
    csv_path = os.path.join(plan.output_path, "coupling.csv")
    with open(csv_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("K,replica,h_T\n")
        for k, rep, h in sorted(report.rows, key=lambda r: (r[0], r[1])):
            fh.write(f"{k!r},{rep},{h!r}\n")
    json_path = os.path.join(plan.output_path, "coupling.json")
    summary = {
        "slope": _json_safe(report.fitted_slope),
        "stderr": _json_safe(report.slope_stderr),
        "mean_by_k": {repr(k): v for k, v in report.mean_by_k.items()},
        "diagnostics": report.diagnostics,
        "config": plan_to_dict(plan),
        "config_sha256": config_digest(plan),
        "seed": plan.base_seed,
    }
    with open(json_path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")
    return csv_path, json_path
