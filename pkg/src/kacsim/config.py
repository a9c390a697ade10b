"""Flat key-value experiment configuration.

One ``key = value`` pair per line, ``#`` starts a comment.  Unknown keys are
hard errors: a silently ignored typo can corrupt a whole study.
"""

from __future__ import annotations

import math

from .errors import ConfigError
from .experiments import ExperimentPlan
from .initial import InitialLaw, IsotropicGaussian, TwoPointMixture, UniformBall
from .kernels import hard_sphere, power_law

_KNOWN_KEYS = {
    "mode",
    "kernel.family",
    "kernel.gamma",
    "kernel.nu",
    "initial.kind",
    "initial.energy",
    "initial.radius",
    "initial.u1",
    "initial.u2",
    "initial.weight",
    "normalize",
    "n_particles",
    "n_ladder",
    "reference_n",
    "cutoff_k",
    "k_ladder",
    "k_max",
    "tanaka_alignment",
    "horizon_t",
    "snapshot_times",
    "replicas",
    "base_seed",
    "output_path",
}


def parse_config_text(text: str) -> dict[str, str]:
    """Parse the flat format into a key -> raw-string map."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _as_float(raw: str, key: str) -> float:
    if raw.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc


def _as_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc


def _as_bool(raw: str, key: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "on", "yes", "1"):
        return True
    if lowered in ("false", "off", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _as_floats(raw: str, key: str) -> tuple[float, ...]:
    return tuple(_as_float(part.strip(), key) for part in raw.split(",") if part.strip())


def _as_ints(raw: str, key: str) -> tuple[int, ...]:
    return tuple(_as_int(part.strip(), key) for part in raw.split(",") if part.strip())


def _as_vec(raw: str, key: str) -> tuple[float, float, float]:
    parts = _as_floats(raw, key)
    if len(parts) != 3:
        raise ConfigError(f"{key}: expected three components, got {raw!r}")
    return parts


def _kernel_from(values: dict[str, str]):
    family = values.get("kernel.family", "hard_sphere")
    if family == "hard_sphere":
        if "kernel.nu" in values:
            raise ConfigError("kernel.nu is not meaningful for hard spheres")
        if "kernel.gamma" in values and _as_float(values["kernel.gamma"], "kernel.gamma") != 1.0:
            raise ConfigError("hard spheres force kernel.gamma = 1")
        return hard_sphere()
    if family == "power_law":
        if "kernel.gamma" not in values or "kernel.nu" not in values:
            raise ConfigError("power_law requires kernel.gamma and kernel.nu")
        return power_law(
            _as_float(values["kernel.gamma"], "kernel.gamma"),
            _as_float(values["kernel.nu"], "kernel.nu"),
        )
    raise ConfigError(f"kernel.family: expected hard_sphere or power_law, got {family!r}")


def _initial_from(values: dict[str, str]) -> InitialLaw:
    kind = values.get("initial.kind", "gaussian")
    if kind == "gaussian":
        return IsotropicGaussian(_as_float(values.get("initial.energy", "1.0"), "initial.energy"))
    if kind == "uniform_ball":
        return UniformBall(_as_float(values.get("initial.radius", "1.0"), "initial.radius"))
    if kind == "two_point":
        if "initial.u1" not in values or "initial.u2" not in values:
            raise ConfigError("two_point requires initial.u1 and initial.u2")
        return TwoPointMixture(
            _as_vec(values["initial.u1"], "initial.u1"),
            _as_vec(values["initial.u2"], "initial.u2"),
            _as_float(values.get("initial.weight", "0.5"), "initial.weight"),
        )
    raise ConfigError(f"initial.kind: expected gaussian, uniform_ball or two_point, got {kind!r}")


def plan_from_text(text: str, seed_override=None, out_override=None) -> ExperimentPlan:
    values = parse_config_text(text)
    if "mode" not in values:
        raise ConfigError("missing required key 'mode'")
    kwargs = dict(
        mode=values["mode"],
        kernel=_kernel_from(values),
        initial=_initial_from(values),
    )
    if "n_particles" in values:
        kwargs["n_particles"] = _as_int(values["n_particles"], "n_particles")
    if "n_ladder" in values:
        kwargs["n_ladder"] = _as_ints(values["n_ladder"], "n_ladder")
    if "reference_n" in values:
        kwargs["reference_n"] = _as_int(values["reference_n"], "reference_n")
    if "cutoff_k" in values:
        kwargs["cutoff_k"] = _as_float(values["cutoff_k"], "cutoff_k")
    if "k_ladder" in values:
        kwargs["k_ladder"] = _as_floats(values["k_ladder"], "k_ladder")
    if "k_max" in values:
        kwargs["k_max"] = _as_float(values["k_max"], "k_max")
    if "tanaka_alignment" in values:
        kwargs["tanaka_alignment"] = _as_bool(values["tanaka_alignment"], "tanaka_alignment")
    if "horizon_t" in values:
        kwargs["horizon_t"] = _as_float(values["horizon_t"], "horizon_t")
    if "snapshot_times" in values:
        kwargs["snapshot_times"] = _as_floats(values["snapshot_times"], "snapshot_times")
    if "replicas" in values:
        kwargs["replicas"] = _as_int(values["replicas"], "replicas")
    if "base_seed" in values:
        kwargs["base_seed"] = _as_int(values["base_seed"], "base_seed")
    if "output_path" in values:
        kwargs["output_path"] = values["output_path"]
    if "normalize" in values:
        kwargs["normalize"] = _as_bool(values["normalize"], "normalize")
    if seed_override is not None:
        kwargs["base_seed"] = int(seed_override)
    if out_override is not None:
        kwargs["output_path"] = str(out_override)
    return ExperimentPlan(**kwargs)


def plan_from_file(path: str, seed_override=None, out_override=None) -> ExperimentPlan:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return plan_from_text(text, seed_override, out_override)
