"""Command-line front end: config parsing, pipeline orchestration, data files.

Runs are described by a single INI-style config (sections [molecule],
[mode k], [cavity], [grid], [run]) and are fully deterministic: no
environment variables, no random state, fixed summation orders.  Every
output file starts with a '#'-prefixed block echoing the resolved
configuration.

    polariton <task> --config run.ini [--out DIR]

Tasks: spectrum, dynamics, rate, densities, validate.  Exit codes:
0 success, 1 numerical-guard failure, 2 config error.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from .cute import CavityParams, assemble_truncated
from .errors import DimensionGuardError
from .fockspace import enumerate_basis
from .oracle import build_full_H, symmetrizer
from .perturbation import radiative_pumping_rate, write_rate_json
from .vibronic import MolecularModel, VibrationalMode, build_vibronic

TASKS = ("spectrum", "dynamics", "rate", "densities", "validate")
VALIDATE_TOL = 1e-8

_SECTION_KEYS = {
    "molecule": {"electronic_gap"},
    "mode": {"frequency", "huang_rhys", "n_max"},
    "cavity": {"omega_c", "g_sqrt_n", "n_molecules", "kappa"},
    "grid": {"t_max", "n_steps"},
    "run": {
        "task",
        "method",
        "omega_min",
        "omega_max",
        "window",
        "dark_index",
        "eigenstate",
    },
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (exit code 2)."""


@dataclass
class RunConfig:
    """Fully resolved, validated run description."""

    model: MolecularModel
    cavity: CavityParams
    grid: dyn.TimeGrid
    task: str
    method: str | None
    options: dict = field(default_factory=dict)
    resolved: dict = field(default_factory=dict)


def parse_config(path, task: str | None = None) -> RunConfig:
    """Read and validate an INI run config; `task` must match [run] task if both given."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")

    mode_sections = []
    for section in cp.sections():
        base = "mode" if section.startswith("mode") else section
        if base not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in _SECTION_KEYS[base]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
        if base == "mode":
            tag = section[4:].strip()
            if not tag.isdigit():
                raise ConfigError(f"mode sections must be named [mode <int>], got [{section}]")
            mode_sections.append((int(tag), section))

    def need(section, key, conv=float):
        if section not in cp or key not in cp[section]:
            raise ConfigError(f"missing required key '{key}' in section [{section}]")
        try:
            return conv(cp[section][key])
        except ValueError as exc:
            raise ConfigError(f"bad value for '{key}' in [{section}]: {exc}") from exc

    modes = []
    for _, section in sorted(mode_sections):
        modes.append(
            VibrationalMode(
                frequency=need(section, "frequency"),
                huang_rhys=need(section, "huang_rhys"),
                n_max=need(section, "n_max", int),
            )
        )
    try:
        model = MolecularModel(electronic_gap=need("molecule", "electronic_gap"), modes=tuple(modes))
        cavity = CavityParams(
            omega_c=need("cavity", "omega_c"),
            g_sqrt_n=need("cavity", "g_sqrt_n"),
            n_molecules=need("cavity", "n_molecules"),
            kappa=float(cp["cavity"].get("kappa", "0")),
        )
        grid = dyn.TimeGrid(t_max=need("grid", "t_max"), n_steps=need("grid", "n_steps", int))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    cfg_task = cp["run"].get("task") if "run" in cp else None
    if task and cfg_task and task != cfg_task:
        raise ConfigError(f"subcommand '{task}' conflicts with config task '{cfg_task}'")
    task = task or cfg_task
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")

    method = cp["run"].get("method") if "run" in cp else None
    options = {}
    if "run" in cp:
        for key in ("omega_min", "omega_max"):
            if key in cp["run"]:
                options[key] = float(cp["run"][key])
        if "window" in cp["run"]:
            w = cp["run"]["window"].strip()
            options["window"] = None if w.lower() == "none" else w
        if "dark_index" in cp["run"]:
            options["dark_index"] = int(cp["run"]["dark_index"])
        if "eigenstate" in cp["run"]:
            options["eigenstate"] = cp["run"]["eigenstate"].strip()

    resolved = {}
    for section in cp.sections():
        for key, val in cp[section].items():
            resolved[f"{section}.{key}"] = val
    resolved["run.task"] = task

    cfg = RunConfig(
        model=model,
        cavity=cavity,
        grid=grid,
        task=task,
        method=method,
        options=options,
        resolved=resolved,
    )
    _validate_compatibility(cfg)
    return cfg


def _parse_method(method: str, N) -> tuple[str, int | None]:
    """Normalize a method name to ('infinite'|'oracle'|'cuteq', q)."""
    if method == "infinite":
        return "infinite", None
    if method == "oracle":
        return "oracle", None
    if method == "cute0":
        return "cuteq", 0
    if method == "cute1":
        return "cuteq", 1
    if method == "exactN":
        if math.isinf(N):
            raise ConfigError("method exactN requires finite n_molecules")
        return "cuteq", int(N)
    if method.startswith("cuteq:"):
        try:
            return "cuteq", int(method.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad cuteq order in method '{method}'") from exc
    raise ConfigError(
        f"unknown method '{method}' (expected infinite, cute0, cute1, cuteq:<q>, exactN, oracle)"
    )


def _validate_compatibility(cfg: RunConfig):
    N = cfg.cavity.n_molecules
    task, method = cfg.task, cfg.method
    if task in ("spectrum", "dynamics"):
        if method is None:
            raise ConfigError(f"task {task} requires a method")
        kind, _ = _parse_method(method, N)
        if kind == "infinite" and not cfg.cavity.is_infinite:
            raise ConfigError("method infinite requires n_molecules = inf")
        if kind != "infinite" and cfg.cavity.is_infinite:
            raise ConfigError(f"method {method} requires finite n_molecules")
    elif task == "rate":
        if cfg.cavity.is_infinite:
            raise ConfigError("task rate requires finite n_molecules (infinite forbids rate)")
        if cfg.cavity.kappa <= 0:
            raise ConfigError("task rate requires kappa > 0")
        if method is not None and method != "cute1":
            raise ConfigError("task rate supports only method cute1")
    elif task == "densities":
        if method is not None and method not in ("infinite", "cute0"):
            raise ConfigError("task densities supports methods infinite or cute0")
    elif task == "validate":
        if method is not None and method != "oracle":
            raise ConfigError("task validate supports only method oracle")
        if cfg.cavity.is_infinite or N > 4:
            raise ConfigError("task validate requires finite n_molecules <= 4")


def _header(cfg: RunConfig, extra: dict | None = None) -> dict:
    out = dict(cfg.resolved)
    vs = build_vibronic(cfg.model)
    out["derived.m"] = vs.m
    out["derived.delta_omega"] = f"{cfg.grid.delta_omega:.17g}"
    if extra:
        out.update(extra)
    return out


def _survival_for_method(cfg: RunConfig):
    """Photon-state survival amplitude under the configured method."""
    vs = build_vibronic(cfg.model)
    cav = cfg.cavity
    kind, q = _parse_method(cfg.method, cav.n_molecules)
    if kind == "infinite":
        traj = dyn.photon_survival(vs, cav, cfg.grid)
        dim = vs.m + 1
    elif kind == "cuteq":
        q = min(q, int(cav.n_molecules))
        bh = assemble_truncated(vs, cav, q_max=q)
        H = bh.full_matrix()
        psi0 = np.zeros(bh.dim, dtype=complex)
        psi0[0] = 1.0
        traj = dyn.propagate(H, psi0, cfg.grid, kappa=cav.kappa, n_ph=bh.photon_numbers)
        dim = bh.dim
    else:  # oracle
        H, basis = build_full_H(vs, cav, int(cav.n_molecules), 1)
        sym = enumerate_basis(int(cav.n_molecules), 1, vs.m, q_max=int(cav.n_molecules))
        T = symmetrizer(basis, sym)
        psi_sym = np.zeros(sym.dim, dtype=complex)
        psi_sym[0] = 1.0
        psi0 = T @ psi_sym
        traj = dyn.propagate(H, psi0, cfg.grid, kappa=cav.kappa, n_ph=basis.photon_numbers())
        dim = basis.dim
    return traj, {"derived.dim": dim}


def _task_spectrum(cfg: RunConfig, out_dir: Path):
    traj, extra = _survival_for_method(cfg)
    window = cfg.options.get("window", "halfcos10")
    if "omega_min" in cfg.options or "omega_max" in cfg.options:
        lo = cfg.options.get("omega_min", 0.0)
        hi = cfg.options.get("omega_max", cfg.grid.omega_nyquist)
        omega = np.arange(lo, hi, cfg.grid.delta_omega)
        omega, A = dyn.spectrum(traj.c_t, cfg.grid, omega=omega, window=window)
    else:
        omega, A = dyn.spectrum(traj.c_t, cfg.grid, window=window)
    path = out_dir / "spectrum.csv"
    dyn.write_spectrum_csv(path, omega, A, header=_header(cfg, extra))
    print(f"wrote {path}")
    return [path]


def _task_dynamics(cfg: RunConfig, out_dir: Path):
    traj, extra = _survival_for_method(cfg)
    path = out_dir / "trajectory.csv"
    dyn.write_trajectory_csv(path, traj, header=_header(cfg, extra))
    print(f"wrote {path}")
    return [path]


def _task_rate(cfg: RunConfig, out_dir: Path):
    vs = build_vibronic(cfg.model)
    evals, weights = dyn.photonic_weights(vs, cfg.cavity)
    if "dark_index" in cfg.options:
        dark = cfg.options["dark_index"]
    else:
        dark = int(np.argmin(weights))
    result = radiative_pumping_rate(vs, cfg.cavity, dark)
    path = out_dir / "rate.json"
    write_rate_json(path, result, header=_header(cfg))
    print(f"wrote {path} (Gamma_total = {result.gamma_total:.6e})")
    return [path]


def _select_eigenstate(label: str, evals, weights) -> int:
    if label == "lp":
        with_photon = np.where(weights >= 0.05)[0]
        if with_photon.size == 0:
            raise ConfigError("no polariton-like eigenstate (photonic weight >= 0.05)")
        return int(with_photon[0])
    if label == "dark":
        darks = np.where(weights < 1e-3)[0]
        if darks.size == 0:
            raise ConfigError("no dark eigenstate (photonic weight < 1e-3)")
        return int(darks[0])
    try:
        return int(label)
    except ValueError as exc:
        raise ConfigError(f"eigenstate must be 'lp', 'dark' or an index, got {label!r}") from exc


def _task_densities(cfg: RunConfig, out_dir: Path):
    vs = build_vibronic(cfg.model)
    if not cfg.model.modes:
        raise ConfigError("task densities requires at least one vibrational mode")
    evals, weights = dyn.photonic_weights(vs, cfg.cavity)
    wanted = cfg.options.get("eigenstate")
    labels = [wanted] if wanted else ["lp", "dark"]
    paths = []
    for label in labels:
        idx = _select_eigenstate(label, evals, weights)
        name = label if label in ("lp", "dark") else f"state{idx}"
        densities = dyn.dark_state_density(vs, cfg.cavity, idx)
        for nu, dens in enumerate(densities, start=1):
            path = out_dir / f"density_{name}_mode{nu}.csv"
            header = _header(
                cfg,
                {
                    "derived.eigenstate_index": idx,
                    "derived.energy": f"{evals[idx]:.17g}",
                    "derived.photon_weight": f"{weights[idx]:.17g}",
                    "derived.mode_displacement": f"{dens.displacement:.17g}",
                },
            )
            lines = [f"# {k} = {v}" for k, v in header.items()]
            lines.append("q,density")
            lines.extend(f"{q:.17g},{r:.17g}" for q, r in zip(dens.q, dens.rho))
            dyn.atomic_write_text(path, "\n".join(lines) + "\n")
            paths.append(path)
            print(f"wrote {path}")
    return paths


def _task_validate(cfg: RunConfig, out_dir: Path):
    vs = build_vibronic(cfg.model)
    cav = cfg.cavity
    N = int(cav.n_molecules)
    bh = assemble_truncated(vs, cav, q_max=N)
    H_full, basis_t = build_full_H(vs, cav, N, 1)
    sym = bh.basis
    T = symmetrizer(basis_t, sym)
    H_sym = (T.conj().T @ (H_full @ T)).toarray()
    dev_H = float(np.max(np.abs(H_sym - bh.full_matrix())))

    psi_sym = np.zeros(sym.dim, dtype=complex)
    psi_sym[0] = 1.0
    traj_oracle = dyn.propagate(
        H_full, T @ psi_sym, cfg.grid, kappa=cav.kappa, n_ph=basis_t.photon_numbers()
    )
    traj_cute = dyn.propagate(
        bh.full_matrix(), psi_sym, cfg.grid, kappa=cav.kappa, n_ph=bh.photon_numbers
    )
    dev_c = float(np.max(np.abs(traj_oracle.c_t - traj_cute.c_t)))

    dev = max(dev_H, dev_c)
    ok = dev < VALIDATE_TOL
    report = [
        f"max |H_sym - H_cute|            = {dev_H:.3e}",
        f"max |c_oracle(t) - c_cute(t)|   = {dev_c:.3e}",
        f"max deviation                   = {dev:.3e}",
        f"tolerance                       = {VALIDATE_TOL:.1e}",
        f"result                          = {'PASS' if ok else 'FAIL'}",
    ]
    path = out_dir / "validate.txt"
    header = [f"# {k} = {v}" for k, v in _header(cfg).items()]
    dyn.atomic_write_text(path, "\n".join(header + report) + "\n")
    print("\n".join(report))
    print(f"wrote {path}")
    if not ok:
        raise RuntimeError(f"validation failed: max deviation {dev:.3e} >= {VALIDATE_TOL:.1e}")
    return [path]


_TASK_RUNNERS = {
    "spectrum": _task_spectrum,
    "dynamics": _task_dynamics,
    "rate": _task_rate,
    "densities": _task_densities,
    "validate": _task_validate,
}


def run(cfg: RunConfig, out_dir=".") -> list[Path]:
    """Execute one validated run config, writing artifacts into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _TASK_RUNNERS[cfg.task](cfg, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="polariton",
        description="Molecular-polariton dynamics via collective blocks and 1/N corrections",
    )
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task, help=f"run the {task} pipeline")
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", default=".", help="output directory (default: cwd)")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config, task=args.task)
        run(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DimensionGuardError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
