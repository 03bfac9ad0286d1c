"""Command-line front end.

Usage::

    mwlab <group> <action> [--param value ...] [--config run.ini]
          [--seed N] [--output-dir DIR] [--format csv|json] [--dry-run]
    mwlab --verify-manifest DIR/run.json

Parameters accept SI unit suffixes (``5.2nm``, ``27nK``, ``2kHz``,
``6.6e-12eV``); frequencies given in Hz are converted to rad/s. Time grids
use ``start:stop:step`` with an optional unit, e.g. ``1:9:1ms``. The
two-mode and mean-field commands work in natural units (hbar = 1, time in
``1/J``).

A config file is INI with sections ``[run]`` (seed, output_dir, format),
``[params]`` (any parameter of the chosen command) and ``[constants]``
(``HBAR``, ``K_B``, species masses in kg). Flags override the file.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import re
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from mwlab import __version__
from mwlab import constants as const
from mwlab.errors import MwlabError, NumericalError, ValidationError

ENV_OUTPUT_DIR = "MWLAB_OUTPUT_DIR"
MANIFEST = "run.json"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

# --------------------------------------------------------------------------
# value parsing

_UNITS: dict[str, dict[str, Callable[[], float]]] = {
    "length": {"m": lambda: 1.0, "cm": lambda: 1e-2, "mm": lambda: 1e-3, "um": lambda: 1e-6,
               "µm": lambda: 1e-6, "nm": lambda: 1e-9, "pm": lambda: 1e-12},
    "time": {"s": lambda: 1.0, "ms": lambda: 1e-3, "us": lambda: 1e-6, "µs": lambda: 1e-6,
             "ns": lambda: 1e-9},
    "temperature": {"K": lambda: 1.0, "mK": lambda: 1e-3, "uK": lambda: 1e-6,
                    "µK": lambda: 1e-6, "nK": lambda: 1e-9},
    "energy": {"J": lambda: 1.0, "eV": lambda: const.E_CHARGE, "meV": lambda: 1e-3 * const.E_CHARGE,
               "neV": lambda: 1e-9 * const.E_CHARGE},
    "angular_frequency": {"rad/s": lambda: 1.0, "Hz": lambda: 2.0 * math.pi,
                          "kHz": lambda: 2e3 * math.pi},
    "inverse_length": {"/m": lambda: 1.0, "/mm": lambda: 1e3, "/um": lambda: 1e6,
                       "/µm": lambda: 1e6},
    "velocity": {"m/s": lambda: 1.0, "mm/s": lambda: 1e-3, "um/s": lambda: 1e-6},
    "voltage": {"V": lambda: 1.0, "kV": lambda: 1e3},
    "angle": {"rad": lambda: 1.0, "mrad": lambda: 1e-3, "urad": lambda: 1e-6},
}
_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def parse_quantity(text, dim: str | None = None) -> float:
    """Parse ``"5.2nm"`` style values to SI floats.

    Examples
    --------
    >>> parse_quantity("5.2nm", "length")
    5.2e-09
    >>> parse_quantity("1.5")
    1.5
    """
    if isinstance(text, (int, float)):
        return float(text)
    m = _NUMBER.match(str(text))
    if not m:
        raise ValidationError(f"cannot parse number {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if not unit:
        return value
    table = _UNITS.get(dim or "", {})
    if unit not in table:
        allowed = ", ".join(table) or "none"
        raise ValidationError(f"unit {unit!r} not allowed here (allowed: {allowed})")
    return value * table[unit]()


def parse_grid(text, dim: str | None = None) -> np.ndarray:
    """Parse ``start:stop:step[unit]`` (inclusive), comma lists or a single value."""
    s = str(text).strip()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid {text!r} must be start:stop:step")
        unit = _NUMBER.match(parts[2]).group(2) if _NUMBER.match(parts[2]) else ""
        vals = [parse_quantity(p if _NUMBER.match(p).group(2) else p + unit, dim)
                if _NUMBER.match(p) else parse_quantity(p, dim) for p in parts]
        start, stop, step = vals
        if not step > 0 or stop < start:
            raise ValidationError(f"grid {text!r} needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step * (1 + 1e-12) + 1e-9)) + 1
        return start + step * np.arange(n)
    return np.array([parse_quantity(p, dim) for p in s.split(",") if p.strip()])


def _int(text) -> int:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ValidationError(f"expected an integer, got {text!r}") from None
    if value != int(value):
        raise ValidationError(f"expected an integer, got {text!r}")
    return int(value)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class Param:
    name: str
    kind: str = "float"  # float | int | grid | choice | str | bool
    dim: str | None = None
    default: Any = None
    required: bool = False
    choices: tuple = ()
    help: str = ""
    positive: bool = False

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")

    def convert(self, raw):
        if self.kind == "float":
            v = parse_quantity(raw, self.dim)
            if not math.isfinite(v):
                raise ValidationError(f"{self.name} must be finite")
        elif self.kind == "int":
            v = _int(raw)
        elif self.kind == "grid":
            v = parse_grid(raw, self.dim)
            if v.size == 0:
                raise ValidationError(f"{self.name} grid is empty")
        elif self.kind == "choice":
            v = str(raw)
            if v not in self.choices:
                raise ValidationError(f"{self.name} must be one of {', '.join(self.choices)}")
        elif self.kind == "bool":
            v = _bool(raw)
        else:
            v = str(raw)
        if self.positive and np.any(np.asarray(v) <= 0):
            raise ValidationError(f"{self.name} must be > 0")
        return v


# --------------------------------------------------------------------------
# output

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    if value is None:
        return ""
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return value


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


class Output:
    """Collects output files so that they can be listed or rolled back."""

    def __init__(self, directory: Path, fmt: str):
        self.directory = directory
        self.fmt = fmt
        self.files: list[Path] = []

    def _write(self, name: str, text: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.files.append(path)
        return path

    def table(self, stem: str, columns: dict[str, Any], header: dict | None = None) -> Path:
        """Tabular output as CSV (17 significant digits) or JSON."""
        cols = {k: np.atleast_1d(np.asarray(v)) for k, v in columns.items()}
        lengths = {c.size for c in cols.values()}
        if len(lengths) != 1:
            raise ValueError("table columns differ in length")
        if self.fmt == "json":
            return self._write(stem + ".json", _dumps({"header": header or {}, "columns": cols}))
        lines = []
        if header:
            lines.append("# " + json.dumps(_jsonable(header), sort_keys=True))
        lines.append(",".join(cols))
        n = lengths.pop()
        for i in range(n):
            lines.append(",".join(_fmt(c[i].item() if hasattr(c[i], "item") else c[i])
                                  for c in cols.values()))
        return self._write(stem + ".csv", "\n".join(lines) + "\n")

    def summary(self, stem: str, data: dict) -> Path:
        """Scalar results, always JSON."""
        return self._write(stem + ".json", _dumps(data))

    def rollback(self):
        for path in self.files:
            try:
                path.unlink()
            except FileNotFoundError:
                pass
        self.files.clear()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Output, config: dict, duration: float) -> Path:
    """Write ``run.json`` listing every output with its SHA-256 digest."""
    outputs = [{"path": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size}
               for p in out.files]
    manifest = {"tool": "mwlab", "version": __version__, "config": config,
                "duration_s": duration, "outputs": outputs}
    path = out.directory / MANIFEST
    path.write_text(_dumps(manifest), encoding="utf-8")
    return path


def verify_manifest(path) -> list[str]:
    """Recompute digests; return a list of problems (empty when intact)."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        return [f"cannot read manifest: {exc}"]
    problems = []
    for entry in manifest.get("outputs", []):
        target = path.parent / entry["path"]
        if not target.exists():
            problems.append(f"missing: {entry['path']}")
        elif _sha256(target) != entry["sha256"]:
            problems.append(f"digest mismatch: {entry['path']}")
    return problems


# --------------------------------------------------------------------------
# commands

BH = [
    Param("N", "int", required=True, help="atom number"),
    Param("J", default=1.0, help="tunnelling energy"),
    Param("U", default=0.0, help="interaction energy"),
    Param("delta", default=0.0, help="bias"),
]
SPECIES = Param("species", "str", default="Rb87", help="atomic species")
LUTTINGER = [
    SPECIES,
    Param("a_s", dim="length", default="5.2nm", positive=True),
    Param("omega_perp", dim="angular_frequency", default="2kHz", positive=True),
    Param("c", dim="velocity", help="speed of sound; overrides omega_perp"),
    Param("n1d", dim="inverse_length", default="35/um", positive=True),
    Param("T", dim="temperature", default="27nK", positive=True),
    Param("L_sys", dim="length", default="1mm", positive=True),
    Param("cutoff_factor", default=2.0 * math.pi, positive=True),
]
TOF = [
    SPECIES,
    Param("omega", dim="angular_frequency", default="2kHz", positive=True),
    Param("d", dim="length", default="2um"),
]


def _bh(cfg):
    from mwlab.twomode import BoseHubbardParams
    return BoseHubbardParams(cfg["J"], cfg["U"], cfg["N"], cfg["delta"])


def _luttinger_system(cfg):
    from mwlab.luttinger import LuttingerSystem
    m = const.mass(cfg["species"])
    if cfg.get("c") is not None:
        return LuttingerSystem.from_sound_speed(m, cfg["c"], cfg["n1d"], cfg["T"], cfg["L_sys"],
                                                cfg["a_s"], cutoff_factor=cfg["cutoff_factor"])
    return LuttingerSystem(m, cfg["a_s"], cfg["omega_perp"], cfg["n1d"], cfg["T"],
                           cfg["L_sys"], cutoff_factor=cfg["cutoff_factor"])


def _tof(cfg):
    from mwlab.tofexpand import TofParams
    return TofParams(const.mass(cfg["species"]), cfg["omega"], cfg["d"])


def _beam(cfg):
    from mwlab.beamoptics import BeamParams
    return BeamParams(const.mass(cfg["species"]), cfg["v"], cfg.get("sigma_v", 0.0) or 0.0)


def _ensemble(cfg, system):
    from mwlab import luttinger as lu
    ens = lu.initial_covariance(system, cfg["kind"])
    if cfg.get("t"):
        ens = lu.evolve_covariance(ens, system, cfg["t"])
    return ens


def cmd_twomode_spectrum(cfg, out):
    from mwlab import twomode
    w = twomode.spectrum(_bh(cfg))
    out.table("spectrum", {"index": np.arange(w.size), "energy": w})


def cmd_twomode_ground(cfg, out):
    from mwlab import twomode
    p = _bh(cfg)
    state, e = twomode.ground_state(p)
    obs = twomode.spin_observables(state)
    out.summary("ground", {"energy": e, "sz_std": math.sqrt(obs.var_sz), "xi_n": obs.xi_n,
                           "xi_phi": obs.xi_phi, "xi_s": obs.xi_s, "coherence": obs.coherence,
                           "regime": twomode.classify_regime(p)})


def cmd_twomode_ground_scan(cfg, out):
    from mwlab import twomode
    gammas = np.logspace(math.log10(cfg["gamma_min"]), math.log10(cfg["gamma_max"]),
                         cfg["n_gamma"])
    out.table("ground_scan", twomode.ground_scan(cfg["N"], gammas, J=cfg["J"],
                                                 delta=cfg["delta"]))


def _initial_state(cfg):
    from mwlab import twomode
    if cfg["state"] == "ground":
        return twomode.ground_state(_bh(cfg))[0]
    return twomode.coherent_state(twomode.BlochAngle(cfg["theta"], cfg["phi"]), cfg["N"])


def cmd_twomode_evolve(cfg, out):
    from mwlab import twomode
    p = _bh(cfg)
    states = twomode.evolve_series(_initial_state(cfg), p, cfg["t_grid"])
    obs = [twomode.spin_observables(s) for s in states]
    out.table("evolve", {
        "t": cfg["t_grid"],
        "sx": [o.sx for o in obs], "sy": [o.sy for o in obs], "sz": [o.sz for o in obs],
        "var_sz": [o.var_sz for o in obs], "coherence": [o.coherence for o in obs],
        "norm": [s.norm for s in states],
    })


def cmd_twomode_husimi(cfg, out):
    from mwlab import twomode
    state = _initial_state(cfg)
    if cfg["t"] > 0:
        state = twomode.evolve(state, _bh(cfg), cfg["t"])
    thetas = np.linspace(0.0, math.pi, cfg["n_theta"])
    phis = np.linspace(-math.pi, math.pi, cfg["n_phi"], endpoint=False)
    q = twomode.husimi_grid(state, thetas, phis)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    out.table("husimi", {"theta": tt.ravel(), "phi": pp.ravel(), "Q": q.ravel()})


def cmd_meanfield_integrate(cfg, out):
    from mwlab import meanfield
    p = _bh(cfg)
    t_eval = np.linspace(0.0, cfg["t_end"], cfg["n_samples"] + 1)[1:]
    traj = meanfield.integrate((cfg["z0"], cfg["phi0"]), p, cfg["t_end"], tol=cfg["tol"],
                               t_eval=t_eval)
    out.table("trajectory", {"t": traj.times, "z": traj.z, "phi": traj.phi,
                             "energy": traj.energy})
    out.summary("integrate", {"tag": meanfield.classify_orbit(traj, p),
                              "energy_drift": traj.energy_drift,
                              "n_accepted": traj.n_accepted, "n_rejected": traj.n_rejected,
                              "separatrix_lambda": meanfield.separatrix_lambda(cfg["z0"], cfg["phi0"])})


def cmd_meanfield_portrait(cfg, out):
    from mwlab import meanfield
    p = _bh(cfg)
    grid = meanfield.portrait_grid(cfg["n_z"], cfg["n_phi"], cfg["z_limit"])
    orbits = meanfield.phase_portrait(p, grid, cfg["t_end"], tol=cfg["tol"],
                                      n_samples=cfg["n_samples"])
    idx, t, z, ph = [], [], [], []
    for i, o in enumerate(orbits):
        n = o.trajectory.times.size
        idx.append(np.full(n, i))
        t.append(o.trajectory.times)
        z.append(o.trajectory.z)
        ph.append(o.trajectory.phi_wrapped)
    out.table("orbits", {"orbit": [i for i in range(len(orbits))],
                         "z0": [o.z0 for o in orbits], "phi0": [o.phi0 for o in orbits],
                         "tag": [o.tag for o in orbits], "truncated": [o.truncated for o in orbits],
                         "crosses_zero": [o.crosses_zero for o in orbits]})
    out.table("portrait", {"orbit": np.concatenate(idx), "t": np.concatenate(t),
                           "z": np.concatenate(z), "phi": np.concatenate(ph)})


def cmd_meanfield_frequencies(cfg, out):
    from mwlab import meanfield
    p = _bh(cfg)
    f = meanfield.characteristic_frequencies(p)
    data = dict(f._asdict())
    data["z_max"] = meanfield.z_max(p.gamma_n)
    data["gamma_n"] = p.gamma_n
    out.summary("frequencies", data)


def cmd_tof_pattern(cfg, out):
    from mwlab import tofexpand as te
    p = _tof(cfg)
    x = np.linspace(-0.5 * cfg["x_range"], 0.5 * cfg["x_range"], cfg["n_x"])
    rho = te.density_pattern(x, cfg["t"], cfg["phi"], p, imbalance=cfg["imbalance"])
    fk = te.fringe_wavevector(cfg["t"], p)
    header = {"t": cfg["t"], "k": fk.k, "has_fringes": fk.has_fringes,
              "spacing": te.fringe_spacing(cfg["t"], p), "sigma": te.gaussian_width(cfg["t"], p)}
    out.table("pattern", {"x": x, "density": rho}, header=header)


def cmd_tof_fringe_k(cfg, out):
    from mwlab import tofexpand as te
    p = _tof(cfg)
    ts = cfg["t_grid"]
    ks = [te.fringe_wavevector(t, p).k for t in ts]
    sp = [te.fringe_spacing(t, p) for t in ts]
    far = [te.long_time_fringe_spacing(t, p.m, p.d) if p.d > 0 else math.inf for t in ts]
    out.table("fringe_k", {"t": ts, "k": ks, "spacing": sp, "far_field_spacing": far},
              header={"long_time_threshold": te.long_time_threshold(p)})


def cmd_luttinger_params(cfg, out):
    from mwlab import luttinger as lu
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = lu.derive_params(_luttinger_system(cfg))
    data = dict(p._asdict())
    data["n_modes"] = _luttinger_system(cfg).n_modes
    out.summary("params", data)


def cmd_luttinger_equilibrium(cfg, out):
    from mwlab import luttinger as lu
    s = _luttinger_system(cfg)
    ens = lu.initial_covariance(s, "thermal")
    z = cfg["z_grid"]
    cols = {"z_sep": z, "C": lu.correlation_analytic(z, ens, s)}
    if cfg["n_real"] > 0:
        est = lu.correlation_monte_carlo(ens, s, z, cfg["n_real"], cfg["seed"])
        cols["C_mc"] = est.C
        cols["stderr"] = est.stderr
    out.table("equilibrium", cols, header={"lambda_T": s.lambda_T})


def cmd_luttinger_quench(cfg, out):
    from mwlab import luttinger as lu
    s = _luttinger_system(cfg)
    z = cfg["z_grid"]
    cols = {"z_sep": z}
    for t in cfg["t_grid"]:
        cols[f"C_t{t:.6g}"] = lu.quench_correlation(s, t, z)
    out.table("quench", cols, header={"c": s.c, "T_eff": s.T_eff})


def cmd_luttinger_lightcone(cfg, out):
    from mwlab import luttinger as lu
    s = _luttinger_system(cfg)
    lc = lu.lightcone(s, cfg["t_grid"], cfg["z_grid"], cfg["band"])
    out.table("lightcone", {"t": lc.times, "z_c": lc.z_c})
    out.summary("lightcone_fit", {"slope": lc.slope, "intercept": lc.intercept,
                                   "two_c": 2.0 * s.c, "slope_over_two_c": lc.slope / (2 * s.c)})


def _window_grid(cfg):
    dz = cfg["dz"]
    n = int(round(cfg["L"] / dz))
    return (np.arange(n + 1) - 0.5 * n) * dz


def cmd_fringes_synthesize(cfg, out):
    from mwlab import fringelab as fl, luttinger as lu
    s = _luttinger_system(cfg)
    ens = _ensemble(cfg, s)
    z = _window_grid(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prof = lu.sample_profiles(ens, s, z, 1, cfg["seed"])[0]
    img = fl.synthesize_image(prof, math.pi / cfg["lambda_F"], cfg["envelope_sigma"],
                              cfg["contrast"], cfg["pixel_size"], cfg["psf_sigma"],
                              cfg["noise_sigma"], cfg["seed"])
    n_z, n_x = img.pixels.shape
    if out.fmt == "json":
        out.summary("image", {"pixels": img.pixels})
    else:
        lines = [",".join("%.17g" % v for v in row) for row in img.pixels]
        out._write("image.csv", "\n".join(lines) + "\n")
    out.summary("image_meta", {"shape": [n_z, n_x], "pixel_size": img.pixel_size,
                               "psf_sigma": img.psf_sigma, "fringe_k": img.fringe_k,
                               "envelope_sigma": img.envelope_sigma, "z_origin": img.z_origin})
    out.table("profile", {"z": prof.z_grid, "phi": prof.phi})


def _read_profile(path):
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read profile {path}: {exc}") from None
    if data.shape[1] < 2:
        raise ValidationError("profile file needs two columns (x, value)")
    return data[:, 0], data[:, 1]


def _fit_row(f):
    return {"A": f.A, "x0": f.x0, "sigma": f.sigma, "C": f.C, "lambda_F": f.lambda_F,
            "phi": f.phi, "phi_origin": f.phi_origin, "residual_rms": f.residual_rms,
            "clamped": f.clamped}


def cmd_fringes_fit(cfg, out):
    from mwlab import fringelab as fl
    rows = []
    if cfg.get("input"):
        x, y = _read_profile(cfg["input"])
        rows.append(_fit_row(fl.fit_fringe(x, y, cfg["lambda_hint"])))
        seeds = [cfg["seed"]]
    else:
        x = np.linspace(-0.5 * cfg["x_range"], 0.5 * cfg["x_range"], cfg["n_x"])
        noise = 1.0 / cfg["snr"] if cfg["snr"] > 0 else 0.0
        seeds = [cfg["seed"] + i for i in range(cfg["n_seeds"])]
        for sd in seeds:
            y = fl.synthesize_profile(x, 1.0, 0.0, cfg["envelope_sigma"], cfg["contrast"],
                                      cfg["lambda_F"], cfg["phi"], noise, sd)
            rows.append(_fit_row(fl.fit_fringe(x, y, cfg["lambda_hint"])))
    cols = {"seed": seeds}
    for key in rows[0]:
        cols[key] = [r[key] for r in rows]
    out.table("fits", cols)


def cmd_fringes_fdf(cfg, out):
    from mwlab import fringelab as fl, luttinger as lu
    s = _luttinger_system(cfg)
    ens = _ensemble(cfg, s)
    z = _window_grid(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        phis = lu.sample_phase_matrix(ens, s, z, cfg["n"], cfg["seed"])
    samples = fl.contrast_samples_from_phases(phis, z, cfg["L"])
    mom = fl.fdf_moments(samples, cfg["m_max"])
    out.table("fdf_moments", {"m": mom.orders, "moment": mom.moments, "stderr": mom.stderr})
    if mom.density is not None:
        out.table("fdf_histogram", {"left": mom.edges[:-1], "right": mom.edges[1:],
                                    "density": mom.density})
    summary = {"L": cfg["L"], "n": cfg["n"], "mean_c2": samples.mean_c2,
               "lambda_T": s.lambda_T}
    if np.ptp(samples.values) > 0:
        ks = fl.ks_exponential(samples)
        summary.update(ks_statistic=float(ks.statistic), ks_pvalue=float(ks.pvalue))
    out.summary("fdf", summary)


def cmd_optics_table(cfg, out):
    from mwlab import beamoptics as bo
    orders = [int(o) for o in cfg["orders"]]
    out.table("diffraction", bo.diffraction_table(const.mass(cfg["species"]), cfg["v_grid"],
                                                  cfg["d"], orders))


def _calc_eikonal(cfg):
    from mwlab import beamoptics as bo
    beam = _beam(cfg)
    phase = bo.eikonal_phase(cfg["V"], cfg["L"], beam)
    return {"phase": phase, "abs_phase": abs(phase),
            "index_deviation": bo.index_deviation(cfg["V"], beam.kinetic_energy),
            "lambda_dB": beam.lambda_dB}


def _calc_index(cfg):
    from mwlab import beamoptics as bo
    beam = _beam(cfg)
    return {"n": bo.refractive_index_from_potential(cfg["V"], beam.kinetic_energy),
            "index_deviation": bo.index_deviation(cfg["V"], beam.kinetic_energy)}


def _calc_talbot(cfg):
    from mwlab import beamoptics as bo
    beam = _beam(cfg)
    tl = bo.talbot_lengths(beam.lambda_dB, cfg["d"])
    return {"lambda_dB": beam.lambda_dB, **tl._asdict()}


def _calc_talbot_lau(cfg):
    from mwlab import beamoptics as bo
    beam = _beam(cfg)
    lt = bo.talbot_lengths(beam.lambda_dB, cfg["d"]).L_T
    L1 = cfg["L1"] if cfg.get("L1") is not None else 0.5 * lt
    g = bo.talbot_lau(L1, lt, cfg["n"], cfg["m"], cfg["d"])
    return {"L_T": lt, "L1": L1, **g._asdict()}


def _calc_bragg(cfg):
    from mwlab import beamoptics as bo
    beam = _beam(cfg)
    return {"theta": bo.bragg_angle(beam.lambda_dB, cfg["lambda_ph"], cfg["order"])}


def _calc_recoil(cfg):
    from mwlab import beamoptics as bo
    r = bo.grating_recoil_energy(bo.GratingParams(cfg["d"]), const.mass(cfg["species"]))
    return dict(r._asdict())


def _calc_coherence(cfg):
    from mwlab import beamoptics as bo
    beam = _beam(cfg)
    c = bo.coherence_lengths(beam, collimation_angle=cfg.get("alpha"))
    return dict(c._asdict())


def _calc_polarizability(cfg):
    from mwlab import beamoptics as bo
    p = bo.polarizability_from_phase(cfg["phase"], cfg["voltage"], cfg["D"], cfg["L"], cfg["v"])
    return dict(p._asdict())


CALCULATORS = {
    "eikonal": _calc_eikonal,
    "index": _calc_index,
    "talbot": _calc_talbot,
    "talbot-lau": _calc_talbot_lau,
    "bragg": _calc_bragg,
    "recoil": _calc_recoil,
    "coherence": _calc_coherence,
    "polarizability": _calc_polarizability,
}


def cmd_optics_calc(cfg, out):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        data = CALCULATORS[cfg["quantity"]](cfg)
    data = {"quantity": cfg["quantity"], **data}
    if caught:
        data["warnings"] = [str(w.message) for w in caught]
    out.summary("calc", data)


T_GRID = Param("t_grid", "grid", dim="time", required=True, help="start:stop:step")
KIND = Param("kind", "choice", default="thermal", choices=("thermal", "quench", "coherent"))
COMMANDS: dict[tuple[str, str], tuple[list[Param], Callable]] = {
    ("twomode", "spectrum"): (BH, cmd_twomode_spectrum),
    ("twomode", "ground"): (BH, cmd_twomode_ground),
    ("twomode", "ground-scan"): (BH + [
        Param("gamma_min", default=1e-4, positive=True),
        Param("gamma_max", default=1e2, positive=True),
        Param("n_gamma", "int", default=61, positive=True),
    ], cmd_twomode_ground_scan),
    ("twomode", "evolve"): (BH + [
        Param("state", "choice", default="coherent", choices=("coherent", "ground")),
        Param("theta", default=math.pi / 2), Param("phi", default=0.0),
        Param("t_grid", "grid", required=True),
    ], cmd_twomode_evolve),
    ("twomode", "husimi"): (BH + [
        Param("state", "choice", default="ground", choices=("coherent", "ground")),
        Param("theta", default=math.pi / 2), Param("phi", default=0.0),
        Param("t", default=0.0), Param("n_theta", "int", default=41, positive=True),
        Param("n_phi", "int", default=80, positive=True),
    ], cmd_twomode_husimi),
    ("meanfield", "integrate"): (BH + [
        Param("z0", required=True), Param("phi0", default=0.0),
        Param("t_end", required=True, positive=True),
        Param("n_samples", "int", default=1000, positive=True),
        Param("tol", default=1e-9, positive=True),
    ], cmd_meanfield_integrate),
    ("meanfield", "portrait"): (BH + [
        Param("n_z", "int", default=9, positive=True), Param("n_phi", "int", default=8, positive=True),
        Param("z_limit", default=0.95), Param("t_end", default=20.0, positive=True),
        Param("n_samples", "int", default=400, positive=True),
        Param("tol", default=1e-9, positive=True),
    ], cmd_meanfield_portrait),
    ("meanfield", "frequencies"): (BH, cmd_meanfield_frequencies),
    ("tof", "pattern"): (TOF + [
        Param("t", dim="time", required=True),
        Param("phi", default=0.0), Param("imbalance", default=0.0),
        Param("x_range", dim="length", default="400um", positive=True),
        Param("n_x", "int", default=2001, positive=True),
    ], cmd_tof_pattern),
    ("tof", "fringe-k"): (TOF + [T_GRID], cmd_tof_fringe_k),
    ("luttinger", "params"): (LUTTINGER, cmd_luttinger_params),
    ("luttinger", "equilibrium"): (LUTTINGER + [
        Param("z_grid", "grid", dim="length", default="1:20:1um"),
        Param("n_real", "int", default=0),
    ], cmd_luttinger_equilibrium),
    ("luttinger", "quench"): (LUTTINGER + [
        T_GRID, Param("z_grid", "grid", dim="length", default="0:40:0.5um"),
    ], cmd_luttinger_quench),
    ("luttinger", "lightcone"): (LUTTINGER + [
        T_GRID, Param("z_grid", "grid", dim="length", default="0:60:0.1um"),
        Param("band", default=0.02, positive=True),
    ], cmd_luttinger_lightcone),
    ("fringes", "synthesize"): (LUTTINGER + [
        KIND, Param("t", dim="time", default=0.0),
        Param("L", dim="length", default="100um", positive=True),
        Param("dz", dim="length", default="0.25um", positive=True),
        Param("lambda_F", dim="length", default="10um", positive=True),
        Param("envelope_sigma", dim="length", default="25um", positive=True),
        Param("contrast", default=1.0), Param("pixel_size", dim="length", default="1um"),
        Param("psf_sigma", dim="length", default=0.0), Param("noise_sigma", default=0.0),
    ], cmd_fringes_synthesize),
    ("fringes", "fit"): ([
        Param("input", "str", help="CSV with x,value columns; synthetic profiles if omitted"),
        Param("lambda_hint", dim="length", default="8um", positive=True),
        Param("lambda_F", dim="length", default="10um", positive=True),
        Param("envelope_sigma", dim="length", default="25um", positive=True),
        Param("contrast", default=0.42), Param("phi", default=0.7),
        Param("snr", default=20.0), Param("n_seeds", "int", default=10, positive=True),
        Param("x_range", dim="length", default="160um", positive=True),
        Param("n_x", "int", default=321, positive=True),
    ], cmd_fringes_fit),
    ("fringes", "fdf"): (LUTTINGER + [
        KIND, Param("t", dim="time", default=0.0),
        Param("L", dim="length", default="100um", positive=True),
        Param("dz", dim="length", default="0.25um", positive=True),
        Param("n", "int", default=5000, positive=True),
        Param("m_max", "int", default=4, positive=True),
    ], cmd_fringes_fdf),
    ("optics", "table"): ([
        SPECIES, Param("v_grid", "grid", dim="velocity", default="500:2000:100"),
        Param("d", dim="length", default="100nm", positive=True),
        Param("orders", "grid", default="1,2"),
    ], cmd_optics_table),
    ("optics", "calc"): ([
        Param("quantity", "choice", required=True, choices=tuple(CALCULATORS)),
        SPECIES, Param("v", dim="velocity", default=1000.0, positive=True),
        Param("sigma_v", dim="velocity", default=0.0),
        Param("V", dim="energy"), Param("L", dim="length"),
        Param("d", dim="length", default="100nm", positive=True),
        Param("L1", dim="length"), Param("n", "int", default=1), Param("m", "int", default=2),
        Param("lambda_ph", dim="length", default="589nm", positive=True),
        Param("order", "int", default=1), Param("alpha", dim="angle"),
        Param("phase"), Param("voltage", dim="voltage"), Param("D", dim="length"),
    ], cmd_optics_calc),
}
_REQUIRED_BY_CALC = {
    "eikonal": ("V", "L"), "index": ("V",), "polarizability": ("phase", "voltage", "D", "L"),
}


# --------------------------------------------------------------------------
# configuration

@dataclass
class RunConfig:
    group: str
    action: str
    params: dict[str, Any]
    seed: int = 0
    output_dir: Path = Path(".")
    format: str = "csv"
    constants: dict[str, float] = field(default_factory=dict)
    dry_run: bool = False

    def echo(self) -> dict:
        return {"command": f"{self.group} {self.action}", "params": _jsonable(self.params),
                "seed": self.seed, "format": self.format, "constants": self.constants}


def _read_ini(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep case (HBAR, N, T)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from None
    unknown = set(parser.sections()) - {"run", "params", "constants"}
    if unknown:
        raise ValidationError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    return parser


def parse_config(group: str, action: str, args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file and flags into a validated :class:`RunConfig`."""
    param_defs, _ = COMMANDS[(group, action)]
    by_name = {p.name: p for p in param_defs}
    file_params: dict[str, str] = {}
    file_run: dict[str, str] = {}
    constants: dict[str, float] = {}
    if args.config:
        ini = _read_ini(args.config)
        if ini.has_section("params"):
            for key, value in ini.items("params"):
                name = key.replace("-", "_")
                if name not in by_name:
                    raise ValidationError(f"unknown key params.{key} for {group} {action}")
                file_params[name] = value
        if ini.has_section("run"):
            for key, value in ini.items("run"):
                if key not in ("seed", "output_dir", "format"):
                    raise ValidationError(f"unknown key run.{key}")
                file_run[key] = value
        if ini.has_section("constants"):
            for key, value in ini.items("constants"):
                constants[key] = _const_value(key, value)
    for item in args.const or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--const expects KEY=VALUE, got {item!r}")
        constants[key.strip()] = _const_value(key.strip(), value)

    params: dict[str, Any] = {}
    for p in param_defs:
        raw = getattr(args, p.name, None)
        source = "flag"
        if raw is None and p.name in file_params:
            raw, source = file_params[p.name], "config"
        if raw is None:
            if p.required:
                raise ValidationError(f"missing required field params.{p.name} ({p.flag})")
            params[p.name] = p.convert(p.default) if p.default is not None else None
            continue
        try:
            params[p.name] = p.convert(raw)
        except ValidationError as exc:
            raise ValidationError(f"params.{p.name} ({source}): {exc}") from None

    if (group, action) == ("optics", "calc"):
        for name in _REQUIRED_BY_CALC.get(params["quantity"], ()):
            if params.get(name) is None:
                raise ValidationError(f"missing required field params.{name} for "
                                      f"optics calc {params['quantity']}")

    seed_raw = args.seed if args.seed is not None else file_run.get("seed", 0)
    seed = _int(seed_raw)
    if not (0 <= seed < 2 ** 64):
        raise ValidationError("seed must be a 64-bit unsigned integer")
    params["seed"] = seed
    fmt = args.format or file_run.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ValidationError(f"format must be csv or json, got {fmt!r}")
    outdir = args.output_dir or file_run.get("output_dir") or os.environ.get(ENV_OUTPUT_DIR) or "."
    return RunConfig(group, action, params, seed, Path(outdir), fmt, constants, args.dry_run)


def _const_value(key: str, value) -> float:
    try:
        return float(parse_quantity(value))
    except ValidationError:
        raise ValidationError(f"constants.{key}: cannot parse {value!r}") from None


def _validate_objects(cfg: RunConfig):
    """Build the domain objects of a command so that invariants are checked."""
    p = cfg.params
    if cfg.group in ("twomode", "meanfield"):
        _bh(p)
    elif cfg.group == "tof":
        _tof(p)
    elif cfg.group == "luttinger" or (cfg.group == "fringes" and cfg.action != "fit"):
        _luttinger_system(p)
    elif cfg.group == "optics":
        const.mass(p["species"])


def dispatch(cfg: RunConfig) -> int:
    """Run a configured command; return the process exit code."""
    _, handler = COMMANDS[(cfg.group, cfg.action)]
    out = Output(cfg.output_dir, cfg.format)
    t0 = time.perf_counter()
    try:
        with const.override(**cfg.constants):
            _validate_objects(cfg)
            if cfg.dry_run:
                sys.stdout.write(_dumps({"dry_run": True, "config": cfg.echo()}))
                return EXIT_OK
            handler(cfg.params, out)
            write_manifest(out, cfg.echo(), time.perf_counter() - t0)
    except ValidationError as exc:
        out.rollback()
        print(f"mwlab: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        out.rollback()
        print(f"mwlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MwlabError, KeyError, ValueError) as exc:
        out.rollback()
        print(f"mwlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BaseException:
        out.rollback()
        raise
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mwlab", description="Matter-wave interferometry lab.",
                                     allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"mwlab {__version__}")
    parser.add_argument("--verify-manifest", metavar="PATH",
                        help="recompute output digests listed in a run.json")
    groups = parser.add_subparsers(dest="group")
    sub_by_group: dict[str, argparse._SubParsersAction] = {}
    for (group, action), (params, handler) in COMMANDS.items():
        if group not in sub_by_group:
            gp = groups.add_parser(group, allow_abbrev=False)
            sub_by_group[group] = gp.add_subparsers(dest="action", required=True)
        ap = sub_by_group[group].add_parser(action, allow_abbrev=False)
        if (group, action) == ("optics", "calc"):
            ap.add_argument("quantity", nargs="?", default=None, help=", ".join(CALCULATORS))
        for p in params:
            if p.name == "quantity":
                continue
            help_ = p.help + (f" (default {p.default})" if p.default is not None else "")
            ap.add_argument(p.flag, dest=p.name, default=None, help=help_.strip())
        ap.add_argument("--config", help="INI file with [run], [params], [constants]")
        ap.add_argument("--seed", default=None, help="64-bit RNG seed (default 0)")
        ap.add_argument("--output-dir", default=None,
                        help=f"output directory (default ${ENV_OUTPUT_DIR} or .)")
        ap.add_argument("--format", default=None, choices=("csv", "json"))
        ap.add_argument("--const", action="append", metavar="KEY=VALUE",
                        help="override a physical constant or species mass")
        ap.add_argument("--dry-run", action="store_true", help="validate without computing")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verify_manifest:
        problems = verify_manifest(args.verify_manifest)
        for p in problems:
            print(f"mwlab: {p}", file=sys.stderr)
        if not problems:
            print("manifest ok")
        return EXIT_OK if not problems else EXIT_VALIDATION
    if not args.group:
        parser.print_help()
        return EXIT_VALIDATION
    try:
        cfg = parse_config(args.group, args.action, args)
    except ValidationError as exc:
        print(f"mwlab: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
