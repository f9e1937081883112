"""Seeded Monte-Carlo experiment runner with CSV persistence.

Experiments sweep one scenario axis (training length, INR, SNR, antenna
split) or a 2-D (SNR, INR) grid, optimize each configured scheme on every
channel realization, and persist per-trial records plus per-group summary
rows to CSV. A sidecar ``<out>.meta.json`` records the fully resolved
configuration and seed.

Determinism: channels and estimation noises for trial k come from Philox
substreams keyed by (seed, k, link), so re-running with the same config and
seed reproduces the CSV byte for byte regardless of the worker count, and a
trial sees identical draws across sweep values (matched seeding).
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .approx import RegimeParams, approx_rate
from .model import SystemParams, draw_channels
from .optimizer import GpConfig, SchemeId, optimize_scheme
from .rates import end_to_end_rate, estimate_links

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "TrialRecord",
    "parse_config",
    "run_experiment",
    "emit_csv",
    "parse_csv",
    "contour_grid",
    "write_metadata",
    "db_to_linear",
]

EXPERIMENTS = (
    "training_sweep",
    "inr_sweep",
    "snr_sweep",
    "contour",
    "antenna_sweep",
    "approx_contour",
)

# nominal full-scale operating point: rho_r 15 dB with rho_r/rho_d = 2,
# eta_d 0 dB, kappa = beta = -40 dB, T = 50, 100 trials
FULL_SCALE_DEFAULTS = dict(
    rho_r_db=15.0,
    eta_r_db=30.0,
    eta_d_db=0.0,
    kappa_db=-40.0,
    beta_db=-40.0,
    trials=100,
    tau_grid=tuple(round(0.1 * k, 1) for k in range(1, 10)),
)

DESK_DEFAULTS = dict(trials=20, tau_grid=(0.3, 0.5, 0.7))

SWEEP_AXES = {
    "training_sweep": "train_len",
    "inr_sweep": "eta_r_db",
    "snr_sweep": "rho_r_db",
    "antenna_sweep": "n_antennas",
}

DEFAULT_SWEEPS = {
    "training_sweep": (1.0, 2.0, 5.0, 10.0, 20.0, 50.0),
    "inr_sweep": (0.0, 20.0, 40.0, 60.0, 80.0, 100.0),
    "snr_sweep": (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0),
    "antenna_sweep": (1.0, 2.0, 3.0, 4.0, 5.0, 6.0),
}

DEFAULT_SCHEMES = {
    "training_sweep": (SchemeId.TCO_2_IC,),
    "inr_sweep": (SchemeId.TCO_2_IC, SchemeId.TCO_2, SchemeId.TCO_1_IC, SchemeId.OHD),
    "snr_sweep": (SchemeId.TCO_2_IC, SchemeId.OHD),
    "antenna_sweep": (SchemeId.TCO_2_IC, SchemeId.OHD),
    "contour": (SchemeId.TCO_2_IC,),
    "approx_contour": (),
}


class ConfigError(ValueError):
    pass


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: SystemParams
    sweep_axis: tuple  # (name, values)
    schemes: tuple
    trials: int
    seed: int
    tau_grid: tuple
    gp: GpConfig
    out_path: str
    workers: int = 1
    antenna_total: int = 7
    grid_rho_r_db: tuple = (0.0, 3.75, 7.5, 11.25, 15.0, 18.75, 22.5, 26.25, 30.0)
    grid_eta_r_db: tuple = (0.0, 7.5, 15.0, 22.5, 30.0, 37.5, 45.0, 52.5, 60.0)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment: {self.experiment}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        name, values = self.sweep_axis
        for v in values:
            if not math.isfinite(v):
                raise ConfigError(f"sweep value {v!r} for {name} is not finite")
            if name in ("train_len", "n_antennas") and v < 1:
                raise ConfigError(f"sweep value {v!r} for {name} must be >= 1")
        if not all(0.0 < t < 1.0 for t in self.tau_grid):
            raise ConfigError("tau_grid values must lie strictly inside (0, 1)")


@dataclass
class TrialRecord:
    trial_index: int
    sweep_value: float
    scheme: str
    rate_lower: float
    rate_upper: float
    tau_star: float
    zeta: float
    converged: bool
    wall_time: float = 0.0

    def __post_init__(self):
        if self.rate_lower > self.rate_upper + 1e-9:
            raise ValueError("rate_lower exceeds rate_upper")


# ---------------------------------------------------------------------------
# configuration parsing

_DB_KEYS = {
    "rho_r_db": "rho_r",
    "rho_d_db": "rho_d",
    "eta_r_db": "eta_r",
    "eta_d_db": "eta_d",
    "kappa_db": "kappa",
    "beta_db": "beta",
}
_INT_KEYS = ("trials", "seed", "workers", "train_len", "n_s", "n_r", "m_r", "m_d",
             "nt", "mr", "antenna_total", "max_outer_iters")
_FLOAT_KEYS = ("sigma", "nu", "eps_stop", "s_step")
_LIST_KEYS = ("tau_grid", "sweep_values", "grid_rho_r_db", "grid_eta_r_db")
_STR_KEYS = ("experiment", "out_path", "schemes")


def _parse_scalar(key, raw):
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"non-numeric value for key '{key}': {raw!r}") from None


def _coerce_list(key, raw):
    if isinstance(raw, (list, tuple)):
        return tuple(float(v) for v in raw)
    parts = [p for p in str(raw).replace(",", " ").split() if p]
    if not parts:
        raise ConfigError(f"empty list for key '{key}'")
    return tuple(_parse_scalar(key, p) for p in parts)


def _read_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        flat = {}
        for k, v in json.loads(text).items():
            if isinstance(v, dict):
                flat.update(v)
            else:
                flat[k] = v
        return flat
    out = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key=value, got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def parse_config(path: str | None = None, overrides: dict | None = None,
                 paper_scale: bool = True) -> ExperimentConfig:
    """Resolve an ExperimentConfig from defaults, a config file, and overrides.

    With no inputs this yields the nominal defaults (T=50, sigma=0.01, nu=0.2,
    eps=0.01, trials=100, rho_r/rho_d = 2, eta_d = 0 dB). paper_scale=False
    swaps in the desk-scale trial count and tau grid for keys the user did not
    set. Unknown keys and malformed values are reported by key name.
    """
    raw: dict = {}
    if path is not None:
        raw.update(_read_config_file(path))
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})

    known = set(_DB_KEYS) | set(_INT_KEYS) | set(_FLOAT_KEYS) | set(_LIST_KEYS) | set(_STR_KEYS)
    for k in raw:
        if k not in known:
            raise ConfigError(f"unknown config key: '{k}'")

    experiment = str(raw.get("experiment", "inr_sweep"))
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment: {experiment}")

    lin = {}
    for k, target in _DB_KEYS.items():
        if k in raw:
            lin[target] = db_to_linear(_parse_scalar(k, raw[k]))
    rho_r = lin.get("rho_r", db_to_linear(FULL_SCALE_DEFAULTS["rho_r_db"]))
    params = SystemParams(
        rho_r=rho_r,
        rho_d=lin.get("rho_d", rho_r / 2.0),
        eta_r=lin.get("eta_r", db_to_linear(FULL_SCALE_DEFAULTS["eta_r_db"])),
        eta_d=lin.get("eta_d", db_to_linear(FULL_SCALE_DEFAULTS["eta_d_db"])),
        kappa=lin.get("kappa", db_to_linear(FULL_SCALE_DEFAULTS["kappa_db"])),
        beta=lin.get("beta", db_to_linear(FULL_SCALE_DEFAULTS["beta_db"])),
        n_s=int(raw.get("nt", raw.get("n_s", 3))),
        n_r=int(raw.get("nt", raw.get("n_r", 3))),
        m_r=int(raw.get("mr", raw.get("m_r", 4))),
        m_d=int(raw.get("mr", raw.get("m_d", 4))),
        train_len=int(raw.get("train_len", 50)),
    )

    gp_kwargs = {}
    for k in _FLOAT_KEYS:
        if k in raw:
            gp_kwargs[k] = _parse_scalar(k, raw[k])
    if "max_outer_iters" in raw:
        gp_kwargs["max_outer_iters"] = int(raw["max_outer_iters"])
    try:
        gp = GpConfig(**gp_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    trials = int(raw.get("trials", FULL_SCALE_DEFAULTS["trials"] if paper_scale else DESK_DEFAULTS["trials"]))
    tau_grid = _coerce_list("tau_grid", raw["tau_grid"]) if "tau_grid" in raw else (
        FULL_SCALE_DEFAULTS["tau_grid"] if paper_scale else DESK_DEFAULTS["tau_grid"]
    )

    axis_name = SWEEP_AXES.get(experiment, "")
    if "sweep_values" in raw:
        sweep_values = _coerce_list("sweep_values", raw["sweep_values"])
    else:
        sweep_values = DEFAULT_SWEEPS.get(experiment, (0.0,))
        if experiment == "training_sweep" and not paper_scale:
            sweep_values = (1.0, 5.0, 50.0)
        if experiment == "inr_sweep" and not paper_scale:
            sweep_values = (0.0, 40.0, 100.0)
        if experiment == "snr_sweep" and not paper_scale:
            sweep_values = (5.0, 15.0, 30.0)

    if "schemes" in raw:
        names = raw["schemes"]
        if isinstance(names, str):
            names = [s for s in names.replace(",", " ").split() if s]
        try:
            schemes = tuple(SchemeId(s) for s in names)
        except ValueError as exc:
            raise ConfigError(f"unknown scheme in 'schemes': {exc}") from None
    else:
        schemes = DEFAULT_SCHEMES[experiment]

    kwargs = dict(
        experiment=experiment,
        params=params,
        sweep_axis=(axis_name, tuple(sweep_values)),
        schemes=schemes,
        trials=trials,
        seed=int(raw.get("seed", 0)),
        tau_grid=tuple(tau_grid),
        gp=gp,
        out_path=str(raw.get("out_path", f"{experiment}.csv")),
        workers=int(raw.get("workers", 1)),
        antenna_total=int(raw.get("antenna_total", 7)),
    )
    if "grid_rho_r_db" in raw:
        kwargs["grid_rho_r_db"] = _coerce_list("grid_rho_r_db", raw["grid_rho_r_db"])
    if "grid_eta_r_db" in raw:
        kwargs["grid_eta_r_db"] = _coerce_list("grid_eta_r_db", raw["grid_eta_r_db"])
    return ExperimentConfig(**kwargs)


# ---------------------------------------------------------------------------
# experiment execution

def _apply_sweep(base: SystemParams, axis: str, value: float, antenna_total: int) -> SystemParams:
    if axis == "train_len":
        return base.with_(train_len=int(value))
    if axis == "eta_r_db":
        return base.with_(eta_r=db_to_linear(value))
    if axis == "rho_r_db":
        ratio = base.rho_r / base.rho_d if base.rho_d > 0 else 2.0
        rho_r = db_to_linear(value)
        return base.with_(rho_r=rho_r, rho_d=rho_r / ratio)
    if axis == "n_antennas":
        n = int(value)
        m = antenna_total - n
        if m < 1:
            raise ConfigError(f"antenna split {n}+{m} needs both sides >= 1")
        return base.with_(n_s=n, n_r=n, m_r=m, m_d=m)
    raise ConfigError(f"unknown sweep axis: '{axis}'")


def _run_one(cfg: ExperimentConfig, sweep_value: float, trial: int,
             params: SystemParams) -> list:
    channels = draw_channels(params, cfg.seed, key=(trial, 0))
    est = estimate_links(channels, params, cfg.seed, key=(trial,))
    records = []
    for scheme in cfg.schemes:
        scheme = SchemeId(scheme)
        t0 = time.perf_counter()
        res = optimize_scheme(est, params, scheme, cfg.tau_grid, cfg.gp)
        cancellation = scheme is not SchemeId.TCO_2
        upper = end_to_end_rate(est, res.sched, params, "upper", cancellation)
        records.append(TrialRecord(
            trial_index=trial,
            sweep_value=float(sweep_value),
            scheme=scheme.value,
            rate_lower=res.rate.i_end,
            rate_upper=upper.i_end,
            tau_star=res.tau_star,
            zeta=res.zeta,
            converged=res.converged,
            wall_time=time.perf_counter() - t0,
        ))
    return records


def _task(args):
    cfg, sweep_value, trial, params = args
    if params is None:
        params = _apply_sweep(cfg.params, cfg.sweep_axis[0], sweep_value, cfg.antenna_total)
    return _run_one(cfg, sweep_value, trial, params)


def _map_tasks(cfg: ExperimentConfig, tasks):
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_task, tasks, chunksize=1))
    return [_task(t) for t in tasks]


def run_experiment(cfg: ExperimentConfig) -> list:
    """Run a sweep experiment; records come back in (sweep value, trial) order."""
    if cfg.experiment in ("contour", "approx_contour"):
        raise ConfigError(f"{cfg.experiment} runs through contour_grid(), not run_experiment()")
    name, values = cfg.sweep_axis
    tasks = [(cfg, v, k, None) for v in values for k in range(cfg.trials)]
    out = []
    for recs in _map_tasks(cfg, tasks):
        out.extend(recs)
    return out


def contour_grid(cfg: ExperimentConfig):
    """Mean optimized (or approximated) rate over the (rho_r, eta_r) grid.

    Returns (means, rho_axis_db, eta_axis_db); means has shape
    (len(rho_axis), len(eta_axis)). rho_d tracks rho_r at the configured
    ratio. For approx_contour the grid is the closed-form rate itself.
    """
    rho_axis = tuple(cfg.grid_rho_r_db)
    eta_axis = tuple(cfg.grid_eta_r_db)
    base = cfg.params
    ratio = base.rho_r / base.rho_d if base.rho_d > 0 else 2.0

    if cfg.experiment == "approx_contour":
        means = np.zeros((len(rho_axis), len(eta_axis)))
        for i, r_db in enumerate(rho_axis):
            for j, e_db in enumerate(eta_axis):
                rp = RegimeParams(n=base.n_s, m=base.m_r,
                                  rho_r=db_to_linear(r_db),
                                  rho_d=db_to_linear(r_db) / ratio,
                                  eta_r=db_to_linear(e_db),
                                  kappa=base.kappa, beta=base.beta)
                means[i, j] = approx_rate(rp)[0]
        return means, rho_axis, eta_axis

    if len(cfg.schemes) != 1:
        raise ConfigError("contour experiments run a single scheme")
    tasks = []
    for i, r_db in enumerate(rho_axis):
        for j, e_db in enumerate(eta_axis):
            rho_r = db_to_linear(r_db)
            params = base.with_(rho_r=rho_r, rho_d=rho_r / ratio, eta_r=db_to_linear(e_db))
            for k in range(cfg.trials):
                tasks.append((cfg, float(i * len(eta_axis) + j), k, params))

    means = np.zeros((len(rho_axis), len(eta_axis)))
    counts = np.zeros_like(means)
    for recs in _map_tasks(cfg, tasks):
        for r in recs:
            i, j = divmod(int(r.sweep_value), len(eta_axis))
            means[i, j] += r.rate_lower
            counts[i, j] += 1
    means /= np.maximum(counts, 1)
    return means, rho_axis, eta_axis


# ---------------------------------------------------------------------------
# persistence

_CSV_FIELDS = ("kind", "trial_index", "sweep_value", "scheme", "rate_lower",
               "rate_upper", "tau_star", "zeta", "converged")


def _fmt(x: float) -> str:
    return f"{x:.17e}"


def emit_csv(records, path: str) -> str:
    """Write per-trial rows plus mean/std summary rows per (sweep value, scheme).

    wall_time is intentionally not serialized so identical (config, seed)
    re-runs produce byte-identical files.
    """
    if not records:
        raise ValueError("records must be non-empty")
    lines = [",".join(_CSV_FIELDS)]
    for r in records:
        lines.append(",".join([
            "record", str(r.trial_index), _fmt(r.sweep_value), r.scheme,
            _fmt(r.rate_lower), _fmt(r.rate_upper), _fmt(r.tau_star),
            _fmt(r.zeta), "true" if r.converged else "false",
        ]))
    groups: dict = {}
    for r in records:
        groups.setdefault((r.sweep_value, r.scheme), []).append(r)
    for (sv, scheme), recs in groups.items():
        lo = np.array([r.rate_lower for r in recs])
        hi = np.array([r.rate_upper for r in recs])
        ts = np.array([r.tau_star for r in recs])
        zs = np.array([r.zeta for r in recs])
        conv = float(np.mean([r.converged for r in recs]))
        for kind, f in (("mean", np.mean), ("std", np.std)):
            lines.append(",".join([
                kind, "", _fmt(sv), scheme, _fmt(float(f(lo))), _fmt(float(f(hi))),
                _fmt(float(f(ts))), _fmt(float(f(zs))), _fmt(conv),
            ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def parse_csv(path: str) -> list:
    """Read back the per-trial records (wall_time is not serialized: 0.0)."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != _CSV_FIELDS:
            raise ValueError(f"unexpected CSV header in {path}")
        for line in fh:
            parts = line.strip().split(",")
            if parts[0] != "record":
                continue
            out.append(TrialRecord(
                trial_index=int(parts[1]),
                sweep_value=float(parts[2]),
                scheme=parts[3],
                rate_lower=float(parts[4]),
                rate_upper=float(parts[5]),
                tau_star=float(parts[6]),
                zeta=float(parts[7]),
                converged=parts[8] == "true",
            ))
    return out


def emit_contour_csv(means, rho_axis, eta_axis, path: str, value_name="mean_rate_lower") -> str:
    lines = [f"rho_r_db,eta_r_db,{value_name}"]
    for i, r_db in enumerate(rho_axis):
        for j, e_db in enumerate(eta_axis):
            lines.append(f"{_fmt(r_db)},{_fmt(e_db)},{_fmt(means[i, j])}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_metadata(cfg: ExperimentConfig, path: str | None = None) -> str:
    """Sidecar JSON with the fully resolved config and seed."""
    def enc(o):
        if dataclasses.is_dataclass(o):
            return {k: enc(v) for k, v in dataclasses.asdict(o).items()}
        if isinstance(o, SchemeId):
            return o.value
        if isinstance(o, tuple):
            return [enc(v) for v in o]
        return o

    meta_path = path or cfg.out_path + ".meta.json"
    payload = {k: enc(v) for k, v in dataclasses.asdict(cfg).items()}
    payload["schemes"] = [SchemeId(s).value for s in cfg.schemes]
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta_path
