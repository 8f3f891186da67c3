"""Experiment runner: ``varground run <config>`` and ``varground table <name>``.

A config is an INI file with three sections::

    [experiment]
    label = hubbard-ed
    model = hubbard          ; hubbard | schwinger | ising | ladder
    method = ed              ; ed | dmrg | rbm | vqe
    seed = 0
    output_dir = out

    [model]
    n_sites = 4
    u = 2.0

    [method]
    sector = auto

Unknown keys are errors.  ``VARGROUND_OUTPUT_DIR`` overrides ``output_dir``
and ``--out`` overrides both.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import math
import os
import subprocess
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .models import (
    HubbardParams,
    LadderParams,
    Normalization,
    Ordering,
    SchwingerParams,
    hubbard_hamiltonian,
    hva_term_groups,
    ising_example_hamiltonian,
    ladder_hamiltonian,
    natural_energy_scale,
    schwinger_hamiltonian,
    vqe_energy_scale,
)

OUTPUT_ENV = "VARGROUND_OUTPUT_DIR"
EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    """The experiment description is malformed or inconsistent."""


def fmt(x) -> str:
    """CSV number format: 17 significant digits, locale independent."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class IsingParams:
    n_sites: int
    J: float = 1.0
    g: float = 1.0

    @property
    def n_qubits(self) -> int:
        return self.n_sites


_MODEL_KEYS = {
    "hubbard": {"n_sites": int, "t": float, "u": float, "ordering": str, "normalization": str},
    "schwinger": {"n_sites": int, "x": float, "mu": float, "ell": float},
    "ising": {"n_sites": int, "J": float, "g": float},
    "ladder": {"n_sites": int, "c_h": "triple", "c_v": "triple"},
}

_METHOD_KEYS = {
    "ed": {"sector": str, "tol": float},
    "dmrg": {
        "chi_max": int, "n_sweeps": int, "svd_cutoff": float, "local_tol": float,
        "energy_tol": float, "init_chi": int, "sector": str,
    },
    "rbm": {
        "alpha": int, "n_iters": int, "n_samples": int, "n_burn": int, "thin": int,
        "n_chains": int, "move": str, "sector": str, "eta": float, "lambda_reg": float,
        "mode": str, "exact": bool, "window_fraction": float, "init_std": float,
        "energy_scale": str,
    },
    "vqe": {
        "p": int, "eta": float, "n_iters": int, "report_window": int, "grad_mode": str,
        "init_scale": float, "energy_scale": str,
    },
}  # fmt: skip

_METHOD_DEFAULTS = {
    "ed": {"sector": "auto", "tol": 1e-12},
    "dmrg": {"chi_max": 128, "n_sweeps": 8, "sector": "auto"},
    "rbm": {
        "alpha": 4, "n_iters": 40000, "n_samples": 200, "n_burn": 1000, "thin": 1,
        "n_chains": 1, "move": "single_flip", "sector": "none", "eta": 0.02,
        "lambda_reg": 1e-3, "mode": "sr", "exact": False, "window_fraction": 0.25,
        "init_std": 0.01, "energy_scale": "natural",
    },
    "vqe": {
        "p": 6, "eta": 0.01, "n_iters": 2000, "grad_mode": "adjoint", "init_scale": 0.01,
        "energy_scale": "natural",
    },
}  # fmt: skip


@dataclass(frozen=True)
class ExperimentConfig:
    label: str
    model: str
    model_params: object
    method: str
    method_params: dict
    output_dir: str = "."
    seed: int = 0

    @property
    def n_sites(self) -> int:
        return self.model_params.n_sites

    def with_seed(self, seed: int) -> ExperimentConfig:
        return dataclasses.replace(self, seed=seed)


def _convert(key: str, raw, kind):
    try:
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "triple":
            vals = raw if isinstance(raw, (tuple, list)) else str(raw).replace(",", " ").split()
            vals = tuple(float(v) for v in vals)
            if len(vals) != 3:
                raise ValueError(raw)
            return vals
        if kind is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(str(raw).strip()) if not isinstance(raw, (int, float)) else int(raw)
        val = kind(raw.strip() if isinstance(raw, str) else raw)
        if kind is float and not math.isfinite(val):
            raise ValueError(raw)
        return val
    except (TypeError, ValueError):
        raise ConfigError(f"{key} = {raw!r} is not a valid {getattr(kind, '__name__', kind)}")


def _model_params(model: str, values: dict):
    try:
        if model == "hubbard":
            return HubbardParams(**values)
        if model == "schwinger":
            return SchwingerParams(**values)
        if model == "ising":
            if values.get("n_sites", 0) < 2:
                raise ValueError("Ising chain needs n_sites >= 2")
            return IsingParams(**values)
        return LadderParams(**values)
    except TypeError as exc:
        raise ConfigError(f"model {model}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"model {model}: {exc}") from None


def build_config(
    experiment: dict, model_values: dict, method_values: dict
) -> ExperimentConfig:
    """Validate plain dictionaries into an :class:`ExperimentConfig`."""
    experiment = dict(experiment)
    allowed = {"label", "model", "method", "seed", "output_dir"}
    extra = set(experiment) - allowed
    if extra:
        raise ConfigError(f"unknown [experiment] keys: {', '.join(sorted(extra))}")
    model = str(experiment.get("model", "")).strip().lower()
    method = str(experiment.get("method", "")).strip().lower()
    if model not in _MODEL_KEYS:
        raise ConfigError(f"model must be one of {', '.join(_MODEL_KEYS)}; got {model!r}")
    if method not in _METHOD_KEYS:
        raise ConfigError(f"method must be one of {', '.join(_METHOD_KEYS)}; got {method!r}")
    seed = _convert("seed", experiment.get("seed", 0), int)
    label = str(experiment.get("label", f"{model}-{method}")).strip()
    if not label or any(c in label for c in "/\\"):
        raise ConfigError(f"label {label!r} must be nonempty and free of path separators")

    schema = _MODEL_KEYS[model]
    extra = set(model_values) - set(schema)
    if extra:
        raise ConfigError(f"unknown [model] keys for {model}: {', '.join(sorted(extra))}")
    if "n_sites" not in model_values:
        raise ConfigError("[model] needs n_sites")
    mv = {k: _convert(k, v, schema[k]) for k, v in model_values.items()}
    params = _model_params(model, mv)

    schema = _METHOD_KEYS[method]
    extra = set(method_values) - set(schema)
    if extra:
        raise ConfigError(f"unknown [method] keys for {method}: {', '.join(sorted(extra))}")
    merged = dict(_METHOD_DEFAULTS[method])
    if method == "rbm" and model == "hubbard":
        # single flips leave the particle-number sector and stall on Hubbard
        merged.update(move="exchange_pair", sector="auto")
    merged.update({k: _convert(k, v, schema[k]) for k, v in method_values.items()})
    cfg = ExperimentConfig(
        label, model, params, method, merged, str(experiment.get("output_dir", ".")), seed
    )
    _check_pair(cfg)
    return cfg


def _check_pair(cfg: ExperimentConfig):
    mp, m = cfg.method_params, cfg.method
    if "sector" in mp and mp["sector"] not in ("auto", "none"):
        raise ConfigError("sector must be 'auto' or 'none'")
    for key in ("n_iters", "p", "chi_max", "n_sweeps", "alpha", "thin", "n_chains", "init_chi"):
        if key in mp and mp[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    if "eta" in mp and not mp["eta"] > 0:
        raise ConfigError("eta must be positive")
    if "energy_scale" in mp:
        val = mp["energy_scale"]
        if val != "natural":
            try:
                if not float(val) > 0:
                    raise ValueError
            except ValueError:
                raise ConfigError("energy_scale must be 'natural' or a positive number") from None
    if m == "rbm":
        if mp["move"] not in ("single_flip", "exchange_pair"):
            raise ConfigError("move must be single_flip or exchange_pair")
        if mp["mode"] not in ("sr", "plain_gradient"):
            raise ConfigError("mode must be sr or plain_gradient")
        if mp["sector"] == "auto" and mp["move"] != "exchange_pair":
            raise ConfigError("sector = auto needs move = exchange_pair")
        if not 0 < mp["window_fraction"] <= 1:
            raise ConfigError("window_fraction must be in (0, 1]")
        if mp["n_samples"] < 2:
            raise ConfigError("n_samples must be >= 2")
        if mp["exact"] and cfg.model_params.n_qubits > 16:
            raise ConfigError("exact summation is limited to 16 qubits")
    if m == "vqe":
        if cfg.model not in ("hubbard", "schwinger", "ladder"):
            raise ConfigError("vqe needs a model with a term grouping (hubbard, schwinger, ladder)")
        if cfg.model == "hubbard" and cfg.model_params.ordering is not Ordering.SNAKE:
            raise ConfigError("vqe on hubbard needs ordering = snake")
        if cfg.model in ("hubbard", "ladder") and cfg.model_params.n_sites % 2:
            raise ConfigError("the singlet start needs an even number of sites")
        if mp["grad_mode"] not in ("adjoint", "finite_diff"):
            raise ConfigError("grad_mode must be adjoint or finite_diff")
        mp.setdefault("report_window", 1000 if cfg.model == "schwinger" else 500)
        if mp["report_window"] < 1 or mp["report_window"] > mp["n_iters"]:
            raise ConfigError("report_window must be in [1, n_iters]")
    if m == "ed" and cfg.model_params.n_qubits > 24:
        raise ConfigError("exact diagonalization is limited to 24 qubits")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keys are case sensitive (J)
    try:
        parser.read_string(path.read_text(), source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    extra = set(parser.sections()) - {"experiment", "model", "method"}
    if extra:
        raise ConfigError(f"unknown sections: {', '.join(sorted(extra))}")
    if not parser.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    sec = {s: dict(parser[s]) if parser.has_section(s) else {} for s in ("experiment", "model", "method")}
    return build_config(sec["experiment"], sec["model"], sec["method"])


# --------------------------------------------------------------------------
# execution


@dataclass
class ResultRecord:
    label: str
    model: str
    model_params: str
    method: str
    method_params: str
    energy: float
    energy_err: float | None
    energy_per_site: float
    wall_time_s: float
    git_or_build_id: str
    seed: int

    FIELDS = (
        "label", "model", "model_params", "method", "method_params", "energy",
        "energy_err", "energy_per_site", "wall_time_s", "git_or_build_id", "seed",
    )  # fmt: skip

    def row(self) -> list[str]:
        return [fmt(getattr(self, f)) for f in self.FIELDS]


@dataclass
class RunOutput:
    record: ResultRecord
    trace_header: tuple[str, ...]
    trace: list[tuple] = field(default_factory=list)


def build_id() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        )  # fmt: skip
        return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        return __version__


def _params_text(obj) -> str:
    items = dataclasses.asdict(obj).items() if dataclasses.is_dataclass(obj) else obj.items()
    parts = []
    for k, v in sorted(items):
        if isinstance(v, (tuple, list)):
            v = " ".join(fmt(float(x)) for x in v)
        elif hasattr(v, "value"):
            v = v.value
        parts.append(f"{k}={fmt(v)}")
    return ";".join(parts)


def hamiltonian_for(cfg: ExperimentConfig):
    p = cfg.model_params
    if cfg.model == "hubbard":
        return hubbard_hamiltonian(p)
    if cfg.model == "schwinger":
        return schwinger_hamiltonian(p)
    if cfg.model == "ising":
        return ising_example_hamiltonian(p.n_sites, p.J, p.g)
    return ladder_hamiltonian(p)


def total_energy_factor(cfg: ExperimentConfig) -> float:
    """Operator eigenvalue -> total energy (per-site Hubbard normalization is undone)."""
    p = cfg.model_params
    if cfg.model == "hubbard" and p.normalization is Normalization.PER_SITE_OVER_T:
        return float(p.n_sites)
    return 1.0


def _sector(cfg: ExperimentConfig):
    from .exact_diag import SectorSpec

    if cfg.method_params.get("sector", "none") == "none":
        return None
    p = cfg.model_params
    if cfg.model == "hubbard":
        return SectorSpec.hubbard_half_filling(p.n_sites, p.ordering.value)
    if cfg.model == "schwinger":
        return SectorSpec.total_z(p.n_qubits, 0)
    return None


def _energy_scale(cfg: ExperimentConfig) -> float:
    val = cfg.method_params.get("energy_scale", "natural")
    if val == "natural":
        if cfg.method == "vqe":
            return vqe_energy_scale(cfg.model_params)
        return natural_energy_scale(cfg.model_params)
    return float(val)


def execute(cfg: ExperimentConfig) -> RunOutput:
    """Run one experiment in-process; solver errors propagate."""
    h = hamiltonian_for(cfg)
    mp = cfg.method_params
    t0 = time.perf_counter()
    err = None
    if cfg.method == "ed":
        from .exact_diag import ground_state

        res = ground_state(h, _sector(cfg), tol=mp["tol"])
        eig = res.energy
        header = ("iter", "energy_per_site")
        rows = [(0, eig * total_energy_factor(cfg) / cfg.n_sites)]
    elif cfg.method == "dmrg":
        from .dmrg import DmrgConfig, dmrg_run
        from .mpo import mpo_from_pauli_sum

        keys = ("chi_max", "n_sweeps", "svd_cutoff", "local_tol", "energy_tol", "init_chi")
        dc = DmrgConfig(
            **{k: mp[k] for k in keys if k in mp}, seed=cfg.seed, sector=_sector(cfg)
        )
        res = dmrg_run(mpo_from_pauli_sum(h, compress=True), cfg=dc)
        eig = res.energy
        f = total_energy_factor(cfg) / cfg.n_sites
        header = ("update", "energy_per_site", "discarded_weight")
        rows = [(i, e * f, d) for i, (e, d) in enumerate(zip(res.trace, res.discarded))]
    elif cfg.method == "rbm":
        from .rbm import Move, RbmParams, SamplerConfig, SrConfig, vmc_run

        n = h.n_qubits
        sector = 0 if mp["sector"] == "auto" else None
        sampler = None
        if not mp["exact"]:
            sampler = SamplerConfig(
                n_samples=mp["n_samples"], n_burn=mp["n_burn"], thin=mp["thin"],
                move=Move(mp["move"]), seed=cfg.seed, sector=sector, n_chains=mp["n_chains"],
            )  # fmt: skip
        init = RbmParams.random(n, mp["alpha"], seed=cfg.seed, std=mp["init_std"])
        sr = SrConfig(eta=mp["eta"], lambda_reg=mp["lambda_reg"], n_iters=mp["n_iters"], mode=mp["mode"])
        res = vmc_run(
            h, init, sampler, sr, exact=mp["exact"], window_fraction=mp["window_fraction"],
            energy_scale=_energy_scale(cfg),
        )  # fmt: skip
        eig, err = res.mean, res.err
        f = total_energy_factor(cfg) / cfg.n_sites
        header = ("iter", "energy_mean", "energy_err", "acceptance_rate", "grad_norm")
        rows = [(i, e * f, s * f, a, g * f) for i, e, s, a, g in res.trace_rows()]
    else:
        from .vqe import VqeConfig, vqe_run

        vc = VqeConfig(
            eta=mp["eta"], n_iters=mp["n_iters"], grad_mode=mp["grad_mode"], seed=cfg.seed,
            report_window=mp["report_window"], init_scale=mp["init_scale"],
        )  # fmt: skip
        res = vqe_run(
            h, hva_term_groups(cfg.model_params), vc, p=mp["p"], energy_scale=_energy_scale(cfg)
        )
        eig, err = res.mean, res.std
        f = total_energy_factor(cfg) / cfg.n_sites
        header = ("iter", "energy_per_site", "grad_norm")
        rows = [(i, e * f, g * f) for i, e, g in res.trace_rows()]
    wall = time.perf_counter() - t0
    total = eig * total_energy_factor(cfg)
    rec = ResultRecord(
        cfg.label,
        cfg.model,
        _params_text(cfg.model_params),
        cfg.method,
        _params_text(cfg.method_params),
        total,
        None if err is None else err * total_energy_factor(cfg),
        total / cfg.n_sites,
        wall,
        build_id(),
        cfg.seed,
    )
    return RunOutput(rec, header, rows)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def write_outputs(out: RunOutput, directory: Path):
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "result.csv").write_text(_csv_text(ResultRecord.FIELDS, [out.record.row()]))
    (directory / "trace.csv").write_text(_csv_text(out.trace_header, out.trace))


def _output_dir(cfg_dir: str, override: str | None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get(OUTPUT_ENV)
    return Path(env) if env else Path(cfg_dir)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = execute(cfg)
    except Exception as exc:  # noqa: BLE001 - any solver failure maps to exit 1
        print(f"solver failure in {cfg.label}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    directory = _output_dir(cfg.output_dir, args.out)
    write_outputs(out, directory)
    r = out.record
    err = "" if r.energy_err is None else f" +- {r.energy_err / cfg.n_sites:.3g}"
    print(f"{cfg.label}: E0/N = {r.energy_per_site:.12f}{err} ({r.wall_time_s:.1f} s) -> {directory}")
    return EXIT_OK


# --------------------------------------------------------------------------
# table suites

_HUB_NS = (4, 6, 8)
_HUB_US = (0.0, 2.0, 4.0, 8.0)
_SCHW_MUS = (0.0, 2.5)


@dataclass(frozen=True)
class Cell:
    row: str
    col: str
    config: ExperimentConfig
    reference: float
    reference_err: float | None = None


# reference values are E0/N as printed
_REF = {
    "table1": {
        (4, 0.0): -1.11803398874989, (4, 2.0): -1.71898570225126,
        (4, 4.0): -2.48828632717113, (4, 8.0): -4.27929310334025,
        (6, 0.0): -1.16465306914497, (6, 2.0): -1.75771896573933,
        (6, 4.0): -2.51542755325090, (6, 8.0): -4.29468312587687,
        (8, 0.0): -1.18969262078591, (8, 2.0): -1.77820426808516,
        (8, 4.0): -2.52947587489120, (8, 8.0): -4.30260392500470,
    },
    "table2": {
        (4, 0.0): -1.11803398874989, (4, 2.0): -1.71898570225126,
        (4, 4.0): -2.48828632717113, (4, 8.0): -4.2792931033402,
        (6, 0.0): -1.16465306914497, (6, 2.0): -1.75771896573933,
        (6, 4.0): -2.51542755325092, (6, 8.0): -4.2946831258768,
        (8, 0.0): -1.18969261937212, (8, 2.0): -1.77820426730531,
        (8, 4.0): -2.52947587474444, (8, 8.0): -4.3026039250042,
    },
    "table3": {
        (4, 0.0): (-1.112495, 0.00458), (4, 2.0): (-1.713604, 0.00430),
        (4, 4.0): (-2.482209, 0.00468), (4, 8.0): (-4.270301, 0.00639),
        (6, 0.0): (-1.154108, 0.00698), (6, 2.0): (-1.747218, 0.00706),
        (6, 4.0): (-2.502630, 0.00775), (6, 8.0): (-4.272329, 0.01133),
        (8, 0.0): (-1.172597, 0.00820), (8, 2.0): (-1.759270, 0.00934),
        (8, 4.0): (-2.507544, 0.01090), (8, 8.0): (-4.211473, 0.01207),
    },
    "table4": {
        (4, 0.0): (-1.1180205962, 0.0000029564), (4, 2.0): (-1.7188572935, 0.0000369740),
        (4, 4.0): (-2.4882732507, 0.0000091629), (4, 8.0): (-4.2743820234, 0.0023639140),
        (6, 0.0): (-1.1646497137, 0.0000005722), (6, 2.0): (-1.7574496710, 0.0000149607),
        (6, 4.0): (-2.5146574899, 0.0000709233), (6, 8.0): (-4.2844134948, 0.0007170862),
        (8, 0.0): (-1.1896184621, 0.0000047168), (8, 2.0): (-1.7765344066, 0.0001591077),
        (8, 4.0): (-2.5201447110, 0.0012651519), (8, 8.0): (-4.2849922854, 0.0013377152),
    },
    "table5": {
        (4, 0.0): -55.6279081848, (4, 2.5): -54.4037370017,
        (8, 0.0): -59.1849689348, (8, 2.5): -57.9669117540,
        (16, 0.0): -61.1628081594, (16, 2.5): -59.9540535908,
        (32, 0.0): -62.2090479768, (32, 2.5): -61.0124235459,
        (64, 0.0): -62.7525150696, (64, 2.5): -61.5643604631,
    },
    "table6": {
        (4, 0.0): (-55.5133966685, 0.0004353889), (4, 2.5): (-54.2636722061, 0.0002959286),
        (8, 0.0): (-58.8314466647, 0.0005823967), (8, 2.5): (-57.5816064928, 0.0004639107),
        (16, 0.0): (-60.3183145037, 0.0005032675), (16, 2.5): (-59.0682375601, 0.0004984761),
    },
}  # fmt: skip

_TABLE_METHOD = {
    "table1": ("hubbard", "ed", {}),
    "table2": ("hubbard", "dmrg", {}),
    "table3": ("hubbard", "rbm", {}),
    "table4": ("hubbard", "vqe", {}),
    "table5": ("schwinger", "dmrg", {}),
    "table6": ("schwinger", "vqe", {"n_iters": 3000, "report_window": 1000}),
}
TABLES = tuple(_TABLE_METHOD)


def table_cells(name: str, seed: int = 0) -> list[Cell]:
    if name not in _TABLE_METHOD:
        raise ConfigError(f"unknown table {name!r}; choose from {', '.join(TABLES)}")
    model, method, extra = _TABLE_METHOD[name]
    cells = []
    for (n, coupling), ref in _REF[name].items():
        ref_err = None
        if isinstance(ref, tuple):
            ref, ref_err = ref
        if model == "hubbard":
            mv = {"n_sites": n, "u": coupling}
            row, col = f"N={n}", f"U/t={coupling:g}"
        else:
            mv = {"n_sites": n, "mu": coupling, "x": 100.0}
            row, col = f"N={n}", f"mu={coupling:g}"
        label = f"{name}-N{n}-{col.split('=')[0].replace('/', '')}{coupling:g}"
        cfg = build_config(
            {"label": label, "model": model, "method": method, "seed": seed}, mv, dict(extra)
        )
        cells.append(Cell(row, col, cfg, ref, ref_err))
    return cells


def _run_cell(args):
    cell, directory = args
    try:
        out = execute(cell.config)
        write_outputs(out, directory)
        return out.record, None
    except Exception as exc:  # noqa: BLE001 - reported per cell
        return None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"


TABLE_FIELDS = (
    "row", "col", "energy_per_site", "energy_err_per_site", "reference", "reference_err",
    "abs_deviation", "wall_time_s", "status",
)  # fmt: skip


def run_table(name: str, out_dir: Path, jobs: int = 1, seed: int = 0) -> tuple[Path, int]:
    """Run every cell (``jobs`` worker processes); returns (csv path, failed count)."""
    cells = table_cells(name, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    work = [(c, out_dir / name / c.config.label) for c in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, work))
    else:
        results = [_run_cell(w) for w in work]
    rows, failed = [], 0
    grid: dict[str, dict[str, str]] = {}
    for cell, (rec, err) in zip(cells, results):
        if rec is None:
            failed += 1
            print(f"{cell.config.label} failed: {err}", file=sys.stderr)
            rows.append((cell.row, cell.col, None, None, cell.reference, cell.reference_err, None, None, "failed"))
            grid.setdefault(cell.row, {})[cell.col] = "failed"
            continue
        n = cell.config.n_sites
        e_err = None if rec.energy_err is None else rec.energy_err / n
        dev = abs(rec.energy_per_site - cell.reference)
        rows.append(
            (cell.row, cell.col, rec.energy_per_site, e_err, cell.reference, cell.reference_err,
             dev, rec.wall_time_s, "ok")
        )  # fmt: skip
        grid.setdefault(cell.row, {})[cell.col] = fmt(rec.energy_per_site)
    path = out_dir / f"{name}.csv"
    path.write_text(_csv_text(TABLE_FIELDS, rows))
    cols = list(dict.fromkeys(c.col for c in cells))
    grid_rows = [[r] + [grid[r].get(c, "") for c in cols] for r in dict.fromkeys(c.row for c in cells)]
    (out_dir / f"{name}_grid.csv").write_text(_csv_text(["N"] + cols, grid_rows))
    return path, failed


def cmd_table(args) -> int:
    if args.name not in TABLES:
        print(f"error: unknown table {args.name!r}; choose from {', '.join(TABLES)}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    out = _output_dir(".", args.out)
    path, failed = run_table(args.name, out, args.jobs, args.seed or 0)
    print(f"wrote {path}" + (f" ({failed} failed cells)" if failed else ""))
    return EXIT_SOLVER if failed else EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varground", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"varground {__version__}")
    ap.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (overrides config and env)")
    t = sub.add_parser("table", help="reproduce one of the reference tables")
    t.add_argument("name", help=", ".join(TABLES))
    t.add_argument("--out", default=None)
    t.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_CONFIG
        return EXIT_OK if code == 0 else EXIT_CONFIG
    if args.command == "run":
        return cmd_run(args)
    return cmd_table(args)


if __name__ == "__main__":
    sys.exit(main())
