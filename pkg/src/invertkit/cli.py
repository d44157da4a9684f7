"""Command-line driver: synth, regress, invert, pipeline, plot.

Settings live in one flat namespace of dotted keys (``gp.population_size``,
``psi.resolution_width``, ``problem.R`` ...).  A JSON file given with
``--config`` sets any of them and flags of the same name override the file.
Every run starts by printing the fully resolved configuration.

Exit codes: 0 success, 1 input/config error (nothing written), 2 regression
budget exhausted before the target cost, 3 inversion box budget exhausted
(partial paving written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

from . import data as datamod
from .expr import ExprVector, SexprError, format_model, parse_model
from .gp import GpConfig, regress
from .interval import Box, Paving
from .psi import InversionProblem, PavingIncomplete, PsiConfig, invert_decomposed
from .svg import render

log = logging.getLogger("invertkit")

EXIT_OK, EXIT_ERROR, EXIT_BUDGET, EXIT_BOXES = 0, 1, 2, 3


def _env_workers() -> int:
    try:
        return max(1, int(os.environ.get("INVERTKIT_WORKERS", "1")))
    except ValueError:
        return 1


def _json_value(text):
    return json.loads(text) if isinstance(text, str) else text


_GP_DEFAULTS = GpConfig()
_GP_TYPES = {"basis": _json_value, "const_range": _json_value}

# key -> (parser, default)
KEYS: dict[str, tuple] = {
    "data.path": (str, None),
    "data.inputs": (int, None),
    "data.decimate": (int, 1),
    "synth.expr": (str, "(* (sin (* 5 x)) (exp (neg (* x x))))"),
    "synth.box": (_json_value, [[-3.0, 3.0]]),
    "synth.m": (int, 601),
    "synth.noise": (float, 0.0),
    "synth.seed": (int, 0),
    "synth.mode": (str, "grid"),
    "problem.model": (str, None),
    "problem.model_file": (str, None),
    "problem.R": (_json_value, None),
    "problem.P": (_json_value, None),
    "psi.resolution": (float, None),
    "psi.resolution_width": (float, None),
    "psi.max_boxes": (int, 10_000_000),
    "psi.workers": (int, None),
    "out.dir": (str, "out"),
    "plot.paving": (str, None),
    "plot.out": (str, None),
}
for _f in fields(GpConfig):
    _default = getattr(_GP_DEFAULTS, _f.name)
    if isinstance(_default, tuple):
        _default = list(_default)
    KEYS[f"gp.{_f.name}"] = (_GP_TYPES.get(_f.name, type(_default)), _default)
KEYS["gp.workers"] = (int, None)


class ConfigError(ValueError):
    pass


def resolve(config_path: str | None, overrides: dict) -> dict:
    cfg = {k: d for k, (_, d) in KEYS.items()}
    if config_path:
        try:
            file_cfg = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        for k, v in file_cfg.items():
            if k not in KEYS:
                raise ConfigError(f"unknown config key {k!r}")
            cfg[k] = v
    for k, v in overrides.items():
        try:
            cfg[k] = KEYS[k][0](v)
        except (ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad value for {k}: {v!r} ({exc})") from None
    for k in ("gp.workers", "psi.workers"):
        if cfg[k] is None:
            cfg[k] = _env_workers()
    return cfg


def echo_config(cfg: dict, command: str) -> None:
    print(json.dumps({"command": command, "config": cfg}, sort_keys=True), flush=True)


def gp_config(cfg: dict) -> GpConfig:
    kw = {f.name: cfg[f"gp.{f.name}"] for f in fields(GpConfig)}
    try:
        return GpConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"gp config: {exc}") from None


def _write_files(files: dict[Path, str]) -> None:
    """Write every file via a temp file and rename."""
    staged = []
    for path, text in files.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        staged.append((tmp, path))
    for tmp, path in staged:
        os.replace(tmp, path)


# stages


def _load_table(cfg: dict) -> datamod.SignalTable:
    path = cfg["data.path"]
    if not path:
        raise ConfigError("data.path is required")
    try:
        table = datamod.load_csv(path, cfg["data.inputs"])
        if cfg["data.decimate"] > 1:
            table = datamod.decimate(table, cfg["data.decimate"])
    except OSError as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"dataset {path}: {exc}") from None
    return table


def run_regress(cfg: dict) -> tuple[ExprVector, dict, bool]:
    table = _load_table(cfg)
    gcfg = gp_config(cfg)
    n_out = table.outputs.shape[1]
    components, reports = [], []
    for k in range(n_out):
        # per-output seeds never overlap with another output's restarts
        comp_cfg = GpConfig(**{**gcfg.to_dict(), "seed": gcfg.seed + k * (gcfg.restarts + 1)})
        rep = regress(table.dataset(k), comp_cfg)
        log.info("output %d: cost %.6g after %d generations", k, rep.best.cost, rep.generations_used)
        components.append(rep.best.expr)
        reports.append(rep.to_dict())
    model = ExprVector(tuple(components), table.inputs.shape[1])
    ok = all(r["reached_target"] for r in reports)
    report = dict(reports[0]) if n_out == 1 else {"components": reports}
    report["config"] = gcfg.to_dict()
    return model, report, ok


def _model_text(cfg: dict) -> str:
    if cfg["problem.model"]:
        return cfg["problem.model"]
    if cfg["problem.model_file"]:
        try:
            return Path(cfg["problem.model_file"]).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read model: {exc}") from None
    raise ConfigError("problem.model or problem.model_file is required")


def _box(cfg: dict, key: str) -> Box:
    spec = cfg[key]
    if spec is None:
        raise ConfigError(f"{key} is required")
    try:
        if len(spec) == 2 and all(isinstance(v, (int, float)) for v in spec):
            return Box([spec])
        return Box(spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _psi_config(cfg: dict, dim: int) -> PsiConfig:
    try:
        if cfg["psi.resolution"] is not None:
            return PsiConfig(cfg["psi.resolution"], cfg["psi.max_boxes"], cfg["psi.workers"])
        if cfg["psi.resolution_width"] is not None:
            return PsiConfig.from_width(
                cfg["psi.resolution_width"], dim, max_boxes=cfg["psi.max_boxes"], workers=cfg["psi.workers"]
            )
    except ValueError as exc:
        raise ConfigError(f"psi config: {exc}") from None
    raise ConfigError("psi.resolution or psi.resolution_width is required")


def run_invert(cfg: dict, model_text: str) -> tuple[Paving, bool]:
    R, P = _box(cfg, "problem.R"), _box(cfg, "problem.P")
    try:
        problem = InversionProblem(parse_model(model_text, R.dim), R, P)
    except (SexprError, ValueError) as exc:
        raise ConfigError(f"problem: {exc}") from None
    pcfg = _psi_config(cfg, R.dim)
    try:
        return invert_decomposed(problem, pcfg), True
    except PavingIncomplete as exc:
        log.warning("%s", exc)
        return exc.paving, False


def _paving_files(out: Path, paving: Paving) -> dict[Path, str]:
    files = {out / "paving.json": paving.to_json(), out / "paving.csv": paving.to_csv()}
    if paving.R.dim <= 2:
        files[out / "paving.svg"] = render(paving)
    return files


def _summary(paving: Paving) -> dict:
    return {
        "accepted": len(paving.accepted),
        "rejected": len(paving.rejected),
        "boundary": len(paving.boundary),
        "volumes": paving.volumes(),
    }


# subcommands


def cmd_synth(cfg: dict) -> int:
    table = datamod.synth(
        cfg["synth.expr"], cfg["synth.box"], cfg["synth.m"], cfg["synth.noise"], cfg["synth.seed"], cfg["synth.mode"]
    )
    if cfg["data.decimate"] > 1:
        table = datamod.decimate(table, cfg["data.decimate"])
    path = Path(cfg["data.path"] or Path(cfg["out.dir"]) / "data.csv")
    _write_files({path: datamod.dumps_csv(table)})
    print(json.dumps({"rows": len(table), "path": str(path)}))
    return EXIT_OK


def cmd_regress(cfg: dict) -> int:
    model, report, ok = run_regress(cfg)
    out = Path(cfg["out.dir"])
    _write_files({out / "model.sexpr": format_model(model), out / "regress.json": json.dumps(report, indent=2) + "\n"})
    print(format_model(model), end="")
    return EXIT_OK if ok else EXIT_BUDGET


def cmd_invert(cfg: dict) -> int:
    paving, complete = run_invert(cfg, _model_text(cfg))
    _write_files(_paving_files(Path(cfg["out.dir"]), paving))
    print(json.dumps(_summary(paving)))
    return EXIT_OK if complete else EXIT_BOXES


def cmd_pipeline(cfg: dict) -> int:
    # validate the inversion settings before spending time on regression
    _box(cfg, "problem.R"), _box(cfg, "problem.P")
    try:
        model, report, ok = run_regress(cfg)
    except ConfigError as exc:
        raise ConfigError(f"[regress] {exc}") from None
    try:
        paving, complete = run_invert(cfg, format_model(model))
    except ConfigError as exc:
        raise ConfigError(f"[invert] {exc}") from None
    out = Path(cfg["out.dir"])
    bundle = {"regress": report, "invert": _summary(paving), "complete": complete}
    files = {out / "model.sexpr": format_model(model), out / "regress.json": json.dumps(report, indent=2) + "\n"}
    files.update(_paving_files(out, paving))
    files[out / "pipeline.json"] = json.dumps(bundle, indent=2) + "\n"
    _write_files(files)
    print(json.dumps(bundle["invert"]))
    if not complete:
        return EXIT_BOXES
    return EXIT_OK if ok else EXIT_BUDGET


def cmd_plot(cfg: dict) -> int:
    src = cfg["plot.paving"]
    if not src:
        raise ConfigError("plot.paving is required")
    try:
        paving = Paving.from_json(Path(src).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read paving {src}: {exc}") from None
    try:
        svg = render(paving)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dest = Path(cfg["plot.out"] or Path(src).with_suffix(".svg"))
    _write_files({dest: svg})
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "regress": cmd_regress,
    "invert": cmd_invert,
    "pipeline": cmd_pipeline,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="invertkit", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file of dotted keys")
        for key, (_, default) in KEYS.items():
            p.add_argument(f"--{key}", dest=key, default=argparse.SUPPRESS, metavar="VALUE", help=f"default: {default!r}")
    return parser


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    logging.basicConfig(level=logging.DEBUG if args.pop("verbose") else logging.INFO, format="%(levelname)s %(message)s")
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        cfg = resolve(config_path, args)
        echo_config(cfg, command)
        return COMMANDS[command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
