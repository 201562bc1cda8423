"""Command-line entry point.

    rulegrad generate --out DIR [--set synth.sigma=0.7]
    rulegrad train    --config run.json --set data=DIR --out RUN
    rulegrad eval     --set data=DIR --set params=RUN/params.npz --out RUN
    rulegrad sweep    --config run.json --axis c_stop --values 2,4,8,50 --out SWEEP
    rulegrad ablate   --config run.json --out TABLE

Configs are JSON objects with flat dotted keys (``train.epochs``, ``loss.lambda_hyp``,
``schedule.c_stop`` ...). ``--set`` overrides are applied after the file, last one wins.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .curriculum import MarginSchedule
from .data import SyntheticSpec, ZslDataset, generate_synthetic, load_dataset, save_dataset
from .errors import ConfigError, ContractError, DataError, NumericError, ShapeError
from .evaluate import EvalReport, evaluate
from .losses import LossWeights
from .train import TrainConfig, train
from .vse import VseParams

log = logging.getLogger("rulegrad")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_TRAIN_KEYS = ("gamma", "embed_dim", "batch_size", "epochs", "lr", "beta1", "beta2", "adam_eps",
               "weight_decay", "noise_sigma", "per_step_margin")
_LOSS_KEYS = tuple(f.name for f in fields(LossWeights))
_SCHEDULE_KEYS = tuple(f.name for f in fields(MarginSchedule))
_SYNTH_KEYS = tuple(f.name for f in fields(SyntheticSpec))

SWEEP_AXES = {
    "c_start": "schedule.c_start",
    "c_stop": "schedule.c_stop",
    "c_epochs": "schedule.c_epochs",
    "lambda_hyp": "loss.lambda_hyp",
    "lambda_attr": "loss.lambda_attr",
}

# loss weights of the rule-based rows; ablation toggles decide which ones are live
REFERENCE_LOSS = {"lambda_q": 1.0, "lambda_reg": 0.0, "lambda_hyp": 0.1,
                  "lambda_attr": 1.0, "lambda_trans": 1.0}
REFERENCE_SCHEDULE = {"c_start": 5.0, "c_stop": 0.0, "c_epochs": 5}


def _default_settings() -> dict:
    s = {"data": None, "params": None, "seed": 0,
         "ablation.hypernym": False, "ablation.attribute": False, "ablation.transductive": False}
    s.update({f"train.{k}": getattr(TrainConfig, k) for k in _TRAIN_KEYS})
    s.update({f"loss.{k}": v for k, v in REFERENCE_LOSS.items()})
    s.update({f"schedule.{k}": v for k, v in REFERENCE_SCHEDULE.items()})
    s.update({f"synth.{f.name}": f.default for f in fields(SyntheticSpec)})
    return s


def _coerce(key: str, raw, default):
    """Parse ``raw`` to the type of ``default`` (strings come from ``--set``)."""
    if not isinstance(raw, str) or isinstance(default, str):
        if isinstance(default, bool) and not isinstance(raw, bool):
            raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                raise ConfigError(f"{key}: expected a number, got {raw!r}")
            if isinstance(default, int) and float(raw) != int(raw):
                raise ConfigError(f"{key}: expected an integer, got {raw!r}")
            return type(default)(raw)
        return raw
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("true", "1", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(default).__name__}") from None
    return raw  # path-like settings default to None


@dataclass
class RunConfig:
    """Everything one command needs: dataset, training setup, output dir and ablation toggles."""

    data: str | None = None
    out: str | None = None
    params: str | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SyntheticSpec = field(default_factory=SyntheticSpec)
    hypernym: bool = False
    attribute: bool = False
    transductive: bool = False
    settings: dict = field(default_factory=dict)

    @classmethod
    def from_settings(cls, settings: dict, out: str | None = None) -> "RunConfig":
        s = settings
        try:
            loss = LossWeights(**{k: s[f"loss.{k}"] for k in _LOSS_KEYS})
            sched = MarginSchedule(**{k: s[f"schedule.{k}"] for k in _SCHEDULE_KEYS})
            hyp, attr, trans = (s["ablation.hypernym"], s["ablation.attribute"],
                                s["ablation.transductive"])
            live = replace(loss, lambda_hyp=loss.lambda_hyp if hyp else 0.0,
                           lambda_attr=loss.lambda_attr if attr else 0.0)
            cfg = TrainConfig(**{k: s[f"train.{k}"] for k in _TRAIN_KEYS}, weights=live,
                              schedule=sched, transductive=trans, seed=s["seed"])
            synth = SyntheticSpec(**{k: s[f"synth.{k}"] for k in _SYNTH_KEYS})
            synth.validate()
        except (ContractError, TypeError) as e:
            raise ConfigError(str(e)) from e
        return cls(s["data"], out, s["params"], cfg, synth, hyp, attr, trans, dict(s))

    def with_setting(self, key: str, value) -> "RunConfig":
        s = dict(self.settings)
        s[key] = _coerce(key, value, s[key])
        return RunConfig.from_settings(s, self.out)


def load_settings(config_path: str | None, overrides: list[str], seed: int | None) -> dict:
    s = _default_settings()
    pairs: list[tuple[str, object]] = []
    if config_path:
        try:
            with open(config_path) as fh:
                raw = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {config_path}: {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {config_path} is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object with dotted keys")
        pairs.extend(raw.items())
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        pairs.append((key.strip(), value))
    if seed is not None:
        pairs.append(("seed", seed))
    for key, value in pairs:
        if key not in s:
            raise ConfigError(f"unknown config key {key!r}")
        s[key] = _coerce(key, value, s[key])
    return s


def _need_data(rc: RunConfig) -> ZslDataset:
    if not rc.data:
        raise ConfigError("no dataset given (set data=DIR)")
    return load_dataset(rc.data)


def _out_dir(rc: RunConfig) -> Path:
    if not rc.out:
        raise ConfigError("no output directory given (--out DIR)")
    out = Path(rc.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {out}: {e.strerror}") from e
    return out


def _write_csv(path: Path, rows: list[dict]):
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _write_json(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_training(ds: ZslDataset, rc: RunConfig, track: bool = True):
    """Train and evaluate; returns (params, report, epoch rows)."""
    gamma = rc.train.gamma

    def per_epoch(params):
        r = evaluate(ds, params, gamma)
        return {"mca_t": r.mca_t, "mca_s_g": r.mca_s_g, "mca_t_g": r.mca_t_g, "hm": r.hm}

    result = train(ds, rc.train, per_epoch if track else None)
    report = evaluate(ds, result.params, gamma)
    return result.params, report, [rec.row() for rec in result.history]


def _summary(report: EvalReport) -> dict:
    return {"mca_t": report.mca_t, "mca_s_g": report.mca_s_g,
            "mca_t_g": report.mca_t_g, "hm": report.hm}


def cmd_generate(rc: RunConfig) -> int:
    out = _out_dir(rc)
    ds = generate_synthetic(rc.synth)
    save_dataset(ds, out)
    print(f"wrote {ds.name}: {len(ds.train_y)} train / {len(ds.test_y)} test samples, "
          f"{ds.n_classes} classes -> {out}")
    return EXIT_OK


def cmd_train(rc: RunConfig) -> int:
    ds = _need_data(rc)
    out = _out_dir(rc)
    params, report, rows = run_training(ds, rc)
    params.save(out / "params.npz")
    _write_csv(out / "epochs.csv", rows)
    _write_json(out / "report.json", report.as_dict())
    _write_json(out / "config.json", {k: v for k, v in rc.settings.items()})
    print(json.dumps(_summary(report), sort_keys=True))
    return EXIT_OK


def cmd_eval(rc: RunConfig) -> int:
    ds = _need_data(rc)
    out = _out_dir(rc)
    if not rc.params:
        raise ConfigError("no parameter file given (set params=PATH)")
    try:
        params = VseParams.load(rc.params)
    except OSError as e:
        raise DataError(f"cannot read parameters {rc.params}: {e}") from e
    report = evaluate(ds, params, rc.train.gamma)
    _write_json(out / "report.json", report.as_dict())
    print(json.dumps(_summary(report), sort_keys=True))
    return EXIT_OK


def sweep_rows(ds: ZslDataset, rc: RunConfig, axis: str, values: list[float],
               jobs: int = 1) -> list[dict]:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose one of {', '.join(SWEEP_AXES)}")
    key = SWEEP_AXES[axis]
    configs = [rc.with_setting(key, v) for v in values]

    def one(c: RunConfig) -> dict:
        _, report, _ = run_training(ds, c, track=False)
        return _summary(report)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, configs))
    else:
        results = [one(c) for c in configs]
    rows = [{axis: c.settings[key], **r} for c, r in zip(configs, results)]
    return sorted(rows, key=lambda r: r[axis])


def cmd_sweep(rc: RunConfig, axis: str, values: list[float], jobs: int) -> int:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose one of {', '.join(SWEEP_AXES)}")
    ds = _need_data(rc)
    out = _out_dir(rc)
    rows = sweep_rows(ds, rc, axis, values, jobs)
    _write_csv(out / f"sweep_{axis}.csv", rows)
    for r in rows:
        print(",".join(str(v) for v in r.values()))
    return EXIT_OK


def ablation_rows(ds: ZslDataset, rc: RunConfig) -> list[dict]:
    rows = []
    for trans in (False, True):
        for hyp, attr in ((False, False), (True, False), (False, True), (True, True)):
            c = rc
            for k, v in (("ablation.hypernym", hyp), ("ablation.attribute", attr),
                         ("ablation.transductive", trans)):
                c = c.with_setting(k, v)
            _, report, _ = run_training(ds, c, track=False)
            rows.append({"hypernym": int(hyp), "attribute": int(attr), "transductive": int(trans),
                         "mca_t": report.mca_t, "hm": report.hm})
    return rows


def cmd_ablate(rc: RunConfig) -> int:
    ds = _need_data(rc)
    out = _out_dir(rc)
    rows = ablation_rows(ds, rc)
    _write_csv(out / "ablation.csv", rows)
    print(f"{'hyp':>4} {'attr':>4} {'trans':>5} {'MCA_t':>7} {'HM':>7}")
    for r in rows:
        print(f"{r['hypernym']:>4} {r['attribute']:>4} {r['transductive']:>5} "
              f"{100 * r['mca_t']:7.2f} {100 * r['hm']:7.2f}")
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with flat dotted keys")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="shorthand for --set seed=N")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rulegrad", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    sub.add_parser("train", parents=[common], help="train, evaluate and write a report")
    sub.add_parser("eval", parents=[common], help="evaluate saved parameters")
    sw = sub.add_parser("sweep", parents=[common], help="train once per value of one axis")
    sw.add_argument("--axis", required=True, help="one of " + ", ".join(SWEEP_AXES))
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--jobs", type=int, default=1, help="worker threads")
    sub.add_parser("ablate", parents=[common], help="hypernym x attribute x transductive grid")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = RunConfig.from_settings(load_settings(args.config, args.overrides, args.seed), args.out)
        if args.command == "generate":
            return cmd_generate(rc)
        if args.command == "train":
            return cmd_train(rc)
        if args.command == "eval":
            return cmd_eval(rc)
        if args.command == "sweep":
            return cmd_sweep(rc, args.axis, _parse_values(args.values), args.jobs)
        return cmd_ablate(rc)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ShapeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
