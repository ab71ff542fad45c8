"""Command-line pipeline: synthesize fixtures, train, backtest, baselines, compare.

Configuration is a flat ``key = value`` text file merged with command-line
flags (flags win). The seed and both split dates never default silently:
commands that need them fail with a configuration error unless they are
given explicitly. Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import datetime as dt
import json
import os
import sys

from . import baselines, ddpg, metrics, plotting
from .errors import ConfigError, DataError, NumericError
from .marketdata import load_price_table, split_periods, synthetic_series

_AUTO = "auto"


def _parse_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _parse_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _parse_bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {text!r}")


def _parse_date(text: str, key: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected YYYY-MM-DD, got {text!r}") from None


def _parse_str(text: str, key: str) -> str:
    del key
    return text.strip()


def _parse_names(text: str, key: str) -> tuple[str, ...]:
    parts = tuple(p.strip() for p in text.split(",") if p.strip())
    if not parts:
        raise ConfigError(f"{key}: expected a comma-separated list, got {text!r}")
    return parts


def _parse_ints(text: str, key: str) -> tuple[int, ...]:
    return tuple(_parse_int(p, key) for p in text.split(",") if p.strip())


def _parse_reward_scale(text: str, key: str) -> float | None:
    if text.strip().lower() in (_AUTO, ""):
        return None
    return _parse_float(text, key)


def _parse_choice(*allowed: str):
    def parse(text: str, key: str) -> str:
        value = text.strip()
        if value not in allowed:
            raise ConfigError(f"{key}: expected one of {', '.join(allowed)}, got {text!r}")
        return value

    return parse


def _fmt_plain(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, dt.date):
        return value.isoformat()
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


@dataclasses.dataclass(frozen=True)
class _Key:
    parse: object
    default: object  # None = unset; commands declare what they require
    help: str


# One flat namespace drives the config file, every subcommand flag, and
# --dump-config. Descriptions double as --help text.
SCHEMA: dict[str, _Key] = {
    "data": _Key(_parse_str, None, "price CSV, long (date,ticker,close) or wide format"),
    "universe": _Key(_parse_names, None, "tickers to keep, comma-separated (default: all)"),
    "checkpoint": _Key(_parse_str, None, "agent checkpoint path (backtest/compare input)"),
    "out": _Key(_parse_str, "out", "output directory"),
    "seed": _Key(_parse_int, None, "master seed; required, never defaulted"),
    "train_end": _Key(_parse_date, None, "last date of the training period (inclusive)"),
    "validation_end": _Key(_parse_date, None, "last date of the validation period (inclusive)"),
    "initial_balance": _Key(_parse_float, 10000.0, "starting cash"),
    "gamma": _Key(_parse_float, 0.99, "reward discount factor"),
    "tau": _Key(_parse_float, 0.001, "target-network blend rate"),
    "batch_size": _Key(_parse_int, 64, "minibatch size"),
    "episodes": _Key(_parse_int, 30, "training episodes over the training period"),
    "buffer_capacity": _Key(_parse_int, 100_000, "replay buffer capacity"),
    "actor_lr": _Key(_parse_float, 1e-4, "actor learning rate"),
    "critic_lr": _Key(_parse_float, 1e-3, "critic learning rate"),
    "h_max": _Key(_parse_int, 100, "max shares traded per stock per day"),
    "warmup": _Key(_parse_int, 1000, "environment steps before learning starts"),
    "hidden_sizes": _Key(_parse_ints, (64, 32), "hidden layer widths, comma-separated"),
    "ou_theta": _Key(_parse_float, 0.15, "exploration noise mean-reversion rate"),
    "ou_sigma": _Key(_parse_float, 0.2, "exploration noise scale"),
    "ou_mu": _Key(_parse_float, 0.0, "exploration noise long-run mean"),
    "reward_scale": _Key(_parse_reward_scale, None, "reward multiplier for critic targets; 'auto' = 1/initial_balance"),
    "train_on_validation": _Key(_parse_bool, True, "also fit the validation period before trading"),
    "validation_mode": _Key(_parse_choice("continue", "union"), "continue", "continue training on validation data, or retrain on train+validation"),
    "validation_episodes": _Key(_parse_int, None, "episodes for the validation phase (default: same as episodes)"),
    "online_learning": _Key(_parse_bool, True, "keep learning per step while backtesting"),
    "lookback": _Key(_parse_int, baselines.DEFAULT_LOOKBACK, "covariance window (days) for min-variance"),
    "rebalance_every": _Key(_parse_int, baselines.DEFAULT_REBALANCE_EVERY, "days between min-variance rebalances"),
    "ridge": _Key(_parse_float, baselines.DEFAULT_RIDGE, "covariance diagonal regularizer"),
    "baseline_strategy": _Key(_parse_choice("both", "min-variance", "index"), "both", "which baseline(s) the baseline command runs"),
    "index_file": _Key(_parse_str, None, "external index CSV (date,value); default: price-weighted proxy"),
}

RunConfig = dataclasses.make_dataclass("RunConfig", [(k, object) for k in SCHEMA], frozen=True)
RunConfig.__doc__ = "Typed view of the flat configuration namespace."

_REQUIRED_KEYS = {
    "train": ("data", "seed", "train_end", "validation_end"),
    "backtest": ("data", "seed", "train_end", "validation_end", "checkpoint"),
    "baseline": ("data", "seed", "train_end", "validation_end"),
    "compare": ("data", "seed", "train_end", "validation_end", "checkpoint"),
}


def read_config_file(path) -> dict[str, str]:
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path} line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{path} line {lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def build_config(text_values: dict[str, str]) -> "RunConfig":
    typed = {}
    for key, entry in SCHEMA.items():
        if key in text_values:
            typed[key] = entry.parse(text_values[key], key)
        else:
            typed[key] = entry.default
    return RunConfig(**typed)


def dump_config(cfg: "RunConfig", path) -> None:
    """Write the effective configuration; reloading it reproduces cfg."""
    with open(path, "w") as fh:
        fh.write("# ddpgtrader configuration\n")
        for key in SCHEMA:
            value = getattr(cfg, key)
            if value is None:
                if key == "reward_scale":
                    fh.write("reward_scale = auto\n")
                continue
            fh.write(f"{key} = {_fmt_plain(value)}\n")


def _merged_text_values(args: argparse.Namespace) -> dict[str, str]:
    values = read_config_file(args.config) if args.config else {}
    for key in SCHEMA:
        override = getattr(args, key, None)
        if override is not None:
            values[key] = override
    return values


def _require(cfg: "RunConfig", command: str) -> None:
    missing = [k for k in _REQUIRED_KEYS[command] if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(f"{command}: missing required config: {', '.join(missing)} (set via --config file or flags)")


def _ddpg_config(cfg: "RunConfig") -> ddpg.DdpgConfig:
    try:
        return ddpg.DdpgConfig(
            seed=cfg.seed,
            gamma=cfg.gamma,
            tau=cfg.tau,
            batch_size=cfg.batch_size,
            episodes=cfg.episodes,
            buffer_capacity=cfg.buffer_capacity,
            actor_lr=cfg.actor_lr,
            critic_lr=cfg.critic_lr,
            h_max=cfg.h_max,
            warmup=cfg.warmup,
            hidden_sizes=cfg.hidden_sizes,
            ou_theta=cfg.ou_theta,
            ou_sigma=cfg.ou_sigma,
            ou_mu=cfg.ou_mu,
            reward_scale=cfg.reward_scale,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_split(cfg: "RunConfig"):
    series = load_price_table(cfg.data, list(cfg.universe) if cfg.universe else None)
    try:
        return split_periods(series, cfg.train_end, cfg.validation_end)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _out_dir(cfg: "RunConfig") -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _say(path) -> None:
    print(f"wrote {path}")


def cmd_train(cfg: "RunConfig") -> int:
    _require(cfg, "train")
    split = _load_split(cfg)
    dcfg = _ddpg_config(cfg)
    balance = cfg.initial_balance
    if cfg.train_on_validation and cfg.validation_mode == "union":
        union = split.train.num_days + split.validation.num_days
        full = load_price_table(cfg.data, list(cfg.universe) if cfg.universe else None)
        agent, log = ddpg.train(full.slice_days(0, union), dcfg, balance)
    else:
        agent, log = ddpg.train(split.train, dcfg, balance)
        if cfg.train_on_validation:
            episodes = cfg.validation_episodes if cfg.validation_episodes is not None else cfg.episodes
            ddpg.train_episodes(agent, split.validation, episodes, balance, log)
    out = _out_dir(cfg)
    checkpoint = os.path.join(out, "checkpoint.json")
    log_path = os.path.join(out, "training_log.csv")
    figure = os.path.join(out, "training_curve.png")
    ddpg.save_checkpoint(agent, checkpoint)
    log.to_csv(log_path)
    if log.rows:
        plotting.save_training_figure(log, figure)
    for path in (checkpoint, log_path) + ((figure,) if log.rows else ()):
        _say(path)
    if log.rows:
        print(f"final training episode value: {log.rows[-1].final_value:.2f}")
    return 0


def _load_agent_for(cfg: "RunConfig", split) -> ddpg.Agent:
    agent = ddpg.load_checkpoint(cfg.checkpoint)
    if agent.num_assets != split.trade.num_assets:
        raise ConfigError(
            f"checkpoint was trained on {agent.num_assets} assets but the data provides {split.trade.num_assets}"
        )
    return agent


def cmd_backtest(cfg: "RunConfig") -> int:
    _require(cfg, "backtest")
    split = _load_split(cfg)
    agent = _load_agent_for(cfg, split)
    report = ddpg.evaluate(agent, split.trade, cfg.initial_balance, online_learning=cfg.online_learning)
    out = _out_dir(cfg)
    report_path = os.path.join(out, "backtest_report.json")
    curve_path = os.path.join(out, "backtest_curve.csv")
    figure = os.path.join(out, "backtest_curve.png")
    _write_json(metrics.report_to_dict(report), report_path)
    metrics.curve_to_csv(report, curve_path)
    plotting.save_curves_figure([report], figure, title="Backtest")
    for path in (report_path, curve_path, figure):
        _say(path)
    print(_format_table([report]))
    return 0


def _run_baselines(cfg: "RunConfig", split, which: str) -> list[metrics.BacktestReport]:
    reports = []
    if which in ("both", "min-variance"):
        reports.append(
            baselines.run_min_variance(
                split.trade,
                cfg.initial_balance,
                lookback=cfg.lookback,
                rebalance_every=cfg.rebalance_every,
                ridge=cfg.ridge,
            )
        )
    if which in ("both", "index"):
        external = baselines.load_external_index(cfg.index_file) if cfg.index_file else None
        reports.append(baselines.run_index(split.trade, cfg.initial_balance, external))
    return reports


def cmd_baseline(cfg: "RunConfig") -> int:
    _require(cfg, "baseline")
    split = _load_split(cfg)
    try:
        reports = _run_baselines(cfg, split, cfg.baseline_strategy)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(cfg)
    for report in reports:
        stem = report.strategy.replace("-", "_")
        report_path = os.path.join(out, f"{stem}_report.json")
        curve_path = os.path.join(out, f"{stem}_curve.csv")
        _write_json(metrics.report_to_dict(report), report_path)
        metrics.curve_to_csv(report, curve_path)
        _say(report_path)
        _say(curve_path)
    figure = os.path.join(out, "baseline_curves.png")
    plotting.save_curves_figure(reports, figure, title="Baselines")
    _say(figure)
    print(_format_table(reports))
    return 0


def cmd_compare(cfg: "RunConfig") -> int:
    _require(cfg, "compare")
    split = _load_split(cfg)
    agent = _load_agent_for(cfg, split)
    ddpg_report = ddpg.evaluate(agent, split.trade, cfg.initial_balance, online_learning=cfg.online_learning)
    try:
        reports = [ddpg_report] + _run_baselines(cfg, split, "both")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(cfg)
    table = {
        "initial_balance": cfg.initial_balance,
        "trade_start": split.trade.dates[0].isoformat(),
        "trade_end": split.trade.dates[-1].isoformat(),
        "strategies": [metrics.report_to_dict(r) for r in reports],
    }
    json_path = os.path.join(out, "compare.json")
    _write_json(table, json_path)
    text = _format_table(reports)
    text_path = os.path.join(out, "compare.txt")
    with open(text_path, "w") as fh:
        fh.write(text + "\n")
    curve_paths = []
    for report in reports:
        curve_path = os.path.join(out, f"{report.strategy.replace('-', '_')}_curve.csv")
        metrics.curve_to_csv(report, curve_path)
        curve_paths.append(curve_path)
    figure = os.path.join(out, "compare_curves.png")
    plotting.save_curves_figure(reports, figure, title="Strategy comparison")
    for path in [json_path, text_path, *curve_paths, figure]:
        _say(path)
    print(text)
    return 0


def _format_table(reports: list[metrics.BacktestReport]) -> str:
    headers = ["strategy", "initial_value", "final_value", "annualized_return", "annualized_std", "sharpe"]
    rows = [headers]
    for r in reports:
        rows.append(
            [
                r.strategy,
                f"{r.initial_value:.2f}",
                f"{r.final_value:.2f}",
                f"{r.annualized_return * 100:.2f}%",
                f"{r.annualized_std * 100:.2f}%",
                "n/a" if r.sharpe_ratio is None else f"{r.sharpe_ratio:.3f}",
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines)


def cmd_synth(args: argparse.Namespace) -> int:
    def per_ticker(text: str, key: str):
        values = [_parse_float(p, key) for p in text.split(",") if p.strip()]
        if not values:
            raise ConfigError(f"{key}: expected a number or comma-separated list")
        return values[0] if len(values) == 1 else values

    try:
        series = synthetic_series(
            args.kind,
            args.days,
            args.tickers,
            drift=per_ticker(args.drift, "drift"),
            volatility=per_ticker(args.volatility, "volatility"),
            start_price=per_ticker(args.start_price, "start-price"),
            seed=args.seed,
            start_date=_parse_date(args.start_date, "start-date"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out_dir = os.path.dirname(args.out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    series.to_wide_csv(args.out)
    _say(args.out)
    return 0


def _train_one_seed(payload: tuple[dict[str, str], int, str]) -> str:
    text_values, seed, out_dir = payload
    text_values = dict(text_values, seed=str(seed), out=out_dir)
    cmd_train(build_config(text_values))
    return f"seed {seed}: done ({out_dir})"


def _cmd_train_entry(args: argparse.Namespace) -> int:
    text_values = _merged_text_values(args)
    if args.seeds:
        seeds = [_parse_int(p, "seeds") for p in args.seeds.split(",") if p.strip()]
        if len(set(seeds)) != len(seeds) or not seeds:
            raise ConfigError(f"--seeds must be distinct integers, got {args.seeds!r}")
        base_out = build_config(text_values).out
        jobs = [(text_values, s, os.path.join(base_out, f"seed_{s}")) for s in seeds]
        with concurrent.futures.ProcessPoolExecutor(max_workers=min(len(jobs), os.cpu_count() or 1)) as pool:
            for line in pool.map(_train_one_seed, jobs):
                print(line)
        return 0
    return cmd_train(build_config(text_values))


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "synth":
        return cmd_synth(args)
    text_values = _merged_text_values(args)
    cfg = build_config(text_values)
    if getattr(args, "dump_config", None):
        dump_config(cfg, args.dump_config)
        _say(args.dump_config)
        return 0
    if args.command == "train":
        return _cmd_train_entry(args)
    handlers = {"backtest": cmd_backtest, "baseline": cmd_baseline, "compare": cmd_compare}
    return handlers[args.command](cfg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddpgtrader", description="Stock-trading agent pipeline with baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic price CSV")
    synth.add_argument("--kind", required=True, choices=("trend", "geometric-random-walk", "gbm"))
    synth.add_argument("--days", required=True, type=int)
    synth.add_argument("--tickers", required=True, type=int)
    synth.add_argument("--seed", required=True, type=int)
    synth.add_argument("--drift", default="0.0", help="scalar or per-ticker comma list")
    synth.add_argument("--volatility", default="0.0", help="scalar or per-ticker comma list")
    synth.add_argument("--start-price", default="100.0", help="scalar or per-ticker comma list")
    synth.add_argument("--start-date", default="2020-01-01")
    synth.add_argument("--out", default="prices.csv", help="output CSV path")

    for name, blurb in (
        ("train", "train an agent and write a checkpoint"),
        ("backtest", "evaluate a checkpoint on the trade period"),
        ("baseline", "run the baseline strategies on the trade period"),
        ("compare", "agent vs. baselines on the identical trade period"),
    ):
        cmd = sub.add_parser(name, help=blurb)
        cmd.add_argument("--config", help="flat key=value config file; flags win")
        cmd.add_argument("--dump-config", metavar="PATH", help="write the effective config to PATH and exit")
        for key, entry in SCHEMA.items():
            cmd.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="V", help=entry.help)
        if name == "train":
            cmd.add_argument("--seeds", help="comma-separated seeds; trains one run per seed in parallel")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
