"""Command-line entry point: collect, pretrain, train, eval, gradcheck, export, play.

Every command is reproducible from (config file, seed): all randomness is
seeded, and outputs carry the arena-config fingerprint. Existing outputs are
never overwritten without --force. Any flag left unset falls back to an
ARENARL_<FLAG> environment variable before its built-in default.
"""

from __future__ import annotations

import argparse
import asyncio
import os
import sys
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    GameConfig,
    OptimizerConfig,
    RunConfig,
    config_fingerprint,
    load_run_config,
)
from .datasets import DatasetError, load_dataset, record_demos, save_dataset, split
from .evaluation import GreedyModelPolicy, export_report, format_table, load_records, run_match
from .model import (
    CheckpointError,
    PolicyModel,
    load_model,
    save_model,
)
from .nn.optim import TrainingError
from .scripted import POLICY_NAMES, make_policy
from .sim import ArenaBuildError
from .training import encode_split, run_hybrid_training, run_pretraining

OPPONENT_LABELS = {"rule": "Rule Based", "rule2": "Rule Based 2", "random": "Random"}
# Row order mirrors the results tables.
EVAL_ORDER = ("rule", "rule2", "random")


class CliError(RuntimeError):
    pass


def _env_fallback(args: argparse.Namespace) -> None:
    for name, value in vars(args).items():
        if value is None:
            env = os.environ.get(f"ARENARL_{name.upper()}")
            if env is not None:
                setattr(args, name, env)


def _load_config(args: argparse.Namespace) -> RunConfig:
    overrides: dict[str, str] = {}
    for item in args.set or []:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return load_run_config(args.config, overrides)


def _check_output(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise CliError(f"{path} exists; pass --force to overwrite")


def _dataset_for_run(args, run: RunConfig):
    dataset = load_dataset(args.dataset)
    if args.config is None:
        # No explicit config: inherit the environment the demos came from.
        run.game = dataset.game_config
    elif dataset.config_fingerprint != config_fingerprint(run.game):
        raise CliError(
            f"dataset {args.dataset} was recorded on config "
            f"{dataset.config_fingerprint}, run config is {config_fingerprint(run.game)}"
        )
    return dataset


def _load_or_build_model(args, run: RunConfig) -> PolicyModel:
    if getattr(args, "model", None):
        model, meta = load_model(args.model)
        stored = meta.get("fingerprint")
        if stored is not None and stored != config_fingerprint(run.game):
            raise CliError(
                f"checkpoint {args.model} fingerprint {stored} does not match "
                f"run config {config_fingerprint(run.game)}"
            )
        return model
    return PolicyModel(run.model, run.limits, seed=run.seed)


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


def cmd_collect(args) -> int:
    run = _load_config(args)
    out = Path(args.out)
    _check_output(out, args.force)
    policy_a = make_policy(args.policy_a)
    policy_b = make_policy(args.policy_b)
    episodes = int(args.episodes) if args.episodes is not None else 200
    dataset = record_demos(
        policy_a,
        policy_b,
        n_episodes=episodes,
        config=run.game,
        seed=run.seed,
        policy_names=(args.policy_a, args.policy_b),
    )
    save_dataset(dataset, out)
    print(
        f"recorded {len(dataset)} samples over {episodes} games "
        f"({args.policy_a} vs {args.policy_b}) -> {out}"
    )
    return 0


def cmd_pretrain(args) -> int:
    run = _load_config(args)
    out = Path(args.out)
    _check_output(out, args.force)
    dataset = _dataset_for_run(args, run)
    model = _load_or_build_model(args, run)
    epochs = int(args.epochs) if args.epochs is not None else 300
    log_path = Path(args.log) if args.log else out.with_suffix(".log.jsonl")

    if epochs > 0:
        val_fraction = float(args.val_fraction) if args.val_fraction is not None else 0.2
        train_ds, val_ds = split(dataset, val_fraction, seed=run.seed)
        train_split = encode_split(train_ds, run.limits, run.game)
        val_split = encode_split(val_ds, run.limits, run.game)
        log = run_pretraining(
            model,
            train_split,
            val_split,
            epochs=epochs,
            optimizer_config=run.optimizer,
            seed=run.seed,
        )
        _check_output(log_path, args.force)
        log.save(log_path)
        best = log.epochs[log.best_epoch]
        print(
            f"pretrained {epochs} epochs; best epoch {log.best_epoch} "
            f"(val loss {best.val_loss:.4f}, val acc {best.val_accuracy:.3f})"
        )
    else:
        print("0 epochs requested; saving the input model unchanged")
    save_model(model, out, fingerprint=config_fingerprint(run.game))
    print(f"checkpoint -> {out}")
    return 0


def cmd_train(args) -> int:
    run = _load_config(args)
    out = Path(args.out)
    _check_output(out, args.force)
    dataset = _dataset_for_run(args, run)
    model = _load_or_build_model(args, run)
    if args.episodes is not None:
        run.schedule.total_episodes = int(args.episodes)
    opponent = make_policy(args.opponent)
    log_path = Path(args.log) if args.log else out.with_suffix(".log.jsonl")
    _check_output(log_path, args.force)

    checkpoint_every = int(args.checkpoint_every) if args.checkpoint_every else 0

    def progress(record):
        if record.index % 25 == 0:
            print(
                f"episode {record.index:4d} [{record.mode:7s}] "
                f"reward {record.reward:7.2f} eps {record.epsilon:.2f}"
            )
        if checkpoint_every and (record.index + 1) % checkpoint_every == 0:
            periodic = out.with_suffix(f".ep{record.index + 1}.npz")
            save_model(model, periodic, fingerprint=config_fingerprint(run.game))

    log = run_hybrid_training(
        model,
        run.schedule,
        dataset,
        run.game,
        run.dqn,
        run.rewards,
        opponent,
        limits=run.limits,
        seed=run.seed,
        bc_optimizer_config=run.optimizer,
        progress=progress,
    )
    log.save(log_path)
    save_model(model, out, fingerprint=config_fingerprint(run.game))
    print(log.summary(), end="")
    online = [e for e in log.episodes if e.mode == "online"]
    wins = sum(e.win for e in online)
    print(
        f"trained {len(log.episodes)} episodes ({len(online)} online, "
        f"{wins} wins); checkpoint -> {out}"
    )
    if log.aborted:
        print("training aborted on non-finite loss; last good checkpoint kept", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args) -> int:
    run = _load_config(args)
    out_dir = Path(args.out)
    table_path = out_dir / "report_table.csv"
    records_path = out_dir / "report_records.jsonl"
    for path in (table_path, records_path):
        _check_output(path, args.force)
    model = _load_or_build_model(args, run)
    agent = GreedyModelPolicy(model, run.limits)
    names = EVAL_ORDER if args.opponent == "all" else (args.opponent,)
    episodes = int(args.episodes) if args.episodes is not None else 100
    reports = []
    traces: list[dict] | None = [] if args.dump_traces else None
    for name in names:
        report = run_match(
            agent,
            make_policy(name),
            n_episodes=episodes,
            config=run.game,
            seed=run.seed,
            opponent_name=OPPONENT_LABELS[name],
            reward_weights=run.rewards,
            trace_sink=traces,
        )
        reports.append(report)
        print(
            f"vs {report.opponent:12s}: win {report.win_rate:5.1f}% "
            f"loss {report.loss_rate:5.1f}% timeout {report.timeout_rate:5.1f}% "
            f"len {report.mean_length:6.1f} acc {report.accuracy:.2f}"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    export_report(reports, table_path, format="delimited-table")
    export_report(reports, records_path, format="structured-records")
    if traces is not None:
        import json

        trace_path = out_dir / "episode_traces.jsonl"
        with trace_path.open("w") as fh:
            for row in traces:
                fh.write(json.dumps(row) + "\n")
        print(f"per-episode traces -> {trace_path}")
    print(f"reports -> {table_path}, {records_path}")
    return 0


def cmd_gradcheck(args) -> int:
    from .config import EncoderLimits, ModelConfig
    from .model import FeatureBatch
    from .nn import Dense, LayerNorm, LeakyReLU, MultiHeadAttention
    from .nn.gradcheck import grad_check

    rng = np.random.default_rng(0)
    tolerance = 1e-4
    failures = 0

    def report(name: str, err: float) -> None:
        nonlocal failures
        ok = err <= tolerance
        failures += 0 if ok else 1
        print(f"{'ok  ' if ok else 'FAIL'} {name:24s} max rel err {err:.3e}")

    dense = Dense("dense", 4, 3, rng)
    x = rng.normal(size=(2, 4))
    down = rng.normal(size=(2, 3))

    def dense_loss():
        out, _ = dense.forward(x)
        return float((out * down).sum())

    dense.weight.zero_grad()
    dense.bias.zero_grad()
    _, cache = dense.forward(x)
    grad_x = dense.backward(cache, down)
    report(
        "dense",
        grad_check(
            dense_loss,
            {"w": dense.weight.value, "b": dense.bias.value, "x": x},
            {"w": dense.weight.grad.copy(), "b": dense.bias.grad.copy(), "x": grad_x},
        ),
    )

    relu = LeakyReLU()
    xr = rng.normal(size=(6,))
    downr = rng.normal(size=(6,))

    def relu_loss():
        out, _ = relu.forward(xr)
        return float((out * downr).sum())

    _, cache_r = relu.forward(xr)
    report("leaky_relu", grad_check(relu_loss, {"x": xr}, {"x": relu.backward(cache_r, downr)}))

    norm = LayerNorm("norm", 5)
    norm.gain.value = rng.normal(1.0, 0.2, 5)
    xn = rng.normal(size=(3, 5))
    downn = rng.normal(size=(3, 5))

    def norm_loss():
        out, _ = norm.forward(xn)
        return float((out * downn).sum())

    norm.gain.zero_grad()
    norm.shift.zero_grad()
    _, cache_n = norm.forward(xn)
    grad_xn = norm.backward(cache_n, downn)
    report(
        "layer_norm",
        grad_check(
            norm_loss,
            {"gain": norm.gain.value, "shift": norm.shift.value, "x": xn},
            {"gain": norm.gain.grad.copy(), "shift": norm.shift.grad.copy(), "x": grad_xn},
        ),
    )

    attn = MultiHeadAttention("attn", 8, 2, rng)
    q = rng.normal(size=(2, 1, 8))
    k = rng.normal(size=(2, 4, 8))
    v = rng.normal(size=(2, 4, 8))
    mask = np.array([[True, True, False, True], [True, False, True, True]])
    downa = rng.normal(size=(2, 1, 8))

    def attn_loss():
        out, _ = attn.forward(q, k, v, mask)
        return float((out * downa).sum())

    for p in attn.params:
        p.zero_grad()
    _, cache_a = attn.forward(q, k, v, mask)
    dq, dk, dv = attn.backward(cache_a, downa)
    report(
        "attention",
        grad_check(
            attn_loss,
            {**{p.name: p.value for p in attn.params}, "q": q, "k": k, "v": v},
            {**{p.name: p.grad.copy() for p in attn.params}, "q": dq, "k": dk, "v": dv},
        ),
    )

    tiny = ModelConfig(embedding_width=8, trunk_widths=(8, 8), attention_heads=2)
    limits = EncoderLimits(max_enemies=2, max_bullets=2, max_walls=2)
    model = PolicyModel(tiny, limits, seed=1)
    from .model import EncodedObservation

    enc = EncodedObservation(
        player=rng.normal(size=8),
        enemies=rng.normal(size=(2, 8)),
        enemy_mask=np.array([True, False]),
        bullets=rng.normal(size=(2, 6)),
        bullet_mask=np.array([True, True]),
        walls=rng.normal(size=(2, 6)),
        wall_mask=np.array([True, False]),
    )
    fb = FeatureBatch.from_single(enc)
    down_q = rng.normal(size=(1, 18))
    down_i = rng.normal(size=(1, 18))

    def model_loss():
        qv, _ = model.forward_q_batch(fb)
        logits, _ = model.forward_imitation_batch(fb)
        return float((qv * down_q).sum() + (logits * down_i).sum())

    model.zero_grad()
    qv, cq = model.forward_q_batch(fb)
    model.backward_q(cq, down_q)
    logits, ci = model.forward_imitation_batch(fb)
    model.backward_imitation(ci, down_i)
    report(
        "model (both heads)",
        grad_check(
            model_loss,
            {p.name: p.value for p in model.params},
            {p.name: p.grad.copy() for p in model.params},
        ),
    )

    print("gradcheck:", "all passed" if failures == 0 else f"{failures} block(s) FAILED")
    return 0 if failures == 0 else 1


def cmd_export(args) -> int:
    reports = load_records(args.records)
    out = Path(args.out)
    _check_output(out, args.force)
    export_report(reports, out, format="delimited-table")
    print(format_table(reports), end="")
    print(f"table -> {out}")
    return 0


def cmd_play(args) -> int:
    run = _load_config(args)
    from .server import serve

    print(f"serving on ws://{args.host}:{args.port} (ctrl-c to stop)")
    try:
        asyncio.run(
            serve(run.game, args.model, port=int(args.port), host=args.host, seed=run.seed)
        )
    except KeyboardInterrupt:
        print("stopped")
    return 0


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arenarl",
        description="Hybrid imitation + Q-learning laboratory for a 2D arena shooter.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a single config key (repeatable)")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p = sub.add_parser("collect", help="record scripted-vs-scripted demonstrations")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--episodes", default=None, help="games to record (default 200)")
    p.add_argument("--policy-a", default="rule", choices=POLICY_NAMES)
    p.add_argument("--policy-b", default="rule2", choices=POLICY_NAMES)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("pretrain", help="behavioral cloning on a demo dataset")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="continue from an existing checkpoint")
    p.add_argument("--epochs", default=None, help="BC epochs (default 300)")
    p.add_argument("--val-fraction", default=None, help="episode fraction held out (default 0.2)")
    p.add_argument("--log", help="training log path (default: <out>.log.jsonl)")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="hybrid offline/online training")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="start from a pretrained checkpoint")
    p.add_argument("--episodes", default=None, help="total schedule episodes")
    p.add_argument("--opponent", default="rule", choices=POLICY_NAMES)
    p.add_argument("--log", help="training log path (default: <out>.log.jsonl)")
    p.add_argument("--checkpoint-every", default=None,
                   help="also write <out>.epN.npz every N episodes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation against scripted opponents")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output directory for report files")
    p.add_argument("--episodes", default=None, help="episodes per opponent (default 100)")
    p.add_argument("--opponent", default="all", choices=("all",) + POLICY_NAMES)
    p.add_argument("--dump-traces", action="store_true",
                   help="also write one JSONL row per evaluated episode")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every block")
    common(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("export", help="re-export eval records as a delimited table")
    common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("play", help="host human-vs-agent sessions over WebSocket")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--port", default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_play)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _env_fallback(args)
    try:
        return args.func(args)
    except (
        CliError,
        ConfigError,
        DatasetError,
        CheckpointError,
        TrainingError,
        ArenaBuildError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
