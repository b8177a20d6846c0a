"""Command-line entry points: simulate, train, certify, check, export."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from waemdp import __version__
from waemdp.certify.properties import parse_property
from waemdp.certify.report import certify
from waemdp.certify.vi import value_iteration
from waemdp.env.builtin import ENVIRONMENTS, make_env, make_policy
from waemdp.env.io import write_traces
from waemdp.errors import BudgetExceeded, DivergenceDetected, PropertySyntaxError, WaeMdpError
from waemdp.latent.execute import run_episodes
from waemdp.latent.extract import extract_explicit
from waemdp.latent.model import WaeMdp
from waemdp.wae.train import METRIC_COLUMNS, Trainer, TrainingConfig

log = logging.getLogger("waemdp")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_BUDGET = 0, 2, 3, 4


class ConfigError(WaeMdpError):
    pass


def _out_path(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def write_run_file(args):
    config = {k: v for k, v in vars(args).items() if k != "handler"}
    with open(_out_path(args, "run.json"), "w") as fh:
        json.dump({"version": __version__, "config": config}, fh, indent=2, sort_keys=True)


def emit(args, payload, text):
    print(json.dumps(payload, indent=2, sort_keys=True) if args.format == "json" else text)


def load_model(path):
    try:
        with open(path) as fh:
            blob = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read model file: {exc}") from exc
    return WaeMdp.from_dict(blob), blob.get("config", {})


def cmd_simulate(args):
    env = make_env(args.env)
    policy = make_policy(args.policy, env)
    rng = np.random.default_rng(args.seed)
    returns, traces = run_episodes(env, policy, args.episodes, rng, max_steps=args.max_steps)
    out = args.out or _out_path(args, "traces.jsonl")
    write_traces(out, traces)
    lengths = np.bincount([smp.ep for smp in traces], minlength=args.episodes)
    summary = {
        "episodes": args.episodes,
        "mean_return": float(returns.mean()),
        "mean_length": float(lengths.mean()),
        "traces": out,
    }
    emit(args, summary, f"{args.episodes} episodes, mean return {summary['mean_return']:.4f}, "
                        f"mean length {summary['mean_length']:.1f} -> {out}")
    return EXIT_OK


def training_config(args):
    try:
        return TrainingConfig(
            n_bits=args.n_bits, latent_actions=args.latent_actions, batch=args.batch, steps=args.steps, m=args.m,
            gp_coef=args.gp_coef, beta=args.beta, beta_ss=args.beta_ss, beta_trans=args.beta_trans,
            lr_model=args.lr_model, lr_critic=args.lr_critic, temp_encoder=args.temp_encoder,
            temp_transition=args.temp_transition, temp_prior=args.temp_prior, temp_policy=args.temp_policy,
            temp_action=args.temp_action, warmup=args.warmup, seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_train(args):
    checkpoint = _out_path(args, "checkpoint.pkl")
    if args.resume:
        trainer = Trainer.load_checkpoint(args.resume)
        remaining = max(0, args.steps - trainer.state.step)
    else:
        env = make_env(args.env)
        trainer = Trainer(env, make_policy(args.policy, env), training_config(args))
        remaining = trainer.config.steps
    try:
        trainer.run(remaining, checkpoint_every=args.checkpoint_every, checkpoint_path=checkpoint)
    except DivergenceDetected as exc:
        trainer.save_checkpoint(checkpoint)
        log.error("%s (checkpoint kept at %s)", exc, checkpoint)
        return EXIT_DIVERGED
    trainer.save_checkpoint(checkpoint)
    with open(_out_path(args, "metrics.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(trainer.state.metrics)
    model_path = args.out or _out_path(args, "model.json")
    extra = {"env": args.env, "policy": args.policy, "training": trainer.config.to_dict(),
             "final_metrics": trainer.state.metrics[-1] if trainer.state.metrics else {}}
    trainer.model.save(model_path, extra)
    emit(args, {"model": model_path, "steps": trainer.state.step, "model_updates": trainer.state.model_updates},
         f"trained {trainer.state.step} steps ({trainer.state.model_updates} model updates) -> {model_path}")
    return EXIT_OK


def cmd_certify(args):
    model, extra = load_model(args.model)
    env = make_env(args.env or extra.get("env", "gridworld"))
    report = certify(model, env, args.epsilon, args.delta, args.gamma, seed=args.seed, budget=args.budget,
                     n_episodes=args.episodes)
    with open(_out_path(args, "certificate.json"), "w") as fh:
        fh.write(report.to_json())
    emit(args, report.to_dict(), report.summary())
    return EXIT_OK


def cmd_check(args):
    model, _ = load_model(args.model)
    try:
        prop = parse_property(args.property)
        extraction = extract_explicit(model, budget=args.budget)
        values = value_iteration(extraction.mdp, prop, args.gamma, policy=extraction.policy)
    except PropertySyntaxError as exc:
        raise ConfigError(f"bad property: {exc}") from exc
    if args.dump_values:
        with open(args.dump_values, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["state", "bits", "value"])
            for i, (bits, v) in enumerate(zip(extraction.states, values)):
                writer.writerow([i, "".join(str(int(b)) for b in bits), repr(float(v))])
    value = float(values[extraction.mdp.s_init])
    emit(args, {"property": str(prop), "gamma": args.gamma, "value": value, "latent_states": len(values)},
         f"V[{prop}](z_I) = {value:.10g}  (gamma={args.gamma}, {len(values)} latent states)")
    return EXIT_OK


def cmd_export(args):
    model, _ = load_model(args.model)
    if args.export_format != "tabular":
        raise ConfigError(f"unsupported export format {args.export_format!r}")
    extraction = extract_explicit(model, budget=args.budget)
    out = args.out or _out_path(args, "latent_mdp.json")
    blob = extraction.mdp.to_dict()
    blob["policy"] = extraction.policy.tolist()
    blob["states"] = extraction.states.astype(int).tolist()
    with open(out, "w") as fh:
        json.dump(blob, fh)
    print(f"{extraction.mdp.n_states} latent states -> {out}")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default="runs")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    report = argparse.ArgumentParser(add_help=False, parents=[common])
    report.add_argument("--format", default="text", choices=["json", "text"])

    parser = argparse.ArgumentParser(prog="waemdp", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[report], help="roll out a policy and write JSONL traces")
    p.add_argument("--env", default="gridworld", choices=ENVIRONMENTS)
    p.add_argument("--policy", default="scripted", choices=["scripted", "random"])
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--max-steps", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("train", parents=[report], help="learn a latent model and distill the policy")
    p.add_argument("--env", default="gridworld", choices=ENVIRONMENTS)
    p.add_argument("--policy", default="scripted", choices=["scripted", "random"])
    p.add_argument("--n-bits", type=int, default=6)
    p.add_argument("--latent-actions", type=int)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--steps", type=int, default=30_000)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--beta", type=float)
    p.add_argument("--beta-ss", type=float, default=10.0)
    p.add_argument("--beta-trans", type=float, default=10.0)
    p.add_argument("--gp-coef", type=float, default=10.0)
    p.add_argument("--lr-model", type=float, default=3e-4)
    p.add_argument("--lr-critic", type=float, default=3e-4)
    p.add_argument("--temp-encoder", type=float, default=2.0 / 3.0)
    p.add_argument("--temp-transition", type=float, default=0.5)
    p.add_argument("--temp-prior", type=float, default=0.5)
    p.add_argument("--temp-policy", type=float, default=1.0 / 3.0)
    p.add_argument("--temp-action", type=float, default=1.0 / 3.0)
    p.add_argument("--warmup", type=int, default=2_000)
    p.add_argument("--checkpoint-every", type=int, default=5_000)
    p.add_argument("--resume", help="continue from a checkpoint.pkl written by a previous run")
    p.add_argument("--out", help="model file (default OUT_DIR/model.json)")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("certify", parents=[report], help="PAC local losses, bounds and values")
    p.add_argument("--model", required=True)
    p.add_argument("--env", choices=ENVIRONMENTS)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=0.045)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--episodes", type=int, default=30)
    p.add_argument("--budget", type=int, default=4096)
    p.set_defaults(handler=cmd_certify)

    p = sub.add_parser("check", parents=[report], help="model-check a property on the latent MDP")
    p.add_argument("--model", required=True)
    p.add_argument("--property", required=True, help="e.g. '!reset U unsafe', 'F goal', 'F (unsafe & X reset)'")
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--budget", type=int, default=4096)
    p.add_argument("--dump-values", help="write per-latent-state values to this CSV")
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("export", parents=[common], help="write the extracted latent MDP")
    p.add_argument("--model", required=True)
    p.add_argument("--format", dest="export_format", default="tabular", choices=["tabular"])
    p.add_argument("--budget", type=int, default=4096)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_export)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        write_run_file(args)
        return args.handler(args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except DivergenceDetected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (WaeMdpError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
