"""The training loop: collect full episodes, annotate with hindsight
networks, apply the composite update, adapt the independence multiplier,
log metrics. Fully deterministic per (config, seed)."""

from __future__ import annotations

import csv
import json
import time
from collections import deque
from pathlib import Path

import numpy as np

from ..autodiff import DomainError, OptimizerState, optimizer_step, save_checkpoint
from ..credit import LossWeights, build_annotation, composite_update, geco_update
from ..envs import make_env, make_spec, substream
from ..estimators import EstimatorConfig
from .builder import build_agent
from .config import ExperimentConfig
from .rollout import collect_batch, domain_metrics

__all__ = ["run_experiment", "run_seed", "TrainingDiverged"]


class TrainingDiverged(RuntimeError):
    pass


_LOSS_COLUMNS = ("loss_pg", "loss_fwd", "loss_hs", "loss_sup", "loss_im",
                 "entropy", "lambda_im", "adv_second_moment")


def _metric_columns(env) -> list[str]:
    from ..envs import InterleavingEnv, KeyToDoorEnv
    if isinstance(env, KeyToDoorEnv):
        return ["door_prob", "key_prob"]
    if isinstance(env, InterleavingEnv):
        return ["solve_easy", "solve_hard"]
    return []


def run_seed(config: ExperimentConfig, seed: int, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = make_spec(config.env, config.env_overrides)
    batch_size = config.episodes_per_update
    envs = [make_env(spec) for _ in range(batch_size)]
    init_rng = substream(seed, "init")
    nets = build_agent(envs[0], config, init_rng)
    params = nets.all_params()
    opt_kwargs = dict(config.optimizer)
    omega_scale = opt_kwargs.pop("lr_omega_scale")
    omega_params = (list(nets.classifier.params())
                    if nets.classifier is not None else [])
    omega_ids = {id(p) for p in omega_params}
    other_params = [p for p in params if id(p) not in omega_ids]
    opt = OptimizerState(**opt_kwargs)
    omega_opt = OptimizerState(**{**opt_kwargs,
                                  "lr": opt_kwargs["lr"] * omega_scale})
    weights = LossWeights(**config.weights)
    est_cfg = EstimatorConfig(kind=config.estimator, **config.estimator_opts)
    act_rng = substream(seed, "policy-sampling")
    drop_rng = substream(seed, "dropout")

    env_cols = _metric_columns(envs[0])
    columns = (["update", "episodes", "mean_return"] + env_cols
               + list(_LOSS_COLUMNS))
    metrics_path = out_dir / "metrics.csv"
    timing_path = out_dir / "timing.csv"
    window: deque = deque(maxlen=config.eval_window)
    episodes_done = 0
    n_updates = max(1, config.total_episodes // batch_size)
    start = time.monotonic()

    with metrics_path.open("w", newline="") as mfh, \
            timing_path.open("w", newline="") as tfh:
        mwriter = csv.writer(mfh)
        mwriter.writerow(columns)
        twriter = csv.writer(tfh)
        twriter.writerow(["update", "wall_clock"])

        for update in range(n_updates):
            episode_seeds = [seed * 1_000_003 + episodes_done + i
                             for i in range(batch_size)]
            rollout = collect_batch(envs, nets, episode_seeds, act_rng,
                                    config.gamma)
            episodes_done += batch_size
            for ret, ev in zip(rollout.returns, rollout.events):
                row = {"return": float(ret)}
                row.update(domain_metrics(envs[0], ev))
                window.append(row)

            warmup = update < config.classifier_warmup
            live_weights = weights
            anneal_from = config.schedule["entropy_anneal_from"]
            if anneal_from is not None:
                start_u = int(anneal_from * n_updates)
                if update >= start_u:
                    frac = 1.0 - (update - start_u) / max(1, n_updates - start_u)
                    live_weights = LossWeights(**{**config.weights,
                                                  "im": weights.im,
                                                  "mode": weights.mode,
                                                  "entropy": weights.entropy * frac})
            if warmup and nets.classifier is not None:
                live_weights = LossWeights(**{**config.weights, "im": 0.0,
                                              "mode": "fixed_lambda",
                                              "entropy": live_weights.entropy})
            live_est = est_cfg
            adv_from = config.schedule["hindsight_advantage_from"]
            if est_cfg.kind in ("cca", "fc") and                     update < int(adv_from * n_updates):
                live_est = EstimatorConfig(kind="reinforce",
                                           **config.estimator_opts)
            try:
                batch, annot = build_annotation(
                    nets, rollout.data, rng=drop_rng,
                    train=config.hindsight["attn_dropout"] > 0,
                    unrolled=rollout.unrolled)
                grads, breakdown = composite_update(batch, annot, live_weights,
                                                    params, live_est)
            except DomainError as exc:
                _dump_divergence(out_dir, update, episodes_done, exc)
                raise TrainingDiverged(f"non-finite loss at update {update}: "
                                       f"{exc}") from exc
            if omega_params:
                optimizer_step(other_params, grads, opt)
                optimizer_step(omega_params, grads, omega_opt)
                inner_steps = config.schedule["classifier_inner_steps"]
                if inner_steps and annot.log_h_train is not None \
                        and nets.classifier_on == "phi":
                    _classifier_refits(nets, annot, batch, omega_params,
                                       omega_opt, inner_steps)
            else:
                optimizer_step(params, grads, opt)
            if not warmup and len(breakdown.im_per_step):
                geco_update(weights, float(breakdown.im_per_step.mean()),
                            breakdown.entropy_mean)

            if update % config.metrics_every == 0 or update == n_updates - 1:
                rows = list(window)
                mean_ret = float(np.mean([r["return"] for r in rows]))
                record = [update, episodes_done, mean_ret]
                for col in env_cols:
                    vals = [r[col] for r in rows if col in r]
                    record.append(float(np.mean(vals)) if vals else "")
                record += [breakdown.pg, breakdown.fwd, breakdown.hs,
                           breakdown.sup,
                           float(breakdown.im_per_step.mean())
                           if len(breakdown.im_per_step) else 0.0,
                           breakdown.entropy_mean, weights.im,
                           breakdown.diagnostics.get("adv_second_moment", 0.0)]
                mwriter.writerow([_fmt(v) for v in record])
                mfh.flush()
                twriter.writerow([update, f"{time.monotonic() - start:.3f}"])
                tfh.flush()

    save_checkpoint(out_dir / "params.bin", nets.named_params())
    return out_dir


def _classifier_refits(nets, annot, batch, omega_params, omega_opt,
                       steps: int) -> None:
    """Extra classifier-only fits on the current (detached) batch so the
    action posterior keeps up with the drifting hindsight features."""
    from .. import autodiff as ad
    from ..credit.losses import classifier_loss

    states = [ad.constant(annot.log_dists[t].data) for t in range(batch.length)]
    for _ in range(steps):
        log_h = []
        for t in range(batch.length):
            log_h.append(nets.classifier(
                ad.constant(annot.hs_states[t]), ad.constant(annot.phi[t].data),
                policy_log_probs=states[t]
                if nets.classifier.policy_residual else None))
        loss = classifier_loss(batch, log_h)
        grads = ad.backward(loss, omega_params)
        optimizer_step(omega_params, grads, omega_opt)


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.12g}"
    return value


def _dump_divergence(out_dir: Path, update: int, episodes: int, exc) -> None:
    (out_dir / "divergence.json").write_text(json.dumps(
        {"update": update, "episodes": episodes, "error": str(exc)}, indent=2))


def run_experiment(config: ExperimentConfig,
                   out_root: str | Path | None = None) -> Path:
    """Train every seed in the config; returns the run directory."""
    import os
    root = Path(out_root or os.environ.get("HLAB_OUT", "runs"))
    run_dir = root / config.name
    run_dir.mkdir(parents=True, exist_ok=True)
    config.write_effective(run_dir / "config.effective.json")
    for seed in config.seeds:
        run_seed(config, seed, run_dir / f"seed-{seed}")
    return run_dir
