"""Deterministic experiment runners.

Each (arm, seed) pair runs in its own worker with its own state and random
streams and writes its own CSV; summaries are assembled afterwards in a fixed
order, so output bytes never depend on scheduling. Random streams are keyed
by the seed, a canonical arm key and a tensor name, and advance by counter,
so adding or removing arms leaves every other arm's bits untouched.
"""

from __future__ import annotations

import math
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np

from lprec import bounds
from lprec.errors import ConfigError, FormatOverflowError, NonFiniteError
from lprec.floatsim import FP32, FloatFormat, RngStream, parse_format, round_nearest
from lprec.harness.config import ExperimentConfig
from lprec.harness.metrics import METRIC_COLUMNS, write_csv
from lprec.models import (
    LsqInstance,
    MlpSpec,
    QuantPolicy,
    gen_blobs,
    gen_lsq,
    init_mlp,
    lsq_grad_exact,
    lsq_grad_quantized,
    lsq_loss,
    mlp_forward_backward,
    mlp_loss_exact,
)
from lprec.optim import UpdatePolicy, adamw_step, init_state, sgd_step

__all__ = [
    "ArmSpec",
    "ArmResult",
    "RunReport",
    "figure_arms",
    "run_experiment",
    "run_lsq_experiment",
    "run_cancellation_study",
    "run_format_sweep",
    "run_mlp_demo",
    "run_bounds_check",
    "worker_count",
]

T = TypeVar("T")
_NUMERIC_FAILURES = (NonFiniteError, FormatOverflowError)


@dataclass(frozen=True)
class ArmSpec:
    """One training configuration inside an experiment."""

    name: str
    fmt: FloatFormat
    policy: UpdatePolicy
    round_fb: bool

    def key(self, optimizer: str) -> str:
        # canonical: independent of the display name so that the same setting
        # draws the same random bits in every experiment kind
        return f"{self.fmt.name}|{self.policy.value}|fb={int(self.round_fb)}|{optimizer}"


@dataclass
class ArmResult:
    arm: str
    seed: int
    policy: str
    format: str
    path: Path | None
    status: str = "ok"
    steps_done: int = 0
    final_loss: float = math.nan
    final_loss_smooth: float = math.nan
    final_dist: float | None = None
    lr: float = math.nan
    L: float | None = None
    radius: float | None = None
    early_cancel: float | None = None
    late_cancel: float | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def summary_line(self) -> str:
        parts = [f"{self.arm:<18}", f"seed={self.seed}", f"status={self.status}"]
        parts.append(f"steps={self.steps_done}")
        parts.append(f"loss={self.final_loss:.6g}")
        parts.append(f"loss_smooth={self.final_loss_smooth:.6g}")
        if self.final_dist is not None:
            parts.append(f"dist={self.final_dist:.6g}")
        if self.message:
            parts.append(f"({self.message})")
        return " ".join(parts)


@dataclass
class RunReport:
    kind: str
    out_dir: Path
    arms: list[ArmResult] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)
    violations: int = 0
    lines: list[str] = field(default_factory=list)

    @property
    def numerical_failure(self) -> bool:
        return any(not a.ok for a in self.arms)


# -- plumbing -------------------------------------------------------------------


def worker_count(n_jobs: int) -> int:
    """Pool size: ``LPREC_THREADS`` if set, else the CPU count, never above ``n_jobs``."""
    raw = os.environ.get("LPREC_THREADS")
    if raw is None or raw == "":
        limit = os.cpu_count() or 1
    else:
        try:
            limit = int(raw)
        except ValueError:
            raise ConfigError(f"LPREC_THREADS must be a positive integer, got {raw!r}") from None
        if limit < 1:
            raise ConfigError(f"LPREC_THREADS must be a positive integer, got {raw!r}")
    return max(1, min(limit, n_jobs))


def _pool_map(fn: Callable[[Any], T], jobs: Sequence[Any]) -> list[T]:
    n = worker_count(len(jobs))
    if n <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, jobs))


def _out_dir(cfg: ExperimentConfig, out_dir: str | Path | None) -> Path:
    path = Path(out_dir if out_dir is not None else cfg.output_path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cancel_frac(prev: np.ndarray, new: np.ndarray, update: np.ndarray | None) -> float | None:
    """Share of nonzero attempted updates that left the stored weight bit-identical."""
    if update is None:
        return None
    nonzero = np.asarray(update) != 0
    total = int(nonzero.sum())
    if total == 0:
        return None
    same = np.asarray(prev, dtype=np.float64).view(np.uint64) == np.asarray(new, dtype=np.float64).view(np.uint64)
    return float(np.count_nonzero(same & nonzero)) / total


def _pooled_cancel(parts: Iterable[tuple[np.ndarray, np.ndarray, np.ndarray | None]]) -> float | None:
    hits = total = 0
    for prev, new, update in parts:
        if update is None:
            continue
        nonzero = np.asarray(update) != 0
        same = np.asarray(prev, dtype=np.float64).view(np.uint64) == np.asarray(new, dtype=np.float64).view(np.uint64)
        hits += int(np.count_nonzero(same & nonzero))
        total += int(nonzero.sum())
    return hits / total if total else None


class _Logger:
    """Collects metric rows with a trailing-window smoothed loss."""

    def __init__(self, policy: str, seed: int, window: int, log_every: int, steps: int) -> None:
        self.policy, self.seed = policy, seed
        self.log_every, self.steps = log_every, steps
        self.window: deque[float] = deque(maxlen=window)
        self.rows: list[list[Any]] = []

    def due(self, step: int) -> bool:
        return step % self.log_every == 0 or step == self.steps

    def log(self, step: int, loss: float, dist: float | None, cancel: float | None, lr: float) -> None:
        self.window.append(loss)
        smooth = math.fsum(self.window) / len(self.window)
        self.rows.append([step, loss, smooth, dist, cancel, lr, self.policy, self.seed, "ok"])

    def fail(self, step: int, lr: float, status: str) -> None:
        self.rows.append([step, math.nan, None, None, None, lr, self.policy, self.seed, status])

    @property
    def last(self) -> list[Any] | None:
        for row in reversed(self.rows):
            if row[-1] == "ok":
                return row
        return None


def _finish_result(res: ArmResult, logger: _Logger, path: Path) -> ArmResult:
    write_csv(path, METRIC_COLUMNS, logger.rows)
    last = logger.last
    if last is not None:
        res.final_loss, res.final_loss_smooth, res.final_dist = last[1], last[2], last[3]
    return res


def _cancel_windows(rows: list[list[Any]], steps: int) -> tuple[float | None, float | None]:
    """Mean cancel_frac over the first and the last 10% of steps."""
    width = max(1, math.ceil(steps / 10))
    early = [r[4] for r in rows if r[-1] == "ok" and r[0] <= width and r[4] is not None]
    late = [r[4] for r in rows if r[-1] == "ok" and r[0] > steps - width and r[4] is not None]
    mean = lambda xs: math.fsum(xs) / len(xs) if xs else None  # noqa: E731
    return mean(early), mean(late)


# -- least squares ------------------------------------------------------------


def figure_arms(cfg: ExperimentConfig) -> list[ArmSpec]:
    """The four comparison arms of the least-squares figure.

    ``fp32``: everything in binary32. ``nearest-updates``: exact gradients,
    16-bit weights written with nearest rounding. ``fwdbwd-only``: rounded
    forward/backward, binary32 weights and updates. The last arm uses the
    configured policy with rounded forward/backward.
    """
    fmt = cfg.fmt
    arms = [
        ArmSpec("fp32", FP32, UpdatePolicy.NEAREST, True),
        ArmSpec("nearest-updates", fmt, UpdatePolicy.NEAREST, False),
        ArmSpec("fwdbwd-only", fmt, UpdatePolicy.MASTER32, True),
    ]
    arms.append(ArmSpec(cfg.policy, fmt, cfg.update_policy, cfg.round_forward_backward))
    return arms


def _instance(cfg: ExperimentConfig, seed: int, fmt: FloatFormat) -> LsqInstance:
    return gen_lsq(
        cfg.d,
        cfg.n,
        w_range=tuple(cfg.w_range),
        noise_std=cfg.noise_std,
        seed=cfg.instance_seed_for(seed),
        fmt=fmt,
    )


def _lsq_lr(cfg: ExperimentConfig, inst: LsqInstance) -> float:
    if cfg.lr_times_L is not None:
        return cfg.lr_times_L / inst.L
    return float(cfg.optimizer_cfg().lr)


def _run_lsq_arm(cfg: ExperimentConfig, arm: ArmSpec, seed: int, path: Path) -> ArmResult:
    inst = _instance(cfg, seed, arm.fmt)
    lr = _lsq_lr(cfg, inst)
    opt = cfg.optimizer_cfg(lr=lr)
    step_fn = sgd_step if cfg.optimizer == "sgd" else adamw_step
    policy = arm.policy
    rng = RngStream.keyed(seed, "update", arm.key(cfg.optimizer), "w") if policy.uses_rng else None
    idx = bounds.sample_indices(seed, inst.n, cfg.steps)

    res = ArmResult(arm.name, seed, policy.value, arm.fmt.name, path, lr=lr, L=inst.L)
    res.radius = bounds.cancellation_radius(bounds.Thm1Params(arm.fmt.machine_epsilon, lr, inst.L, inst.w_star))
    log = _Logger(policy.value, seed, cfg.smooth_window, cfg.log_every, cfg.steps)

    w = np.zeros(inst.d)
    state = init_state(w, policy, adamw=cfg.optimizer == "adamw")
    for t in range(cfg.steps):
        step = t + 1
        lr_t = opt.lr_at(t)
        try:
            if arm.round_fb:
                g = lsq_grad_quantized(w, inst, idx[t], arm.fmt, acc=cfg.accum)
            else:
                g = lsq_grad_exact(w, inst, idx[t])
            w_new, state = step_fn(w, g, state, opt, policy, arm.fmt, rng)
            loss = lsq_loss(w_new, inst)
            if not math.isfinite(loss):
                raise NonFiniteError("loss is not finite")
        except _NUMERIC_FAILURES as exc:
            log.fail(step, lr_t, "nonfinite")
            res.status, res.message = "nonfinite", str(exc)
            break
        if log.due(step):
            dist = float(np.linalg.norm(w_new - inst.w_star))
            log.log(step, loss, dist, _cancel_frac(w, w_new, state.last_update), lr_t)
        w = w_new
        res.steps_done = step
    res = _finish_result(res, log, path)
    res.early_cancel, res.late_cancel = _cancel_windows(log.rows, cfg.steps)
    return res


def _run_arms(cfg: ExperimentConfig, arms: list[ArmSpec], out: Path, prefix: str) -> list[ArmResult]:
    jobs = [(arm, seed) for arm in arms for seed in cfg.seeds]

    def one(job: tuple[ArmSpec, int]) -> ArmResult:
        arm, seed = job
        return _run_lsq_arm(cfg, arm, seed, out / f"{prefix}_{arm.name}_seed{seed}.csv")

    return _pool_map(one, jobs)


LSQ_SUMMARY_COLUMNS = (
    "arm", "policy", "format", "seed", "status", "steps", "final_loss",
    "final_loss_smooth", "final_dist", "lr", "L", "radius",
)


def _lsq_summary_row(r: ArmResult) -> list[Any]:
    return [
        r.arm, r.policy, r.format, r.seed, r.status, r.steps_done, r.final_loss,
        r.final_loss_smooth, r.final_dist, r.lr, r.L, r.radius,
    ]


def run_lsq_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunReport:
    """Batch-1 SGD on synthetic least squares; one CSV per arm and seed.

    ``lsq-figure`` runs the four comparison arms of ``figure_arms``; any
    other least-squares kind runs the configured policy alone.
    """
    out = _out_dir(cfg, out_dir)
    if cfg.kind == "lsq-figure":
        arms = figure_arms(cfg)
    else:
        arms = [ArmSpec(cfg.policy, cfg.fmt, cfg.update_policy, cfg.round_forward_backward)]
    results = _run_arms(cfg, arms, out, cfg.kind)
    summary = out / f"{cfg.kind}_summary.csv"
    write_csv(summary, LSQ_SUMMARY_COLUMNS, [_lsq_summary_row(r) for r in results])
    return RunReport(
        cfg.kind,
        out,
        arms=results,
        files=[r.path for r in results] + [summary],
        lines=[r.summary_line() for r in results],
    )


CANCEL_SUMMARY_COLUMNS = ("seed", "steps", "status", "early_mean", "late_mean", "window")


def run_cancellation_study(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunReport:
    """Per-step cancel_frac of the nearest policy, with early/late window means."""
    if cfg.update_policy is not UpdatePolicy.NEAREST:
        raise ConfigError(f"the cancellation study is defined for the nearest policy, got {cfg.policy!r}")
    out = _out_dir(cfg, out_dir)
    arm = ArmSpec("nearest", cfg.fmt, UpdatePolicy.NEAREST, cfg.round_forward_backward)
    results = _run_arms(cfg, [arm], out, "cancellation")
    width = max(1, math.ceil(cfg.steps / 10))
    rows = [[r.seed, r.steps_done, r.status, r.early_cancel, r.late_cancel, width] for r in results]
    summary = out / "cancellation_summary.csv"
    write_csv(summary, CANCEL_SUMMARY_COLUMNS, rows)
    lines = [r.summary_line() for r in results]
    lines += [f"seed={r.seed} cancel_frac early={_fmt_opt(r.early_cancel)} late={_fmt_opt(r.late_cancel)}" for r in results]
    return RunReport("cancellation", out, arms=results, files=[r.path for r in results] + [summary], lines=lines)


SWEEP_COLUMNS = ("format", "policy", "seed", "status", "steps", "final_loss", "final_dist", "radius", "eps")


def run_format_sweep(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunReport:
    """One least-squares run per (format, policy, seed); failed arms are flagged, not fatal."""
    out = _out_dir(cfg, out_dir)
    fmts = [parse_format(f) for f in cfg.formats]
    arms = [
        ArmSpec(f"{f.name}-{p}", f, UpdatePolicy(p), cfg.round_forward_backward)
        for f in fmts
        for p in cfg.policies
    ]
    results = _run_arms(cfg, arms, out, "sweep")
    rows = [
        [r.format, r.policy, r.seed, r.status, r.steps_done, r.final_loss, r.final_dist, r.radius,
         parse_format(r.format).machine_epsilon]
        for r in results
    ]
    summary = out / "sweep_summary.csv"
    write_csv(summary, SWEEP_COLUMNS, rows)
    return RunReport(
        "format-sweep", out, arms=results, files=[r.path for r in results] + [summary],
        lines=[r.summary_line() for r in results],
    )


# -- MLP demo -------------------------------------------------------------------


def _run_mlp_arm(cfg: ExperimentConfig, arm: ArmSpec, seed: int, path: Path) -> ArmResult:
    spec = MlpSpec(cfg.d, cfg.hidden_dim, 2)
    X, labels = gen_blobs(cfg.n, cfg.d, seed=cfg.instance_seed_for(seed))
    Xq = round_nearest(X, arm.fmt)
    params = init_mlp(spec, arm.fmt, seed=cfg.instance_seed_for(seed))
    opt = cfg.optimizer_cfg()
    adam = cfg.optimizer == "adamw"
    step_fn = adamw_step if adam else sgd_step
    if arm.policy is UpdatePolicy.MASTER32:
        qpol = QuantPolicy(arm.round_fb, "master32", "master32")
    else:
        qpol = QuantPolicy(arm.round_fb, {"*": arm.policy.value, **cfg.policy_overrides})
    policies = {k: UpdatePolicy(qpol.policy_for(k)) for k in MlpSpec.PARAM_NAMES}
    key = arm.key(cfg.optimizer)
    rngs = {
        k: RngStream.keyed(seed, "update", key, k) if p.uses_rng else None for k, p in policies.items()
    }
    states = {k: init_state(params[k], policies[k], adamw=adam) for k in MlpSpec.PARAM_NAMES}
    B = min(cfg.batch_size, cfg.n)
    u = RngStream.keyed(seed, "sampler").uniform(cfg.steps * B)
    batches = np.minimum((u * cfg.n).astype(np.int64), cfg.n - 1).reshape(cfg.steps, B)

    res = ArmResult(arm.name, seed, arm.policy.value, arm.fmt.name, path, lr=float(opt.lr_at(0)))
    log = _Logger(arm.policy.value, seed, cfg.smooth_window, cfg.log_every, cfg.steps)
    for t in range(cfg.steps):
        step = t + 1
        lr_t = opt.lr_at(t)
        b = batches[t]
        try:
            _, grads = mlp_forward_backward(params, (Xq[b], labels[b]), arm.fmt, policy=qpol, acc=cfg.accum)
            new = {}
            for k in MlpSpec.PARAM_NAMES:
                new[k], states[k] = step_fn(params[k], grads[k], states[k], opt, policies[k], arm.fmt, rngs[k])
            loss = mlp_loss_exact(new, X, labels)
            if not math.isfinite(loss):
                raise NonFiniteError("loss is not finite")
        except _NUMERIC_FAILURES as exc:
            log.fail(step, lr_t, "nonfinite")
            res.status, res.message = "nonfinite", str(exc)
            break
        if log.due(step):
            cancel = _pooled_cancel((params[k], new[k], states[k].last_update) for k in MlpSpec.PARAM_NAMES)
            log.log(step, loss, None, cancel, lr_t)
        params = new
        res.steps_done = step
    return _finish_result(res, log, path)


def run_mlp_demo(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunReport:
    """Two-class MLP on Gaussian blobs: a binary32 baseline arm and the configured policy."""
    out = _out_dir(cfg, out_dir)
    arms = [
        ArmSpec("fp32", FP32, UpdatePolicy.NEAREST, True),
        ArmSpec(cfg.policy, cfg.fmt, cfg.update_policy, cfg.round_forward_backward),
    ]
    jobs = [(arm, seed) for arm in arms for seed in cfg.seeds]
    results = _pool_map(
        lambda job: _run_mlp_arm(cfg, job[0], job[1], out / f"mlp_{job[0].name}_seed{job[1]}.csv"), jobs
    )
    summary = out / "mlp-demo_summary.csv"
    write_csv(summary, LSQ_SUMMARY_COLUMNS, [_lsq_summary_row(r) for r in results])
    return RunReport(
        "mlp-demo", out, arms=results, files=[r.path for r in results] + [summary],
        lines=[r.summary_line() for r in results],
    )


# -- bounds validation ----------------------------------------------------------

BOUNDS_COLUMNS = (
    "check", "format", "seed", "probe_id", "distance", "radius", "predicted",
    "observed_cancelled", "bound", "measured", "holds", "note",
)


def _bounds_instance(cfg: ExperimentConfig, seed: int, fmt: FloatFormat) -> tuple[LsqInstance, float]:
    inst = _instance(cfg, seed, fmt)
    return inst, _lsq_lr(cfg, inst)


def run_bounds_check(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunReport:
    """Validate the cancellation condition, the halting floor and the linear-rate bound.

    Checks, one CSV row each:

    ``thm1-sufficiency``  random probes inside the cancellation radius; a
                          probe holds if every sample's step rounds away
    ``thm1-trajectory``   per seed, the smallest distance reached by
                          nearest-rounded SGD versus the halting floor, with
                          2 ulp of slack for the norm computation
    ``thm2-bound``        per checkpoint, the seed-mean squared distance with
                          rounded forward/backward and exact updates
    ``separation``        the largest final distance of those runs against
                          the halting floor of the nearest-update setting
    """
    if cfg.noise_std != 0:
        raise ConfigError("bounds-check needs a noiseless instance (noise_std = 0)")
    out = _out_dir(cfg, out_dir)
    fmt = cfg.fmt
    rows: list[list[Any]] = []
    lines: list[str] = []

    # cancellation condition
    per_seed = math.ceil(cfg.n_probes / len(cfg.seeds))
    probe_jobs = [(parse_format(f), s) for f in cfg.formats for s in cfg.seeds]

    def probe(job: tuple[FloatFormat, int]) -> tuple[FloatFormat, int, list[bounds.ProbeResult]]:
        f, s = job
        inst = _instance(cfg, s, f)
        alpha = cfg.probe_lr_times_L / inst.L
        try:
            return f, s, bounds.probe_cancellation(inst, alpha, f, per_seed, seed=s)
        except ValueError as exc:
            raise ConfigError(f"{f.name}, seed {s}: {exc}") from None

    counterexamples = pairs = 0
    for f, s, results in _pool_map(probe, probe_jobs):
        for p in results:
            pairs += p.total_samples
            counterexamples += p.counterexamples
            rows.append([
                "thm1-sufficiency", f.name, s, p.probe_id, p.distance, p.radius, p.predicted,
                p.observed_cancelled, None, p.cancelled_samples / p.total_samples,
                p.observed_cancelled or not p.predicted, f"{p.cancelled_samples}/{p.total_samples}",
            ])
    lines.append(f"thm1-sufficiency: {pairs} (w, sample) probes, {counterexamples} counterexamples")

    # halting floor along nearest-rounded trajectories, one instance per seed
    def trajectory(seed: int) -> list[Any]:
        inst, alpha = _bounds_instance(cfg, seed, fmt)
        w0 = np.zeros(inst.d)
        p = bounds.Thm1Params(fmt.machine_epsilon, alpha, inst.L, inst.w_star, w0)
        floor = bounds.halting_lower_bound(p)
        dmin = float(bounds.nearest_trajectory(inst, alpha, fmt, cfg.steps, seed, w0).min())
        holds = dmin >= floor - 2 * float(np.spacing(dmin))
        return ["thm1-trajectory", fmt.name, seed, 0, dmin, bounds.cancellation_radius(p), None, None,
                floor, dmin, holds, f"alpha*L={alpha * inst.L:.17g}"]

    traj_rows = _pool_map(trajectory, list(cfg.seeds))
    rows += traj_rows
    bad_traj = sum(not r[10] for r in traj_rows)
    lines.append(f"thm1-trajectory: {len(traj_rows)} runs, {bad_traj} violations")

    # linear rate with exact updates, one shared instance across seeds
    base_seed = cfg.seeds[0]
    inst, alpha = _bounds_instance(cfg, base_seed, fmt)
    horizon = max(cfg.checkpoints, default=0)
    dsq = np.array(_pool_map(lambda s: bounds.fwdbwd_trajectory(inst, alpha, fmt, horizon, s), list(cfg.seeds)))
    mean_dsq = dsq.mean(axis=0)
    bad_thm2 = 0
    for t in cfg.checkpoints:
        p2 = bounds.Thm2Params(alpha, inst.mu, inst.L, fmt.machine_epsilon, t, float(mean_dsq[0]))
        bound = bounds.thm2_upper_bound(p2)
        holds = bool(mean_dsq[t] <= bound)
        bad_thm2 += not holds
        note = f"4eL/mu={p2.rounding_ratio:.6g}" + (" vacuous" if p2.vacuous else "")
        rows.append(["thm2-bound", fmt.name, base_seed, t, math.sqrt(mean_dsq[t]), None, None, None,
                     bound, float(mean_dsq[t]), holds, note])
    lines.append(f"thm2-bound: {len(cfg.checkpoints)} checkpoints over {len(cfg.seeds)} seeds, {bad_thm2} violations")

    floor = bounds.halting_lower_bound(
        bounds.Thm1Params(fmt.machine_epsilon, alpha, inst.L, inst.w_star, np.zeros(inst.d))
    )
    final = float(np.sqrt(dsq[:, -1]).max())
    separated = final < floor
    rows.append(["separation", fmt.name, base_seed, horizon, final, None, None, None, floor, final,
                 separated, "max final distance vs halting floor"])
    lines.append(f"separation: final distance {final:.6g} vs halting floor {floor:.6g}")

    path = out / "bounds_check.csv"
    write_csv(path, BOUNDS_COLUMNS, rows)
    violations = counterexamples + bad_traj + bad_thm2 + (not separated)
    return RunReport("bounds-check", out, files=[path], violations=violations, lines=lines)


def _fmt_opt(x: float | None) -> str:
    return "undefined" if x is None else f"{x:.6g}"


# -- dispatch -------------------------------------------------------------------

RUNNERS: dict[str, Callable[[ExperimentConfig, Any], RunReport]] = {
    "lsq-theory": run_lsq_experiment,
    "lsq-figure": run_lsq_experiment,
    "mlp-demo": run_mlp_demo,
    "cancellation": run_cancellation_study,
    "format-sweep": run_format_sweep,
    "bounds-check": run_bounds_check,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunReport:
    return RUNNERS[cfg.kind](cfg, out_dir)
