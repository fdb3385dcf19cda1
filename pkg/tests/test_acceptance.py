"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``. The lines are printed straight to the
terminal, outside pytest's output capture.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from lprec.bounds import fwdbwd_trajectory
from lprec.floatsim import BF16, E8M1, E8M3, E8M5, FP16, RngStream, decode, encode, round_nearest, round_stochastic
from lprec.harness import ExperimentConfig, load_config, run_experiment
from lprec.harness.experiments import _instance
from lprec.harness.metrics import read_csv
from lprec.optim import kahan_apply

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# criterion 8: late-window cancel fraction on the noiseless constant-lr config,
# confirmed by the first run (late mean 0.94, early 0.36) and frozen here
CANCEL_LATE_MIN = 0.5

# criteria 6 and 7: figure protocol
FIGURE_SEEDS = [0, 1, 2, 3]
FIGURE_STEPS = 8000
FIGURE_WINDOW = 4000


def _report(capsys, n, title, ok, detail, elapsed, limit):
    ok = ok and elapsed < limit
    line = f"criterion {n:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail} ({elapsed:.1f}s, limit {limit:.0f}s)"
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# -- shared runs -------------------------------------------------------------------


@pytest.fixture(scope="module")
def bounds_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("thm1")
    cfg = load_config(CONFIGS / "thm1.json")
    report, elapsed = _timed(lambda: run_experiment(cfg, out))
    return cfg, report, read_csv(out / "bounds_check.csv"), elapsed


@pytest.fixture(scope="module")
def figure_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("figure")
    base = load_config(CONFIGS / "lsq_figure.json").with_overrides(
        seeds=FIGURE_SEEDS, steps=FIGURE_STEPS, smooth_window=FIGURE_WINDOW
    )

    def run():
        fig = run_experiment(base.with_overrides(policy="kahan"), out / "figure")
        sr = run_experiment(
            ExperimentConfig.from_dict({**base.to_dict(), "kind": "lsq-theory", "policy": "stochastic"}),
            out / "stochastic",
        )
        return fig.arms + [a for a in sr.arms]

    arms, elapsed = _timed(run)
    smooth = {}
    for a in arms:
        assert a.ok, a.summary_line()
        smooth.setdefault(a.arm, {})[a.seed] = a.final_loss_smooth
    return smooth, elapsed


def _mean_ratio(smooth, arm):
    per_seed = [smooth[arm][s] / smooth["fp32"][s] for s in FIGURE_SEEDS]
    mean = np.mean([smooth[arm][s] for s in FIGURE_SEEDS]) / np.mean([smooth["fp32"][s] for s in FIGURE_SEEDS])
    return float(mean), per_seed


def _fmt_ratios(xs):
    return "[" + ", ".join(f"{x:.2f}" for x in xs) + "]"


# -- criteria ----------------------------------------------------------------------


def test_c01_format_correctness(capsys):
    def check():
        notes, ok = [], True
        for f in (BF16, FP16):
            bits = np.arange(1 << 16)
            vals = decode(bits, f)
            nan = np.isnan(vals)
            back = encode(vals, f)
            rt = np.array_equal(back[~nan], bits[~nan]) and bool(np.all(np.isnan(decode(back[nan], f))))
            x = np.random.default_rng(1).standard_normal(1_000_000)
            normal = np.abs(x) >= f.min_positive_normal
            rel = np.abs(round_nearest(x[normal], f) - x[normal]) / np.abs(x[normal])
            worst = float(rel.max())
            ok &= rt and worst <= f.machine_epsilon
            notes.append(f"{f.name} round-trip={'ok' if rt else 'BAD'} max rel err {worst:.3g} <= {f.machine_epsilon:.3g}"
                         f" ({(~normal).sum()} subnormal-range draws excluded)")
        return ok, "; ".join(notes)

    (ok, detail), elapsed = _timed(check)
    _report(capsys, 1, "format correctness", ok, detail, elapsed, 10)


def test_c02_stochastic_unbiased(capsys):
    def check():
        ok, worst, notes = True, 0.0, []
        gen = np.random.default_rng(2)
        for f in (BF16, FP16, E8M5, E8M3, E8M1):
            rng = RngStream.keyed(2, "acceptance", f.name)
            targets = gen.choice([-1.0, 1.0], 100) * np.exp(gen.uniform(-3, 5, 100))
            z_max = 0.0
            for chunk in np.split(targets, 20):
                draws = round_stochastic(np.repeat(chunk[:, None], 100_000, axis=1), f, rng)
                se = draws.std(axis=1, ddof=1) / math.sqrt(draws.shape[1])
                err = np.abs(draws.mean(axis=1) - chunk)
                z = np.where(se > 0, err / np.where(se > 0, se, 1.0), np.where(err == 0, 0.0, np.inf))
                z_max = max(z_max, float(z.max()))
            ok &= z_max <= 4.0
            worst = max(worst, z_max)
            notes.append(f"{f.name} max |z|={z_max:.2f}")
        draws = round_stochastic(np.full(100_000, 255.5), BF16, RngStream.keyed(2, "midpoint"))
        up = int((draws == 256.0).sum())
        z_mid = abs(up - 50_000) / math.sqrt(100_000 * 0.25)
        ok &= z_mid <= 3.0 and set(np.unique(draws)) == {255.0, 256.0}
        notes.append(f"255.5 -> {up} up of 100000 (z={z_mid:.2f})")
        return ok, "; ".join(notes)

    (ok, detail), elapsed = _timed(check)
    _report(capsys, 2, "stochastic rounding unbiased", ok, detail, elapsed, 30)


def test_c03_cancellation_sufficiency(capsys, bounds_run):
    cfg, _, rows, elapsed = bounds_run
    probes = [r for r in rows if r["check"] == "thm1-sufficiency"]
    pairs = sum(int(r["note"].split("/")[1]) for r in probes if r["predicted"] == "true")
    bad = sum(
        int(r["note"].split("/")[1]) - int(r["note"].split("/")[0])
        for r in probes
        if r["predicted"] == "true"
    )
    formats = sorted({r["format"] for r in probes})
    ok = pairs >= 100_000 and bad == 0 and formats == ["E8M3", "E8M5", "E8M7"] and cfg.d == 10
    detail = f"{pairs} (w, sample) probes inside the radius over {formats}, {bad} counterexamples"
    _report(capsys, 3, "cancellation sufficiency", ok, detail, elapsed, 60)


def test_c04_halting_floor(capsys, bounds_run):
    _, _, rows, elapsed = bounds_run
    traj = [r for r in rows if r["check"] == "thm1-trajectory"]
    a_l = [float(r["note"].split("=")[1]) for r in traj]
    margin = min(float(r["measured"]) - float(r["bound"]) for r in traj)
    ok = len(traj) == 32 and all(r["holds"] == "true" for r in traj) and max(a_l) <= 1.0
    detail = (f"{len(traj)} runs, {sum(r['holds'] != 'true' for r in traj)} violations, "
              f"min distance - floor = {margin:.4g}, alpha*L <= {max(a_l):.3g}")
    _report(capsys, 4, "halting lower bound", ok, detail, elapsed, 120)


def test_c05_linear_rate_and_separation(capsys, bounds_run):
    cfg, _, rows, elapsed = bounds_run
    thm2 = [r for r in rows if r["check"] == "thm2-bound"]
    sep = [r for r in rows if r["check"] == "separation"]
    ratio = float(thm2[0]["note"].split("=")[1].split()[0])
    checkpoints = sorted(int(r["probe_id"]) for r in thm2)
    ok = (
        checkpoints == [10, 100, 1000]
        and len(cfg.seeds) >= 32
        and ratio < 0.9
        and all(r["holds"] == "true" for r in thm2)
        and len(sep) == 1
        and sep[0]["holds"] == "true"
    )
    pts = ", ".join(f"t={r['probe_id']}: {float(r['measured']):.3g} <= {float(r['bound']):.3g}" for r in thm2)
    detail = (f"4eL/mu={ratio:.3f}; {pts}; final distance {float(sep[0]['measured']):.3g} "
              f"< floor {float(sep[0]['bound']):.3g}")
    _report(capsys, 5, "linear-rate bound and separation", ok, detail, elapsed, 120)


def test_c06_figure_replication(capsys, figure_run):
    smooth, elapsed = figure_run
    near, near_s = _mean_ratio(smooth, "nearest-updates")
    fb, fb_s = _mean_ratio(smooth, "fwdbwd-only")
    ok = near >= 10.0 and fb <= 3.0
    detail = (f"nearest-updates/fp32 = {near:.2f} (>= 10, per seed {_fmt_ratios(near_s)}); "
              f"fwdbwd-only/fp32 = {fb:.3f} (<= 3, per seed {_fmt_ratios(fb_s)})")
    _report(capsys, 6, "figure replication", ok, detail, elapsed, 120)


def test_c07_kahan_rescue(capsys, figure_run):
    def trace():
        w, c, frozen = np.array([256.0]), np.zeros(1), np.array([256.0])
        worst, stuck = 0.0, True
        for k in range(1, 10_001):
            w, c = kahan_apply(w, [-0.5], c, BF16)
            frozen = round_nearest(frozen - 0.5, BF16)
            exact = 256.0 - 0.5 * k
            unit = float(np.spacing(np.float64(0)) if exact == 0 else 2.0 ** (math.floor(math.log2(abs(exact))) - 7))
            worst = max(worst, abs(w[0] - exact) / unit)
            stuck &= frozen[0] == 256.0
        return worst, stuck

    (worst, stuck), t_trace = _timed(trace)
    smooth, t_fig = figure_run
    kahan, kahan_s = _mean_ratio(smooth, "kahan")
    sr, sr_s = _mean_ratio(smooth, "stochastic")
    ok = stuck and worst <= 1.0 and kahan <= 2.0 and sr <= 2.0
    detail = (f"nearest frozen at 256: {stuck}; Kahan max error {worst:.3g} ulp; "
              f"kahan/fp32 = {kahan:.2f} (per seed {_fmt_ratios(kahan_s)}); "
              f"stochastic/fp32 = {sr:.2f} (per seed {_fmt_ratios(sr_s)}); both must be <= 2")
    _report(capsys, 7, "Kahan rescue", ok, detail, t_trace + t_fig, 120)


def test_c08_cancellation_trend(capsys, tmp_path):
    cfg = load_config(CONFIGS / "cancellation.json")
    report, elapsed = _timed(lambda: run_experiment(cfg, tmp_path))
    arm = report.arms[0]
    early, late = arm.early_cancel, arm.late_cancel
    ok = arm.ok and cfg.noise_std == 0 and late is not None and early is not None
    ok = ok and late > early and late > CANCEL_LATE_MIN
    detail = f"early mean {early:.3f}, late mean {late:.3f} (> early and > {CANCEL_LATE_MIN}) over {cfg.steps} steps"
    _report(capsys, 8, "cancellation trend", ok, detail, elapsed, 60)


def test_c09_master32_equivalence(capsys, tmp_path):
    def check():
        cfg = ExperimentConfig.for_kind(
            "lsq-theory", policy="master32", noise_std=0.0, w_range=[50.0, 100.0], n=256,
            lr_times_L=0.5, steps=1000, seeds=[0, 1, 2, 3],
        )
        report = run_experiment(cfg, tmp_path)
        diffs = []
        for arm in report.arms:
            inst = _instance(cfg, arm.seed, cfg.fmt)
            ref = math.sqrt(fwdbwd_trajectory(inst, arm.lr, cfg.fmt, cfg.steps, arm.seed)[-1])
            diffs.append(abs(arm.final_dist - ref))
        return diffs

    diffs, elapsed = _timed(check)
    ok = max(diffs) <= 1e-10
    detail = f"max |final distance difference| over {len(diffs)} seeds = {max(diffs):.3g} (<= 1e-10)"
    _report(capsys, 9, "master32 ablation equivalence", ok, detail, elapsed, 60)


def test_c10_determinism(capsys, tmp_path):
    small = {"steps": 150, "n": 128, "seeds": [0, 1]}
    cfgs = [
        ExperimentConfig.for_kind("lsq-figure", policy="kahan-stochastic", **small),
        ExperimentConfig.for_kind("lsq-theory", policy="stochastic", optimizer="adamw",
                                  optimizer_config={"lr": 0.05, "beta2": 0.99609375}, **small),
        ExperimentConfig.for_kind("cancellation", **small),
        ExperimentConfig.for_kind("format-sweep", formats=["E8M3", "E5M10"], policies=["stochastic", "kahan"], **small),
        ExperimentConfig.for_kind("mlp-demo", policy="kahan", policy_overrides={"W1": "stochastic"}, **small),
        ExperimentConfig.for_kind("bounds-check", seeds=[0, 1], n=64, steps=200, n_probes=10, formats=["E8M7"]),
    ]

    def check():
        compared, mismatched = 0, []
        for i, cfg in enumerate(cfgs):
            a = run_experiment(cfg, tmp_path / f"{i}a")
            b = run_experiment(cfg, tmp_path / f"{i}b")
            for fa, fb in zip(a.files, b.files, strict=True):
                compared += 1
                if fa.name != fb.name or fa.read_bytes() != fb.read_bytes():
                    mismatched.append(fa.name)
        return compared, mismatched

    (compared, mismatched), elapsed = _timed(check)
    ok = compared > 0 and not mismatched
    detail = f"{compared} CSV files across {len(cfgs)} experiment kinds, {len(mismatched)} differ"
    _report(capsys, 10, "determinism", ok, detail, elapsed, 120)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
