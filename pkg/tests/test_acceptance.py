"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are repeated in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from _fd import max_rel_err  # noqa: E402
from _ops import OPS  # noqa: E402

from rulegrad import logic, losses  # noqa: E402
from rulegrad import ndgrad as nd  # noqa: E402
from rulegrad.curriculum import MarginSchedule  # noqa: E402
from rulegrad.data import SyntheticSpec, generate_synthetic  # noqa: E402
from rulegrad.evaluate import evaluate, harmonic_mean, mca  # noqa: E402
from rulegrad.losses import LossWeights  # noqa: E402
from rulegrad.train import Trainer, TrainConfig, train  # noqa: E402
from rulegrad.vse import VseParams  # noqa: E402

RESULTS: list[str] = []

# Reference synthetic setting for the direction-of-effect runs. The default sigma already
# puts baseline MCA_t inside [0.3, 0.6], so it was left at 1.0.
REF_SIGMA = 1.0
REF_EPOCHS = 30
REF_SEEDS = range(5)
REF_WEIGHTS = dict(lambda_q=1.0, lambda_hyp=0.1, lambda_attr=1.0, lambda_trans=1.0)
REF_SCHEDULE = MarginSchedule(5.0, 0.0, 5)
# Weights and schedule were picked on seeds 100-104, never on REF_SEEDS. Means below are
# (MCA_t, HM) measured on REF_SEEDS with that choice; printed next to fresh values.
PINNED = {"baseline": (0.3288, 0.0079), "hyp": (0.3528, 0.0126), "hyp+attr": (0.4016, 0.0111),
          "baseline_tr": (0.5472, 0.3870), "csnl_tr": (0.6080, 0.4609)}


def record(n: int, title: str, ok: bool, detail: str):
    line = f"criterion {n} {'PASS' if ok else 'FAIL'} {title}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def ref_dataset(seed: int):
    return generate_synthetic(SyntheticSpec(sigma=REF_SIGMA, seed=seed))


# -- 1 ---------------------------------------------------------------------------------

def test_criterion_1_gradient_oracle():
    t0 = time.perf_counter()
    worst, worst_name = 0.0, ""
    for name, (build, shapes, transform) in sorted(OPS.items()):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            arrays = [rng.normal(size=s) for s in shapes]
            if transform is not None:
                arrays = [transform(a) for a in arrays]
            err = max_rel_err(build, arrays)
            if err > worst:
                worst, worst_name = err, name
    ds = generate_synthetic(SyntheticSpec(n_hypernyms=3, classes_per_hypernym=3,
                                          samples_per_class=12, d_x=6, d_y=5, n_attributes=4,
                                          seed=7))
    w = LossWeights(lambda_q=0.7, lambda_reg=0.01, lambda_hyp=1.3, lambda_attr=0.4,
                    lambda_trans=0.5)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        p = VseParams.init(6, 5, 4, seed)
        idx = rng.choice(len(ds.train_y), 4, replace=False)
        xu = ds.test_x[rng.choice(len(ds.test_y), 4, replace=False)]

        def build(tape, leaves):
            return losses.total_loss(leaves[0], leaves[1], ds.train_x[idx], ds.train_y[idx], xu,
                                     ds, 1.5, w, gamma=4.0)[0]

        err = max_rel_err(build, [p.w_x, p.w_y])
        if err > worst:
            worst, worst_name = err, "total_loss"
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 30
    record(1, "gradient oracle", ok,
           f"{len(OPS)} ops + total_loss x 20 seeds, max rel err {worst:.2e} ({worst_name}), "
           f"{elapsed:.1f}s")
    assert ok


# -- 2 ---------------------------------------------------------------------------------

def _v(fn, *args, **kw):
    t = nd.Tape()
    return fn(*[t.const(a) for a in args], **kw).item()


def test_criterion_2_logic_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    a, b = rng.uniform(-10, 10, 2000), rng.uniform(-10, 10, 2000)
    t = nd.Tape()
    x, y = t.const(a), t.const(b)
    dm1 = np.max(np.abs(logic.l_not(logic.l_and(x, y)).value
                        - logic.l_or(logic.l_not(x), logic.l_not(y)).value))
    dm2 = np.max(np.abs(logic.l_not(logic.l_or(x, y)).value
                        - logic.l_and(logic.l_not(x), logic.l_not(y)).value))
    demorgan_ok = max(dm1, dm2) < 1e-9

    tables = {
        "and": (logic.l_and, lambda p, q: p and q),
        "or": (logic.l_or, lambda p, q: p or q),
        "implies": (lambda u, w: logic.l_implies_margin(u, w, 0.0), lambda p, q: (not p) or q),
        "iff": (lambda u, w: logic.l_iff_margin(u, w, 0.0), lambda p, q: p == q),
    }
    table_err = 0.0
    for fn, truth in tables.values():
        for p in (True, False):
            for q in (True, False):
                s = 1 / (1 + math.exp(-_v(fn, 20.0 if p else -20.0, 20.0 if q else -20.0)))
                table_err = max(table_err, abs(s - float(truth(p, q))))
    table_ok = table_err < 1e-6

    margin_parts, margin_ok = [], True
    for c in (2.0, 5.0, 10.0):
        z = _v(logic.l_implies_margin, 0.0, 0.0, c=c)
        good = c - 0.1 <= z <= 1.05 * c
        margin_ok &= good
        margin_parts.append(f"c={c:g}->{z:.4f}{'' if good else ' (out of range)'}")
    elapsed = time.perf_counter() - t0
    ok = demorgan_ok and table_ok and margin_ok and elapsed < 5
    record(2, "logic algebra", ok,
           f"De Morgan max err {max(dm1, dm2):.1e}, truth tables max err {table_err:.1e}, "
           f"implies(0,0,c): {', '.join(margin_parts)}, {elapsed:.2f}s")
    assert ok


# -- 3 ---------------------------------------------------------------------------------

def test_criterion_3_inside_normalization():
    t0 = time.perf_counter()
    worst_uniform = 0.0
    for n in range(1, 33):
        t = nd.Tape()
        lp = nd.softmax_log_probs(t.const(np.zeros(n)))
        sets = [list(range(k)) for k in range(1, n + 1)]
        worst_uniform = max(worst_uniform, float(np.max(np.abs(logic.inside(lp, sets).value))))
    rng = np.random.default_rng(0)
    worst_full = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 40))
        t = nd.Tape()
        lp = nd.softmax_log_probs(t.const(rng.normal(scale=rng.uniform(0.1, 10), size=n)))
        worst_full = max(worst_full, abs(logic.inside(lp, range(n)).item()))
    elapsed = time.perf_counter() - t0
    ok = worst_uniform < 1e-9 and worst_full < 1e-9 and elapsed < 1
    record(3, "inside normalization", ok,
           f"uniform max |logit| {worst_uniform:.1e}, full universe max |logit| "
           f"{worst_full:.1e}, {elapsed:.2f}s")
    assert ok


# -- 4 ---------------------------------------------------------------------------------

def _rules_free_numpy(x, y, xu, ds, w_x, w_y, gamma, lam_q, lam_reg):
    def log_probs(v):
        a = v @ w_x
        b = ds.class_emb @ w_y
        a = a / np.linalg.norm(a, axis=1, keepdims=True)
        b = b / np.linalg.norm(b, axis=1, keepdims=True)
        z = gamma * a @ b.T
        z = z - z.max(axis=1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True))

    lp = log_probs(x)
    l_c = -lp[np.arange(len(y)), y].mean()
    lpu = log_probs(xu)[:, ds.unseen]
    m = lpu.max(axis=1, keepdims=True)
    l_q = -(m[:, 0] + np.log(np.exp(lpu - m).sum(axis=1))).mean()
    reg = (w_x ** 2).sum() + (w_y ** 2).sum()
    return l_c + lam_q * l_q + lam_reg * reg


def test_criterion_4_baseline_equivalence():
    ds = ref_dataset(0)
    w = LossWeights(lambda_q=1.0, lambda_reg=1e-4)
    cfg = TrainConfig(transductive=True, weights=w, seed=0, schedule=MarginSchedule(14, 4, 10))
    tr = Trainer(ds, cfg)
    drawn = []
    take = tr._unl_stream.take
    tr._unl_stream.take = lambda k: drawn.append(take(k)) or drawn[-1]
    rng = np.random.default_rng(0)
    worst = 0.0
    for step in range(100):
        idx = rng.choice(len(ds.train_y), cfg.batch_size, replace=False)
        w_x, w_y = tr.params.w_x.copy(), tr.params.w_y.copy()
        br = tr.step(idx, margin=cfg.schedule.margin_at(step / 10))
        ref = _rules_free_numpy(ds.train_x[idx], ds.train_y[idx], tr.unlabeled[drawn[-1]], ds,
                                w_x, w_y, cfg.gamma, w.lambda_q, w.lambda_reg)
        worst = max(worst, abs(br.total - ref))

    small = TrainConfig(epochs=3, seed=1, weights=LossWeights(lambda_q=1.0), transductive=True)
    m1 = evaluate(ds, train(ds, small).params).as_dict()
    m2 = evaluate(ds, train(ds, small).params).as_dict()
    ok = worst < 1e-7 and m1 == m2
    record(4, "baseline equivalence", ok,
           f"100 steps, max |loss - rules-free objective| {worst:.1e}; repeated-run metrics "
           f"{'bitwise identical' if m1 == m2 else 'DIFFER'}")
    assert ok


# -- 5 ---------------------------------------------------------------------------------

def test_criterion_5_curriculum_vacuity():
    t0 = time.perf_counter()
    ds = ref_dataset(0)
    base_cfg = TrainConfig(epochs=REF_EPOCHS, seed=0)
    vac_cfg = TrainConfig(epochs=REF_EPOCHS, seed=0, schedule=MarginSchedule(50.0, 50.0, 1),
                          weights=LossWeights(lambda_hyp=1.0, lambda_attr=1.0))
    base = evaluate(ds, train(ds, base_cfg).params).mca_t
    res = train(ds, vac_cfg)
    vac = evaluate(ds, res.params).mca_t
    last = res.history[-1].losses
    csnl = last.hypernym + last.attribute
    elapsed = time.perf_counter() - t0
    ok = csnl < 1e-3 and abs(vac - base) <= 0.01 and elapsed < 120
    record(5, "curriculum vacuity", ok,
           f"final csnl {csnl:.1e}, MCA_t {100 * vac:.2f} vs baseline {100 * base:.2f}, "
           f"{elapsed:.1f}s")
    assert ok


# -- 6 ---------------------------------------------------------------------------------

def direction_of_effect_runs():
    arms = {
        "baseline": (LossWeights(), False),
        "hyp": (LossWeights(lambda_hyp=REF_WEIGHTS["lambda_hyp"]), False),
        "hyp+attr": (LossWeights(lambda_hyp=REF_WEIGHTS["lambda_hyp"],
                                 lambda_attr=REF_WEIGHTS["lambda_attr"]), False),
        "baseline_tr": (LossWeights(lambda_q=REF_WEIGHTS["lambda_q"]), True),
        "csnl_tr": (LossWeights(**REF_WEIGHTS), True),
    }
    out = {k: [] for k in arms}
    per_seed = []
    for seed in REF_SEEDS:
        ds = ref_dataset(seed)
        for name, (w, trans) in arms.items():
            cfg = TrainConfig(epochs=REF_EPOCHS, seed=seed, weights=w, transductive=trans,
                              schedule=REF_SCHEDULE)
            r = evaluate(ds, train(ds, cfg).params)
            out[name].append((r.mca_t, r.hm))
        per_seed.append(f"seed {seed}: " + " ".join(
            f"{k} {100 * v[-1][0]:.1f}/{100 * v[-1][1]:.1f}" for k, v in out.items()))
    print("per seed (MCA_t/HM):\n  " + "\n  ".join(per_seed))
    return {k: np.mean(v, axis=0) for k, v in out.items()}


def test_criterion_6_direction_of_effect():
    t0 = time.perf_counter()
    m = direction_of_effect_runs()
    elapsed = time.perf_counter() - t0
    base, hyp, both = m["baseline"][0], m["hyp"][0], m["hyp+attr"][0]
    hm_base, hm_csnl = m["baseline_tr"][1], m["csnl_tr"][1]
    checks = {
        "baseline MCA_t in [0.3, 0.6]": 0.3 <= base <= 0.6,
        "hyp - baseline >= 5 pts": hyp - base >= 0.05,
        "hyp+attr >= hyp": both >= hyp,
        "transductive HM gain >= 5 pts": hm_csnl - hm_base >= 0.05,
        "runtime < 10 min": elapsed < 600,
    }
    failed = [k for k, v in checks.items() if not v]
    fresh = {k: (round(float(v[0]), 4), round(float(v[1]), 4)) for k, v in m.items()}
    if PINNED:
        print("pinned (mca_t, hm):", PINNED)
    print("measured (mca_t, hm):", fresh)
    record(6, "direction of effect", not failed,
           f"MCA_t base {100 * base:.1f} hyp {100 * hyp:.1f} hyp+attr {100 * both:.1f}; "
           f"HM base_tr {100 * hm_base:.1f} csnl_tr {100 * hm_csnl:.1f}; {elapsed:.0f}s"
           + (f"; failed: {'; '.join(failed)}" if failed else ""))
    assert not failed


# -- 7 ---------------------------------------------------------------------------------

def test_criterion_7_metric_exactness():
    labels = np.array([0] * 99 + [1])
    preds = np.zeros(100, dtype=int)
    imbalanced = mca(preds, labels, [0, 1])
    hm = harmonic_mean(0.6, 0.3)
    zeros = (harmonic_mean(0.0, 0.7), harmonic_mean(0.7, 0.0), harmonic_mean(0.0, 0.0))
    ok = (abs(imbalanced - 0.5) < 1e-12 and abs(hm - 0.4) < 1e-12 and zeros == (0.0, 0.0, 0.0))
    record(7, "metric exactness", ok,
           f"imbalanced MCA {imbalanced:.4f} (plain accuracy would be 0.99), HM(0.6,0.3) "
           f"{hm:.15f}, HM with a zero term {zeros}")
    assert ok


# -- 8 ---------------------------------------------------------------------------------

def test_criterion_8_loss_formulas():
    t = nd.Tape()
    bce = losses.bce_with_logits(t.const(0.0), 1).item()
    lp = nd.softmax_log_probs(t.const(np.zeros(10)))
    bias = losses.bias_loss(lp, [3, 7]).item()
    ok = abs(bce - math.log(2)) < 1e-12 and abs(bias + math.log(0.2)) < 1e-12
    record(8, "loss formulas", ok,
           f"bce(0,1) - ln2 = {bce - math.log(2):.1e}, bias_loss(uniform, 2/10) + ln0.2 = "
           f"{bias + math.log(0.2):.1e}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
