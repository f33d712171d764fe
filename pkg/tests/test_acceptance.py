"""Acceptance gate: ten checks, one printed pass/fail line each.

The published clinical figures these properties stand in for were measured on
a private dataset and cannot be reproduced here; every check below is a
property-based substitute on synthetic rasters with exactly known truth.
"""
import json
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from tumorseg import fbb, imgio, ocsvm, phantom, pipeline, preprocess
from tumorseg.cli import main as cli_main


def _report(number, ok, text):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {number}] {status} - {text}", file=sys.__stdout__, flush=True)
    return ok


# ---------------------------------------------------------------- oracles


def _project_box_simplex(v, c):
    lo, hi = v.min() - 1.0 / len(v) - 1.0, v.max()
    for _ in range(80):
        tau = 0.5 * (lo + hi)
        if np.clip(v - tau, 0.0, c).sum() > 1.0:
            lo = tau
        else:
            hi = tau
    return np.clip(v - 0.5 * (lo + hi), 0.0, c)


def _qp_oracle(q, c, iterations=20_000):
    l = q.shape[0]
    step = 1.0 / (float(np.linalg.norm(q, 2)) or 1.0)
    a = _project_box_simplex(np.full(l, 1.0 / l), c)
    for _ in range(iterations):
        a_new = _project_box_simplex(a - step * (q @ a), c)
        if np.abs(a_new - a).max() < 1e-12:
            return a_new
        a = a_new
    return a


def _otsu_oracle(pixels):
    hist = np.bincount(np.clip(np.rint(pixels), 0, 255).astype(int).ravel(), minlength=256)
    total, total_sum = int(hist.sum()), int(np.dot(np.arange(256), hist))
    best_t, best_val, n0, s0 = -1, Fraction(-1), 0, 0
    for t in range(256):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        val = Fraction((s0 * n1 - (total_sum - s0) * n0) ** 2, n0 * n1)
        if val > best_val:
            best_val, best_t = val, t
    return best_t


def _iou(box, r0, r1, c0, c1):
    if box is None:
        return 0.0
    ir = max(0, min(box.row_max, r1) - max(box.row_min, r0) + 1)
    ic = max(0, min(box.col_max, c1) - max(box.col_min, c0) + 1)
    inter = ir * ic
    union = box.height * box.width + (r1 - r0 + 1) * (c1 - c0 + 1) - inter
    return inter / union


# ---------------------------------------------------------------- shared runs


@pytest.fixture(scope="module")
def twenty_phantom_results():
    """Segment the 20 canonical lesion phantoms with 8- and 4-connected smoothing."""
    out = {}
    for nb in (8, 4):
        cfg = pipeline.PipelineConfig(
            diffusion=preprocess.DiffusionParams(neighborhood=nb)
        )
        accs, sis = [], []
        for seed in range(20):
            image, head_truth, lesion_truth = phantom.generate(
                phantom.standard_lesion_spec(seed=seed)
            )
            res = pipeline.segment(image, cfg)
            rep = pipeline.evaluate(res.mask, lesion_truth, head_truth)
            accs.append(rep.accuracy)
            sis.append(rep.si)
        out[nb] = (accs, sis)
    return out


# ---------------------------------------------------------------- criteria


def test_criterion_1_disclosure():
    ok = _report(
        1,
        True,
        "published clinical results are out of desk-scale reach; "
        "property-based substitutes follow (criteria 2-10)",
    )
    assert ok


def test_criterion_2_qp_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    ok = True
    for _ in range(30):
        l = int(rng.integers(1, 13))
        x = rng.normal(size=(l, int(rng.integers(1, 5))))
        gamma = float(rng.uniform(0.1, 3.0))
        nu = float(rng.uniform(0.15, 1.0))
        c = 1.0 / (nu * l)
        q = ocsvm.kernel_matrix(x, x, gamma)
        model = ocsvm.train(x, ocsvm.TrainConfig(nu=nu, gamma=gamma))
        alpha = np.zeros(l)
        rows = {tuple(r): i for i, r in enumerate(map(tuple, x))}
        for a, sv in zip(model.alphas, model.support_vectors):
            alpha[rows[tuple(sv)]] += a
        feasible = (
            abs(alpha.sum() - 1.0) <= 1e-6
            and np.all(alpha >= -1e-9)
            and np.all(alpha <= c + 1e-9)
        )
        ref = _qp_oracle(q, c)
        close = abs(0.5 * alpha @ q @ alpha - 0.5 * ref @ q @ ref) <= 1e-6
        ok = ok and feasible and close
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 5.0
    assert _report(2, ok, f"30 QP instances vs projected-gradient oracle in {elapsed:.2f}s")


def test_criterion_3_hand_solved_fixtures():
    m1 = ocsvm.train(np.array([[0.3, 0.7]]), ocsvm.TrainConfig(nu=0.5, gamma=1.0))
    score, _ = ocsvm.decide(m1, [0.3, 0.7])
    ok = (
        abs(m1.alphas[0] - 1.0) <= 1e-9
        and abs(m1.b - 1.0) <= 1e-9
        and abs(score) <= 1e-9
    )
    m2 = ocsvm.train(np.array([[0.0], [0.1]]), ocsvm.TrainConfig(nu=1.0, gamma=1.0))
    ok = ok and np.allclose(np.sort(m2.alphas), [0.5, 0.5], atol=1e-9)
    assert _report(3, ok, "single-sample and two-sample dual solutions exact to 1e-9")


def test_criterion_4_diffusion_properties():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    const = preprocess.diffuse(
        imgio.GrayImage(np.full((6, 6), 77.0)), preprocess.DiffusionParams(iterations=5)
    )
    ok = np.array_equal(const.pixels, np.full((6, 6), 77.0))

    px = np.zeros((3, 3))
    px[1, 1] = 8.0
    imp = preprocess.diffuse(
        imgio.GrayImage(px), preprocess.DiffusionParams(lam=0.125, k=1e9, iterations=1)
    ).pixels
    want = np.full((3, 3), 1.0)
    want[1, 1] = 0.0
    ok = ok and np.allclose(imp, want, atol=1e-9)

    noise = rng.uniform(0, 255, size=(16, 16))
    cons = preprocess.diffuse(
        imgio.GrayImage(noise), preprocess.DiffusionParams(lam=0.125, k=1e9, iterations=10)
    )
    ok = ok and abs(cons.pixels.sum() - noise.sum()) <= 1e-6 * noise.sum()

    for _ in range(50):
        img = rng.uniform(0, 255, size=(12, 12))
        out = preprocess.diffuse(
            imgio.GrayImage(img), preprocess.DiffusionParams(lam=0.125, iterations=10)
        ).pixels
        ok = ok and out.min() >= img.min() - 1e-12 and out.max() <= img.max() + 1e-12
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 10.0
    assert _report(4, ok, f"fixpoint/impulse/conservation/max principle in {elapsed:.2f}s")


def test_criterion_5_bc_properties():
    rng = np.random.default_rng(5)
    h = fbb._from_counts([4, 0, 9, 2], 4)
    ok = fbb.bhattacharyya(h, h) == 1.0
    p = fbb._from_counts([3, 5, 0, 0], 4)
    q = fbb._from_counts([0, 0, 2, 7], 4)
    ok = ok and fbb.bhattacharyya(p, q) == 0.0
    for _ in range(1000):
        bins = int(rng.integers(2, 32))
        a = rng.integers(0, 100, size=bins)
        b = rng.integers(0, 100, size=bins)
        a[rng.integers(0, bins)] += 1
        b[rng.integers(0, bins)] += 1
        hp, hq = fbb._from_counts(a, bins), fbb._from_counts(b, bins)
        v, w = fbb.bhattacharyya(hp, hq), fbb.bhattacharyya(hq, hp)
        ok = ok and abs(v - w) <= 1e-12 and -1e-12 <= v <= 1.0 + 1e-12
    assert _report(5, ok, "BC identity/disjoint exact; symmetry+bounds on 1000 pairs")


def test_criterion_6_otsu_equivalence():
    rng = np.random.default_rng(6)
    ok = True
    for _ in range(100):
        shape = (int(rng.integers(2, 12)), int(rng.integers(2, 12)))
        levels = int(rng.integers(2, 8))
        px = rng.choice(rng.integers(0, 256, size=levels), size=shape).astype(np.float64)
        if np.ptp(px) == 0:
            px[0, 0] = (px[0, 0] + 1) % 256
        ok = ok and preprocess.otsu_threshold(imgio.GrayImage(px)) == _otsu_oracle(px)
    assert _report(6, ok, "100 random images match the exhaustive exact-fraction maximizer")


def test_criterion_7_fbb_localization():
    start = time.perf_counter()
    hits = 0
    for seed in range(50):
        image, _, lesion_truth = phantom.generate(phantom.standard_lesion_spec(seed=seed))
        head = preprocess.skull_strip(image)
        smoothed = preprocess.diffuse(head.stripped, preprocess.DiffusionParams())
        res = fbb.find_bounding_box(smoothed, head.mask)
        rows, cols = np.nonzero(lesion_truth.bits)
        if res.found and _iou(res.box, rows.min(), rows.max(), cols.min(), cols.max()) >= 0.3:
            hits += 1
    false_pos = 0
    for seed in range(50):
        image, _, _ = phantom.generate(phantom.symmetric_spec(noise_sigma=8.0, seed=seed))
        head = preprocess.skull_strip(image)
        smoothed = preprocess.diffuse(head.stripped, preprocess.DiffusionParams())
        if fbb.find_bounding_box(smoothed, head.mask).found:
            false_pos += 1
    elapsed = time.perf_counter() - start
    ok = hits >= 45 and false_pos == 0 and elapsed < 60.0
    assert _report(
        7,
        ok,
        f"lesion IoU>=0.3 in {hits}/50, symmetric detections {false_pos}/50, {elapsed:.1f}s",
    )


def test_criterion_8_end_to_end(twenty_phantom_results):
    accs, sis = twenty_phantom_results[8]
    mean_acc, mean_si = float(np.mean(accs)), float(np.mean(sis))
    ok = mean_acc >= 0.95 and mean_si >= 0.70
    assert _report(8, ok, f"20 phantoms: mean accuracy {mean_acc:.4f}, mean SI {mean_si:.4f}")


def test_criterion_9_neighborhood_comparison(twenty_phantom_results):
    si8 = float(np.mean(twenty_phantom_results[8][1]))
    si4 = float(np.mean(twenty_phantom_results[4][1]))
    ok = si8 >= si4 - 0.01
    assert _report(9, ok, f"mean SI 8-connected {si8:.4f} vs 4-connected {si4:.4f}")


def test_criterion_10_cli_determinism(tmp_path):
    image, _, lesion_truth = phantom.generate(phantom.standard_lesion_spec(seed=1))
    src = tmp_path / "input.pgm"
    truth = tmp_path / "truth.pgm"
    imgio.write_gray_pgm(image, src)
    imgio.write_mask_pgm(lesion_truth, truth)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"truth": str(truth), "figures": True}))
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        code = cli_main(["segment", "--input", str(src), "--config", str(cfg), "--out", str(d)])
        assert code == 0
    names = sorted(p.name for p in dirs[0].iterdir())
    ok = names == sorted(p.name for p in dirs[1].iterdir())
    for name in names:
        ok = ok and (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
    assert _report(10, ok, f"repeat segment runs byte-identical across {len(names)} outputs")
