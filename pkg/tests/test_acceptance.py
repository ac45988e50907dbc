"""Whole-toolkit acceptance gates.

Each test is one gate and prints a single verdict line; run with
``pytest tests/test_acceptance.py -v -s`` to watch the lines appear.
A failing gate lists the offending checks under its verdict line.
"""

import json
import time
from fractions import Fraction

import numpy as np
from scipy import ndimage

from roikit import (
    BoundingBox,
    ConfusionCounts,
    DenseHead,
    FeatureStack,
    InstanceDetection,
    ScoredSample,
    TverskyParams,
    ap_per_threshold,
    ap_range,
    clopper_pearson,
    consensus_mask,
    crm,
    dice,
    dice_from_iou,
    dor_from_rates,
    f_measure,
    fuse_masks,
    heat_to_mask,
    iou,
    match_instances,
    rasterize_polygons,
    roc_auc,
    tversky_grad,
    tversky_index,
    tversky_loss,
)
from roikit.cli import main
from roikit.fileio import (
    write_boxes_json,
    write_feature_stack,
    write_head_json,
    write_mask_png,
    write_pfm,
)
from roikit.segmetrics import greedy_match_flags

from conftest import as_mask, as_prob, corrupt, phantom
from test_clsmetrics import cp_oracle, mann_whitney_auc
from test_relevance import ablation_oracle
from test_segmetrics import blob, brute_force_match


def _expect(failures: list[str], ok: bool, message: str) -> None:
    if not ok:
        failures.append(message)


def _verdict(num: int, label: str, failures: list[str]) -> None:
    status = "PASS" if not failures else "FAIL"
    print(f"criterion {num:02d} {status}  {label}")
    for line in failures:
        print(f"    {line}")
    assert not failures, f"criterion {num:02d} ({label}): " + "; ".join(failures)


def test_criterion_01_operating_point_f_measure_and_odds_ratio():
    bad = []
    t0 = time.perf_counter()
    f = f_measure(precision=0.9409, sensitivity=0.9163)
    d = dor_from_rates(0.9163, 0.8841)
    elapsed = time.perf_counter() - t0
    _expect(bad, abs(f - 0.9284) <= 5e-4, f"f-measure {f:.6f} not within 0.0005 of 0.9284")
    _expect(bad, abs(d - 83.5085) <= 83.5085 * 1e-3,
            f"odds ratio {d:.6f} not within 0.1% of 83.5085")
    _expect(bad, elapsed < 1.0, f"arithmetic took {elapsed:.3f} s, limit 1 s")
    _verdict(1, "f-measure and odds ratio at a fixed operating point", bad)


def test_criterion_02_second_operating_point_odds_ratio():
    bad = []
    t0 = time.perf_counter()
    d = dor_from_rates(0.9692, 0.8559)
    elapsed = time.perf_counter() - t0
    # 1% slack absorbs the four-digit rounding of the quoted rates
    _expect(bad, abs(d - 186.4375) <= 186.4375 * 1e-2,
            f"odds ratio {d:.6f} not within 1% of 186.4375")
    _expect(bad, elapsed < 1.0, f"arithmetic took {elapsed:.3f} s, limit 1 s")
    _verdict(2, "odds ratio at a second fixed operating point", bad)


# iou, dice value pairs the halved-union transform must reconcile
TRANSFORM_PAIRS = (
    (0.9108, 0.9529),
    (0.9477, 0.9729),
    (0.9493, 0.9738),
    (0.9503, 0.9744),
    (0.9544, 0.9765),
    (0.9532, 0.9759),
    (0.9558, 0.9774),
)


def test_criterion_03_dice_iou_transform_consistency():
    bad = []
    for iou_val, dice_val in TRANSFORM_PAIRS:
        got = dice_from_iou(iou_val)
        _expect(bad, abs(got - dice_val) <= 1e-3,
                f"2*{iou_val}/(1+{iou_val}) = {got:.6f} strays beyond 0.001 of {dice_val}")

    # on integer counts both routes must land exactly on the correctly
    # rounded value of one and the same rational number
    rng = np.random.default_rng(303)
    for _ in range(500):
        tp, fp, fn = (int(v) for v in rng.integers(0, 4000, size=3))
        if tp + fp + fn == 0:
            continue
        c = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=int(rng.integers(1, 4000)))
        d_exact = Fraction(2 * tp, 2 * tp + fp + fn)
        j_exact = Fraction(tp, tp + fp + fn)
        if 2 * j_exact / (1 + j_exact) != d_exact:
            bad.append(f"rational identity broke at counts {tp},{fp},{fn}")
            break
        if dice(c) != float(d_exact) or iou(c) != float(j_exact):
            bad.append(f"float route not correctly rounded at counts {tp},{fp},{fn}")
            break
    _verdict(3, "dice and iou agree through the transform and on counts", bad)


def test_criterion_04_consensus_recovers_rater_rates():
    bad = []
    truth = phantom()
    rng = np.random.default_rng(40404)
    masks = [as_mask(corrupt(truth, 0.95, 0.90, rng)) for _ in range(5)]

    t0 = time.perf_counter()
    result = fuse_masks(masks)
    elapsed = time.perf_counter() - t0

    for i, perf in enumerate(result.performance):
        _expect(bad, abs(perf.sensitivity - 0.95) <= 0.02,
                f"rater {i} sensitivity {perf.sensitivity:.4f} off 0.95 by more than 0.02")
        _expect(bad, abs(perf.specificity - 0.90) <= 0.02,
                f"rater {i} specificity {perf.specificity:.4f} off 0.90 by more than 0.02")
    err = float(np.mean(consensus_mask(result).data != truth))
    _expect(bad, err < 0.02, f"consensus pixel error {err:.4f} not below 2%")
    ll = np.asarray(result.log_likelihood)
    _expect(bad, bool(np.all(np.diff(ll) >= -1e-9)),
            f"log likelihood decreased, worst step {float(np.min(np.diff(ll))):.3e}")
    _expect(bad, result.converged and result.iterations < 100,
            f"no convergence inside 100 iterations (ran {result.iterations})")
    _expect(bad, elapsed < 5.0, f"fusion took {elapsed:.2f} s, limit 5 s")
    _verdict(4, "consensus fusion recovers simulated rater rates", bad)


def test_criterion_05_tversky_identity_gradient_and_worked_case():
    bad = []
    rng = np.random.default_rng(505)

    # balanced weights with zero smoothing reduce to the plain dice ratio,
    # bit for bit, on binary inputs
    half = TverskyParams(alpha=0.5, beta=0.5, smooth=0.0)
    mismatches = 0
    for _ in range(1000):
        pred = (rng.random((9, 9)) < 0.5).astype(float)
        gt = (rng.random((9, 9)) < 0.5).astype(np.uint8)
        if not pred.any() and not gt.any():
            continue
        inter = float((pred * gt).sum())
        dice_val = (2.0 * inter) / (float(pred.sum()) + float(gt.sum()))
        if tversky_index(pred, gt, half) != dice_val:
            mismatches += 1
    _expect(bad, mismatches == 0,
            f"{mismatches} binary instances broke exact equality with the dice ratio")

    # analytic gradient of the loss against a full central-difference sweep
    params = TverskyParams(alpha=0.3, beta=0.7, smooth=1.0)
    step = 1e-5
    worst = 0.0
    for _ in range(100):
        # the margin keeps the difference stencil inside [0, 1]
        pred = rng.uniform(0.05, 0.95, (16, 16))
        gt = (rng.random((16, 16)) < 0.4).astype(np.uint8)
        grad = tversky_grad(pred, gt, params)
        fd = np.zeros_like(pred)
        for i in range(16):
            for j in range(16):
                hi = pred.copy()
                lo = pred.copy()
                hi[i, j] += step
                lo[i, j] -= step
                fd[i, j] = (tversky_loss(hi, gt, params) - tversky_loss(lo, gt, params)) / (2 * step)
        rel = float(np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-300))
        worst = max(worst, rel)
    _expect(bad, worst <= 1e-5,
            f"gradient vs central differences relative error {worst:.3e} above 1e-5")

    # four-pixel worked case at alpha 0.3, beta 0.7
    pred = np.array([[1.0, 1.0], [0.0, 0.0]])
    gt = np.array([[1, 0], [1, 0]], dtype=np.uint8)
    skew = TverskyParams(alpha=0.3, beta=0.7, smooth=0.0)
    _expect(bad, tversky_loss(pred, gt, skew) == 0.5,
            f"worked case loss {tversky_loss(pred, gt, skew)} is not exactly 0.5")
    _verdict(5, "tversky dice identity, gradient check, worked case", bad)


def test_criterion_06_matcher_equals_brute_force_and_half_ap():
    bad = []
    rng = np.random.default_rng(606)
    flag_diffs = count_diffs = 0
    for _ in range(300):
        n_det = int(rng.integers(0, 5))
        n_gt = int(rng.integers(0, 4))
        dets = []
        for _ in range(n_det):
            y, x = rng.integers(0, 10, 2)
            h, w = rng.integers(2, 7, 2)
            dets.append(InstanceDetection(
                region=blob(16, 16, y, min(16, y + h), x, min(16, x + w)),
                score=float(np.round(rng.random(), 2)),
            ))
        gts = []
        for _ in range(n_gt):
            y, x = rng.integers(0, 10, 2)
            h, w = rng.integers(2, 7, 2)
            gts.append(blob(16, 16, y, min(16, y + h), x, min(16, x + w)))
        for thr in (0.3, 0.5, 0.75):
            pairs, oracle_counts = brute_force_match(dets, gts, thr)
            if greedy_match_flags(dets, gts, thr) != pairs:
                flag_diffs += 1
            counts, _ = match_instances(dets, gts, thr)
            if (counts.tp, counts.fp, counts.fn) != (
                    oracle_counts.tp, oracle_counts.fp, oracle_counts.fn):
                count_diffs += 1
    _expect(bad, flag_diffs == 0, f"{flag_diffs} instances disagreed on match flags")
    _expect(bad, count_diffs == 0, f"{count_diffs} instances disagreed on confusion counts")

    # one detection overlapping 70 of a 100-pixel union: matched at the five
    # thresholds up to 0.70, missed above, so the averaged ap is exactly 0.5
    det = InstanceDetection(region=blob(16, 16, 0, 10, 0, 10), score=1.0)
    gt = blob(16, 16, 0, 7, 0, 10)
    per = ap_per_threshold([det], [gt])
    vals = [per[t] for t in sorted(per)]
    _expect(bad, vals == [1.0] * 5 + [0.0] * 5, f"per-threshold ap came out as {vals}")
    _expect(bad, ap_range([det], [gt]) == 0.5,
            f"averaged ap {ap_range([det], [gt])} is not exactly 0.5")
    _verdict(6, "greedy matching equals brute force, half-and-half ap", bad)


def test_criterion_07_binomial_interval_properties_and_oracle():
    bad = []
    for n in (1, 8, 123):
        _expect(bad, clopper_pearson(0, n)[0] == 0.0, f"lower bound at k=0, n={n} is not 0")
        _expect(bad, clopper_pearson(n, n)[1] == 1.0, f"upper bound at k=n={n} is not 1")

    lows = [clopper_pearson(k, 30)[0] for k in range(31)]
    highs = [clopper_pearson(k, 30)[1] for k in range(31)]
    _expect(bad, all(b >= a for a, b in zip(lows, lows[1:])), "lower bounds not monotone in k")
    _expect(bad, all(b >= a for a, b in zip(highs, highs[1:])), "upper bounds not monotone in k")

    cases = []
    for n in (1, 2, 3, 4, 5, 7, 10, 17, 33, 40, 60, 100, 250, 1000):
        for k in sorted({0, 1, n // 4, n // 2, 3 * n // 4, n - 1, n}):
            for conf in (0.9, 0.95, 0.99):
                cases.append((k, n, conf))
    _expect(bad, len(cases) >= 200, f"grid holds only {len(cases)} cases, need 200")
    worst = 0.0
    for k, n, conf in cases:
        low, high = clopper_pearson(k, n, conf)
        o_low, o_high = cp_oracle(k, n, conf)
        worst = max(worst, abs(low - o_low), abs(high - o_high))
    _expect(bad, worst <= 1e-6,
            f"worst disagreement with the quadrature oracle {worst:.3e} above 1e-6")
    _verdict(7, "binomial interval endpoints, monotonicity, oracle agreement", bad)


def test_criterion_08_auc_equals_pairwise_rank_statistic():
    bad = []
    rng = np.random.default_rng(808)
    worst = 0.0
    for _ in range(100):
        n_pos = int(rng.integers(1, 100))
        n_neg = int(rng.integers(1, 201 - n_pos))
        pos = rng.random(n_pos)
        neg = rng.random(n_neg)
        if rng.random() < 0.5:
            # coarse quantization forces heavy ties across both classes
            pos = np.round(pos, 1)
            neg = np.round(neg, 1)
        samples = [ScoredSample(float(s), True) for s in pos]
        samples += [ScoredSample(float(s), False) for s in neg]
        worst = max(worst, abs(roc_auc(samples) - mann_whitney_auc(samples)))
    _expect(bad, worst <= 1e-12, f"worst auc disagreement {worst:.3e} above 1e-12")
    _verdict(8, "trapezoidal auc equals the pairwise rank statistic", bad)


def _heat_fixtures():
    """Hole-free shapes whose polygon round trip has to be pixel exact."""
    rng = np.random.default_rng(909)
    fixtures = []
    a = np.zeros((12, 12))
    a[2:8, 3:9] = 0.9
    b = np.zeros((14, 14))
    b[1:4, 1:4] = 0.8
    b[8:13, 7:12] = 0.95
    b[6, 12] = 0.7  # isolated pixel, below the area gate
    l_shape = np.zeros((10, 10))
    l_shape[1:8, 2:4] = 0.9
    l_shape[6:8, 2:8] = 0.9
    u_shape = np.zeros((12, 12))
    u_shape[2:9, 2:4] = 0.9
    u_shape[2:9, 7:9] = 0.9
    u_shape[7:9, 2:9] = 0.9
    fixtures += [(a, 1), (b, 4), (l_shape, 1), (u_shape, 1)]
    for _ in range(12):
        # towers dropped onto a band: connected, pockets and steps, no holes
        comp = np.zeros((16, 16), dtype=bool)
        comp[10:12, 2:14] = True
        for _ in range(4):
            y = int(rng.integers(2, 11))
            x = int(rng.integers(2, 12))
            w = int(rng.integers(2, 4))
            comp[y:12, x:x + w] = True
        fixtures.append((np.where(comp, 0.85, 0.05), 3))
    return fixtures


def _surviving_components(binary: np.ndarray, min_area: int) -> np.ndarray:
    labels, n = ndimage.label(binary, structure=np.ones((3, 3), dtype=int))
    keep = np.zeros_like(binary, dtype=bool)
    for k in range(1, n + 1):
        comp = labels == k
        if int(comp.sum()) >= min_area:
            keep |= comp
    return keep


def test_criterion_09_relevance_ablation_and_polygon_round_trip():
    bad = []
    rng = np.random.default_rng(999)
    worst = 0.0
    for _ in range(10):
        feats = rng.random((8, 8, 16))
        weights = rng.standard_normal((16, 10))
        bias = rng.standard_normal(10)
        rmap = crm(FeatureStack(feats), DenseHead(weights=weights, bias=bias))
        worst = max(worst, float(np.max(np.abs(rmap.raw - ablation_oracle(feats, weights, bias)))))
    _expect(bad, worst <= 1e-9, f"worst gap to the ablation oracle {worst:.3e} above 1e-9")

    for idx, (heat, min_area) in enumerate(_heat_fixtures()):
        mask, polys = heat_to_mask(as_prob(heat), threshold=0.5, min_area=min_area)
        expected = _surviving_components(heat >= 0.5, min_area)
        if polys:
            raster = rasterize_polygons(polys, heat.shape[1], heat.shape[0]).data.astype(bool)
        else:
            raster = np.zeros(heat.shape, dtype=bool)
        _expect(bad, bool(np.array_equal(raster, expected)),
                f"fixture {idx}: rasterized polygons differ from the thresholded components")
        _expect(bad, bool(np.array_equal(mask.data.astype(bool), expected)),
                f"fixture {idx}: returned mask differs from the thresholded components")
    _verdict(9, "relevance ablation equality, polygon round trip", bad)


# ------------------------------------------------------------ determinism

def _build_cli_corpus(fix):
    rng = np.random.default_rng(1001)
    for i in range(3):
        arr = np.zeros((16, 16), dtype=np.uint8)
        arr[4:12, 4 + (i % 2):12 + (i % 2)] = 1
        write_mask_png(as_mask(arr), str(fix / f"rater{i}.png"))

    pred_dir = fix / "pred"
    gt_dir = fix / "gt"
    pred_dir.mkdir()
    gt_dir.mkdir()
    for i in range(3):
        pred = np.zeros((20, 20))
        pred[3:9, 3:9] = 0.9
        if i == 1:
            pred[12:16, 12:16] = 0.6
        gt = np.zeros((20, 20), dtype=np.uint8)
        gt[3:9, 3:9] = 1
        write_pfm(pred, str(pred_dir / f"img{i}.pfm"))
        write_mask_png(as_mask(gt), str(gt_dir / f"img{i}.png"))

    rows = [("s0", 0.9, "positive"), ("s1", 0.8, "positive"), ("s2", 0.7, "negative"),
            ("s3", 0.6, "positive"), ("s4", 0.4, "positive"), ("s5", 0.3, "negative"),
            ("s6", 0.2, "negative"), ("s7", 0.1, "negative")]
    lines = ["id,score,label"] + [f"{i},{s},{l}" for i, s, l in rows]
    (fix / "scores.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    write_pfm(rng.random((20, 24)), str(fix / "chest.pfm"))
    lung = np.zeros((20, 24), dtype=np.uint8)
    lung[5:15, 6:18] = 1
    write_mask_png(as_mask(lung), str(fix / "lung.png"))
    write_boxes_json([BoundingBox(8, 7, 4, 4)], str(fix / "boxes.json"))

    write_pfm(np.array([[1.0, 1.0], [0.0, 0.0]]), str(fix / "pred4.pfm"))
    write_mask_png(as_mask(np.array([[1, 0], [1, 0]], dtype=np.uint8)), str(fix / "gt4.png"))

    write_feature_stack(rng.random((6, 5, 4)), str(fix / "feats.pfm"))
    write_head_json(rng.random((4, 3)), rng.random(3), str(fix / "head.json"))

    heat = np.zeros((12, 12))
    heat[2:8, 2:8] = 0.9
    write_pfm(heat, str(fix / "heat.pfm"))

    lines = ["image,mask,label,patient,split"]
    for i in range(2):
        img = fix / f"m_img{i}.pfm"
        mask = fix / f"m_mask{i}.png"
        write_pfm(rng.random((10, 10)), str(img))
        write_mask_png(as_mask((rng.random((10, 10)) < 0.5).astype(np.uint8)), str(mask))
        lines.append(f"{img},{mask},positive,p{i},train")
    lines.append(f"{fix / 'absent.pfm'},{fix / 'absent.png'},negative,ptest,test")
    (fix / "train_manifest.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["image,mask,label,patient,split"]
    lines += [f"img{i}.png,m{i}.png,1,p{i:02d},train" for i in range(10)]
    (fix / "split_manifest.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    (fix / "base.csv").write_text(
        "image,mask,label,patient,split\n"
        "a.png,am.png,1,p0,train\n"
        "b.png,bm.png,1,p1,val\n",
        encoding="utf-8",
    )
    (fix / "weak.csv").write_text(
        "image,mask,label,patient,split\nw.png,wm.png,1,wp0,train\n",
        encoding="utf-8",
    )

    rects = [(4, 4, 10, 8), (5, 4, 10, 9), (4, 5, 11, 8)]
    for i, (x, y, w, h) in enumerate(rects):
        meta = {}
        for name, boxes in (("a.png", [(x, y, w, h)]), ("b.png", [(2 + i % 2, 3, 6, 5)])):
            meta[f"{name}-1"] = {
                "filename": name,
                "size": -1,
                "regions": [
                    {
                        "shape_attributes": {
                            "name": "rect", "x": bx, "y": by, "width": bw, "height": bh,
                        },
                        "region_attributes": {},
                    }
                    for bx, by, bw, bh in boxes
                ],
                "file_attributes": {},
            }
        (fix / f"r{i}.json").write_text(json.dumps(meta), encoding="utf-8")


def _command_table(fix, threads):
    def p(name):
        return str(fix / name)

    t = ["--threads", str(threads)]
    return [
        ("fuse", ["fuse", "--masks", p("rater0.png"), p("rater1.png"), p("rater2.png"),
                  "--out", "out/posterior.pfm", "--out-mask", "out/consensus.png",
                  "--out-perf", "out/perf.json", *t]),
        ("eval-seg", ["eval-seg", "--pred-dir", p("pred"), "--gt-dir", p("gt"),
                      "--out", "out/metrics.json", *t]),
        ("eval-cls", ["eval-cls", "--scores", p("scores.csv"), "--out", "out/report.json", *t]),
        ("preprocess", ["preprocess", "--image", p("chest.pfm"), "--lung-mask", p("lung.png"),
                        "--boxes", p("boxes.json"), "--size", "32", "--out", "out/final.pfm",
                        "--out-boxes", "out/boxes_out.json",
                        "--out-transform", "out/transform.json", *t]),
        ("loss", ["loss", "--pred", p("pred4.pfm"), "--gt", p("gt4.png"), "--alpha", "0.3",
                  "--beta", "0.7", "--smooth", "0", "--grad", "out/grad.pfm", *t]),
        ("crm", ["crm", "--features", p("feats.pfm"), "--head", p("head.json"),
                 "--upscale", "16", "12", "--out", "out/crm.pfm", *t]),
        ("heat-to-mask", ["heat-to-mask", "--in", p("heat.pfm"), "--min-area", "4",
                          "--out", "out/hmask.png", "--out-polys", "out/polys.json", *t]),
        ("augment", ["augment", "--manifest", p("train_manifest.csv"), "--repeat", "2",
                     "--out-dir", "out/aug", "--out-manifest", "out/aug.csv",
                     "--seed", "11", *t]),
        ("split", ["split", "--manifest", p("split_manifest.csv"), "--val-frac", "0.2",
                   "--out", "out/split.csv", "--seed", "7", *t]),
        ("assemble-at", ["assemble-at", "--base", p("base.csv"), "--weak", p("weak.csv"),
                         "--out", "out/at.csv", *t]),
        ("via-import", ["via-import", "--in", p("r0.json"), "--out", "out/via_boxes.json", *t]),
        ("consensus", ["consensus", "--via", p("r0.json"), "--via", p("r1.json"),
                       "--via", p("r2.json"), "--width", "24", "--height", "20",
                       "--out-dir", "out/cons", *t]),
        ("boxes-to-mask", ["boxes-to-mask", "--boxes", p("boxes.json"), "--width", "16",
                           "--height", "16", "--out", "out/bmask.png", *t]),
    ]


def _run_all_commands(run_dir, fix, threads, capsys, monkeypatch):
    monkeypatch.chdir(run_dir)
    (run_dir / "out").mkdir()
    transcript = []
    for name, argv in _command_table(fix, threads):
        code = main(argv)
        captured = capsys.readouterr()
        assert code == 0, f"{name} exited {code} at {threads} threads: {captured.err}"
        transcript.append((name, captured.out))
    files = {
        str(path.relative_to(run_dir)): path.read_bytes()
        for path in sorted(run_dir.rglob("*"))
        if path.is_file()
    }
    return transcript, files


def test_criterion_10_cli_byte_determinism(tmp_path, capsys, monkeypatch):
    bad = []
    fix = tmp_path / "fix"
    fix.mkdir()
    _build_cli_corpus(fix)

    # outputs land under a relative directory per run so the payload bytes
    # carry no run-specific paths and must match across runs and threads
    runs = []
    for i, threads in enumerate((1, 1, 8, 8)):
        run_dir = tmp_path / f"run{i}_t{threads}"
        run_dir.mkdir()
        runs.append(_run_all_commands(run_dir, fix, threads, capsys, monkeypatch))

    base_transcript, base_files = runs[0]
    for i, (transcript, files) in enumerate(runs[1:], start=1):
        for (name, out0), (_, out1) in zip(base_transcript, transcript):
            _expect(bad, out0 == out1, f"run {i}: stdout of {name} differs from run 0")
        _expect(bad, sorted(files) == sorted(base_files),
                f"run {i}: output file set differs from run 0")
        for key in sorted(set(files) & set(base_files)):
            _expect(bad, files[key] == base_files[key],
                    f"run {i}: bytes of {key} differ from run 0")
    _verdict(10, "cli byte determinism across repeat runs and thread counts", bad)
