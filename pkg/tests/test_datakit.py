import math

import numpy as np
import pytest

from sketchmon.datakit.augment import AugmentPlacementError, augment
from sketchmon.datakit.evaluate import evaluate
from sketchmon.datakit.gt import ground_truth_boxes
from sketchmon.datakit.schema import AnnotatedSession, Annotation, load_session, read_manifest, save_session, write_manifest
from sketchmon.datakit.split import SplitSpec, split
from sketchmon.datakit.synth import TOY_RENDER, clean_session, glyph_session, overfit_dataset
from sketchmon.detector.boxes import iou
from sketchmon.detector.types import Category, DetectionBox
from sketchmon.strokes import Point, RenderConfig, Stroke, StrokeKind


def mk_stroke(points, sid=0, t=0, kind=StrokeKind.DRAW):
    return Stroke(sid, kind, t, tuple(Point(x, y) for x, y in points))


def session_with(strokes, annotations, phrase="bee", sid="s1"):
    s = AnnotatedSession(sid, phrase, strokes, annotations)
    s.validate()
    return s


# -- schema ----------------------------------------------------------------------

def test_session_roundtrip(tmp_path):
    s = session_with(
        [mk_stroke([(1, 2), (3, 4)], sid=0), mk_stroke([(9, 9)], sid=1)],
        [Annotation((0,), Category.TEXT)],
    )
    path = tmp_path / "s1.json"
    save_session(s, path)
    back = load_session(path)
    assert back.session_id == "s1" and back.phrase == "bee"
    assert back.annotations == [Annotation((0,), Category.TEXT)]
    assert len(back.strokes) == 2


def test_session_validation_rejects_bad_annotations():
    with pytest.raises(ValueError):
        session_with([mk_stroke([(0, 0)], sid=0)], [Annotation((5,), Category.TEXT)])
    with pytest.raises(ValueError):
        session_with(
            [mk_stroke([(0, 0)], sid=0, kind=StrokeKind.ERASE)],
            [Annotation((0,), Category.TEXT)],
        )
    with pytest.raises(ValueError):
        session_with(
            [mk_stroke([(0, 0)], sid=0)],
            [Annotation((0,), Category.TEXT), Annotation((0,), Category.ICON)],
        )


def test_manifest_roundtrip(tmp_path):
    entries = [
        {"path": "a.json", "phrase": "bee", "has_annotations": True, "split": "train"},
        {"path": "b.json", "phrase": "cat", "has_annotations": False, "split": "test"},
    ]
    path = tmp_path / "manifest.jsonl"
    write_manifest(entries, path)
    assert read_manifest(path) == entries


# -- ground-truth boxes ------------------------------------------------------------

def test_gt_box_single_dot():
    s = session_with([mk_stroke([(50, 50)], sid=0)], [Annotation((0,), Category.ICON)])
    (box,) = ground_truth_boxes(s, RenderConfig(draw_thickness=4.0))
    assert (box.cx, box.cy, box.w, box.h) == (50.0, 50.0, 4.0, 4.0)
    assert box.confidence == 1.0


def test_gt_two_disjoint_annotations():
    s = session_with(
        [mk_stroke([(10, 10)], sid=0), mk_stroke([(100, 100)], sid=1)],
        [Annotation((0,), Category.TEXT), Annotation((1,), Category.CIRCLE)],
    )
    boxes = ground_truth_boxes(s)
    assert len(boxes) == 2
    assert boxes[0].category is Category.TEXT and boxes[1].category is Category.CIRCLE


def test_gt_box_unaffected_by_later_erasure():
    strokes = [
        mk_stroke([(20, 20), (40, 20)], sid=0, t=0),
        mk_stroke([(20, 20), (40, 20)], sid=1, t=1, kind=StrokeKind.ERASE),
        mk_stroke([(60, 20), (80, 20)], sid=2, t=2),
    ]
    s = session_with(strokes, [Annotation((0, 2), Category.TEXT)])
    (box,) = ground_truth_boxes(s, RenderConfig(draw_thickness=4.0))
    # covers both annotated draw strokes, erasure notwithstanding
    assert box.corners() == (18.0, 18.0, 82.0, 22.0)


# -- split --------------------------------------------------------------------------

def make_sessions(phrase, n, annotated):
    out = []
    for i in range(n):
        ann = [Annotation((0,), Category.TEXT)] if annotated else []
        out.append(
            session_with([mk_stroke([(5, 5)], sid=0)], ann, phrase=phrase, sid=f"{phrase}-{annotated}-{i}")
        )
    return out


def test_split_twenty_sessions_one_phrase():
    sessions = make_sessions("bee", 20, True)
    parts = split(sessions, SplitSpec(seed=0))
    assert (len(parts["train"]), len(parts["val"]), len(parts["test"])) == (14, 3, 3)


def test_split_single_session_goes_to_train():
    parts = split(make_sessions("cat", 1, False), SplitSpec(seed=0))
    assert len(parts["train"]) == 1 and not parts["val"] and not parts["test"]


def test_split_deterministic_and_partition():
    sessions = make_sessions("bee", 13, True) + make_sessions("bee", 7, False) + make_sessions("cat", 9, True)
    a = split(sessions, SplitSpec(seed=42))
    b = split(sessions, SplitSpec(seed=42))
    ids = lambda part: [s.session_id for s in part]
    assert {k: ids(v) for k, v in a.items()} == {k: ids(v) for k, v in b.items()}
    all_ids = sorted(ids(a["train"]) + ids(a["val"]) + ids(a["test"]))
    assert all_ids == sorted(s.session_id for s in sessions)


def test_split_groups_annotated_and_clean_separately():
    sessions = make_sessions("bee", 20, True) + make_sessions("bee", 10, False)
    parts = split(sessions, SplitSpec(seed=1))
    annotated_train = [s for s in parts["train"] if s.has_annotations]
    clean_train = [s for s in parts["train"] if not s.has_annotations]
    # 20 annotated -> 14/3/3; 10 clean -> floors 7/1/1 plus remainder to train
    assert len(annotated_train) == 14 and len(clean_train) == 8


def test_split_rejects_bad_ratios():
    with pytest.raises(ValueError):
        SplitSpec(ratios=(0.5, 0.2, 0.2))


# -- evaluate ----------------------------------------------------------------------

def box(cx, cy, w=4.0, h=4.0, cat=Category.TEXT, conf=1.0):
    return DetectionBox(cx, cy, w, h, cat, conf)


def test_evaluate_single_match():
    gt = {"img": [box(10, 10)]}
    pred = {"img": [box(11, 10, conf=0.9)]}  # IoU 0.6
    report = evaluate(pred, gt)
    assert report.mean_ap == 1.0 and report.mean_ar == 1.0


def test_evaluate_below_threshold_is_miss():
    gt = {"img": [box(10, 10)]}
    pred = {"img": [box(12.2, 10, conf=0.9)]}  # IoU ~0.29
    report = evaluate(pred, gt)
    assert report.mean_ap == 0.0
    assert report.per_category[Category.TEXT].fn == 1


def test_evaluate_identity_is_exactly_one():
    rng = np.random.default_rng(0)
    gts = {}
    for img in range(7):
        boxes = []
        for j in range(int(rng.integers(1, 5))):
            cat = list(Category)[int(rng.integers(0, 4))]
            boxes.append(box(float(rng.uniform(10, 500)), float(rng.uniform(10, 500)), 8, 6, cat))
        gts[f"img{img}"] = boxes
    report = evaluate(gts, gts)
    assert report.mean_ap == 1.0 and report.mean_ar == 1.0


def test_evaluate_five_box_fixture():
    # flags by confidence order: TP FP TP FP TP over 3 gts
    # precisions at TPs: 1, 2/3, 3/5 -> AP = (1 + 2/3 + 3/5)/3 = 34/45
    gt = {"a": [box(10, 10), box(30, 30)], "b": [box(50, 50)]}
    pred = {
        "a": [box(10, 10, conf=0.9), box(100, 100, conf=0.8), box(30, 30, conf=0.7)],
        "b": [box(90, 90, conf=0.6), box(50, 50, conf=0.5)],
    }
    report = evaluate(pred, gt)
    assert report.per_category[Category.TEXT].ap == pytest.approx(34 / 45, abs=1e-9)
    s = report.per_category[Category.TEXT]
    assert (s.tp, s.fp, s.fn) == (3, 2, 0)


def test_evaluate_shuffle_invariant():
    rng = np.random.default_rng(5)
    gt = {"a": [box(10, 10), box(30, 30, cat=Category.CIRCLE)], "b": [box(50, 50)]}
    preds = [
        ("a", box(10, 11, conf=0.8)),
        ("a", box(31, 30, cat=Category.CIRCLE, conf=0.8)),
        ("a", box(70, 70, conf=0.4)),
        ("b", box(50, 50, conf=0.6)),
        ("b", box(49, 50, conf=0.6)),
    ]
    def build(order):
        out = {"a": [], "b": []}
        for img, b in order:
            out[img].append(b)
        return out
    base = evaluate(build(preds), gt).to_obj()
    for _ in range(10):
        shuffled = list(preds)
        rng.shuffle(shuffled)
        assert evaluate(build(shuffled), gt).to_obj() == base


def reference_scorer(pred, gt, thresh=0.5):
    """Naive all-point AP for a single category, written independently."""
    items = sorted(
        ((img, b) for img, boxes in pred.items() for b in boxes),
        key=lambda ib: (-ib[1].confidence, ib[0], ib[1].cx, ib[1].cy, ib[1].w, ib[1].h),
    )
    used = {img: [False] * len(boxes) for img, boxes in gt.items()}
    flags = []
    for img, b in items:
        best_iou, best_j = 0.0, -1
        for j, g in enumerate(gt.get(img, [])):
            if used[img][j]:
                continue
            v = iou((b.cx, b.cy, b.w, b.h), (g.cx, g.cy, g.w, g.h))
            if v > best_iou:
                best_iou, best_j = v, j
        ok = best_j >= 0 and best_iou >= thresh
        if ok:
            used[img][best_j] = True
        flags.append(ok)
    n_gt = sum(len(v) for v in gt.values())
    points = []
    tp = 0
    for k, f in enumerate(flags):
        tp += f
        points.append((tp / n_gt, tp / (k + 1)))
    ap = 0.0
    prev_r = 0.0
    for r, _ in points:
        if r > prev_r:
            p_at = max(p for rr, p in points if rr >= r)
            ap += (r - prev_r) * p_at
            prev_r = r
    return ap


def test_evaluate_matches_reference_scorer_randomized():
    rng = np.random.default_rng(8)
    for _ in range(50):
        gt, pred = {}, {}
        for img in ("a", "b"):
            gt[img] = [box(float(rng.uniform(5, 90)), float(rng.uniform(5, 90)), 8, 8) for _ in range(rng.integers(1, 4))]
            pred[img] = [
                box(float(rng.uniform(5, 90)), float(rng.uniform(5, 90)), 8, 8, conf=float(rng.uniform(0.1, 1)))
                for _ in range(rng.integers(0, 5))
            ]
        got = evaluate(pred, gt).per_category[Category.TEXT].ap
        assert got == pytest.approx(reference_scorer(pred, gt), abs=1e-9)


def test_evaluate_max_dets_caps_recall():
    gt = {"a": [box(10, 10), box(30, 30)]}
    pred = {"a": [box(10, 10, conf=0.9), box(30, 30, conf=0.8)]}
    report = evaluate(pred, gt, max_dets=1)
    assert report.per_category[Category.TEXT].ar == pytest.approx(0.5)
    assert report.per_category[Category.TEXT].ap == 1.0


def test_evaluate_11pt_option():
    gt = {"a": [box(10, 10), box(30, 30)], "b": [box(50, 50)]}
    pred = {
        "a": [box(10, 10, conf=0.9), box(100, 100, conf=0.8), box(30, 30, conf=0.7)],
        "b": [box(90, 90, conf=0.6), box(50, 50, conf=0.5)],
    }
    # recalls 1/3, 2/3, 1 with interpolated precisions 1, 2/3, 3/5
    want = (4 * 1.0 + 3 * (2 / 3) + 4 * (3 / 5)) / 11
    report = evaluate(pred, gt, interpolation="11pt")
    assert report.per_category[Category.TEXT].ap == pytest.approx(want, abs=1e-9)


# -- augment -----------------------------------------------------------------------

def donor_and_clean():
    donor = glyph_session("circle", seed=21, phrase="bee")
    clean = clean_session(seed=22, phrase="bee")
    return donor, clean


def test_augment_zero_rotation_preserves_shape():
    donor, clean = donor_and_clean()
    out = augment([clean], [donor], seed=5, render_cfg=TOY_RENDER, angle=0.0)
    new = out.strokes[len(clean.strokes):]
    donor_pts = [(p.x, p.y) for s in donor.strokes for p in s.points]
    new_pts = [(p.x, p.y) for s in new for p in s.points]
    dx = new_pts[0][0] - donor_pts[0][0]
    dy = new_pts[0][1] - donor_pts[0][1]
    for (x0, y0), (x1, y1) in zip(donor_pts, new_pts):
        assert x1 - x0 == pytest.approx(dx, abs=1e-9)
        assert y1 - y0 == pytest.approx(dy, abs=1e-9)


def test_augment_preserves_pairwise_distances():
    donor, clean = donor_and_clean()
    out = augment([clean], [donor], seed=9, render_cfg=TOY_RENDER)
    new = out.strokes[len(clean.strokes):]
    donor_pts = [(p.x, p.y) for s in donor.strokes for p in s.points]
    new_pts = [(p.x, p.y) for s in new for p in s.points]
    assert len(donor_pts) == len(new_pts)
    for i in range(0, len(donor_pts), 3):
        for j in range(i + 1, len(donor_pts), 5):
            d0 = math.dist(donor_pts[i], donor_pts[j])
            d1 = math.dist(new_pts[i], new_pts[j])
            assert d1 == pytest.approx(d0, abs=1e-6)


def test_augment_inserted_bbox_disjoint_from_existing():
    donor, _ = donor_and_clean()
    for seed in range(10):
        clean = clean_session(seed=100 + seed, phrase="bee")
        out = augment([clean], [donor], seed=seed, render_cfg=TOY_RENDER)
        from sketchmon.strokes import stroke_bbox

        new = out.strokes[len(clean.strokes):]
        nb = stroke_bbox(new, TOY_RENDER.draw_thickness, TOY_RENDER.width, TOY_RENDER.height)
        for s in clean.strokes:
            eb = stroke_bbox([s], TOY_RENDER.draw_thickness, TOY_RENDER.width, TOY_RENDER.height)
            overlap_w = min(nb[2], eb[2]) - max(nb[0], eb[0])
            overlap_h = min(nb[3], eb[3]) - max(nb[1], eb[1])
            assert overlap_w <= 1e-9 or overlap_h <= 1e-9


def test_augment_carries_annotation_category():
    donor, clean = donor_and_clean()
    out = augment([clean], [donor], seed=3, render_cfg=TOY_RENDER)
    assert len(out.annotations) == 1
    assert out.annotations[0].category is Category.CIRCLE
    out.validate()


def test_augment_deterministic_under_seed():
    donor, clean = donor_and_clean()
    a = augment([clean], [donor], seed=7, render_cfg=TOY_RENDER)
    b = augment([clean], [donor], seed=7, render_cfg=TOY_RENDER)
    assert a.to_obj() == b.to_obj()


def test_augment_fails_when_canvas_full():
    donor, _ = donor_and_clean()
    # a draw stroke spanning the whole canvas leaves no disjoint placement
    full = session_with(
        [mk_stroke([(0, 0), (63, 63)], sid=0)], [], phrase="bee", sid="full"
    )
    with pytest.raises(AugmentPlacementError):
        augment([full], [donor], seed=1, render_cfg=TOY_RENDER)


def test_augment_requires_matching_phrase():
    donor = glyph_session("circle", seed=21, phrase="bee")
    clean = clean_session(seed=22, phrase="wasp")
    with pytest.raises(ValueError):
        augment([clean], [donor], seed=0, render_cfg=TOY_RENDER)


def test_overfit_dataset_shape():
    sessions = overfit_dataset(seed=1, count=6)
    assert len(sessions) == 6
    assert all(s.has_annotations for s in sessions)
    cats = {s.annotations[0].category for s in sessions}
    assert cats <= {Category.TEXT, Category.CIRCLE, Category.ICON}


def test_annotation_subcategory_roundtrip(tmp_path):
    s = session_with(
        [mk_stroke([(1, 2), (3, 4)], sid=0)],
        [Annotation((0,), Category.ICON, subcategory="arrow")],
    )
    path = tmp_path / "sub.json"
    save_session(s, path)
    back = load_session(path)
    assert back.annotations[0].subcategory == "arrow"
    assert back.annotations[0].category is Category.ICON


def test_annotated_session_from_game_record():
    from sketchmon.gamecore import GameSession
    from sketchmon.datakit.schema import AnnotatedSession

    game = GameSession("g1", "alice", "bob", "bee", auto_confirm=True)
    game.activate(0.0)
    game.add_stroke("alice", mk_stroke([(5, 5), (9, 9)], sid=0), 1.0)
    game.add_stroke("alice", mk_stroke([(20, 20)], sid=1, t=50), 2.0)
    game.submit_guess("bob", "bee", 3.0)
    record = game.to_record()
    ds = AnnotatedSession.from_game_record(record, [Annotation((1,), Category.TEXT)])
    assert ds.phrase == "bee"
    assert [s.stroke_id for s in ds.strokes] == [0, 1]
    assert ds.has_annotations
