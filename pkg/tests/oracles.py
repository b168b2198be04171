"""Independent reference implementations used to cross-check the library.

Everything here is written the slow, obvious way on plain Python data:
per-pixel loops, per-prefix enumeration, integer confusion counting. None of
it imports the library's metric code, so agreement between the two paths is
evidence, not tautology.
"""

from __future__ import annotations


# ---------------------------------------------------------------- geometry

def point_in_ring(px: float, py: float, ring: list[float]) -> bool:
    """Even-odd crossing test for a single point against one flat ring."""
    n = len(ring) // 2
    inside = False
    for i in range(n):
        x1, y1 = ring[2 * i], ring[2 * i + 1]
        x2, y2 = ring[2 * ((i + 1) % n)], ring[2 * ((i + 1) % n) + 1]
        if y1 == y2:
            continue
        if (y1 > py) != (y2 > py):
            xcross = (x2 - x1) * (py - y1) / (y2 - y1) + x1
            if px < xcross:
                inside = not inside
    return inside


def slow_rasterize(polygons, size):
    """Per-pixel even-odd rasterization; returns a list of rows of bools."""
    h, w = size
    grid = [[False] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            cx, cy = x + 0.5, y + 0.5
            for ring in polygons:
                if point_in_ring(cx, cy, list(ring)):
                    grid[y][x] = True
                    break
    return grid


def slow_window_area(grid, x, y, w, h):
    """Count set pixels of a row-list grid inside a clipped window."""
    gh = len(grid)
    gw = len(grid[0]) if gh else 0
    total = 0
    for yy in range(max(0, y), min(gh, y + h)):
        for xx in range(max(0, x), min(gw, x + w)):
            if grid[yy][xx]:
                total += 1
    return total


def box_iou(a, b):
    """IoU of two (x, y, w, h) tuples; same algebra as the library on purpose."""
    ix = min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0])
    iy = min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1])
    inter = max(0.0, ix) * max(0.0, iy)
    union = a[2] * a[3] + b[2] * b[3] - inter
    if union <= 0.0:
        return 0.0
    return inter / union


# ---------------------------------------------------------------- detection

def greedy_match(gts, dets, iou_threshold, max_per_image=None):
    """Reference matcher on plain tuples.

    Args:
        gts: list of (image_id, gt_id, box).
        dets: list of (image_id, box, score) in input order.
        iou_threshold: minimum IoU for a match.
        max_per_image: optional per-image cap by score rank.

    Returns:
        List of (score, image_id, position, matched_bool) sorted the way the
        curve consumes it: score descending, then image id, then position.
    """
    by_image = {}
    for pos, (image_id, box, score) in enumerate(dets):
        by_image.setdefault(image_id, []).append((pos, box, score))

    outcomes = []
    for image_id in sorted(by_image):
        image_dets = sorted(by_image[image_id], key=lambda t: (-t[2], t[0]))
        if max_per_image is not None:
            image_dets = image_dets[:max_per_image]
        remaining = [(gt_id, box) for (img, gt_id, box) in gts if img == image_id]
        used = set()
        for pos, box, score in image_dets:
            best = None
            best_iou = 0.0
            for gt_id, gt_box in remaining:
                if gt_id in used:
                    continue
                iou = box_iou(box, gt_box)
                if iou > best_iou:
                    best_iou = iou
                    best = gt_id
            if best is not None and best_iou >= iou_threshold:
                used.add(best)
                outcomes.append((score, image_id, pos, True))
            else:
                outcomes.append((score, image_id, pos, False))
    outcomes.sort(key=lambda t: (-t[0], t[1], t[2]))
    return outcomes


def prefix_ap(tp_flags, gt_count):
    """101-point AP by enumerating every prefix at every grid point."""
    if gt_count == 0 or not tp_flags:
        return 0.0
    total = 0.0
    for i in range(101):
        r = i / 100
        best = None
        tp = 0
        for k, flag in enumerate(tp_flags, start=1):
            if flag:
                tp += 1
            recall = tp / gt_count
            precision = tp / k
            if recall >= r and (best is None or precision > best):
                best = precision
        total += best if best is not None else 0.0
    return total / 101


def slow_ap(gts, dets, iou_threshold):
    outcomes = greedy_match(gts, dets, iou_threshold)
    return prefix_ap([m for (_s, _i, _p, m) in outcomes], len(gts))


def slow_ap_range(gts, dets):
    total = 0.0
    for i in range(10):
        total += slow_ap(gts, dets, (50 + 5 * i) / 100)
    return total / 10


def slow_ar_range(gts, dets):
    if not gts:
        return 0.0
    total = 0.0
    for i in range(10):
        outcomes = greedy_match(gts, dets, (50 + 5 * i) / 100, max_per_image=100)
        matched = sum(1 for (_s, _i, _p, m) in outcomes if m)
        total += matched / len(gts)
    return total / 10


# ----------------------------------------------------------- classification

def slow_cls_sweep(scores, labels):
    """(ap, ar) via brute-force 101-threshold sweep with integer counts."""
    n_pos = sum(1 for l in labels if l)
    ap_total = 0.0
    ar_total = 0.0
    for i in range(101):
        tau = i / 100
        tp = fp = 0
        for s, l in zip(scores, labels):
            if s >= tau:
                if l:
                    tp += 1
                else:
                    fp += 1
        if tp + fp > 0:
            ap_total += tp / (tp + fp)
        if n_pos > 0:
            ar_total += tp / n_pos
    return ap_total / 101, ar_total / 101
