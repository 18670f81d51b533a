"""SLIC superpixel clustering: localized 5-D k-means over (l, a, b, x, y).

For grayscale input the chroma channels are identically zero, so centers
carry (l, x, y) only. The search for each center is bounded to a 2S x 2S
window around it, S being the grid step derived from the target cluster
count. Tie-breaking is fixed everywhere (lowest label index, row-major
scan) so the labeling is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .image import to_lightness, validate_image, write_pgm16

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class SlicParams:
    """Tunables for the superpixel clustering."""

    n_segments: int = 50
    compactness: float = 10.0  # color normalizer, on the l in [0,100] scale
    max_iters: int = 10
    conv_eps: float = 0.25  # mean center displacement threshold, pixels

    def __post_init__(self):
        if self.n_segments < 1:
            raise ValueError("n_segments must be >= 1")
        if self.compactness <= 0:
            raise ValueError("compactness must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.conv_eps < 0:
            raise ValueError("conv_eps must be >= 0")


@dataclass
class SuperpixelLabeling:
    """Per-pixel cluster labels plus the converged cluster centers.

    ``centers`` is a (K, 3) float array of (l, x, y); ``labels`` is an int
    array of the image shape with values in [0, K).
    """

    labels: np.ndarray
    centers: np.ndarray
    step: float
    # largest per-axis pixel-to-claiming-center offset seen during assignment;
    # bounded by the 2S search reach (plus window rounding)
    max_assign_offset: float = 0.0

    @property
    def n_labels(self) -> int:
        return len(self.centers)


def step_size(n_pixels: int, k: int) -> float:
    """Grid step S = sqrt(N / K)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n_pixels:
        raise ValueError(f"k={k} exceeds pixel count {n_pixels}")
    return float(np.sqrt(n_pixels / k))


def distance(
    center: np.ndarray,
    point: np.ndarray,
    color_norm: float,
    spatial_norm: float,
) -> float:
    """Combined color/spatial distance between two (l, a, b, x, y) points.

    D' = sqrt((d_c / color_norm)^2 + (d_s / spatial_norm)^2) with d_c the
    Euclidean distance in Lab and d_s the Euclidean distance in the plane.
    """
    if color_norm <= 0 or spatial_norm <= 0:
        raise ValueError("normalizers must be > 0")
    c = np.asarray(center, dtype=np.float64)
    p = np.asarray(point, dtype=np.float64)
    dc = np.sqrt(np.sum((c[:3] - p[:3]) ** 2))
    ds = np.sqrt(np.sum((c[3:5] - p[3:5]) ** 2))
    return float(np.sqrt((dc / color_norm) ** 2 + (ds / spatial_norm) ** 2))


def _gradient_map(l_plane: np.ndarray) -> np.ndarray:
    # (l(x+1,y)-l(x-1,y))^2 + (l(x,y+1)-l(x,y-1))^2 with clamped sampling
    right = l_plane[:, np.minimum(np.arange(l_plane.shape[1]) + 1, l_plane.shape[1] - 1)]
    left = l_plane[:, np.maximum(np.arange(l_plane.shape[1]) - 1, 0)]
    down = l_plane[np.minimum(np.arange(l_plane.shape[0]) + 1, l_plane.shape[0] - 1), :]
    up = l_plane[np.maximum(np.arange(l_plane.shape[0]) - 1, 0), :]
    return (right - left) ** 2 + (down - up) ** 2


def seed_grid(l_plane: np.ndarray, step: float) -> np.ndarray:
    """Regular-grid seeds, each nudged to the lowest-gradient pixel in its
    3x3 neighborhood (ties keep the first in row-major scan order).

    Returns a (K, 3) array of (l, x, y).
    """
    if step < 1:
        raise ValueError("step must be >= 1")
    h, w = l_plane.shape
    spacing = max(1, round(step))
    offset = round(step / 2)
    grad = _gradient_map(l_plane)
    centers = []
    for y in range(min(offset, h - 1), h, spacing):
        for x in range(min(offset, w - 1), w, spacing):
            best = (grad[y, x], 0)  # (gradient, scan rank); rank 0 = original
            bx, by = x, y
            rank = 0
            for ny in range(max(0, y - 1), min(h, y + 2)):
                for nx in range(max(0, x - 1), min(w, x + 2)):
                    rank += 1
                    if grad[ny, nx] < best[0]:
                        best = (grad[ny, nx], rank)
                        bx, by = nx, ny
            centers.append((l_plane[by, bx], float(bx), float(by)))
    return np.array(centers, dtype=np.float64)


def slic(
    img: np.ndarray,
    params: SlicParams | None = None,
    enforce: bool = True,
) -> SuperpixelLabeling:
    """Cluster the image into superpixels and enforce label connectivity.

    ``enforce=False`` returns the raw converged assignment, where every pixel
    is within the 2S x 2S search window of its center but labels may still be
    fragmented.
    """
    img = validate_image(img)
    params = params or SlicParams()
    h, w = img.shape
    s = step_size(h * w, params.n_segments)
    l_plane = to_lightness(img)
    centers = seed_grid(l_plane, max(1.0, s))

    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    labels = np.full((h, w), -1, dtype=np.int32)
    reach = 2.0 * s  # search half-width per center
    max_offset = 0.0

    for _ in range(params.max_iters):
        dist = np.full((h, w), np.inf)
        labels.fill(-1)
        for idx in range(len(centers)):
            cl, cx, cy = centers[idx]
            x0 = max(0, int(np.floor(cx - reach)))
            x1 = min(w, int(np.ceil(cx + reach)) + 1)
            y0 = max(0, int(np.floor(cy - reach)))
            y1 = min(h, int(np.ceil(cy + reach)) + 1)
            win_l = l_plane[y0:y1, x0:x1]
            dc2 = ((win_l - cl) / params.compactness) ** 2
            ds2 = ((xs[y0:y1, x0:x1] - cx) ** 2 + (ys[y0:y1, x0:x1] - cy) ** 2) / (s * s)
            d2 = dc2 + ds2
            better = d2 < dist[y0:y1, x0:x1]  # strict: earlier index wins ties
            dist[y0:y1, x0:x1][better] = d2[better]
            labels[y0:y1, x0:x1][better] = idx

        # A pixel can fall outside every 2S window once centers drift; give it
        # to the spatially nearest center so the partition invariant holds.
        claimed = labels >= 0
        if claimed.any():
            cc = centers[labels[claimed]]
            off = np.maximum(
                np.abs(xs[claimed] - cc[:, 1]), np.abs(ys[claimed] - cc[:, 2])
            ).max()
            max_offset = max(max_offset, float(off))
        orphan = labels < 0
        if orphan.any():
            ox, oy = xs[orphan], ys[orphan]
            d = (ox[:, None] - centers[None, :, 1]) ** 2 + (oy[:, None] - centers[None, :, 2]) ** 2
            labels[orphan] = np.argmin(d, axis=1)

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=len(centers)).astype(np.float64)
        sum_l = np.bincount(flat, weights=l_plane.ravel(), minlength=len(centers))
        sum_x = np.bincount(flat, weights=xs.ravel(), minlength=len(centers))
        sum_y = np.bincount(flat, weights=ys.ravel(), minlength=len(centers))
        nonempty = counts > 0
        new_centers = centers.copy()  # empty clusters keep their coordinates
        new_centers[nonempty, 0] = sum_l[nonempty] / counts[nonempty]
        new_centers[nonempty, 1] = sum_x[nonempty] / counts[nonempty]
        new_centers[nonempty, 2] = sum_y[nonempty] / counts[nonempty]
        disp = np.sqrt(
            (new_centers[nonempty, 1] - centers[nonempty, 1]) ** 2
            + (new_centers[nonempty, 2] - centers[nonempty, 2]) ** 2
        )
        centers = new_centers
        if disp.size == 0 or float(disp.mean()) <= params.conv_eps:
            break

    labels = _drop_empty(labels)
    if enforce:
        labels = _enforce_connectivity(labels, min_size=round(s) ** 2 // 4)
    centers = _recompute_centers(labels, l_plane, xs, ys)
    return SuperpixelLabeling(
        labels=labels, centers=centers, step=s, max_assign_offset=max_offset
    )


def _drop_empty(labels: np.ndarray) -> np.ndarray:
    present = np.unique(labels)
    lut = np.full(present.max() + 1, -1, dtype=np.int32)
    lut[present] = np.arange(len(present), dtype=np.int32)
    return lut[labels]


def _components(labels: np.ndarray) -> tuple[np.ndarray, int]:
    # Unique id per (label, 4-connected component) pair, ids in scan order.
    comp = np.full(labels.shape, -1, dtype=np.int32)
    next_id = 0
    for lab in np.unique(labels):
        cc, n = ndimage.label(labels == lab, structure=_FOUR_CONNECTED)
        comp[cc > 0] = cc[cc > 0] + next_id - 1
        next_id += n
    return comp, next_id


def _enforce_connectivity(labels: np.ndarray, min_size: int) -> np.ndarray:
    """Make every label's pixel set one 4-connected component.

    Per original label, the largest component keeps the label; smaller
    components below ``min_size`` are absorbed into the adjacent kept region
    with the largest area, and larger stray components become new labels
    appended after the existing ones.
    """
    comp, n_comp = _components(labels)
    sizes = np.bincount(comp.ravel(), minlength=n_comp)
    comp_label = np.full(n_comp, -1, dtype=np.int64)
    # first pixel of each component, for deterministic ordering
    order = np.full(n_comp, -1, dtype=np.int64)
    flat_comp = comp.ravel()
    seen_pos = np.full(n_comp, False)
    for pos, cid in enumerate(flat_comp):
        if not seen_pos[cid]:
            seen_pos[cid] = True
            order[cid] = pos
    for pos, cid in enumerate(flat_comp):
        if comp_label[cid] < 0:
            comp_label[cid] = labels.ravel()[pos]

    next_label = int(labels.max()) + 1
    final = np.full(n_comp, -1, dtype=np.int64)  # -1 = pending merge
    for lab in range(int(labels.max()) + 1):
        cids = np.nonzero(comp_label == lab)[0]
        if len(cids) == 0:
            continue
        # largest first, ties by scan order of the first pixel
        cids = sorted(cids, key=lambda c: (-sizes[c], order[c]))
        final[cids[0]] = lab
        for cid in cids[1:]:
            if sizes[cid] >= min_size:
                final[cid] = next_label
                next_label += 1

    out = final[comp]
    pending = [int(c) for c in np.nonzero(final < 0)[0]]
    pending.sort(key=lambda c: order[c])
    h, w = labels.shape
    while pending:
        progressed = False
        deferred = []
        for cid in pending:
            mask = comp == cid
            dil = ndimage.binary_dilation(mask, structure=_FOUR_CONNECTED) & ~mask
            neigh = out[dil]
            neigh = neigh[neigh >= 0]
            if neigh.size == 0:
                deferred.append(cid)
                continue
            cand, cnts = np.unique(neigh, return_counts=True)
            areas = np.array([(out == c).sum() for c in cand])
            best = cand[np.lexsort((cand, -areas))[0]]
            out[mask] = best
            progressed = True
        if deferred and not progressed:
            # isolated group of small fragments: promote the first
            cid = deferred.pop(0)
            out[comp == cid] = next_label
            next_label += 1
        pending = deferred
    return _drop_empty(out.astype(np.int32))


def _recompute_centers(labels, l_plane, xs, ys) -> np.ndarray:
    flat = labels.ravel()
    k = int(labels.max()) + 1
    counts = np.bincount(flat, minlength=k).astype(np.float64)
    sum_l = np.bincount(flat, weights=l_plane.ravel(), minlength=k)
    sum_x = np.bincount(flat, weights=xs.ravel(), minlength=k)
    sum_y = np.bincount(flat, weights=ys.ravel(), minlength=k)
    return np.stack([sum_l / counts, sum_x / counts, sum_y / counts], axis=1)


def adjacency(labeling: SuperpixelLabeling | np.ndarray) -> dict[int, set[int]]:
    """Symmetric, irreflexive 4-neighbor relation over superpixel labels."""
    labels = labeling.labels if isinstance(labeling, SuperpixelLabeling) else labeling
    k = int(labels.max()) + 1
    neigh: dict[int, set[int]] = {i: set() for i in range(k)}
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        for u, v in zip(a[diff].ravel(), b[diff].ravel()):
            neigh[int(u)].add(int(v))
            neigh[int(v)].add(int(u))
    return neigh


def export_labeling(labeling: SuperpixelLabeling) -> tuple[bytes, str]:
    """Label map as 16-bit P5 bytes plus a 'index l x y' sidecar text."""
    if labeling.n_labels > 65536:
        raise ValueError("too many labels for a 16-bit raster")
    raster = write_pgm16(labeling.labels.astype(np.uint16))
    lines = [
        f"{i} {c[0]:.6f} {c[1]:.6f} {c[2]:.6f}" for i, c in enumerate(labeling.centers)
    ]
    return raster, "\n".join(lines) + "\n"
