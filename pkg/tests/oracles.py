"""Slow, independent reference implementations used as test oracles.

Plain Python loops over lists; nothing here imports package internals.
"""

import math
from fractions import Fraction

# -- descriptors --------------------------------------------------------------


def gray_of(r, g, b):
    # exact rational evaluation, then round half up
    v = Fraction(299, 1000) * r + Fraction(587, 1000) * g + Fraction(114, 1000) * b
    return min(255, max(0, math.floor(v + Fraction(1, 2))))


def lbp(gray):
    h, w = len(gray), len(gray[0])
    order = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]
    out = [[0] * w for _ in range(h)]
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            c = gray[y][x]
            code = 0
            for i, (dy, dx) in enumerate(order):
                if gray[y + dy][x + dx] - c >= 0:
                    code += 2**i
            out[y][x] = code
    return out


def hog_cell_hist(gray, cell, bins):
    h, w = len(gray), len(gray[0])
    ncy, ncx = h // cell, w // cell
    hist = [[[0.0] * bins for _ in range(ncx)] for _ in range(ncy)]
    at = lambda y, x: gray[min(max(y, 0), h - 1)][min(max(x, 0), w - 1)]  # noqa: E731
    bw = 180.0 / bins
    for y in range(ncy * cell):
        for x in range(ncx * cell):
            gx = at(y, x + 1) - at(y, x - 1)
            gy = at(y + 1, x) - at(y - 1, x)
            mag = math.sqrt(gx * gx + gy * gy)
            ang = math.degrees(math.atan2(gy, gx)) % 180.0
            # bin centres at (b + 0.5) * bw, circular
            pos = ang / bw - 0.5
            lo = math.floor(pos)
            frac = pos - lo
            hist[y // cell][x // cell][lo % bins] += mag * (1 - frac)
            hist[y // cell][x // cell][(lo + 1) % bins] += mag * frac
    return hist


def hog_energy(gray, cell=8, bins=9, block=2, stride=1, clip=0.2, eps=1e-6):
    hist = hog_cell_hist(gray, cell, bins)
    ncy, ncx = len(hist), len(hist[0])
    by, bx = min(block, ncy), min(block, ncx)

    def starts(n, b):
        s = list(range(0, n - b + 1, stride))
        if s[-1] != n - b:
            s.append(n - b)
        return s

    total = [[0.0] * ncx for _ in range(ncy)]
    count = [[0] * ncx for _ in range(ncy)]
    for y0 in starts(ncy, by):
        for x0 in starts(ncx, bx):
            cells = [(y, x) for y in range(y0, y0 + by) for x in range(x0, x0 + bx)]
            vec = [v for (y, x) in cells for v in hist[y][x]]
            n = math.sqrt(sum(v * v for v in vec) + eps * eps)
            vec = [min(v / n, clip) for v in vec]
            n = math.sqrt(sum(v * v for v in vec) + eps * eps)
            vec = [v / n for v in vec]
            for k, (y, x) in enumerate(cells):
                total[y][x] += sum(vec[k * bins : (k + 1) * bins])
                count[y][x] += 1
    return [[total[y][x] / count[y][x] for x in range(ncx)] for y in range(ncy)]


# -- text metrics -------------------------------------------------------------


def ngrams(seq, n):
    return [tuple(seq[i : i + n]) for i in range(len(seq) - n + 1)]


def modified_precision(hyp, ref, n):
    grams = ngrams(hyp, n)
    if not grams:
        return None
    ref_grams = ngrams(ref, n)
    clipped = 0
    for g in set(grams):
        clipped += min(grams.count(g), ref_grams.count(g))
    return clipped / len(grams)


def bleu(hyp, ref, n):
    precisions = [modified_precision(hyp, ref, i) for i in range(1, n + 1)]
    precisions = [p for p in precisions if p is not None]
    if any(p == 0 for p in precisions):
        return 0.0
    geo = math.exp(sum(math.log(p) for p in precisions) / len(precisions))
    bp = min(1.0, math.exp(1 - len(ref) / len(hyp)))
    return bp * geo


def lcs_table(a, b):
    t = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                t[i][j] = t[i - 1][j - 1] + 1
            else:
                t[i][j] = max(t[i - 1][j], t[i][j - 1])
    return t[len(a)][len(b)]


def rouge_l(hyp, ref, beta=1.2):
    lcs = lcs_table(hyp, ref)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(hyp), lcs / len(ref)
    return (1 + beta**2) * p * r / (r + beta**2 * p)


def all_alignments(hyp, ref):
    """Every maximal-size one-to-one exact alignment, by exhaustive search."""
    best, found = 0, []

    def rec(i, used, cur):
        nonlocal best, found
        if i == len(hyp):
            if len(cur) > best:
                best, found = len(cur), [list(cur)]
            elif len(cur) == best:
                found.append(list(cur))
            return
        rec(i + 1, used, cur)
        for j in range(len(ref)):
            if j not in used and ref[j] == hyp[i]:
                cur.append((i, j))
                rec(i + 1, used | {j}, cur)
                cur.pop()

    rec(0, frozenset(), [])
    return best, found


def chunks_of(alignment):
    alignment = sorted(alignment)
    chunks = 0
    for k, (i, j) in enumerate(alignment):
        if k == 0 or not (i == alignment[k - 1][0] + 1 and j == alignment[k - 1][1] + 1):
            chunks += 1
    return chunks


def meteor(hyp, ref):
    m, aligns = all_alignments(hyp, ref)
    if m == 0:
        return 0.0
    ch = min(chunks_of(a) for a in aligns)
    p, r = m / len(hyp), m / len(ref)
    fmean = 10 * p * r / (r + 9 * p)
    return fmean * (1 - 0.5 * (ch / m) ** 3)


def brute_iou(a, b):
    """Pixel-count IoU of two (x1, y1, x2, y2) boxes."""
    pa = {(x, y) for x in range(a[0], a[2]) for y in range(a[1], a[3])}
    pb = {(x, y) for x in range(b[0], b[2]) for y in range(b[1], b[3])}
    return len(pa & pb) / len(pa | pb)


# -- softmax / similarity -------------------------------------------------------


def softmax(xs):
    m = max(xs)
    e = [math.exp(x - m) for x in xs]
    s = sum(e)
    return [v / s for v in e]


def cosine(u, v):
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0:
        return -1.0
    return sum(a * b for a, b in zip(u, v)) / (nu * nv)

