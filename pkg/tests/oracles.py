"""Plain-Python reference implementations used as test oracles."""

import math


def psnr_scalar(a, b, peak=1.0):
    """a, b: nested lists H x W x C."""
    total, n = 0.0, 0
    for ra, rb in zip(a, b):
        for pa, pb in zip(ra, rb):
            for va, vb in zip(pa, pb):
                total += (float(va) - float(vb)) ** 2
                n += 1
    mse = total / n
    if mse == 0:
        return 100.0
    return min(100.0, 10 * math.log10(peak * peak / mse))


def luma_scalar(img):
    return [[0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2] for p in row] for row in img]


def gaussian_2d(size=11, sigma=1.5):
    c = (size - 1) / 2
    w = [[math.exp(-((i - c) ** 2 + (j - c) ** 2) / (2 * sigma * sigma)) for j in range(size)]
         for i in range(size)]
    s = sum(map(sum, w))
    return [[v / s for v in row] for row in w]


def ssim_direct(a, b, peak=1.0, size=11, sigma=1.5):
    """Window-by-window SSIM on BT.601 luma with a 2D Gaussian kernel, valid windows only."""
    x, y = luma_scalar(a), luma_scalar(b)
    h, w = len(x), len(x[0])
    k = gaussian_2d(size, sigma)
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            mx = my = sxx = syy = sxy = 0.0
            for di in range(size):
                for dj in range(size):
                    g = k[di][dj]
                    xv, yv = x[i + di][j + dj], y[i + di][j + dj]
                    mx += g * xv
                    my += g * yv
                    sxx += g * xv * xv
                    syy += g * yv * yv
                    sxy += g * xv * yv
            vx, vy, cxy = sxx - mx * mx, syy - my * my, sxy - mx * my
            vals.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return sum(vals) / len(vals)
