"""Brute-force reference implementations used to validate the fast paths.

Everything here is written as plain loops straight from the definitions,
independent of the vectorized code under test.
"""

import numpy as np

NEIGHBORS_26 = [(dx, dy, dz)
                for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
                if (dx, dy, dz) != (0, 0, 0)]


def glcm_matrix(dense, levels, offset):
    """Symmetric normalized co-occurrence counts by explicit pair loops."""
    nx, ny, nz = dense.shape
    counts = np.zeros((levels, levels))
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if dense[x, y, z] == 0:
                    continue
                u, v, w = x + offset[0], y + offset[1], z + offset[2]
                if not (0 <= u < nx and 0 <= v < ny and 0 <= w < nz):
                    continue
                if dense[u, v, w] == 0:
                    continue
                i, j = dense[x, y, z] - 1, dense[u, v, w] - 1
                counts[i, j] += 1
                counts[j, i] += 1
    total = counts.sum()
    return counts / total if total else counts


def glcm_features(p):
    levels = p.shape[0]
    autocorr = contrast = energy = entropy = homog = 0.0
    mu = sig = 0.0
    px = p.sum(axis=1)
    for i in range(levels):
        mu += (i + 1) * px[i]
    for i in range(levels):
        sig += ((i + 1) - mu) ** 2 * px[i]
    for i in range(levels):
        for j in range(levels):
            v = p[i, j]
            autocorr += (i + 1) * (j + 1) * v
            contrast += (i - j) ** 2 * v
            energy += v * v
            if v > 0:
                entropy -= v * np.log2(v)
            homog += v / (1 + (i - j) ** 2)
    corr = 1.0 if sig <= 0 else (autocorr - mu * mu) / sig
    return {"Autocorrelation": autocorr, "Contrast": contrast, "Energy": energy,
            "Entropy": entropy, "Homogeneity": homog, "Correlation": corr}


def ngtdm_table(dense, levels):
    nx, ny, nz = dense.shape
    n_i = np.zeros(levels)
    s_i = np.zeros(levels)
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                lv = dense[x, y, z]
                if lv == 0:
                    continue
                n_i[lv - 1] += 1
                nb = []
                for dx, dy, dz in NEIGHBORS_26:
                    u, v, w = x + dx, y + dy, z + dz
                    if 0 <= u < nx and 0 <= v < ny and 0 <= w < nz \
                            and dense[u, v, w] > 0:
                        nb.append(dense[u, v, w])
                if nb:
                    s_i[lv - 1] += abs(lv - sum(nb) / len(nb))
    p_i = n_i / n_i.sum()
    return n_i, p_i, s_i


def ngtdm_features(dense, levels):
    n_i, p_i, s_i = ngtdm_table(dense, levels)
    occ = [i for i in range(levels) if p_i[i] > 0]
    n = n_i.sum()
    ps = sum(p_i[i] * s_i[i] for i in occ)
    coarseness = 1.0 / ps if ps > 0 else 1e6
    ngp = len(occ)
    contrast = 0.0
    if ngp > 1:
        acc = sum(p_i[i] * p_i[j] * (i - j) ** 2 for i in occ for j in occ)
        contrast = acc / (ngp * (ngp - 1)) * sum(s_i[i] for i in occ) / n
    denom = sum(abs((i + 1) * p_i[i] - (j + 1) * p_i[j]) for i in occ for j in occ)
    busyness = ps / denom if denom > 0 else 0.0
    complexity = sum(abs(i - j) * (p_i[i] * s_i[i] + p_i[j] * s_i[j])
                     / (p_i[i] + p_i[j]) for i in occ for j in occ) / n
    strength = sum((p_i[i] + p_i[j]) * (i - j) ** 2 for i in occ for j in occ) \
        / (1e-12 + sum(s_i[i] for i in occ))
    return {"Coarseness": coarseness, "Contrast": contrast, "Busyness": busyness,
            "Complexity": complexity, "Strength": strength}


def flood_fill_zones(dense):
    """(level, size) of every 26-connected constant-level zone via BFS."""
    nx, ny, nz = dense.shape
    seen = np.zeros(dense.shape, dtype=bool)
    zones = []
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if dense[x, y, z] == 0 or seen[x, y, z]:
                    continue
                level = dense[x, y, z]
                stack = [(x, y, z)]
                seen[x, y, z] = True
                size = 0
                while stack:
                    cx, cy, cz = stack.pop()
                    size += 1
                    for dx, dy, dz in NEIGHBORS_26:
                        u, v, w = cx + dx, cy + dy, cz + dz
                        if 0 <= u < nx and 0 <= v < ny and 0 <= w < nz \
                                and not seen[u, v, w] and dense[u, v, w] == level:
                            seen[u, v, w] = True
                            stack.append((u, v, w))
                zones.append((int(level), size))
    return zones


def glzsm_features(dense):
    zones = flood_fill_zones(dense)
    z = len(zones)
    feats = {"SmallZoneEmphasis": 0.0, "LargeZoneEmphasis": 0.0,
             "Low_Gray_Level_Zone_Emphasis": 0.0, "High_Gray_Level_Zone_Emphasis": 0.0,
             "SmallZoneLowGrayEmphasis": 0.0, "SmallZoneHighGrayEmphasis": 0.0,
             "LargeZoneLowGrayEmphasis": 0.0, "LargeZoneHighGrayEmphasis": 0.0}
    for g, s in zones:
        feats["SmallZoneEmphasis"] += 1.0 / s ** 2
        feats["LargeZoneEmphasis"] += s ** 2
        feats["Low_Gray_Level_Zone_Emphasis"] += 1.0 / g ** 2
        feats["High_Gray_Level_Zone_Emphasis"] += g ** 2
        feats["SmallZoneLowGrayEmphasis"] += 1.0 / (s ** 2 * g ** 2)
        feats["SmallZoneHighGrayEmphasis"] += g ** 2 / s ** 2
        feats["LargeZoneLowGrayEmphasis"] += s ** 2 / g ** 2
        feats["LargeZoneHighGrayEmphasis"] += s ** 2 * g ** 2
    return {k: v / z for k, v in feats.items()}


def gini_split_scan(x, y):
    """Exhaustive best (weighted-Gini, threshold) for one feature."""
    best = None
    values = sorted(set(x.tolist()))
    for a, b in zip(values, values[1:]):
        thr = 0.5 * (a + b)
        left = y[x <= thr]
        right = y[x > thr]

        def gini(g):
            if len(g) == 0:
                return 0.0
            p = g.mean()
            return 2 * p * (1 - p)

        score = len(left) * gini(left) + len(right) * gini(right)
        if best is None or score < best[0] - 1e-12:
            best = (score, thr)
    return best


def pairwise_auc(y, scores):
    """AUC by explicit pair counting with half credit for ties."""
    pos = [s for s, t in zip(scores, y) if t == 1]
    neg = [s for s, t in zip(scores, y) if t == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else (0.5 if p == n else 0.0)
    return total / (len(pos) * len(neg))


def pairwise_cindex(risk, times, events):
    """Harrell's c by explicit pair enumeration."""
    n = len(risk)
    num = den = 0.0
    for i in range(n):
        for j in range(n):
            if times[i] < times[j] and events[i] == 1:
                den += 1
                if risk[i] > risk[j]:
                    num += 1
                elif risk[i] == risk[j]:
                    num += 0.5
    return num / den


def cox_partial_loglik(beta, times, events, x):
    """Breslow log partial likelihood by explicit risk-set loops."""
    ll = 0.0
    for i in range(len(times)):
        if events[i] != 1:
            continue
        denom = sum(np.exp(beta * x[j]) for j in range(len(times))
                    if times[j] >= times[i])
        ll += beta * x[i] - np.log(denom)
    return ll
