"""Compiled inner loops for Monte Carlo trials.

Each kernel runs one detector over a whole post-warm-up stream and returns
``(stop_time, zero_ref)``: ``stop_time`` is 1-based, 0 when the stream ends
without an alarm; ``zero_ref`` is 1 when a symbol with zero reference
probability was met (treated as an immediate alarm, the statistic being +inf).
They mirror :mod:`unicusum.detectors` step for step.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def page_run(post, llr, lam, threshold):
    w = 0.0
    for i in range(post.shape[0]):
        v = llr[post[i]]
        if v == math.inf:
            return i + 1, 1
        w = w + v - lam
        if w < 0.0:
            w = 0.0
        if w >= threshold:
            return i + 1, 0
    return 0, 0


@njit(cache=True)
def aux_run(post, logref, k, lam, threshold):
    counts = np.zeros(k, np.int64)
    half = 0.5 * k
    stat = 0.0
    for i in range(post.shape[0]):
        x = post[i]
        lr = logref[x]
        if lr == -math.inf:
            return i + 1, 1
        c = counts[x]
        stat += -(math.log2(i + half) - math.log2(c + 0.5)) - lr - lam
        counts[x] = c + 1
        if stat >= threshold:
            return i + 1, 0
    return 0, 0


@njit(cache=True)
def universal_run(post, logref, k, lam, threshold, absolute, dominance, max_starts, slack):
    """Max-over-starts universal CUSUM.

    ``dominance`` > 0 enables exact pruning: a start whose current term plus
    ``dominance`` (an upper bound on KT regret over the remaining horizon) is
    negative can never again exceed the start opened next, so it is dropped.
    ``max_starts`` > 0 enables the heuristic slack-based cap instead.
    """
    horizon = post.shape[0]
    counts = np.zeros((horizon, k), np.int64)
    code_len = np.zeros(horizon)
    nlr = np.zeros(horizon)
    starts = np.zeros(horizon, np.int64)
    terms = np.zeros(horizon)
    half = 0.5 * k
    active = 0
    for n in range(1, horizon + 1):
        x = post[n - 1]
        lr = logref[x]
        if lr == -math.inf:
            return n, 1
        starts[active] = n
        for a in range(k):
            counts[active, a] = 0
        code_len[active] = 0.0
        nlr[active] = 0.0
        active += 1
        best = -math.inf
        for j in range(active):
            seen = n - starts[j]
            c = counts[j, x]
            code_len[j] += math.log2(seen + half) - math.log2(c + 0.5)
            counts[j, x] = c + 1
            nlr[j] -= lr
            if absolute:
                pen = n * lam
            else:
                pen = (seen + 1) * lam
            t = nlr[j] - code_len[j] - pen
            terms[j] = t
            if t > best:
                best = t
        if best >= threshold:
            return n, 0
        if dominance > 0.0:
            shift = n * lam if absolute else 0.0
            w = 0
            for j in range(active):
                if terms[j] + shift + dominance >= 0.0:
                    if w != j:
                        starts[w] = starts[j]
                        code_len[w] = code_len[j]
                        nlr[w] = nlr[j]
                        terms[w] = terms[j]
                        for a in range(k):
                            counts[w, a] = counts[j, a]
                    w += 1
            active = w
        elif max_starts > 0 and active > max_starts:
            excess = active - max_starts
            w = 0
            for j in range(active):
                if excess > 0 and terms[j] < best - slack:
                    excess -= 1
                    continue
                if w != j:
                    starts[w] = starts[j]
                    code_len[w] = code_len[j]
                    nlr[w] = nlr[j]
                    terms[w] = terms[j]
                    for a in range(k):
                        counts[w, a] = counts[j, a]
                w += 1
            active = w
    return 0, 0
