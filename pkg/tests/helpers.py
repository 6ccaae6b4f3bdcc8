"""Shared pipeline drivers for the test suite."""

from __future__ import annotations

import warnings

import numpy as np

import crossrep as cr

NR = cr.HypothesisKind.NO_REPLICABILITY
NA = cr.HypothesisKind.NO_ASSOCIATION


def run_empirical_bayes(panel, q=0.05, bins=50, exclusion=None):
    """Fit, exclude, model and report both nulls for a z panel.

    Returns (reports, included, model) where reports maps "nr"/"na" to a
    DiscoveryReport; "nr" is absent when fewer than two studies qualify and
    both are absent when none does.
    """
    kwargs = {} if exclusion is None else {"exclusion_threshold": exclusion}
    binned = cr.bin_panel(panel, bins)
    fits = cr.fit_panel(panel, binned, **kwargs)
    included = [i for i, fit in enumerate(fits) if fit.qualifies]
    reports = {}
    if not included:
        return reports, included, None
    sub_binned = binned.select_studies(included)
    cond = cr.build_conditionals([fits[i] for i in included], sub_binned)
    model = cr.em_fit(sub_binned, cond, snp_ids=panel.snp_ids)
    todo = [("na", NA)]
    if len(included) >= 2:
        todo.insert(0, ("nr", NR))
    for label, kind in todo:
        null_set = cr.null_subset(kind, len(included))
        lf = cr.local_fdr_panel(sub_binned, model, null_set, panel.snp_ids)
        reports[label] = cr.fdr_report(lf, q, null_set)
    return reports, included, model


def run_table3_rep(n_snps, seed, q=0.05, bins=50):
    """One repetition of the reference simulation study, all analyses.

    Returns a dict of SimMetrics keyed by analysis name; empirical Bayes
    entries are missing when study exclusion leaves too few studies.
    """
    design = cr.default_design(n_snps=n_snps, seed=seed)
    panel, truth = cr.simulate_panel(design)
    out = {}

    p_nr = cr.no_replicability_pvalues(panel.z)
    p_na = cr.no_association_pvalues(panel.z)
    out["meta_nr"] = cr.evaluate(cr.bh_procedure(p_nr, q), truth, NR)
    out["meta_na"] = cr.evaluate(cr.bh_procedure(p_na, q), truth, NA)

    binned = cr.bin_panel(panel, bins)
    true_pi = design.config_prob_vector()
    for label, kind in (("nr", NR), ("na", NA)):
        null_set = cr.null_subset(kind, design.n_studies)
        report = cr.oracle_report(
            binned, truth.statuses, true_pi, null_set, q, panel.snp_ids
        )
        out[f"oracle_{label}"] = cr.evaluate(report, truth, kind)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reports, included, _ = run_empirical_bayes(panel, q=q, bins=bins)
    for label, report in reports.items():
        out[f"eb_{label}"] = cr.evaluate(report, truth, NR if label == "nr" else NA)
    out["n_included"] = len(included)
    return out


def mean_metric(rows, key, attr):
    values = [getattr(r[key], attr) for r in rows if key in r]
    return float(np.mean(values)), len(values)


def composition_memo(total, parts):
    """memo[s] = int8 array of all compositions of s into `parts` parts."""
    memo = {s: np.array([[s]], dtype=np.int8) for s in range(total + 1)}
    for p in range(2, parts + 1):
        nxt = {}
        for s in range(total + 1):
            rows = sum(memo[s - first].shape[0] for first in range(s + 1))
            out = np.empty((rows, p), dtype=np.int8)
            at = 0
            for first in range(s + 1):
                tail = memo[s - first]
                k = tail.shape[0]
                out[at : at + k, 0] = first
                out[at : at + k, 1:] = tail
                at += k
            nxt[s] = out
        memo = nxt
    return memo


def composition_count(total, parts):
    from math import comb

    return comb(total + parts - 1, parts - 1)


def weighted_loglik(pis, like, counts):
    """Composite log-likelihood of each weight vector in a (P, K) stack."""
    mixture = pis @ like
    if np.any(mixture <= 0):
        return np.where(
            np.any(mixture <= 0, axis=1), -np.inf, (np.log(np.maximum(mixture, 1e-300)) @ counts)
        )
    return np.log(mixture) @ counts


def simplex_grid_search(like, counts, pi_star, steps=50, slack=2e-3, chunk=6_000_000):
    """Exact maximum of the composite log-likelihood over the simplex grid.

    Enumerates every weight vector with entries k/steps on the K-simplex.
    Points that a first-order concavity bound proves to lie below
    ll(pi_star) - slack are skipped (the log-likelihood is concave in the
    weights, so ll(pi) <= ll(pi_star) + grad . (pi - pi_star) is a true
    upper bound); every surviving point is evaluated exactly.

    Returns (best_ll, n_exact, n_total).
    """
    k = like.shape[0]
    mixture_star = pi_star @ like
    ll_star = float(np.log(mixture_star) @ counts)
    grad = like @ (counts / mixture_star)
    base = ll_star - float(pi_star @ grad)
    threshold = ll_star - slack

    best = -np.inf
    n_exact = 0
    n_total = 0
    if k <= 7:
        memo = composition_memo(steps, k)
        rows = memo[steps].astype(np.float64) / steps
        n_total = rows.shape[0]
        for lo in range(0, rows.shape[0], chunk):
            block = rows[lo : lo + chunk]
            lls = weighted_loglik(block, like, counts)
            n_exact += block.shape[0]
            best = max(best, float(lls.max()))
        return best, n_exact, n_total

    outer = k - 7
    memo7 = composition_memo(steps, 7)
    outer_rows = composition_memo(steps, outer) if outer > 1 else None
    g_tail = grad[outer:]
    for s in range(steps + 1):
        tail = memo7[s]
        tail_dot = np.empty(tail.shape[0])
        for lo in range(0, tail.shape[0], chunk):
            tail_dot[lo : lo + chunk] = tail[lo : lo + chunk] @ g_tail
        heads = (
            outer_rows[steps - s]
            if outer_rows is not None
            else np.array([[steps - s]], dtype=np.int8)
        )
        for head in heads:
            head_dot = float(head.astype(np.float64) @ grad[:outer])
            bound = base + (head_dot + tail_dot) / steps
            n_total += tail.shape[0]
            cand = np.nonzero(bound >= threshold)[0]
            if cand.size == 0:
                continue
            pis = np.empty((cand.size, k))
            pis[:, :outer] = head / steps
            pis[:, outer:] = tail[cand].astype(np.float64) / steps
            lls = weighted_loglik(pis, like, counts)
            n_exact += cand.size
            best = max(best, float(lls.max()))
    return best, n_exact, n_total
