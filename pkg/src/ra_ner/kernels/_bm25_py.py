"""Pure-Python (numpy) BM25 accumulation, the fallback kernel."""

import numpy as np


def accumulate_bm25(scores, unit_ids, tfs, lengths, idf, k1, b, avgdl):
    """Add one query term's Okapi BM25 contribution into `scores` in place.

    scores:   float64[num_units], running totals
    unit_ids: int32[postings] field-unit ids holding the term
    tfs:      float64[postings] term frequencies, parallel to unit_ids
    lengths:  float64[num_units] field-unit lengths in tokens
    """
    dl = lengths[unit_ids]
    denom = tfs + k1 * (1.0 - b + b * dl / avgdl)
    scores[unit_ids] += idf * ((tfs * (k1 + 1.0)) / denom)


__all__ = ["accumulate_bm25"]
