"""Sanity baselines: per-channel history mean and last observation carried
forward. Both answer arbitrary (t, c) queries and expose the same
predict_sample contract as the trained model, so evaluate() treats them
uniformly."""

from __future__ import annotations

import numpy as np

from pointcast.errors import EmptyHistoryError


class MeanBaseline:
    """Predicts the mean of channel c's history; global mean if c unseen."""

    def predict(self, sample, t_q, c_q) -> np.ndarray:
        _, x_h, c_h = sample.history_arrays()
        if x_h.size == 0:
            raise EmptyHistoryError(f"sample {sample.series_id!r} has no history")
        c_q = np.asarray(c_q, dtype=np.int64)
        global_mean = float(x_h.mean())
        out = np.empty(c_q.shape[0], dtype=x_h.dtype)
        for i, ch in enumerate(c_q):
            vals = x_h[c_h == ch]
            out[i] = vals.mean() if vals.size else global_mean
        return out

    def predict_sample(self, sample) -> np.ndarray:
        t_q, _, c_q = sample.query_arrays()
        return self.predict(sample, t_q, c_q)


class LocfBaseline:
    """Predicts the latest history value of channel c at or before the query
    time; history is in canonical order, so the last qualifying index is the
    latest (t, input-order) observation. Unseen channel falls back to the
    latest observation across all channels."""

    def predict(self, sample, t_q, c_q) -> np.ndarray:
        t_h, x_h, c_h = sample.history_arrays()
        if x_h.size == 0:
            raise EmptyHistoryError(f"sample {sample.series_id!r} has no history")
        t_q = np.asarray(t_q, dtype=np.float64)
        c_q = np.asarray(c_q, dtype=np.int64)
        out = np.empty(t_q.shape[0], dtype=x_h.dtype)
        for i, (tq, ch) in enumerate(zip(t_q, c_q)):
            eligible = np.flatnonzero((c_h == ch) & (t_h <= tq))
            if eligible.size == 0:
                eligible = np.flatnonzero(t_h <= tq)
            if eligible.size == 0:
                # Query earlier than all history on every channel: carry the
                # first observation backward rather than fail.
                out[i] = x_h[0]
            else:
                out[i] = x_h[eligible[-1]]
        return out

    def predict_sample(self, sample) -> np.ndarray:
        t_q, _, c_q = sample.query_arrays()
        return self.predict(sample, t_q, c_q)


BASELINES = {"baseline_mean": MeanBaseline, "baseline_locf": LocfBaseline}
