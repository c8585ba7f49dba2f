"""Data model for irregularly sampled multivariate series.

A sample is a bag of (t, x, c) observations split at t_s into history
(t <= t_s) and queries (t > t_s). Observations are kept in a canonical
order, sorted by (t, c) with input order breaking ties, so any permutation
of the same observations loads to an identical sample.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pointcast.errors import DatasetFormatError, EmptyHistoryError, ValidationError

log = logging.getLogger("pointcast.data")

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class Observation:
    t: float
    x: float
    c: int


@dataclass(frozen=True)
class DatasetManifest:
    n_channels: int
    time_unit: str = "unitless"
    n_samples: int = 0
    channel_names: tuple[str, ...] | None = None


@dataclass
class SplitSample:
    """One series: arrays over observations plus the history/query split."""

    series_id: str
    t_s: float
    t: np.ndarray
    x: np.ndarray
    c: np.ndarray
    history: np.ndarray
    queries: np.ndarray

    @property
    def observations(self) -> list[Observation]:
        return [Observation(float(t), float(x), int(c))
                for t, x, c in zip(self.t, self.x, self.c)]

    def n_obs(self) -> int:
        return int(self.t.shape[0])

    def history_arrays(self):
        idx = self.history
        return self.t[idx], self.x[idx], self.c[idx]

    def query_arrays(self):
        idx = self.queries
        return self.t[idx], self.x[idx], self.c[idx]


def make_sample(series_id: str, t_s: float, obs, n_channels: int,
                require_history: bool = True) -> SplitSample:
    """Validate, canonically sort, and split a raw (t, x, c) observation list."""
    obs = list(obs)
    if not obs:
        raise ValidationError(f"sample {series_id!r} has no observations")
    t = np.asarray([o[0] for o in obs], dtype=np.float64)
    x = np.asarray([o[1] for o in obs], dtype=np.float64)
    c = np.asarray([o[2] for o in obs], dtype=np.int64)
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
        raise ValidationError(f"sample {series_id!r} has non-finite t or x")
    if c.min() < 0 or c.max() >= n_channels:
        bad = int(c[(c < 0) | (c >= n_channels)][0])
        raise ValidationError(
            f"sample {series_id!r}: channel {bad} outside [0, {n_channels})"
        )
    # Stable sort by (t, c); equal (t, c) pairs keep input order.
    order = np.lexsort((c, t))
    t, x, c = t[order], x[order], c[order]
    history = np.flatnonzero(t <= t_s)
    queries = np.flatnonzero(t > t_s)
    if require_history and history.size == 0:
        raise EmptyHistoryError(
            f"sample {series_id!r} has no observations at or before t_s={t_s}"
        )
    return SplitSample(series_id=series_id, t_s=float(t_s),
                       t=t, x=x, c=c, history=history, queries=queries)


def load_dataset(path) -> tuple[DatasetManifest, list[SplitSample]]:
    """Read the JSON-lines dataset format: manifest line, then one sample per line."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DatasetFormatError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise DatasetFormatError(f"{path}: empty file, expected a manifest line")

    def parse(line_no: int, text: str) -> dict:
        try:
            row = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
        if not isinstance(row, dict):
            raise DatasetFormatError(f"{path}:{line_no}: expected a JSON object")
        return row

    head = parse(1, lines[0])
    if "n_channels" not in head:
        raise DatasetFormatError(f"{path}:1: manifest line must carry n_channels")
    n_channels = int(head["n_channels"])
    if n_channels < 1:
        raise DatasetFormatError(f"{path}:1: n_channels must be >= 1")
    time_unit = str(head.get("time_unit", "unitless"))

    samples = []
    for line_no, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        row = parse(line_no, text)
        for key in ("series_id", "t_s", "obs"):
            if key not in row:
                raise DatasetFormatError(f"{path}:{line_no}: missing field {key!r}")
        raw_obs = row["obs"]
        if not isinstance(raw_obs, list) or not all(
            isinstance(o, list) and len(o) == 3 for o in raw_obs
        ):
            raise DatasetFormatError(
                f"{path}:{line_no}: obs must be a list of [t, x, c] triples"
            )
        for o in raw_obs:
            if not isinstance(o[2], int):
                raise DatasetFormatError(
                    f"{path}:{line_no}: channel index {o[2]!r} is not an integer"
                )
        samples.append(
            make_sample(str(row["series_id"]), float(row["t_s"]), raw_obs, n_channels)
        )
    manifest = DatasetManifest(n_channels=n_channels, time_unit=time_unit,
                               n_samples=len(samples))
    return manifest, samples


def save_dataset(path, manifest: DatasetManifest, samples) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(json.dumps({"n_channels": manifest.n_channels,
                             "time_unit": manifest.time_unit}) + "\n")
        for s in samples:
            obs = [[float(t), float(x), int(c)] for t, x, c in zip(s.t, s.x, s.c)]
            fh.write(json.dumps({"series_id": s.series_id, "t_s": s.t_s,
                                 "obs": obs}) + "\n")


@dataclass
class Normalizer:
    """Per-channel z-score for values, affine [0,1] map for time.

    Fit on training-split history only, so validation/test statistics and
    query values never leak into the transform.
    """

    channel_mean: np.ndarray
    channel_std: np.ndarray
    t_offset: float
    t_scale: float

    def norm_time(self, t):
        return (np.asarray(t, dtype=np.float64) - self.t_offset) / self.t_scale

    def denorm_time(self, t):
        return np.asarray(t, dtype=np.float64) * self.t_scale + self.t_offset

    def norm_value(self, x, c):
        c = np.asarray(c, dtype=np.int64)
        return (np.asarray(x, dtype=np.float64) - self.channel_mean[c]) / self.channel_std[c]

    def denorm_value(self, y, c):
        c = np.asarray(c, dtype=np.int64)
        return np.asarray(y, dtype=np.float64) * self.channel_std[c] + self.channel_mean[c]

    def apply(self, sample: SplitSample) -> SplitSample:
        """Normalized copy; split indices are preserved (the time map is monotone)."""
        return SplitSample(
            series_id=sample.series_id,
            t_s=float(self.norm_time(sample.t_s)),
            t=self.norm_time(sample.t),
            x=self.norm_value(sample.x, sample.c),
            c=sample.c.copy(),
            history=sample.history.copy(),
            queries=sample.queries.copy(),
        )

    def as_dict(self) -> dict:
        return {
            "channel_mean": [float(v) for v in self.channel_mean],
            "channel_std": [float(v) for v in self.channel_std],
            "t_offset": self.t_offset,
            "t_scale": self.t_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(
            channel_mean=np.asarray(d["channel_mean"], dtype=np.float64),
            channel_std=np.asarray(d["channel_std"], dtype=np.float64),
            t_offset=float(d["t_offset"]),
            t_scale=float(d["t_scale"]),
        )


def fit_normalizer(train_samples, n_channels: int) -> Normalizer:
    """Channel statistics and time range from training history observations."""
    train_samples = list(train_samples)
    if not train_samples:
        raise ValidationError("fit_normalizer needs at least one training sample")
    xs, cs, ts = [], [], []
    for s in train_samples:
        t, x, c = s.history_arrays()
        ts.append(t)
        xs.append(x)
        cs.append(c)
    x_all = np.concatenate(xs)
    c_all = np.concatenate(cs)
    t_all = np.concatenate(ts)
    if x_all.size == 0:
        raise ValidationError("training samples have no history observations")

    global_mean = float(x_all.mean())
    global_std = max(float(x_all.std()), STD_FLOOR)
    mean = np.full(n_channels, global_mean)
    std = np.full(n_channels, global_std)
    for ch in range(n_channels):
        vals = x_all[c_all == ch]
        if vals.size == 0:
            log.warning("channel %d absent from training history; using global stats", ch)
            continue
        mean[ch] = vals.mean()
        std[ch] = max(float(vals.std()), STD_FLOOR)

    t_min = float(t_all.min())
    t_max = float(t_all.max())
    t_scale = t_max - t_min
    if t_scale <= 0:
        t_scale = 1.0
    return Normalizer(channel_mean=mean, channel_std=std,
                      t_offset=t_min, t_scale=t_scale)


def split_tvt(samples, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Seeded shuffle then contiguous slices; floor sizes, remainder to train."""
    samples = list(samples)
    if len(samples) < 3:
        raise ValidationError(f"need at least 3 samples to split, got {len(samples)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"split ratios must sum to 1, got {ratios}")
    n = len(samples)
    n_val = int(np.floor(ratios[1] * n))
    n_test = int(np.floor(ratios[2] * n))
    n_train = n - n_val - n_test
    perm = np.random.default_rng(seed).permutation(n)
    train = [samples[i] for i in perm[:n_train]]
    val = [samples[i] for i in perm[n_train:n_train + n_val]]
    test = [samples[i] for i in perm[n_train + n_val:]]
    return train, val, test


@dataclass(frozen=True)
class SynthSpec:
    """Config for the synthetic generator used by tests and the harness."""

    n_channels: int = 4
    n_samples: int = 200
    obs_range: tuple[int, int] = (40, 80)
    noise_sigma: float = 0.05
    cross_weight: float = 0.5
    time_span: float = 10.0
    amp_range: tuple[float, float] = (0.5, 1.5)

    def validate(self):
        if self.n_channels < 1:
            raise ValidationError("n_channels must be >= 1")
        if self.n_samples < 1:
            raise ValidationError("n_samples must be >= 1")
        lo, hi = self.obs_range
        if not (1 <= lo <= hi):
            raise ValidationError(f"bad obs_range {self.obs_range}")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if self.time_span <= 0:
            raise ValidationError("time_span must be positive")


def synth_generate(spec: SynthSpec, seed: int) -> tuple[DatasetManifest, list[SplitSample]]:
    """Coupled noisy sinusoids observed at asynchronous irregular times.

    Channel c follows a_c*sin(2*pi*f_c*t + phi) plus cross_weight times the
    base sinusoid of channel (c+1) mod n_channels, so values carry
    cross-channel structure a univariate baseline cannot exploit. Timestamps
    are drawn per channel as sorted uniforms over the time span (a Poisson
    process conditioned on the per-channel count), and t_s sits at the 2/3
    point of each sample's observed span.
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    nc = spec.n_channels
    freqs = (1.5 + 0.5 * np.arange(nc)) / spec.time_span

    def base(ch, t, amps, phase):
        return amps[ch] * np.sin(2.0 * np.pi * freqs[ch] * t + phase)

    samples = []
    for idx in range(spec.n_samples):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amps = rng.uniform(spec.amp_range[0], spec.amp_range[1], size=nc)
        n_obs = int(rng.integers(spec.obs_range[0], spec.obs_range[1] + 1))
        counts = rng.multinomial(n_obs, np.full(nc, 1.0 / nc))
        obs = []
        for ch in range(nc):
            if counts[ch] == 0:
                continue
            t_ch = np.sort(rng.uniform(0.0, spec.time_span, size=counts[ch]))
            vals = base(ch, t_ch, amps, phase)
            vals = vals + spec.cross_weight * base((ch + 1) % nc, t_ch, amps, phase)
            if spec.noise_sigma > 0:
                vals = vals + rng.normal(0.0, spec.noise_sigma, size=counts[ch])
            obs.extend((float(t), float(x), ch) for t, x in zip(t_ch, vals))
        t_all = np.asarray([o[0] for o in obs])
        t_s = float(t_all.min() + (2.0 / 3.0) * (t_all.max() - t_all.min()))
        samples.append(make_sample(f"synth-{idx:04d}", t_s, obs, nc))
    manifest = DatasetManifest(n_channels=nc, time_unit="unitless",
                               n_samples=len(samples))
    return manifest, samples
