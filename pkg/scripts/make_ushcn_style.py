"""Build a daily-climate-style benchmark dataset.

Emulates the shape of public daily station records (five channels: max and
min temperature, precipitation, snowfall, snow depth) as sparse irregular
windows, then saves them in the JSON-lines dataset format. Each series is one
station-month window; observations drop out channel-by-channel at random, the
way station records do. Temperatures follow a seasonal mean plus a
mean-reverting daily anomaly, precipitation is intermittent and heavy-tailed,
and snow accumulates into a depth channel when it is cold, so the channels
carry real cross-signal for a forecaster to exploit.

Usage: python scripts/make_ushcn_style.py --out climate.jsonl
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from pointcast.data import DatasetManifest, make_sample, save_dataset

CHANNELS = ("tmax", "tmin", "prcp", "snow", "snwd")

# channel observation rates: temperatures are logged more reliably
OBS_RATE = np.array([0.8, 0.8, 0.6, 0.4, 0.4])


def _station_window(rng, station, month, window_days, history_frac):
    """One station-month window as a list of (t, x, c) observations."""
    # Seasonal mean temperature for this station and month, southern band
    # stations warmer; anomaly is AR(1) so it mean-reverts over a few days.
    base = rng.uniform(2.0, 18.0)
    season = 10.0 * np.sin(2.0 * np.pi * (month - 3.5) / 12.0)
    mean_tmax = base + season
    spread = rng.uniform(7.0, 12.0)

    phi, sigma = 0.7, 3.0
    anomaly = np.empty(window_days)
    anomaly[0] = rng.normal(0.0, sigma / np.sqrt(1 - phi * phi))
    for d in range(1, window_days):
        anomaly[d] = phi * anomaly[d - 1] + rng.normal(0.0, sigma)

    tmax = mean_tmax + anomaly
    tmin = tmax - spread + rng.normal(0.0, 1.0, window_days)

    wet = rng.random(window_days) < 0.35
    prcp = np.where(wet, rng.gamma(1.2, 6.0, window_days), 0.0)
    cold = tmax < 2.0
    snow = np.where(wet & cold, prcp * rng.uniform(5.0, 10.0, window_days), 0.0)
    snwd = np.zeros(window_days)
    depth = 0.0
    for d in range(window_days):
        depth += snow[d]
        if tmax[d] > 0.0:
            depth *= max(0.0, 1.0 - 0.1 * tmax[d])
        snwd[d] = depth

    values = np.stack([tmax, tmin, prcp, snow, snwd])
    obs = []
    for c in range(len(CHANNELS)):
        seen = rng.random(window_days) < OBS_RATE[c]
        for d in np.flatnonzero(seen):
            obs.append((float(d), float(values[c, d]), c))
    t_s = float(np.floor(history_frac * (window_days - 1)))
    return obs, t_s


def generate(n_stations=10, n_months=6, window_days=21, history_frac=0.75,
             seed=0):
    """Dataset of station-month windows; returns (manifest, samples)."""
    rng = np.random.default_rng(seed)
    samples = []
    for st in range(n_stations):
        for m in range(n_months):
            month = 1 + rng.integers(0, 12)
            obs, t_s = _station_window(rng, st, month, window_days, history_frac)
            sid = f"station{st:02d}-w{m:02d}"
            s = make_sample(sid, t_s, obs, len(CHANNELS), require_history=False)
            if s.queries.size == 0 or s.t.size - s.queries.size < 5:
                continue  # dropout left too little signal in this window
            samples.append(s)
    manifest = DatasetManifest(n_channels=len(CHANNELS), time_unit="day",
                               n_samples=len(samples), channel_names=CHANNELS)
    return manifest, samples


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="climate.jsonl")
    parser.add_argument("--stations", type=int, default=10)
    parser.add_argument("--months", type=int, default=6)
    parser.add_argument("--window-days", type=int, default=21)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    manifest, samples = generate(args.stations, args.months, args.window_days,
                                 seed=args.seed)
    save_dataset(args.out, manifest, samples)
    print(f"wrote {len(samples)} windows x {len(CHANNELS)} channels to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
