"""Matched filtering one simulated block and thresholding it into a point cloud.

Run: python3 demos/01_matched_filter.py
"""

import warnings

import numpy as np

from sonarblob import ChirpSpec, ScenarioConfig, SyntheticClutter, build_point_cloud, make_chirp, make_scenario
from sonarblob import matched_filter, synth_block
from sonarblob.pipeline import ETA_MF
from sonarblob.signalproc import interference_region

chirp = ChirpSpec()
replica = make_chirp(chirp)
print(f"replica: {len(replica)} samples, {chirp.f_min / 1e3:.0f}-{chirp.f_max / 1e3:.0f} kHz")
lo, hi = interference_region(chirp.f_min, chirp.f_max, chirp.sound_speed)
print(f"object sizes in the interference regime: {lo:.3f} m to {hi:.3f} m")

scenario = make_scenario(seed=2024, config=ScenarioConfig(scr_db=0.0), chirp=chirp)
pings = synth_block(scenario, chirp, SyntheticClutter(chirp))

# at +20 dB the echo dominates the MF output; the multipath response can
# push the peak up to 100 samples (0.4 m) past the true delay
loud = make_scenario(seed=2024, config=ScenarioConfig(scr_db=20.0), chirp=chirp)
mf = matched_filter(synth_block(loud, chirp, SyntheticClutter(chirp))[0], replica)
lag = int(np.argmax(mf))
print(f"+20 dB ping 1: true range {loud.path[0]:.2f} m, MF peak at {lag * chirp.sound_speed / chirp.sample_rate / 2:.2f} m")

# at 0 dB single-ping peaks are often clutter, the cloud keeps every local maximum
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    cloud = build_point_cloud(pings, chirp, ETA_MF)
near = np.abs(cloud.ranges - scenario.path[cloud.pings - 1]) < 0.5
print(f"point cloud: {len(cloud)} points over {len(pings)} pings, {near.sum()} within 0.5 m of the track")
for m in range(1, 6):
    sel = cloud.pings == m
    print(f"  ping {m}: {sel.sum():3d} points, track at {scenario.path[m - 1]:6.2f} m, "
          f"closest point {cloud.ranges[sel][np.argmin(np.abs(cloud.ranges[sel] - scenario.path[m - 1]))]:6.2f} m")
