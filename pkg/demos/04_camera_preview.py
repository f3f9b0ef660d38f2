"""Camera proxy: what the agent actually sees.

Renders a few frames while turning in place and dumps them as PPM files
(orange = healthy coral, white = diseased, blue = bucket, brown = floor).
"""

from pathlib import Path

import numpy as np

import coralsim as cs
from coralsim.control import ActionCommand
from coralsim.sensors import save_ppm

out_dir = Path("camera_frames")
out_dir.mkdir(exist_ok=True)

world = cs.WorldConfig(seed=17, max_episode_steps=2000)
vehicle = cs.default_vehicle_config()
sensors = cs.SensorConfig(camera=cs.CameraConfig(width=64, height=64))
env = cs.CoralEnv(world, vehicle, sensors)
obs = env.reset()

frame = 0
for k in range(120):
    obs, _, _, _ = env.step([ActionCommand(u=0.0, v=0.0, r=0.5)])
    if k % 20 == 0:
        img = obs[0].image
        path = out_dir / f"frame_{frame:02d}.ppm"
        save_ppm(img, path)
        coral_px = int(np.sum(np.linalg.norm(img - np.array([1.0, 0.5, 0.0]), axis=2) < 0.45))
        print(f"{path}  vector={np.round(obs[0].vector, 3)}  orange-ish px={coral_px}")
        frame += 1

print(f"\nwrote {frame} frames to {out_dir}/ (any image viewer opens PPM)")
