"""Hardware-in-the-loop rehearsal on localhost.

Starts the mock plant (stand-in for the physical vehicle plus the motion
capture hall) in a background thread, then drives it with a policy over
the UDP protocol while a digital twin synthesizes the observations. At
zero latency the wire trajectory reproduces an in-process rollout to
float32 round-off.
"""

import dataclasses
import tempfile
import threading
import time
from pathlib import Path

import numpy as np

import coralsim as cs
from coralsim.config import packaged_config_path
from coralsim.harness import load_experiment_spec
from coralsim.harness.spec import checkpoint_extras
from coralsim.hil import MockPlant, run_inference_client
from coralsim.rl import PolicyNetwork, RunningMeanStd, save_checkpoint

spec = load_experiment_spec(packaged_config_path("desk_ppo"))
spec = dataclasses.replace(spec, sensors=dataclasses.replace(
    spec.sensors, ins_velocity_noise_std=0.0, ins_yawrate_noise_std=0.0,
    range_noise_std=0.0, altimeter_noise_std=0.0))

work = Path(tempfile.mkdtemp(prefix="hil_"))
ck = work / "policy.npz"
policy = PolicyNetwork(spec.network, 3, np.random.default_rng(42))
save_checkpoint(ck, "ppo", spec.network, {"policy": policy.params()},
                RunningMeanStd(4), 0, 0, extras=checkpoint_extras(spec))
print(f"checkpoint: {ck}")

plant = MockPlant(spec.world, spec.vehicle, spec.sensors, command_timeout=0.5)
stop = threading.Event()
addr = ("127.0.0.1", 48620)
thread = threading.Thread(target=plant.serve, args=(addr,),
                          kwargs=dict(max_ticks=220, stop_event=stop), daemon=True)
thread.start()
time.sleep(0.2)

traj = work / "trajectory.csv"
report = run_inference_client(ck, addr, duration_s=20.0, out_csv=traj, reset_seed=123)
stop.set()
thread.join(timeout=5)

print(f"drove {report.ticks} ticks, {report.sequence_gaps} feedback gaps")
print(f"final pose (x, y, z): {np.round(report.final_pose[:3], 3)}")
print(f"trajectory csv: {traj}")
print("\nequivalent shell session:")
print(f"  coralsim plant --config <spec.yaml> --bind {addr[0]}:{addr[1]} &")
print(f"  coralsim infer --checkpoint {ck} --connect {addr[0]}:{addr[1]} "
      f"--duration 20 --out {traj}")
