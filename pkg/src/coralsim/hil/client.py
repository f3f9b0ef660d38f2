"""Inference client: a trained policy driving the plant over the wire.

The client keeps a full digital twin of the environment (same seed, same
dynamics and control code as the plant). Each pose feedback overrides the
twin's agent pose and coral states -- the motion-capture role -- and the
twin's virtual sensors synthesize the observation the policy consumes:
the camera renders from the corrected pose and the INS channels come from
the twin's velocity state. The policy runs deterministically (mean
action); one command goes out per feedback tick; the twin then steps with
the same float32 command that went over the wire, staying in lockstep
with the plant.
"""

from __future__ import annotations

import csv
import socket
import time
from dataclasses import dataclass, replace

import numpy as np

from ..config import vehicle_config_from_dict
from ..control import ActionCommand
from ..env import CoralEnv, format_event
from ..rl.checkpoint import Checkpoint, CheckpointError, load_checkpoint
from ..rl.distributions import deterministic_action
from .protocol import (AckMsg, MalformedFrameError, MotionCommandMsg,
                       PoseFeedbackMsg, ResetMsg, decode_frame, encode_frame)

TRAJECTORY_HEADER = ["timestamp", "x", "y", "z", "roll", "pitch", "yaw",
                     "u", "v", "r", "event"]


class ConnectionLostError(RuntimeError):
    """No feedback from the plant for longer than the silence budget."""


@dataclass
class ClientReport:
    ticks: int
    sequence_gaps: int
    final_pose: tuple | None
    rows_written: int


def _f32(x: float) -> float:
    return float(np.float32(x))


def build_twin_from_checkpoint(ck: Checkpoint) -> CoralEnv:
    """Rebuild the training environment stored in the checkpoint extras."""
    from ..harness.spec import (sensor_config_from_dict, world_config_from_dict)
    extras = ck.extras
    for key in ("world_config", "sensor_config", "vehicle_config"):
        if key not in extras:
            raise CheckpointError(f"checkpoint lacks {key}; cannot build the twin")
    return CoralEnv(world_config_from_dict(extras["world_config"]),
                    vehicle_config_from_dict(extras["vehicle_config"]),
                    sensor_config_from_dict(extras["sensor_config"]))


def run_inference_client(checkpoint_path, connect_addr: tuple[str, int],
                         duration_s: float, out_csv, reset_seed: int = 0,
                         recv_timeout: float = 0.5, silence_budget: float = 3.0,
                         apply_pose_override: bool = True) -> ClientReport:
    """Drive the plant for duration_s of simulated time; log a trajectory CSV.

    Raises ConnectionLostError after silence_budget seconds without any
    feedback; individual missed ticks (packet loss) are tolerated -- the
    plant holds the last command it saw.
    """
    ck = load_checkpoint(checkpoint_path)
    policy = ck.build_policy()
    normalizer = ck.normalizer
    twin = build_twin_from_checkpoint(ck)
    if twin.world_config.num_agents != 1:
        raise CheckpointError("HIL inference drives a single agent")
    world_cfg = replace(twin.world_config, seed=reset_seed)
    twin.world_config = world_cfg

    dt = twin.vehicle_config.control_dt
    ticks_wanted = max(0, int(round(duration_s / dt)))

    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.settimeout(recv_timeout)
    gaps = 0
    ticks = 0
    rows = []
    final_pose = None
    try:
        # Handshake: reset the plant to the twin's seed.
        acked = False
        for attempt in range(10):
            sock.sendto(encode_frame(ResetMsg(attempt, int(time.monotonic_ns() // 1000),
                                              reset_seed)), connect_addr)
            try:
                msg = decode_frame(sock.recvfrom(65536)[0])
            except (socket.timeout, MalformedFrameError):
                continue
            if isinstance(msg, AckMsg):
                acked = True
                break
            if isinstance(msg, PoseFeedbackMsg):
                acked = True  # ack lost but the plant clearly reset
                break
        if not acked:
            raise ConnectionLostError("plant never acknowledged the reset")

        # No observation here: the first feedback triggers the first sensor
        # draw, keeping the twin's noise stream aligned with an in-process
        # rollout (reset obs, then one obs per step).
        twin.reset(compute_observations=False)

        last_seq = None
        last_heard = time.monotonic()
        cmd_seq = 0
        while ticks < ticks_wanted:
            try:
                data = sock.recvfrom(65536)[0]
            except socket.timeout:
                if time.monotonic() - last_heard > silence_budget:
                    raise ConnectionLostError(
                        f"no feedback for {silence_budget} s") from None
                continue
            try:
                msg = decode_frame(data)
            except MalformedFrameError:
                continue
            if not isinstance(msg, PoseFeedbackMsg):
                continue
            last_heard = time.monotonic()
            if last_seq is not None:
                if msg.sequence <= last_seq:
                    continue  # stale or duplicate
                gaps += msg.sequence - last_seq - 1
            last_seq = msg.sequence

            if apply_pose_override:
                _override_twin(twin, msg)

            obs = twin.observation(0)
            image = (obs.image[None]
                     if policy.config.image_shape is not None else None)
            vector = normalizer.normalize(obs.vector)[None]
            mean, _ = policy.forward(image, vector)
            action = deterministic_action(mean[0])

            out = MotionCommandMsg(cmd_seq, msg.timestamp_us,
                                   action[0], action[1], action[2])
            sock.sendto(encode_frame(out), connect_addr)
            cmd_seq += 1

            wire_cmd = ActionCommand(_f32(action[0]), _f32(action[1]), _f32(action[2]))
            _, _, _, info = twin.step([wire_cmd], compute_observations=False)
            ticks += 1
            final_pose = msg.pose
            rows.append([f"{msg.timestamp_us / 1e6:.6f}",
                         *(f"{x:.9f}" for x in msg.pose),
                         f"{wire_cmd.u:.9f}", f"{wire_cmd.v:.9f}", f"{wire_cmd.r:.9f}",
                         format_event(info.events[0])])
    finally:
        sock.close()
        if out_csv is not None:
            with open(out_csv, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(TRAJECTORY_HEADER)
                writer.writerows(rows)
    return ClientReport(ticks=ticks, sequence_gaps=gaps, final_pose=final_pose,
                        rows_written=len(rows))


def _override_twin(twin: CoralEnv, msg: PoseFeedbackMsg) -> None:
    """Apply motion-capture-style corrections to the twin from feedback."""
    state = twin.state
    vehicle = state.vehicles[0]
    pose = replace(vehicle.pose,
                   position=np.array(msg.pose[:3], dtype=float),
                   attitude=np.array(msg.pose[3:], dtype=float))
    state.vehicles[0] = replace(vehicle, pose=pose)
    for idx, coral_fb in enumerate(msg.corals):
        if idx < len(state.corals) and coral_fb.collected != state.corals[idx].collected:
            state.corals[idx] = replace(state.corals[idx], collected=coral_fb.collected)
