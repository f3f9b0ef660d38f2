"""Mock plant: the physical side of the cyber-physical loop.

Runs the vehicle dynamics and inner-loop control in place of a real ROV
and motion-capture hall. Each control tick it emits a pose feedback frame
(agent pose, coral states, bucket position) and applies the latest motion
command it has received. Commands are latest-wins, dropped when their
sequence number regresses, and zeroed (failsafe) when no fresh command has
arrived for stale_after seconds of simulated time.

In accelerated mode the loop free-runs, pausing up to command_timeout of
wall time per tick for a command; in realtime mode ticks are paced to the
wall clock at the control rate (10 Hz with the default vehicle file).
"""

from __future__ import annotations

import logging
import socket
import time

import numpy as np

from ..config import VehicleConfig
from ..control import ActionCommand
from ..env import CoralEnv
from ..sensors import SensorConfig
from ..world import WorldConfig
from .protocol import (AckMsg, CoralFeedback, MalformedFrameError,
                       MotionCommandMsg, PoseFeedbackMsg, ResetMsg,
                       decode_frame, encode_frame)

log = logging.getLogger(__name__)


class MockPlant:
    def __init__(self, world_config: WorldConfig, vehicle_config: VehicleConfig,
                 sensor_config: SensorConfig | None = None,
                 realtime: bool = False, command_timeout: float = 0.05,
                 stale_after: float = 1.0, drop_feedback_rate: float = 0.0,
                 drop_seed: int = 0):
        if world_config.num_agents != 1:
            raise ValueError("the plant emulates a single vehicle")
        self.env = CoralEnv(world_config, vehicle_config,
                            sensor_config or SensorConfig())
        self.realtime = realtime
        self.command_timeout = command_timeout
        self.stale_after = stale_after
        self.drop_feedback_rate = drop_feedback_rate
        self._drop_rng = np.random.default_rng(drop_seed)
        self.ticks_served = 0

    def _feedback(self, seq: int, sim_time: float) -> PoseFeedbackMsg:
        state = self.env.state
        pose = state.vehicles[0].pose
        corals = tuple(
            CoralFeedback(tuple(float(x) for x in c.position), c.healthy, c.collected)
            for c in state.corals)
        bucket = (tuple(float(x) for x in state.buckets[0].position)
                  if state.buckets else (0.0, 0.0, 0.0))
        return PoseFeedbackMsg(
            sequence=seq,
            timestamp_us=int(round(sim_time * 1e6)),
            pose=tuple(float(x) for x in np.concatenate([pose.position, pose.attitude])),
            corals=corals,
            bucket=bucket,
        )

    def serve(self, bind_addr: tuple[str, int], max_ticks: int | None = None,
              stop_event=None) -> int:
        """Run until stopped; returns the number of control ticks stepped."""
        dt = self.env.vehicle_config.control_dt
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.bind(bind_addr)
        try:
            self.env.reset(compute_observations=False)
            peer = None
            seq = 0
            sim_time = 0.0
            last_cmd = ActionCommand(0.0, 0.0, 0.0)
            last_cmd_seq = -1
            last_cmd_time = 0.0
            next_tick_wall = time.monotonic()
            while True:
                if stop_event is not None and stop_event.is_set():
                    break
                if max_ticks is not None and self.ticks_served >= max_ticks:
                    break

                if peer is not None:
                    fb = self._feedback(seq, sim_time)
                    if (self.drop_feedback_rate == 0.0
                            or self._drop_rng.uniform() >= self.drop_feedback_rate):
                        sock.sendto(encode_frame(fb), peer)
                    seq += 1

                # Receive phase: wait up to command_timeout for traffic, then
                # fast-drain the queue so the newest command wins.
                deadline = time.monotonic() + self.command_timeout
                got_command = False
                just_reset = False
                while True:
                    if got_command or just_reset:
                        timeout = 1e-3
                    else:
                        timeout = deadline - time.monotonic()
                        if timeout <= 0:
                            break
                    sock.settimeout(timeout)
                    try:
                        data, addr = sock.recvfrom(65536)
                    except socket.timeout:
                        break
                    except OSError as exc:
                        log.warning("socket error, resetting session: %s", exc)
                        peer = None
                        break
                    try:
                        msg = decode_frame(data)
                    except MalformedFrameError as exc:
                        log.warning("dropping frame: %s", exc)
                        continue
                    peer = addr
                    if isinstance(msg, MotionCommandMsg):
                        if msg.sequence > last_cmd_seq:  # stale-drop
                            last_cmd_seq = msg.sequence
                            last_cmd = ActionCommand(msg.u, msg.v, msg.r)
                            last_cmd_time = sim_time
                        got_command = True
                    elif isinstance(msg, ResetMsg):
                        self.env.reset(seed=msg.seed, compute_observations=False)
                        sim_time = 0.0
                        seq = 0
                        last_cmd = ActionCommand(0.0, 0.0, 0.0)
                        last_cmd_seq = -1
                        last_cmd_time = 0.0
                        just_reset = True
                        sock.sendto(encode_frame(AckMsg(msg.sequence, msg.timestamp_us)),
                                    addr)

                if peer is None:
                    continue
                if just_reset:
                    continue  # emit the fresh world's feedback before stepping

                command = last_cmd
                if sim_time - last_cmd_time > self.stale_after:
                    command = ActionCommand(0.0, 0.0, 0.0)  # failsafe
                if self.env.state.done:
                    self.env.reset(compute_observations=False)
                self.env.step([command], compute_observations=False)
                sim_time += dt
                self.ticks_served += 1

                if self.realtime:
                    next_tick_wall += dt
                    sleep_for = next_tick_wall - time.monotonic()
                    if sleep_for > 0:
                        time.sleep(sleep_for)
        finally:
            sock.close()
        return self.ticks_served
