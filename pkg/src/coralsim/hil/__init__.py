"""Cyber-physical loop: wire protocol, mock plant, inference client."""

from .client import (ClientReport, ConnectionLostError, build_twin_from_checkpoint,
                     run_inference_client)
from .plant import MockPlant
from .protocol import (AckMsg, CoralFeedback, MalformedFrameError,
                       MotionCommandMsg, PoseFeedbackMsg, ResetMsg, checksum16,
                       decode_frame, encode_frame)

__all__ = [
    "AckMsg", "ClientReport", "ConnectionLostError", "CoralFeedback",
    "MalformedFrameError", "MockPlant", "MotionCommandMsg", "PoseFeedbackMsg",
    "ResetMsg", "build_twin_from_checkpoint", "checksum16", "decode_frame",
    "encode_frame", "run_inference_client",
]
