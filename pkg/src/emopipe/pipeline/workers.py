"""The four pipeline workers: input -> model -> controller -> view.

Downstream workers are requesters and upstream workers bind.  Every worker
binds its own listening socket before connecting upstream, so start order
does not matter.  Closing a link without ``done`` (a crash or a kill) is
treated by the peer exactly like ``done``.
"""

from __future__ import annotations

import csv
import logging
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, TextIO

import numpy as np

from .. import features as F
from ..errors import DimensionMismatch, NoExtractorConfigured, ProtocolViolation
from ..nn import MlpModel, read_model
from ..wire import (CONNECT_ATTEMPTS, CONNECT_INTERVAL, Emotion, Image, Landmarks,
                    Requester, Responder, run_requester)

log = logging.getLogger(__name__)

VIEW_LABELS = ("happiness", "neutral")


def input_run(source, endpoint: str, accept_timeout: Optional[float] = 30.0) -> int:
    frames = source.frames()
    responder = Responder(endpoint, accept_timeout=accept_timeout)
    try:
        outcome = responder.serve(frames)
    finally:
        responder.close()
    log.info("input: served %d frames (%s)", responder.sent, outcome)
    return 0


def model_run(upstream: str, downstream: str,
              image_transform: Optional[Callable[[bytes], bytes]] = None,
              accept_timeout: Optional[float] = 30.0,
              connect_attempts: int = CONNECT_ATTEMPTS,
              connect_interval: float = CONNECT_INTERVAL) -> int:
    """Forward frames unchanged, passing image bytes through ``image_transform``."""
    skipped = 0
    responder = Responder(downstream, accept_timeout=accept_timeout)
    try:
        requester = Requester(upstream, connect_attempts, connect_interval)
        try:
            def provide():
                nonlocal skipped
                for msg in requester:
                    if isinstance(msg, Image) and image_transform is not None:
                        try:
                            msg = Image(msg.frame_id, image_transform(msg.data))
                        except Exception:
                            log.exception("model: transform failed on frame %d", msg.frame_id)
                            skipped += 1
                            continue
                    elif not isinstance(msg, (Image, Landmarks)):
                        raise ProtocolViolation(
                            f"model received {type(msg).__name__} from upstream")
                    yield msg
            responder.serve(provide())
        finally:
            requester.finish()
    finally:
        responder.close()
    log.info("model: forwarded %d frames, skipped %d", responder.sent, skipped)
    return 0


@dataclass
class ControllerStats:
    no_face: int = 0
    trace: list = field(default_factory=list)  # (frame_id, ingress_ns, egress_ns)


def load_classifier(model_file, representation: str) -> MlpModel:
    model = read_model(model_file)
    if not isinstance(model, MlpModel):
        raise DimensionMismatch("the controller runs MLP models only")
    if representation not in ("absolute", "modified"):
        raise ValueError(f"controller representation must be absolute or modified, "
                         f"got {representation!r}")
    expected = F.feature_dim(representation)
    if model.input_dim != expected:
        raise DimensionMismatch(
            f"model takes {model.input_dim} inputs but {representation} features have {expected}")
    if model.n_classes != 2:
        raise DimensionMismatch(f"emotion payloads carry 2 classes, model has {model.n_classes}")
    return model


def classify(model: MlpModel, frame_id: int, points, representation: str) -> Emotion:
    probs = model.forward(F.featurize(np.asarray(points, dtype=np.float64), representation))
    return Emotion.from_probs(frame_id, probs[0], probs[1])


def controller_run(upstream: str, downstream: str, model_file, representation: str = "modified",
                   extractor=None, trace_path=None, stats: Optional[ControllerStats] = None,
                   accept_timeout: Optional[float] = 30.0,
                   connect_attempts: int = CONNECT_ATTEMPTS,
                   connect_interval: float = CONNECT_INTERVAL) -> int:
    model = load_classifier(model_file, representation)
    stats = stats if stats is not None else ControllerStats()
    pending = {}

    responder = Responder(downstream, accept_timeout=accept_timeout)
    try:
        requester = Requester(upstream, connect_attempts, connect_interval)
        try:
            def provide():
                for msg in requester:
                    ingress = time.perf_counter_ns()
                    if isinstance(msg, Landmarks):
                        points = msg.points
                    elif isinstance(msg, Image):
                        if extractor is None:
                            raise NoExtractorConfigured(
                                f"image frame {msg.frame_id} arrived but no extractor is set")
                        points = extractor.extract(msg.data)
                        if points is None:
                            stats.no_face += 1
                            continue
                    else:
                        raise ProtocolViolation(
                            f"controller received {type(msg).__name__} from upstream")
                    pending[msg.frame_id] = ingress
                    yield classify(model, msg.frame_id, points, representation)

            def on_reply(emotion):
                stats.trace.append((emotion.frame_id, pending.pop(emotion.frame_id),
                                    time.perf_counter_ns()))

            responder.serve(provide(), on_reply=on_reply)
        finally:
            requester.finish()
    finally:
        responder.close()
        if trace_path is not None:
            write_trace(trace_path, stats.trace)
    log.info("controller: %d emotions, %d frames without a face", responder.sent, stats.no_face)
    return 0


def write_trace(path, trace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_id", "ingress_ns", "egress_ns"])
        w.writerows(trace)


def read_trace(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    return [(int(a), int(b), int(c)) for a, b, c in rows]


def format_emotion(e: Emotion) -> str:
    return (f"{e.frame_id}\t{VIEW_LABELS[e.label_index]}\t"
            f"{e.prob_happiness:.4f}\t{e.prob_neutral:.4f}\n")


def view_run(upstream: str, out: Optional[TextIO] = None,
             connect_attempts: int = CONNECT_ATTEMPTS,
             connect_interval: float = CONNECT_INTERVAL) -> int:
    out = out if out is not None else sys.stdout

    def sink(msg):
        if not isinstance(msg, Emotion):
            raise ProtocolViolation(f"view expects emotions, got {type(msg).__name__}")
        out.write(format_emotion(msg))
        out.flush()

    n = run_requester(upstream, sink, connect_attempts, connect_interval)
    log.info("view: displayed %d results", n)
    return 0
