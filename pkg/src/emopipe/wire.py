"""Length-prefixed framing and the ready/done request-reply handshake.

Frame layout::

    [u32 BE payload length][u8 tag][body ...]

Body integers and floats are little-endian.  One request is outstanding per
link at a time: the requester sends ``ready`` and the responder answers with
exactly one frame.  Either side may send ``done`` in place of its next
expected message, after which both sides close the link.
"""

from __future__ import annotations

import logging
import socket
import struct
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Union

import numpy as np

from .errors import (
    BindFailure,
    ConnectFailure,
    LengthMismatch,
    MalformedBody,
    ProtocolViolation,
    UnknownTag,
)

log = logging.getLogger(__name__)

TAG_CONTROL = 0x01
TAG_IMAGE = 0x02
TAG_LANDMARKS = 0x03
TAG_EMOTION = 0x04

READY = "ready"
DONE = "done"

N_POINTS = 68
LANDMARKS_BODY_SIZE = 4 + N_POINTS * 2 * 4
EMOTION_BODY_SIZE = 4 + 4 + 4 + 1
PROB_SUM_TOL = 1e-5

CONNECT_ATTEMPTS = 10
CONNECT_INTERVAL = 0.2

_HEADER = struct.Struct(">I")
_U32 = struct.Struct("<I")
_EMOTION = struct.Struct("<IffB")


def _f32(x) -> float:
    return float(np.float32(x))


@dataclass(frozen=True)
class Control:
    token: str

    def __post_init__(self):
        if self.token not in (READY, DONE):
            raise ValueError(f"control token must be 'ready' or 'done', got {self.token!r}")


@dataclass(frozen=True)
class Image:
    frame_id: int
    data: bytes


@dataclass(frozen=True, eq=False)
class Landmarks:
    """68 (x, y) pixel coordinates, stored as float32 exactly as sent."""

    frame_id: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float32).reshape(-1, 2)
        if pts.shape != (N_POINTS, 2):
            raise ValueError(f"expected {N_POINTS} points, got {pts.shape[0]}")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        if not isinstance(other, Landmarks):
            return NotImplemented
        return (self.frame_id == other.frame_id
                and self.points.tobytes() == other.points.tobytes())

    def __hash__(self):
        return hash((self.frame_id, self.points.tobytes()))


@dataclass(frozen=True)
class Emotion:
    frame_id: int
    prob_happiness: float
    prob_neutral: float
    label_index: int

    def __post_init__(self):
        ph, pn = _f32(self.prob_happiness), _f32(self.prob_neutral)
        object.__setattr__(self, "prob_happiness", ph)
        object.__setattr__(self, "prob_neutral", pn)
        if not (0.0 <= ph <= 1.0 and 0.0 <= pn <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(ph + pn - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {ph + pn}, expected 1")
        if self.label_index != argmax2(ph, pn):
            raise ValueError("label_index must be the argmax of the probabilities")

    @classmethod
    def from_probs(cls, frame_id: int, prob_happiness: float, prob_neutral: float) -> "Emotion":
        ph, pn = _f32(prob_happiness), _f32(prob_neutral)
        return cls(frame_id, ph, pn, argmax2(ph, pn))


Payload = Union[Control, Image, Landmarks, Emotion]

READY_MSG = Control(READY)
DONE_MSG = Control(DONE)


def argmax2(a: float, b: float) -> int:
    """Index of the larger value; ties go to 0."""
    return 1 if b > a else 0


def encode_frame(payload: Payload) -> bytes:
    if isinstance(payload, Control):
        body = bytes([TAG_CONTROL]) + payload.token.encode("utf-8")
    elif isinstance(payload, Image):
        body = bytes([TAG_IMAGE]) + _U32.pack(payload.frame_id) + bytes(payload.data)
    elif isinstance(payload, Landmarks):
        body = (bytes([TAG_LANDMARKS]) + _U32.pack(payload.frame_id)
                + payload.points.astype("<f4").tobytes())
    elif isinstance(payload, Emotion):
        body = bytes([TAG_EMOTION]) + _EMOTION.pack(
            payload.frame_id, payload.prob_happiness, payload.prob_neutral,
            payload.label_index)
    else:
        raise TypeError(f"not a wire payload: {type(payload).__name__}")
    return _HEADER.pack(len(body)) + body


def decode_payload(payload: bytes) -> Payload:
    """Parse the tag+body part of a frame (everything after the length prefix)."""
    if len(payload) < 1:
        raise MalformedBody("empty payload, tag byte missing")
    tag, body = payload[0], payload[1:]
    if tag == TAG_CONTROL:
        try:
            token = body.decode("utf-8")
            return Control(token)
        except (UnicodeDecodeError, ValueError) as exc:
            raise MalformedBody(f"bad control token: {body!r}") from exc
    if tag == TAG_IMAGE:
        if len(body) < 4:
            raise MalformedBody("image body shorter than frame_id")
        return Image(_U32.unpack_from(body)[0], bytes(body[4:]))
    if tag == TAG_LANDMARKS:
        if len(body) != LANDMARKS_BODY_SIZE:
            raise MalformedBody(
                f"landmarks body is {len(body)} bytes, expected {LANDMARKS_BODY_SIZE}")
        pts = np.frombuffer(body, dtype="<f4", offset=4).reshape(N_POINTS, 2)
        return Landmarks(_U32.unpack_from(body)[0], pts)
    if tag == TAG_EMOTION:
        if len(body) != EMOTION_BODY_SIZE:
            raise MalformedBody(
                f"emotion body is {len(body)} bytes, expected {EMOTION_BODY_SIZE}")
        frame_id, ph, pn, label = _EMOTION.unpack(body)
        try:
            return Emotion(frame_id, ph, pn, label)
        except ValueError as exc:
            raise MalformedBody(str(exc)) from exc
    raise UnknownTag(f"unknown tag 0x{tag:02x}")


def decode_frame(data: bytes) -> Payload:
    if len(data) < _HEADER.size:
        raise LengthMismatch(f"frame of {len(data)} bytes has no complete length prefix")
    (length,) = _HEADER.unpack_from(data)
    if length != len(data) - _HEADER.size:
        raise LengthMismatch(
            f"declared length {length}, available {len(data) - _HEADER.size}")
    return decode_payload(data[_HEADER.size:])


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not host:
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host, int(port)


class PeerClosed(Exception):
    """The other end of a link went away without sending ``done``."""


class Link:
    """A framed message channel over one connected socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock

    def send(self, payload: Payload) -> None:
        try:
            self.sock.sendall(encode_frame(payload))
        except OSError as exc:
            raise PeerClosed(str(exc)) from exc

    def _recv_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(n - len(buf))
            except OSError as exc:
                raise PeerClosed(str(exc)) from exc
            if not chunk:
                raise PeerClosed("connection closed")
            buf.extend(chunk)
        return bytes(buf)

    def recv(self) -> Payload:
        (length,) = _HEADER.unpack(self._recv_exact(_HEADER.size))
        return decode_payload(self._recv_exact(length))

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class Exhausted(Exception):
    """Raised by a provider callable when it has nothing more to send."""


Provider = Union[Callable[[], Payload], Iterable[Payload]]


def _as_next(provider: Provider) -> Callable[[], Payload]:
    if callable(provider) and not isinstance(provider, Iterator):
        return provider
    it = iter(provider)

    def _next():
        try:
            return next(it)
        except StopIteration:
            raise Exhausted from None
    return _next


class Responder:
    """Server side of a link: binds at construction, answers each ``ready``.

    Binding happens eagerly so that a requester started earlier or later can
    connect as soon as this object exists; the connection is accepted lazily
    by :meth:`serve`.
    """

    def __init__(self, endpoint: str, accept_timeout: Optional[float] = 30.0):
        host, port = parse_endpoint(endpoint)
        self.endpoint = endpoint
        self.accept_timeout = accept_timeout
        self.sent = 0
        self.link: Optional[Link] = None
        self._pending = False
        self._finished = False
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
            sock.listen(1)
        except OSError as exc:
            sock.close()
            raise BindFailure(f"cannot bind {endpoint}: {exc}") from exc
        self._listener = sock

    def accept(self) -> Link:
        if self.link is None:
            self._listener.settimeout(self.accept_timeout)
            try:
                conn, _ = self._listener.accept()
            except socket.timeout as exc:
                raise ConnectFailure(f"no requester connected to {self.endpoint}") from exc
            finally:
                self._listener.close()
            conn.settimeout(None)
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self.link = Link(conn)
        return self.link

    def serve(self, provider: Provider,
              on_reply: Optional[Callable[[Payload], None]] = None) -> str:
        """Answer requests until one side finishes.

        Returns ``"exhausted"`` when the provider ran out (``done`` was sent),
        ``"done"`` when the requester sent ``done`` and ``"closed"`` when the
        requester vanished.  If the provider raises, ``done`` is sent in reply
        to the pending request before the exception propagates.
        """
        next_item = _as_next(provider)
        link = self.accept()
        try:
            while True:
                try:
                    msg = link.recv()
                except PeerClosed:
                    return "closed"
                if not isinstance(msg, Control):
                    raise ProtocolViolation(
                        f"expected a control frame, got {type(msg).__name__}")
                if msg.token == DONE:
                    return "done"
                self._pending = True
                try:
                    item = next_item()
                except Exhausted:
                    self._reply(DONE_MSG)
                    return "exhausted"
                try:
                    self._reply(item)
                except PeerClosed:
                    return "closed"
                self.sent += 1
                if on_reply is not None:
                    on_reply(item)
        except BaseException:
            self.abort()
            raise
        finally:
            self._finished = True
            link.close()

    def _reply(self, payload: Payload) -> None:
        self.link.send(payload)
        self._pending = False

    def abort(self) -> None:
        """Send ``done`` in place of the reply owed to the requester, if any."""
        if self._pending and self.link is not None:
            try:
                self._reply(DONE_MSG)
            except PeerClosed:
                pass

    def close(self) -> None:
        if self.link is None:
            self._listener.close()
        else:
            self.link.close()


class Requester:
    """Client side of a link: connects with retry, sends ``ready`` per item."""

    def __init__(self, endpoint: str, attempts: int = CONNECT_ATTEMPTS,
                 interval: float = CONNECT_INTERVAL):
        self.endpoint = endpoint
        self.received = 0
        self.finished = False
        host, port = parse_endpoint(endpoint)
        last = None
        for attempt in range(attempts):
            try:
                sock = socket.create_connection((host, port))
                break
            except OSError as exc:
                last = exc
                if attempt + 1 < attempts:
                    time.sleep(interval)
        else:
            raise ConnectFailure(
                f"could not reach {endpoint} after {attempts} attempts: {last}")
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.link = Link(sock)

    def request(self) -> Optional[Payload]:
        """Fetch the next data frame, or None once the responder is done."""
        if self.finished:
            return None
        try:
            self.link.send(READY_MSG)
            msg = self.link.recv()
        except PeerClosed:
            self._close()
            return None
        if isinstance(msg, Control):
            if msg.token == DONE:
                self._close()
                return None
            raise ProtocolViolation("responder answered 'ready' with 'ready'")
        self.received += 1
        return msg

    def __iter__(self) -> Iterator[Payload]:
        while (msg := self.request()) is not None:
            yield msg

    def finish(self) -> None:
        """Send ``done`` instead of the next ``ready`` (no-op if already closed)."""
        if not self.finished:
            try:
                self.link.send(DONE_MSG)
            except PeerClosed:
                pass
            self._close()

    def _close(self) -> None:
        self.finished = True
        self.link.close()


def serve_responder(endpoint: str, next_item: Provider,
                    accept_timeout: Optional[float] = 30.0) -> str:
    """Bind ``endpoint`` and answer ``ready`` requests from ``next_item``.

    ``next_item`` is either an iterable of payloads or a zero-argument
    callable that raises :class:`Exhausted` when empty.
    """
    responder = Responder(endpoint, accept_timeout=accept_timeout)
    return responder.serve(next_item)


def run_requester(endpoint: str, sink: Callable[[Payload], Optional[bool]],
                  attempts: int = CONNECT_ATTEMPTS,
                  interval: float = CONNECT_INTERVAL) -> int:
    """Request frames from ``endpoint`` and hand each one to ``sink``.

    The sink stops the session by returning ``False`` (a clean abort) or by
    raising; either way ``done`` goes upstream in place of the next ``ready``.
    Returns the number of payloads delivered.
    """
    req = Requester(endpoint, attempts=attempts, interval=interval)
    delivered = 0
    try:
        while (msg := req.request()) is not None:
            delivered += 1
            if sink(msg) is False:
                break
    finally:
        req.finish()
    return delivered
