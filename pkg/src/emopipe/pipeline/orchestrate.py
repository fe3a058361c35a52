"""Start the four workers as separate processes and wait for them."""

from __future__ import annotations

import logging
import multiprocessing as mp
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..errors import ChildStartFailure, NonzeroChildExit
from ..wire import CONNECT_ATTEMPTS, CONNECT_INTERVAL
from . import workers

log = logging.getLogger(__name__)

DEFAULT_PORT_BASE = 7701
ENDPOINT_ENV = "EMOPIPE_ENDPOINT_BASE"
WORKER_NAMES = ("input", "model", "controller", "view")


def default_endpoints(port_base: Optional[int] = None, host: str = "127.0.0.1") -> tuple:
    if port_base is None:
        port_base = int(os.environ.get(ENDPOINT_ENV, DEFAULT_PORT_BASE))
    return tuple(f"{host}:{port_base + i}" for i in range(3))


@dataclass
class PipelineConfig:
    model_path: str
    source: Any
    representation: str = "modified"
    endpoints: tuple = field(default_factory=default_endpoints)
    view_output: Optional[str] = None
    trace_path: Optional[str] = None
    image_transform: Optional[Callable[[bytes], bytes]] = None
    extractor: Any = None
    accept_timeout: float = 30.0
    connect_attempts: int = CONNECT_ATTEMPTS
    connect_interval: float = CONNECT_INTERVAL


def _child(fn, kwargs, view_output=None):
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                        format="%(processName)s: %(message)s")
    try:
        if view_output is not None:
            with open(view_output, "w", encoding="utf-8", newline="\n") as out:
                code = fn(out=out, **kwargs)
        else:
            code = fn(**kwargs)
    except Exception as exc:
        print(f"{mp.current_process().name}: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = 1
    sys.stdout.flush()
    sys.exit(code)


class Orchestrator:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.procs: dict = {}

    def _targets(self):
        c = self.config
        up_model, up_ctrl, up_view = c.endpoints
        retry = dict(connect_attempts=c.connect_attempts, connect_interval=c.connect_interval)
        return {
            "input": (workers.input_run, dict(source=c.source, endpoint=up_model,
                                              accept_timeout=c.accept_timeout)),
            "model": (workers.model_run, dict(upstream=up_model, downstream=up_ctrl,
                                              image_transform=c.image_transform,
                                              accept_timeout=c.accept_timeout, **retry)),
            "controller": (workers.controller_run, dict(
                upstream=up_ctrl, downstream=up_view, model_file=c.model_path,
                representation=c.representation, extractor=c.extractor,
                trace_path=c.trace_path, accept_timeout=c.accept_timeout, **retry)),
            "view": (workers.view_run, dict(upstream=up_view, **retry)),
        }

    def start(self) -> None:
        # fail before any worker exists if the model cannot serve this representation
        workers.load_classifier(self.config.model_path, self.config.representation)
        ctx = mp.get_context("spawn")
        for name, (fn, kwargs) in self._targets().items():
            view_out = self.config.view_output if name == "view" else None
            p = ctx.Process(target=_child, args=(fn, kwargs, view_out), name=name)
            try:
                p.start()
            except Exception as exc:
                self.terminate()
                raise ChildStartFailure(f"could not start {name}: {exc}") from exc
            self.procs[name] = p

    def wait(self, timeout: Optional[float] = None) -> dict:
        """Join every worker; returns name -> exit code (None if still running)."""
        deadline = None if timeout is None else time.monotonic() + timeout
        for p in self.procs.values():
            remaining = None if deadline is None else max(0.0, deadline - time.monotonic())
            p.join(remaining)
        return self.exit_codes()

    def exit_codes(self) -> dict:
        return {name: p.exitcode for name, p in self.procs.items()}

    def kill(self, name: str) -> None:
        self.procs[name].kill()

    def terminate(self) -> None:
        for p in self.procs.values():
            if p.is_alive():
                p.kill()
        for p in self.procs.values():
            p.join(1.0)

    def run(self, timeout: Optional[float] = None) -> int:
        self.start()
        try:
            codes = self.wait(timeout)
        finally:
            self.terminate()
        bad = {n: c for n, c in codes.items() if c != 0}
        if bad:
            raise NonzeroChildExit(bad)
        return 0


def orchestrate(config: PipelineConfig, timeout: Optional[float] = None) -> int:
    return Orchestrator(config).run(timeout)
