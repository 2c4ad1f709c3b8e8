"""External scorer plugins over a newline-delimited JSON protocol.

A plugin is any executable that reads one JSON request object per line on
stdin and answers one JSON response per line on stdout:

    request:  {"id": "...", "task": "...", "frames": [paths], "params": {}}
    response: {"id": "...", "ok": true, "scores"|"boxes"|"embedding"|"text": ...}
              {"id": "...", "ok": false, "error": "..."}

Tasks: aesthetic, embed, ocr, motion, caption_image, caption_video,
caption_merge, classify. Frames are spooled to disk as binary PPM; the
plugin process is spawned once and reused for every request in a run.
"""

from __future__ import annotations

import json
import os
import queue
import shlex
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ProtocolError, SpawnFailure, Timeout
from .media import FrameBuffer, write_ppm

TMPDIR_ENV = "CURATE_TMPDIR"

_EOF = object()


@dataclass(frozen=True)
class ScorerSpec:
    kind: str = "builtin"  # "builtin" | "external"
    command: str = ""
    timeout: float = 30.0

    def __post_init__(self):
        if self.kind not in ("builtin", "external"):
            raise ValueError(f"unknown scorer kind {self.kind!r}")
        if self.kind == "external" and not self.command.strip():
            raise ValueError("external scorer requires a command")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "command": self.command, "timeout": self.timeout}

    @classmethod
    def from_dict(cls, d: dict) -> "ScorerSpec":
        return cls(
            kind=d.get("kind", "builtin"),
            command=d.get("command", ""),
            timeout=float(d.get("timeout", 30.0)),
        )


class SidecarClient:
    """One plugin process with a synchronous request/response loop."""

    def __init__(self, spec: ScorerSpec):
        if spec.kind != "external":
            raise ValueError("SidecarClient requires an external ScorerSpec")
        self.spec = spec
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                shlex.split(spec.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot start {spec.command!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(_EOF)

    def request(
        self,
        task: str,
        frames: Sequence[str] = (),
        params: dict | None = None,
    ) -> dict:
        """Send one request and wait for its response (matched by id)."""
        self._next_id += 1
        req_id = str(self._next_id)
        payload = {
            "id": req_id,
            "task": task,
            "frames": list(frames),
            "params": params or {},
        }
        if self._proc.poll() is not None:
            raise ProtocolError("plugin process already exited")
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(json.dumps(payload) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"plugin stdin closed: {exc}") from exc

        deadline = time.monotonic() + self.spec.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.kill()
                raise Timeout(f"no response to {task!r} in {self.spec.timeout}s")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                self.kill()
                raise Timeout(f"no response to {task!r} in {self.spec.timeout}s")
            if line is _EOF:
                raise ProtocolError("plugin closed stdout mid-request")
            line = line.strip()
            if not line:
                continue
            try:
                response = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"non-JSON response line: {line[:80]!r}") from exc
            if not isinstance(response, dict) or response.get("id") != req_id:
                raise ProtocolError(
                    f"response id {response.get('id')!r} != request id {req_id!r}"
                )
            if not response.get("ok"):
                raise ProtocolError(str(response.get("error", "plugin error")))
            return response

    def kill(self) -> None:
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def close(self) -> None:
        """EOF the plugin's stdin and wait for a clean exit."""
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.kill()

    def __enter__(self) -> "SidecarClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def frame_tmpdir() -> str:
    return os.environ.get(TMPDIR_ENV) or tempfile.gettempdir()


class FrameSpool:
    """Worker-private scratch directory of PPM frames for plugin requests."""

    def __init__(self):
        self._dir = tempfile.mkdtemp(prefix="curate-frames-", dir=frame_tmpdir())
        self._count = 0

    def write(self, frames: Sequence[FrameBuffer]) -> list[str]:
        paths = []
        for frame in frames:
            path = Path(self._dir) / f"frame-{self._count:06d}.ppm"
            path.write_bytes(write_ppm(frame))
            paths.append(str(path))
            self._count += 1
        return paths

    def cleanup(self) -> None:
        for p in Path(self._dir).glob("frame-*.ppm"):
            p.unlink(missing_ok=True)
        try:
            os.rmdir(self._dir)
        except OSError:
            pass
