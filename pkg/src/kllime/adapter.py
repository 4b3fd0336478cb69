"""Line-delimited JSON protocol for external predictive models.

Client -> adapter::

    {"type":"handshake","version":1}
    {"type":"predict","inputs":[[...], ...]}
    {"type":"shutdown"}

Adapter -> client::

    {"type":"handshake","version":1,"family":"bernoulli","num_posterior_samples":L}
    {"type":"predictions","params":[[{"p":0.3}, ...], ...]}     # L rows of N

Gaussian adapters emit ``{"mu":..,"sigma2":..}`` objects instead of
``{"p":..}``. One request is in flight per session.
"""
import json
import queue
import shlex
import socket
import subprocess
import sys
import threading
from dataclasses import dataclass

import numpy as np

from .divergence import BERNOULLI, FAMILIES, GAUSSIAN, PredictionMatrix

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 120.0


class AdapterError(RuntimeError):
    pass


class ProtocolError(AdapterError):
    pass


class VersionError(ProtocolError):
    pass


class TransportError(AdapterError):
    pass


def encode(obj):
    return json.dumps(obj, allow_nan=False, separators=(",", ":")) + "\n"


class LineTransport:
    """JSON-lines over a pair of binary streams.

    A daemon thread drains the read side so that ``recv`` can time out.
    """

    def __init__(self, reader, writer, timeout=DEFAULT_TIMEOUT):
        self._reader = reader
        self._writer = writer
        self.timeout = timeout
        self._lines = queue.Queue()
        self._thread = threading.Thread(target=self._pump, daemon=True)
        self._thread.start()

    def _pump(self):
        try:
            for line in iter(self._reader.readline, b""):
                self._lines.put(line)
        except (OSError, ValueError):
            pass
        self._lines.put(None)

    def send(self, obj):
        try:
            self._writer.write(encode(obj).encode("utf-8"))
            self._writer.flush()
        except (OSError, ValueError) as exc:
            raise TransportError(f"adapter write failed: {exc}") from exc

    def recv(self):
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError(f"adapter did not answer within {self.timeout:g} s") from None
        if line is None:
            self._lines.put(None)
            raise TransportError("adapter closed the connection")
        try:
            obj = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"malformed line from adapter: {line[:80]!r}") from exc
        if not isinstance(obj, dict) or "type" not in obj:
            raise ProtocolError(f"adapter message lacks a type: {line[:80]!r}")
        return obj

    def close(self):
        pass


class SubprocessTransport(LineTransport):
    def __init__(self, argv, timeout=DEFAULT_TIMEOUT):
        if isinstance(argv, str):
            argv = shlex.split(argv)
        try:
            self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise TransportError(f"cannot start adapter {argv!r}: {exc}") from exc
        super().__init__(self.proc.stdout, self.proc.stdin, timeout)

    def close(self):
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class TcpTransport(LineTransport):
    def __init__(self, address, timeout=DEFAULT_TIMEOUT):
        host, _, port = address.rpartition(":")
        try:
            self.sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
        except (OSError, ValueError) as exc:
            raise TransportError(f"cannot connect to adapter at {address}: {exc}") from exc
        self.sock.settimeout(None)
        super().__init__(self.sock.makefile("rb"), self.sock.makefile("wb"), timeout)

    def close(self):
        try:
            self._writer.close()
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


@dataclass
class AdapterSession:
    family: str
    L: int
    transport: LineTransport
    version: int = PROTOCOL_VERSION

    def predict(self, Z):
        return adapter_predict(self, Z)

    def close(self):
        try:
            self.transport.send({"type": "shutdown"})
        except TransportError:
            pass
        self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def adapter_handshake(transport):
    transport.send({"type": "handshake", "version": PROTOCOL_VERSION})
    msg = transport.recv()
    if msg.get("type") != "handshake":
        raise ProtocolError(f"expected handshake reply, got {msg.get('type')!r}: {msg.get('message', '')}")
    if msg.get("version") != PROTOCOL_VERSION:
        raise VersionError(f"adapter speaks protocol version {msg.get('version')!r}, need {PROTOCOL_VERSION}")
    family = msg.get("family")
    L = msg.get("num_posterior_samples")
    if family not in FAMILIES:
        raise ProtocolError(f"adapter declared unknown family {family!r}")
    if not isinstance(L, int) or isinstance(L, bool) or L < 1:
        raise ProtocolError(f"adapter declared invalid num_posterior_samples {L!r}")
    return AdapterSession(family, L, transport)


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ProtocolError(f"non-numeric value {v!r} at {where}")
    return float(v)


def parse_predictions(msg, family, L, N):
    if msg.get("type") != "predictions":
        raise ProtocolError(f"expected predictions, got {msg.get('type')!r}: {msg.get('message', '')}")
    params = msg.get("params")
    if not isinstance(params, list) or len(params) != L:
        got = len(params) if isinstance(params, list) else type(params).__name__
        raise ProtocolError(f"expected {L} posterior rows, got {got}")
    keys = ("p",) if family == BERNOULLI else ("mu", "sigma2")
    out = np.empty((len(keys), L, N))
    for l, row in enumerate(params):
        if not isinstance(row, list) or len(row) != N:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise ProtocolError(f"row {l}: expected {N} entries, got {got}")
        for i, obj in enumerate(row):
            where = f"sample {l}, input {i}"
            if not isinstance(obj, dict) or set(obj) != set(keys):
                raise ProtocolError(f"{where}: expected keys {keys}, got {obj!r}")
            for k, key in enumerate(keys):
                out[k, l, i] = _number(obj[key], where)
    if family == BERNOULLI:
        bad = np.argwhere((out[0] < 0) | (out[0] > 1))
        if bad.size:
            l, i = bad[0]
            raise ProtocolError(f"probability {float(out[0, l, i])!r} out of [0, 1] at sample {l}, input {i}")
        return PredictionMatrix(BERNOULLI, p=out[0])
    bad = np.argwhere(out[1] <= 0)
    if bad.size:
        l, i = bad[0]
        raise ProtocolError(f"variance {float(out[1, l, i])!r} not positive at sample {l}, input {i}")
    return PredictionMatrix(GAUSSIAN, mu=out[0], sigma2=out[1])


def adapter_predict(session, Z):
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    session.transport.send({"type": "predict", "inputs": Z.tolist()})
    return parse_predictions(session.transport.recv(), session.family, session.L, Z.shape[0])


def connect(spec, timeout=DEFAULT_TIMEOUT):
    """Open a session from ``adapter-cmd:<argv>`` or ``adapter-tcp:<host:port>``."""
    kind, _, target = spec.partition(":")
    if kind == "adapter-cmd":
        transport = SubprocessTransport(target, timeout)
    elif kind == "adapter-tcp":
        transport = TcpTransport(target, timeout)
    else:
        raise ValueError(f"not an adapter spec: {spec!r}")
    try:
        return adapter_handshake(transport)
    except AdapterError:
        transport.close()
        raise


# -- adapter side ----------------------------------------------------------

def format_predictions(preds):
    if preds.family == BERNOULLI:
        params = [[{"p": float(v)} for v in row] for row in preds.p]
    else:
        params = [[{"mu": float(m), "sigma2": float(s)} for m, s in zip(mr, sr)]
                  for mr, sr in zip(preds.mu, preds.sigma2)]
    return {"type": "predictions", "params": params}


def serve(respond, family, L, infile=None, outfile=None):
    """Answer protocol requests until shutdown or EOF.

    ``respond(Z)`` returns the reply dict for a predict request.
    """
    infile = infile or sys.stdin.buffer
    outfile = outfile or sys.stdout.buffer

    def reply(obj):
        outfile.write(encode(obj).encode("utf-8"))
        outfile.flush()

    for raw in iter(infile.readline, b""):
        try:
            msg = json.loads(raw.decode("utf-8"))
            kind = msg.get("type")
        except (UnicodeDecodeError, json.JSONDecodeError, AttributeError):
            reply({"type": "error", "message": "malformed request"})
            continue
        if kind == "handshake":
            reply({"type": "handshake", "version": PROTOCOL_VERSION, "family": family,
                   "num_posterior_samples": L})
        elif kind == "predict":
            try:
                Z = np.asarray(msg["inputs"], dtype=np.float64)
                reply(respond(np.atleast_2d(Z)))
            except Exception as exc:  # report and keep serving
                reply({"type": "error", "message": str(exc)})
        elif kind == "shutdown":
            return
        else:
            reply({"type": "error", "message": f"unknown request type {kind!r}"})


def serve_main(respond, family, L, listen=None):
    """Serve on stdio, or accept a single TCP client at ``host:port``."""
    if listen is None:
        serve(respond, family, L)
        return
    host, _, port = listen.rpartition(":")
    with socket.create_server((host or "127.0.0.1", int(port))) as srv:
        print(f"listening on {srv.getsockname()[0]}:{srv.getsockname()[1]}", file=sys.stderr, flush=True)
        conn, _ = srv.accept()
        with conn, conn.makefile("rb") as r, conn.makefile("wb") as w:
            serve(respond, family, L, r, w)
