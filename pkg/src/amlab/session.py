"""Protocol sessions: coin streams, transcripts, replay, and the runner registry.

Sessions are public-coin by construction.  All verifier randomness comes
from one counter-based stream that is derived from the session seed and
logged, so a transcript can always be replayed: rebuilding the stream
from the seed and feeding the recorded prover messages back through the
verifier must reproduce the verdict bit for bit.  A replayed round whose
verifier message disagrees with the recomputation rejects.

Prover misbehavior is a verdict, not an error: malformed payloads and
blown message budgets turn into reject-with-diagnostic so that soundness
statements quantify over arbitrary prover behavior.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

MAX_ROUNDS = 64
MAX_PAYLOAD_ITEMS = 20_000_000


class ProtocolReject(Exception):
    """Raised inside a runner to reject with a diagnostic."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def canonical_json(obj) -> str:
    """Deterministic JSON; floats are banned because they are not canonical."""
    _check_canon(obj)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _check_canon(obj):
    if obj is None or isinstance(obj, (bool, int, str)):
        return
    if isinstance(obj, float):
        raise TypeError("floats are not allowed in canonical payloads")
    if isinstance(obj, (list, tuple)):
        for v in obj:
            _check_canon(v)
        return
    if isinstance(obj, dict):
        for k, v in obj.items():
            if not isinstance(k, str):
                raise TypeError("payload keys must be strings")
            _check_canon(v)
        return
    raise TypeError(f"non-serializable payload element {type(obj).__name__}")


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def _payload_items(obj) -> int:
    if isinstance(obj, (list, tuple)):
        return 1 + sum(_payload_items(v) for v in obj)
    if isinstance(obj, dict):
        return 1 + sum(_payload_items(v) for v in obj.values())
    return 1


def _seed_bytes(seed) -> bytes:
    if isinstance(seed, bytes):
        return seed
    if isinstance(seed, int):
        return seed.to_bytes(16, "big", signed=False)
    if isinstance(seed, str):
        return seed.encode()
    raise TypeError("seed must be bytes, int, or str")


class CoinStream:
    """Counter-based deterministic bit stream with a consumption log.

    Block i is sha256(seed || i); bits are consumed most significant
    first within each block.  The log records every consumed block, so
    the stream that produced a transcript is reconstructible from the
    seed alone and auditable from the log.
    """

    def __init__(self, seed):
        self.seed = _seed_bytes(seed)
        self._counter = 0
        self._buf = 0
        self._buf_bits = 0
        self._blocks_used = 0

    def _next_block(self) -> int:
        h = hashlib.sha256(self.seed + self._counter.to_bytes(8, "big")).digest()
        self._counter += 1
        self._blocks_used += 1
        return int.from_bytes(h, "big")

    def draw_bits(self, nbits: int) -> int:
        if nbits < 0:
            raise ValueError("nbits must be nonnegative")
        while self._buf_bits < nbits:
            self._buf = (self._buf << 256) | self._next_block()
            self._buf_bits += 256
        shift = self._buf_bits - nbits
        out = self._buf >> shift
        self._buf &= (1 << shift) - 1
        self._buf_bits = shift
        return out

    def draw_below(self, k: int) -> int:
        """Uniform integer in [0, k) by rejection sampling."""
        if k < 1:
            raise ValueError("k must be positive")
        if k == 1:
            return 0
        nbits = (k - 1).bit_length()
        while True:
            v = self.draw_bits(nbits)
            if v < k:
                return v

    def draw_array(self, count: int, nbits: int) -> np.ndarray:
        """count samples of nbits bits each; same bit stream as draw_bits.

        The stream is one contiguous MSB-first bit sequence over the hash
        blocks, so pulling count*nbits bits at once and splitting them is
        exactly equivalent to count sequential draw_bits calls.
        """
        if nbits > 62:
            raise ValueError("nbits too large for the bulk path")
        if count == 0 or nbits == 0:
            return np.zeros(count, dtype=np.int64)
        total = count * nbits
        need = total - self._buf_bits
        nblocks = max(0, -(-need // 256))
        if nblocks:
            raw = b"".join(
                hashlib.sha256(self.seed + (self._counter + i).to_bytes(8, "big")).digest()
                for i in range(nblocks)
            )
            self._counter += nblocks
            self._blocks_used += nblocks
            self._buf = (self._buf << (256 * nblocks)) | int.from_bytes(raw, "big")
            self._buf_bits += 256 * nblocks
        shift = self._buf_bits - total
        chunk = self._buf >> shift
        self._buf &= (1 << shift) - 1
        self._buf_bits = shift
        nbytes = -(-total // 8)
        pad = nbytes * 8 - total
        byts = (chunk << pad).to_bytes(nbytes, "big")
        bits = np.unpackbits(np.frombuffer(byts, dtype=np.uint8))[:total]
        weights = 1 << np.arange(nbits - 1, -1, -1, dtype=np.int64)
        return bits.reshape(count, nbits).astype(np.int64) @ weights

    def log_hex(self) -> str:
        """Hex of every block consumed so far, in order."""
        parts = []
        for i in range(self._blocks_used):
            parts.append(hashlib.sha256(self.seed + i.to_bytes(8, "big")).hexdigest())
        return "".join(parts)


@dataclass
class Round:
    sender: str  # "verifier" | "prover"
    index: int
    payload: dict

    def to_json_dict(self) -> dict:
        return {"sender": self.sender, "index": self.index, "payload": self.payload}


@dataclass
class Transcript:
    protocol: str
    instance_digest: str
    seed_hex: str
    rounds: list[Round]
    coins_hex: str
    verdict: str
    detail: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    def to_json_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "instance_digest": self.instance_digest,
            "seed": self.seed_hex,
            "rounds": [r.to_json_dict() for r in self.rounds],
            "coins": self.coins_hex,
            "verdict": self.verdict,
            "detail": self.detail,
            "timing_s": round(self.elapsed, 6),
        }

    def stable_digest(self) -> str:
        """Digest of everything except wall-clock timing."""
        d = self.to_json_dict()
        d.pop("timing_s")
        return digest(d)

    @staticmethod
    def from_json_dict(d: dict) -> "Transcript":
        rounds = [Round(r["sender"], r["index"], r["payload"]) for r in d["rounds"]]
        return Transcript(d["protocol"], d["instance_digest"], d["seed"], rounds,
                          d["coins"], d["verdict"], d.get("detail", {}),
                          d.get("timing_s", 0.0))


class ProverStrategy:
    """Deterministic map from (instance, messages so far) to the next message."""

    name = "abstract"

    def respond(self, instance, rounds: list[Round]) -> dict:
        raise NotImplementedError


class _ReplayProver(ProverStrategy):
    """Feeds back the prover messages recorded in a transcript."""

    name = "replay"

    def __init__(self, recorded: list[Round]):
        self._msgs = [r.payload for r in recorded if r.sender == "prover"]
        self._next = 0

    def respond(self, instance, rounds):
        if self._next >= len(self._msgs):
            raise ProtocolReject("replay exhausted: prover message missing")
        msg = self._msgs[self._next]
        self._next += 1
        return msg


class Session:
    """One protocol execution: coin stream, round log, budget guards."""

    def __init__(self, protocol: str, instance_digest: str, prover: ProverStrategy,
                 seed, expected_rounds: Optional[list[Round]] = None):
        self.protocol = protocol
        self.instance_digest = instance_digest
        self.prover_strategy = prover
        self.seed = _seed_bytes(seed)
        self.coins = CoinStream(self.seed)
        self.rounds: list[Round] = []
        self._expected = expected_rounds

    def _append(self, sender: str, payload: dict):
        if len(self.rounds) >= MAX_ROUNDS:
            raise ProtocolReject("round budget exceeded")
        if _payload_items(payload) > MAX_PAYLOAD_ITEMS:
            raise ProtocolReject("message too large")
        canonical_json(payload)  # validates shape
        idx = len(self.rounds)
        if self._expected is not None:
            if idx >= len(self._expected):
                raise ProtocolReject("replay: unexpected extra round")
            rec = self._expected[idx]
            if sender == "verifier" and (rec.sender != sender or rec.payload != payload):
                raise ProtocolReject("replay: verifier message inconsistent")
        self.rounds.append(Round(sender, idx, payload))

    def verifier_message(self, payload: dict):
        self._append("verifier", payload)

    def prover_message(self, instance) -> dict:
        payload = self.prover_strategy.respond(instance, list(self.rounds))
        if not isinstance(payload, dict):
            raise ProtocolReject("malformed: prover payload is not an object")
        self._append("prover", payload)
        return payload


# runner(instance, session) -> (accept: bool, detail: dict)
Runner = Callable[[Any, Session], tuple]


@dataclass(frozen=True)
class ProtocolDef:
    name: str
    run: Runner
    instance_to_json: Callable[[Any], dict]
    instance_from_json: Callable[[dict], Any]


PROTOCOLS: dict[str, ProtocolDef] = {}


def register_protocol(defn: ProtocolDef):
    PROTOCOLS[defn.name] = defn


def instance_digest(protocol: str, instance) -> str:
    return digest(PROTOCOLS[protocol].instance_to_json(instance))


def run_session(protocol: str, instance, prover: ProverStrategy, seed,
                expected_rounds: Optional[list[Round]] = None) -> Transcript:
    """Execute one session and return its transcript.

    Prover-caused failures (malformed messages, blown budgets) reject;
    only genuine instance errors raise.
    """
    defn = PROTOCOLS[protocol]
    inst_digest = instance_digest(protocol, instance)
    session = Session(protocol, inst_digest, prover, seed, expected_rounds)
    start = time.perf_counter()
    try:
        accept, detail = defn.run(instance, session)
        verdict = "accept" if accept else "reject"
    except ProtocolReject as exc:
        verdict = "reject"
        detail = {"diagnostic": exc.reason}
    elapsed = time.perf_counter() - start
    return Transcript(protocol, inst_digest, session.seed.hex(), session.rounds,
                      session.coins.log_hex(), verdict, detail, elapsed)


def replay(transcript: Transcript, instance) -> Transcript:
    """Re-run a transcript against the verifier; verdicts must reproduce."""
    prover = _ReplayProver(transcript.rounds)
    return run_session(transcript.protocol, instance, prover,
                       bytes.fromhex(transcript.seed_hex),
                       expected_rounds=transcript.rounds)
