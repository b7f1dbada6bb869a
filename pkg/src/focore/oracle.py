"""Exact denoisers backed by small known joint distributions.

Two joint representations are supported: an explicit probability table over
all sequences (sparse entry list), and a first-order homogeneous Markov
chain. Both expose the same interface: per-position conditionals computed by
exact marginalization, plus conditional entropy / mutual information for
verification.

Conditioning convention: the belief at position i is
p(x_i = v | unmasked tokens at the *other* positions). A position's own
committed token is never part of its own conditioning event, which is what
makes the belief at an already-decoded position move as the surrounding
context fills in.

Logits are log-probabilities exactly; zero-probability tokens carry the
finite sentinel LOG_PROB_FLOOR (softmax of the row underflows those entries
back to exactly zero, so the round trip is lossless).
"""

from __future__ import annotations

import itertools
import json
from typing import Sequence

import numpy as np

from .denoiser import Denoiser
from .dists import Vocab, entropy
from .errors import InconsistentEvidenceError, InvalidInputError, ValidationError

LOG_PROB_FLOOR = -1.0e4

# Enumerability guards.
MAX_TABLE_SEQ_LEN = 12
MAX_TABLE_SPACE = 2**24
MAX_MARKOV_SEQ_LEN = 64
MAX_JOINT_CELLS = 2**20

_MASS_TOL = 1e-9


def _log_probs(probs: np.ndarray) -> np.ndarray:
    out = np.full(probs.shape, LOG_PROB_FLOOR, dtype=np.float64)
    nz = probs > 0
    out[nz] = np.log(probs[nz])
    return out


class OracleModel(Denoiser):
    """Shared surface of the exact denoisers."""

    kind: str

    def __init__(self, vocab: Vocab, seq_len: int):
        self._vocab = vocab
        self._seq_len = seq_len

    def vocab(self) -> Vocab:
        return self._vocab

    def max_len(self) -> int:
        return self._seq_len

    def required_len(self) -> int | None:
        return self._seq_len

    @property
    def seq_len(self) -> int:
        return self._seq_len

    def _check_tokens(self, tokens: Sequence[int]) -> np.ndarray:
        arr = np.asarray(tokens, dtype=np.int64)
        if arr.ndim != 1 or arr.shape[0] != self._seq_len:
            raise InvalidInputError(
                f"sequence length {arr.shape[0] if arr.ndim == 1 else '?'} "
                f"!= model length {self._seq_len}"
            )
        if np.any(arr < 0) or np.any(arr >= self._vocab.size):
            raise InvalidInputError("token id outside vocabulary")
        return arr

    def forward(self, tokens: Sequence[int]) -> np.ndarray:
        arr = self._check_tokens(tokens)
        return _log_probs(self.conditionals(arr))

    def conditionals(self, tokens: Sequence[int]) -> np.ndarray:
        """(seq_len, vocab) matrix of exact leave-one-out conditionals."""
        arr = self._check_tokens(tokens)
        return self._conditionals(arr)

    def conditional(self, position: int, tokens: Sequence[int]) -> np.ndarray:
        """Conditional at one position given the other unmasked tokens."""
        return self.conditionals(tokens)[position]

    def conditional_entropy(self, position: int, tokens: Sequence[int]) -> float:
        """Entropy (nats) of the exact conditional at ``position``."""
        return entropy(self.conditional(position, tokens))

    def conditional_mi(
        self,
        target: int,
        increment: Sequence[int],
        tokens: Sequence[int],
    ) -> float:
        """Mutual information I(x_target ; x_increment | evidence), exact.

        ``target`` and every increment position must be masked in ``tokens``
        and must not overlap. Computed from the joint conditional over the
        target and increment variables (full enumeration), independently of
        the expected-KL identity the verify suite checks against it.
        """
        arr = self._check_tokens(tokens)
        inc = list(increment)
        if target in inc:
            raise InvalidInputError("target position overlaps increment set")
        for p in [target] + inc:
            if arr[p] != self._vocab.mask_id:
                raise InvalidInputError(f"position {p} must be masked")
        joint = self._joint_conditional([target] + inc, arr)
        v = self._vocab.size
        joint = joint.reshape(v, v ** len(inc))
        p_t = joint.sum(axis=1)
        p_d = joint.sum(axis=0)
        nz = joint > 0
        ratio = joint[nz] / np.outer(p_t, p_d)[nz]
        return float((joint[nz] * np.log(ratio)).sum())

    def joint_conditional(
        self, positions: Sequence[int], tokens: Sequence[int]
    ) -> np.ndarray:
        """Joint conditional of the (masked) ``positions`` given evidence.

        Returns an array of shape (vocab,)*len(positions), normalized.
        """
        arr = self._check_tokens(tokens)
        for p in positions:
            if arr[p] != self._vocab.mask_id:
                raise InvalidInputError(f"position {p} must be masked")
        if self._vocab.size ** len(positions) > MAX_JOINT_CELLS:
            raise InvalidInputError("joint conditional too large to enumerate")
        return self._joint_conditional(list(positions), arr)

    def _conditionals(self, arr: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _joint_conditional(self, positions: list[int], arr: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def mode_completion(self, tokens: Sequence[int]) -> np.ndarray:
        """Most likely full sequence consistent with the unmasked evidence."""
        raise NotImplementedError

    def dominant_sequence(self) -> np.ndarray | None:
        """The joint's mode if it carries more than half the mass, else None."""
        mask_all = np.full(self._seq_len, self._vocab.mask_id, dtype=np.int64)
        mode = self.mode_completion(mask_all)
        if self.sequence_prob(mode) > 0.5:
            return mode
        return None

    def sequence_prob(self, tokens: Sequence[int]) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        raise NotImplementedError


class TableOracle(OracleModel):
    """Joint given as an explicit sparse list of (sequence, probability)."""

    kind = "table"

    def __init__(
        self,
        vocab: Vocab,
        seq_len: int,
        entries_tokens: np.ndarray,
        entries_probs: np.ndarray,
    ):
        super().__init__(vocab, seq_len)
        if seq_len > MAX_TABLE_SEQ_LEN:
            raise ValidationError(
                f"table oracle seq_len {seq_len} > {MAX_TABLE_SEQ_LEN}"
            )
        if vocab.size**seq_len > MAX_TABLE_SPACE:
            raise ValidationError("sequence space too large for table mode")
        self.entries_tokens = np.asarray(entries_tokens, dtype=np.int64)
        self.entries_probs = np.asarray(entries_probs, dtype=np.float64)
        if self.entries_tokens.ndim != 2 or self.entries_tokens.shape[1] != seq_len:
            raise ValidationError("table entries must be (n, seq_len) token rows")
        if np.any(self.entries_tokens < 0) or np.any(
            self.entries_tokens >= vocab.size
        ):
            raise ValidationError("table entry token outside vocabulary")
        if np.any(self.entries_tokens == vocab.mask_id):
            raise ValidationError("table entries must not contain the mask id")
        if np.any(self.entries_probs <= 0):
            raise ValidationError("table entry probabilities must be positive")
        if abs(float(self.entries_probs.sum()) - 1.0) > _MASS_TOL:
            raise ValidationError(
                f"table mass {self.entries_probs.sum()!r} not 1 within {_MASS_TOL}"
            )

    def _violations(self, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-entry count of evidence mismatches, and the per-position flags."""
        evid = np.flatnonzero(arr != self._vocab.mask_id)
        if evid.size == 0:
            n = self.entries_tokens.shape[0]
            return np.zeros(n, dtype=np.int64), np.zeros((n, 0), dtype=bool)
        mism = self.entries_tokens[:, evid] != arr[evid]
        return mism.sum(axis=1), mism

    def _conditionals(self, arr: np.ndarray) -> np.ndarray:
        v = self._vocab.size
        evid = np.flatnonzero(arr != self._vocab.mask_id)
        viol_count, mism = self._violations(arr)
        out = np.zeros((self._seq_len, v), dtype=np.float64)
        evid_col = {int(p): j for j, p in enumerate(evid)}
        fully = viol_count == 0
        for i in range(self._seq_len):
            if i in evid_col:
                # Dropping i's own evidence forgives a mismatch only there.
                sel = fully | ((viol_count == 1) & mism[:, evid_col[i]])
            else:
                sel = fully
            bucket = np.bincount(
                self.entries_tokens[sel, i],
                weights=self.entries_probs[sel],
                minlength=v,
            )
            z = bucket.sum()
            if z <= 0:
                raise InconsistentEvidenceError(
                    f"evidence excluding position {i} has zero probability"
                )
            out[i] = bucket / z
        return out

    def _joint_conditional(self, positions: list[int], arr: np.ndarray) -> np.ndarray:
        v = self._vocab.size
        viol_count, _ = self._violations(arr)
        sel = viol_count == 0
        if not np.any(sel):
            raise InconsistentEvidenceError("evidence has zero probability")
        flat = np.zeros(v ** len(positions), dtype=np.float64)
        idx = np.zeros(sel.sum(), dtype=np.int64)
        for p in positions:
            idx = idx * v + self.entries_tokens[sel, p]
        np.add.at(flat, idx, self.entries_probs[sel])
        flat /= flat.sum()
        return flat.reshape((v,) * len(positions))

    def mode_completion(self, tokens: Sequence[int]) -> np.ndarray:
        arr = self._check_tokens(tokens)
        viol_count, _ = self._violations(arr)
        sel = np.flatnonzero(viol_count == 0)
        if sel.size == 0:
            raise InconsistentEvidenceError("evidence has zero probability")
        best = sel[int(np.argmax(self.entries_probs[sel]))]
        return self.entries_tokens[best].copy()

    def sequence_prob(self, tokens: Sequence[int]) -> float:
        arr = np.asarray(tokens, dtype=np.int64)
        hit = np.all(self.entries_tokens == arr, axis=1)
        return float(self.entries_probs[hit].sum())

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        i = rng.choice(self.entries_tokens.shape[0], p=self.entries_probs)
        return self.entries_tokens[i].copy()

    def to_json_dict(self) -> dict:
        return {
            "kind": "table",
            "vocab_size": self._vocab.size,
            "mask_id": self._vocab.mask_id,
            "seq_len": self._seq_len,
            "entries": [
                {"tokens": [int(t) for t in row], "prob": float(p)}
                for row, p in zip(self.entries_tokens, self.entries_probs)
            ],
        }


class MarkovOracle(OracleModel):
    """Joint defined by an initial distribution and a transition matrix.

    Conditionals come from one forward-backward sweep: the pre-evidence
    forward message at position i times the backward message excludes i's
    own evidence factor, which is exactly the leave-one-out conditional.
    """

    kind = "markov"

    def __init__(
        self,
        vocab: Vocab,
        seq_len: int,
        initial: np.ndarray,
        transition: np.ndarray,
    ):
        super().__init__(vocab, seq_len)
        if seq_len > MAX_MARKOV_SEQ_LEN:
            raise ValidationError(
                f"markov oracle seq_len {seq_len} > {MAX_MARKOV_SEQ_LEN}"
            )
        self.initial = np.asarray(initial, dtype=np.float64)
        self.transition = np.asarray(transition, dtype=np.float64)
        v = vocab.size
        if self.initial.shape != (v,) or self.transition.shape != (v, v):
            raise ValidationError("initial/transition shapes do not match vocab")
        if np.any(self.initial < 0) or np.any(self.transition < 0):
            raise ValidationError("negative probability in chain parameters")
        if abs(float(self.initial.sum()) - 1.0) > _MASS_TOL:
            raise ValidationError("initial distribution mass not 1")
        rows = self.transition.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > _MASS_TOL):
            raise ValidationError("transition matrix rows must sum to 1")
        if self.initial[vocab.mask_id] != 0 or np.any(
            self.transition[:, vocab.mask_id] != 0
        ):
            raise ValidationError("chain must place no mass on the mask id")

    def _evidence_flags(self, arr: np.ndarray) -> np.ndarray:
        v = self._vocab.size
        flags = np.ones((self._seq_len, v), dtype=np.float64)
        for i, t in enumerate(arr):
            if t != self._vocab.mask_id:
                flags[i] = 0.0
                flags[i, t] = 1.0
        return flags

    def _conditionals(self, arr: np.ndarray) -> np.ndarray:
        n, v = self._seq_len, self._vocab.size
        e = self._evidence_flags(arr)
        # pre[i] is the forward message before applying evidence at i.
        pre = np.zeros((n, v), dtype=np.float64)
        pre[0] = self.initial
        post = pre[0] * e[0]
        for i in range(1, n):
            pre[i] = post @ self.transition
            post = pre[i] * e[i]
        back = np.zeros((n, v), dtype=np.float64)
        back[n - 1] = 1.0
        for i in range(n - 2, -1, -1):
            back[i] = self.transition @ (e[i + 1] * back[i + 1])
        out = pre * back
        z = out.sum(axis=1)
        if np.any(z <= 0):
            bad = int(np.flatnonzero(z <= 0)[0])
            raise InconsistentEvidenceError(
                f"evidence excluding position {bad} has zero probability"
            )
        return out / z[:, None]

    def _evidence_prob(self, arr: np.ndarray) -> float:
        e = self._evidence_flags(arr)
        msg = self.initial * e[0]
        for i in range(1, self._seq_len):
            msg = (msg @ self.transition) * e[i]
        return float(msg.sum())

    def _joint_conditional(self, positions: list[int], arr: np.ndarray) -> np.ndarray:
        v = self._vocab.size
        z = self._evidence_prob(arr)
        if z <= 0:
            raise InconsistentEvidenceError("evidence has zero probability")
        flat = np.zeros(v ** len(positions), dtype=np.float64)
        work = arr.copy()
        # mask_id never carries mass, and assigning it would read as "no
        # evidence here", so enumerate real token values only.
        values = [t for t in range(v) if t != self._vocab.mask_id]
        for vals in itertools.product(values, repeat=len(positions)):
            for p, val in zip(positions, vals):
                work[p] = val
            idx = 0
            for val in vals:
                idx = idx * v + val
            flat[idx] = self._evidence_prob(work)
        flat /= flat.sum()
        return flat.reshape((v,) * len(positions))

    def mode_completion(self, tokens: Sequence[int]) -> np.ndarray:
        arr = self._check_tokens(tokens)
        n, v = self._seq_len, self._vocab.size
        e = self._evidence_flags(arr)
        delta = self.initial * e[0]
        back_ptr = np.zeros((n, v), dtype=np.int64)
        for i in range(1, n):
            cand = delta[:, None] * self.transition
            back_ptr[i] = np.argmax(cand, axis=0)
            delta = cand[back_ptr[i], np.arange(v)] * e[i]
        out = np.zeros(n, dtype=np.int64)
        out[n - 1] = int(np.argmax(delta))
        if delta[out[n - 1]] <= 0:
            raise InconsistentEvidenceError("evidence has zero probability")
        for i in range(n - 1, 0, -1):
            out[i - 1] = back_ptr[i, out[i]]
        return out

    def sequence_prob(self, tokens: Sequence[int]) -> float:
        arr = np.asarray(tokens, dtype=np.int64)
        p = float(self.initial[arr[0]])
        for i in range(1, self._seq_len):
            p *= float(self.transition[arr[i - 1], arr[i]])
        return p

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        out = np.zeros(self._seq_len, dtype=np.int64)
        out[0] = rng.choice(self._vocab.size, p=self.initial)
        for i in range(1, self._seq_len):
            out[i] = rng.choice(self._vocab.size, p=self.transition[out[i - 1]])
        return out

    def to_json_dict(self) -> dict:
        return {
            "kind": "markov",
            "vocab_size": self._vocab.size,
            "mask_id": self._vocab.mask_id,
            "seq_len": self._seq_len,
            "initial": [float(x) for x in self.initial],
            "transition": [[float(x) for x in row] for row in self.transition],
        }


def model_from_json_dict(doc: dict) -> OracleModel:
    """Build an oracle from its file representation, validating strictly."""
    if not isinstance(doc, dict):
        raise ValidationError("model file must hold a JSON object")
    for field in ("kind", "vocab_size", "mask_id", "seq_len"):
        if field not in doc:
            raise ValidationError(f"model file missing field '{field}'")
    vocab = Vocab(size=int(doc["vocab_size"]), mask_id=int(doc["mask_id"]))
    seq_len = int(doc["seq_len"])
    if seq_len < 1:
        raise ValidationError("seq_len must be positive")
    kind = doc["kind"]
    if kind == "table":
        entries = doc.get("entries")
        if not isinstance(entries, list) or not entries:
            raise ValidationError("table model needs a non-empty 'entries' list")
        toks = np.array([e["tokens"] for e in entries], dtype=np.int64)
        probs = np.array([e["prob"] for e in entries], dtype=np.float64)
        return TableOracle(vocab, seq_len, toks, probs)
    if kind == "markov":
        if "initial" not in doc or "transition" not in doc:
            raise ValidationError("markov model needs 'initial' and 'transition'")
        return MarkovOracle(
            vocab,
            seq_len,
            np.array(doc["initial"], dtype=np.float64),
            np.array(doc["transition"], dtype=np.float64),
        )
    raise ValidationError(f"unknown model kind '{kind}'")


def load_model(path: str) -> OracleModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_json_dict(doc)


def save_model(model: OracleModel, path: str) -> None:
    # entry tables can run to thousands of rows; keep the file compact
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json_dict(), fh, separators=(",", ":"))
        fh.write("\n")
