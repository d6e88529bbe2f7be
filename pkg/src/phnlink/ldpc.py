"""Rate-1/2, block-length-1296 LDPC encoding and sum-product decoding.

The default code is the quasi-cyclic wireless-LAN-family construction at
lifting factor Z = 54: a 12 x 24 base matrix of circulant permutation shifts
(-1 marks an all-zero block) whose parity part carries the dual-diagonal
structure that makes systematic encoding a single sparse solve.  The same
matrix ships in the repo as an alist file and any parity-check matrix in
alist format can be loaded instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError

LLR_CLIP = 30.0

# Base matrix for the bundled n=1296, rate-1/2 code (Z = 54); entries are
# cyclic-shift exponents, -1 means a zero block.
_BASE_1296_R12 = [
    [40, -1, -1, -1, 22, -1, 49, 23, 43, -1, -1, -1,  1,  0, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1],
    [50,  1, -1, -1, 48, 35, -1, -1, 13, -1, 30, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1, -1, -1],
    [39, 50, -1, -1,  4, -1,  2, -1, -1, -1, -1, 49, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1, -1],
    [33, -1, -1, 38, 37, -1, -1,  4,  1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1],
    [45, -1, -1, -1,  0, 22, -1, -1, 20, 42, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1],
    [51, -1, -1, 48, 35, -1, -1, -1, 44, -1, 18, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1],
    [47, 11, -1, -1, -1, 17, -1, -1, 51, -1, -1, -1,  0, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1],
    [ 5, -1, 25, -1,  6, -1, 45, -1, 13, 40, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1],
    [33, -1, -1, 34, 24, -1, -1, -1, 23, -1, -1, 46, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1],
    [ 1, -1, 27, -1,  1, -1, -1, -1, 38, -1, 44, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1],
    [-1, 18, -1, -1, 23, -1, -1,  8,  0, 35, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0],
    [49, -1, 17, -1, 30, -1, -1, -1, 34, -1, -1, 19,  1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0],
]
_LIFT = 54

_DEFAULT_ALIST = Path(__file__).parent / "data" / "qc_1296_rate12.alist"


def expand_base_matrix(base, z: int) -> np.ndarray:
    """Lift a base matrix of circulant shifts into the full binary H."""
    base = np.asarray(base, dtype=int)
    rows, cols = base.shape
    h = np.zeros((rows * z, cols * z), dtype=np.uint8)
    eye = np.eye(z, dtype=np.uint8)
    for i in range(rows):
        for j in range(cols):
            shift = base[i, j]
            if shift >= 0:
                h[i * z:(i + 1) * z, j * z:(j + 1) * z] = np.roll(eye, -(shift % z), axis=1)
    return h


def _gf2_inverse(a: np.ndarray) -> np.ndarray:
    """Invert a square binary matrix over GF(2) by Gauss-Jordan elimination."""
    n = a.shape[0]
    work = np.concatenate([a.astype(np.uint8).copy(), np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        pivot_rows = np.nonzero(work[col:, col])[0]
        if pivot_rows.size == 0:
            raise ConfigError("parity part of H is singular over GF(2)")
        pivot = col + pivot_rows[0]
        if pivot != col:
            work[[col, pivot]] = work[[pivot, col]]
        elim = np.nonzero(work[:, col])[0]
        elim = elim[elim != col]
        work[elim] ^= work[col]
    return work[:, n:]


@dataclass(frozen=True)
class LdpcCode:
    """A binary LDPC code defined by its parity-check matrix."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.uint8)
        object.__setattr__(self, "h", h)
        h.setflags(write=False)
        m, n = h.shape
        object.__setattr__(self, "_n", n)
        object.__setattr__(self, "_k", n - m)
        # Systematic encoder: parity = (H_p^-1 H_u) msg over GF(2).
        h_u = h[:, : self._k].astype(np.uint8)
        h_p = h[:, self._k:].astype(np.uint8)
        enc = (_gf2_inverse(h_p) @ h_u) % 2
        object.__setattr__(self, "_encode_matrix", enc.astype(np.uint8))
        # Edge bookkeeping for the message-passing decoder.
        chk_idx, var_idx = np.nonzero(h)
        object.__setattr__(self, "_chk_of_edge", chk_idx.astype(np.int64))
        object.__setattr__(self, "_var_of_edge", var_idx.astype(np.int64))
        chk_starts = np.searchsorted(chk_idx, np.arange(m))
        object.__setattr__(self, "_chk_starts", chk_starts)
        order_by_var = np.argsort(var_idx, kind="stable")
        object.__setattr__(self, "_order_by_var", order_by_var)
        var_sorted = var_idx[order_by_var]
        object.__setattr__(self, "_var_starts", np.searchsorted(var_sorted, np.arange(n)))
        object.__setattr__(self, "_var_sorted_idx", var_sorted)

    @property
    def n(self) -> int:
        return self._n

    @property
    def k(self) -> int:
        return self._k

    @property
    def rate(self) -> float:
        return self._k / self._n

    @classmethod
    def default(cls) -> "LdpcCode":
        """The bundled quasi-cyclic (1296, 648) code."""
        return cls(h=expand_base_matrix(_BASE_1296_R12, _LIFT))

    @classmethod
    def from_alist(cls, path) -> "LdpcCode":
        return cls(h=read_alist(path))

    # -- encoding ----------------------------------------------------------

    def encode(self, msg) -> np.ndarray:
        """Systematic codeword [msg | parity] with zero syndrome."""
        msg = np.asarray(msg, dtype=np.uint8).reshape(-1)
        if msg.size != self._k:
            raise ConfigError(f"message must have {self._k} bits, got {msg.size}")
        parity = (self._encode_matrix @ msg) % 2
        return np.concatenate([msg, parity.astype(np.uint8)])

    def syndrome(self, codeword) -> np.ndarray:
        cw = np.asarray(codeword, dtype=np.uint8).reshape(-1)
        return (self.h @ cw) % 2

    # -- decoding ----------------------------------------------------------

    def decode(self, llrs, max_iters: int = 50) -> tuple[np.ndarray, bool, int]:
        """Log-domain sum-product decoding (tanh rule).

        llrs are channel LLRs with positive meaning bit 0.  Returns the hard
        decisions for the full codeword, a convergence flag (zero syndrome),
        and the number of iterations used.
        """
        llrs = np.asarray(llrs, dtype=np.float64).reshape(-1)
        if llrs.size != self._n:
            raise ConfigError(f"need {self._n} LLRs, got {llrs.size}")
        if not np.all(np.isfinite(llrs)):
            raise ConfigError("LLRs must be finite")
        lch = np.clip(llrs, -LLR_CLIP, LLR_CLIP)
        chk = self._chk_of_edge
        var = self._var_of_edge
        chk_starts = self._chk_starts
        var_starts = self._var_starts
        by_var = self._order_by_var

        r_msg = np.zeros(chk.size)  # check -> variable messages, edge order
        hard = (lch < 0).astype(np.uint8)
        for it in range(1, max_iters + 1):
            # variable -> check: channel LLR plus all incoming except own edge
            r_by_var = r_msg[by_var]
            var_sums = np.add.reduceat(r_by_var, var_starts)
            q_msg = np.clip(lch[var] + var_sums[var] - r_msg, -LLR_CLIP, LLR_CLIP)

            # check -> variable via the tanh rule, leave-one-out in log domain
            t = np.tanh(0.5 * q_msg)
            sign = np.where(t < 0, -1.0, 1.0)
            mag = np.maximum(np.abs(t), 1e-300)
            log_mag = np.log(mag)
            chk_log = np.add.reduceat(log_mag, chk_starts)
            chk_sign = np.where(np.add.reduceat((sign < 0).astype(np.int64), chk_starts) % 2, -1.0, 1.0)
            loo = np.exp(chk_log[chk] - log_mag) * chk_sign[chk] * sign
            loo = np.clip(loo, -0.9999999999999998, 0.9999999999999998)
            r_msg = 2.0 * np.arctanh(loo)

            r_by_var = r_msg[by_var]
            var_sums = np.add.reduceat(r_by_var, var_starts)
            posterior = lch + var_sums
            hard = (posterior < 0).astype(np.uint8)
            if not self.syndrome(hard).any():
                return hard, True, it
        return hard, False, max_iters


# ---------------------------------------------------------------------------
# alist I/O (MacKay's sparse-matrix text format, 1-based indices)
# ---------------------------------------------------------------------------

def write_alist(h: np.ndarray, path) -> None:
    h = np.asarray(h, dtype=np.uint8)
    m, n = h.shape
    col_lists = [list(np.nonzero(h[:, j])[0] + 1) for j in range(n)]
    row_lists = [list(np.nonzero(h[i, :])[0] + 1) for i in range(m)]
    max_col = max(len(c) for c in col_lists)
    max_row = max(len(r) for r in row_lists)
    lines = [f"{n} {m}", f"{max_col} {max_row}"]
    lines.append(" ".join(str(len(c)) for c in col_lists))
    lines.append(" ".join(str(len(r)) for r in row_lists))
    for c in col_lists:
        padded = c + [0] * (max_col - len(c))
        lines.append(" ".join(str(x) for x in padded))
    for r in row_lists:
        padded = r + [0] * (max_row - len(r))
        lines.append(" ".join(str(x) for x in padded))
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    pos = 0

    def take(count):
        nonlocal pos
        vals = [int(t) for t in tokens[pos:pos + count]]
        pos += count
        return vals

    n, m = take(2)
    max_col, _max_row = take(2)
    col_deg = take(n)
    _row_deg = take(m)
    h = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        entries = take(max_col)
        for e in entries[: col_deg[j]]:
            if e > 0:
                h[e - 1, j] = 1
    return h


def bundled_alist_path() -> Path:
    """Location of the shipped default parity-check matrix."""
    return _DEFAULT_ALIST
