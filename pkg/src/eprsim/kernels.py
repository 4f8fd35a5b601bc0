"""Hot per-trial kernels: counter-based RNG plus vectorized trial loops.

Every random number in the simulator comes from a counter-based generator
(philox4x32, 10 rounds) keyed by the 64-bit run seed and indexed by
``(trial, slot)``. Draw j of trial i is a pure function of (seed, i, j), so
trials own statistically independent streams, any subset of trials can be
computed in any order or on any worker with bit-identical results, and slots
a protocol never reads cost nothing. Slot layout per trial:

    0  settings-pair selection (randomized-settings runs only)
    1  measurement-order selection (random-order runs only)
    2  emission (hidden parameter / handedness; entangled models skip it)
    3  arm-A coin
    4  arm-B coin

Each kernel exists twice: a numba ``@njit`` per-trial loop and a pure-numpy
vectorized fallback. Both consume identical counter-based draws and the same
arithmetic, so per-trial outcomes agree exactly; which one runs is selected
by the ``EPR_KERNEL_BACKEND`` environment variable ("auto", "numba" or
"numpy"; auto prefers numba when importable). ``benchmarks/kernel_benchmark.py``
compares the two.

Outcome coins are compared with strict less-than, so a probability snapped to
exactly 0 never fires and a probability of exactly 1 always does.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


SLOT_SETTINGS = 0
SLOT_ORDERING = 1
SLOT_EMISSION = 2
SLOT_ARM_A = 3
SLOT_ARM_B = 4
DRAWS_PER_TRIAL = 5

MODEL_QM = 0
MODEL_NDV = 1
MODEL_DEFINITE_CIRCULAR = 2
MODEL_LHV_SIGN = 3
MODEL_LHV_MALUS = 4

MODEL_CODES = {
    "qm": MODEL_QM,
    "ndv": MODEL_NDV,
    "definite-circular": MODEL_DEFINITE_CIRCULAR,
    "lhv-sign": MODEL_LHV_SIGN,
    "lhv-malus": MODEL_LHV_MALUS,
}

ORDER_ARM1_FIRST = 0
ORDER_ARM2_FIRST = 1
ORDER_RANDOM = 2

# Chain-protocol response classes: the formal model, the definite-helicity
# model, and everything that answers each arm with an independent 1/2
# (the collapse narrative and all hidden-linear-polarization models).
QWP_QM = 0
QWP_INDEPENDENT_HALVES = 1
QWP_DEFINITE_CIRCULAR = 2

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_SHIFT32 = np.uint64(32)
_SHIFT11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53
_HALF_PI = math.pi / 2
_PI = math.pi
_ZERO_PROB = 1e-24

_BACKEND: str | None = None


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if HAS_NUMBA else ("numpy",)


def backend() -> str:
    """The backend in force, resolved once from EPR_KERNEL_BACKEND."""
    global _BACKEND
    if _BACKEND is None:
        requested = os.environ.get("EPR_KERNEL_BACKEND", "auto").strip().lower()
        if requested not in ("auto", "numba", "numpy"):
            raise ValueError(
                f"EPR_KERNEL_BACKEND must be auto, numba or numpy, got {requested!r}"
            )
        if requested == "numba" and not HAS_NUMBA:
            raise ValueError("EPR_KERNEL_BACKEND=numba but numba is not importable")
        if requested == "auto":
            requested = "numba" if HAS_NUMBA else "numpy"
        _BACKEND = requested
    return _BACKEND


def set_backend(name: str | None) -> None:
    """Force a backend ("numba"/"numpy"), or None to re-read the environment."""
    global _BACKEND
    if name is not None and name not in available_backends():
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _BACKEND = name


def _key_words(seed: int) -> tuple[np.uint64, np.uint64]:
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(s & 0xFFFFFFFF), np.uint64(s >> 32)


def _philox_words_numpy(c0, c1, c2, c3, k0, k1):
    """philox4x32-10 over broadcastable uint64 counter words (values < 2**32)."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1


def _u53_from_words(x0, x1):
    return (((x0 << _SHIFT32) | x1) >> _SHIFT11).astype(np.float64) * _INV53


def _uniforms_numpy(seed: int, start: int, count: int, slot: int) -> np.ndarray:
    k0, k1 = _key_words(seed)
    t = np.arange(start, start + count, dtype=np.uint64)
    x0, x1 = _philox_words_numpy(
        t & _MASK32, t >> _SHIFT32, np.uint64(int(slot) & 0xFFFFFFFF), np.uint64(0), k0, k1
    )
    return _u53_from_words(x0, x1)


def _trial_uniforms_numpy(seed: int, trial: int, start_slot: int, count: int) -> np.ndarray:
    k0, k1 = _key_words(seed)
    t = np.uint64(int(trial) & 0xFFFFFFFFFFFFFFFF)
    slots = np.arange(start_slot, start_slot + count, dtype=np.uint64) & _MASK32
    x0, x1 = _philox_words_numpy(t & _MASK32, t >> _SHIFT32, slots, np.uint64(0), k0, k1)
    return _u53_from_words(x0, x1)


if HAS_NUMBA:

    @njit(cache=True, nogil=True, inline="always")
    def _u53(k0, k1, trial, slot):
        c0 = trial & _MASK32
        c1 = trial >> _SHIFT32
        c2 = slot
        c3 = np.uint64(0)
        for _ in range(10):
            p0 = _M0 * c0
            p1 = _M1 * c2
            hi0 = p0 >> _SHIFT32
            lo0 = p0 & _MASK32
            hi1 = p1 >> _SHIFT32
            lo1 = p1 & _MASK32
            c0 = hi1 ^ c1 ^ k0
            c1 = lo1
            c2 = hi0 ^ c3 ^ k1
            c3 = lo0
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        return np.float64(((c0 << _SHIFT32) | c1) >> _SHIFT11) * _INV53

    @njit(cache=True, nogil=True)
    def _uniforms_numba(k0, k1, start, count, slot):
        out = np.empty(count, dtype=np.float64)
        s = np.uint64(slot)
        for i in range(count):
            out[i] = _u53(k0, k1, np.uint64(start + i), s)
        return out

    @njit(cache=True, nogil=True, inline="always")
    def _malus_prob(delta):
        c = np.cos(delta)
        p = c * c
        if p < _ZERO_PROB:
            return 0.0
        if p > 1.0:
            return 1.0
        return p

    @njit(cache=True, nogil=True)
    def _malus_numba(k0, k1, start, count, theta):
        out = np.empty(count, dtype=np.uint8)
        p = _malus_prob(theta)
        slot = np.uint64(SLOT_ARM_A)
        for i in range(count):
            out[i] = np.uint8(1) if _u53(k0, k1, np.uint64(start + i), slot) < p else np.uint8(0)
        return out

    @njit(cache=True, nogil=True)
    def _two_channel_numba(k0, k1, start, count, model_code, pair_a, pair_b, cumw, ordering_mode):
        pair_idx = np.empty(count, dtype=np.int32)
        out_a = np.empty(count, dtype=np.int8)
        out_b = np.empty(count, dtype=np.int8)
        npairs = pair_a.shape[0]
        s_set = np.uint64(SLOT_SETTINGS)
        s_ord = np.uint64(SLOT_ORDERING)
        s_emit = np.uint64(SLOT_EMISSION)
        s_a = np.uint64(SLOT_ARM_A)
        s_b = np.uint64(SLOT_ARM_B)
        for i in range(count):
            t = np.uint64(start + i)
            pj = 0
            if npairs > 1:
                u = _u53(k0, k1, t, s_set)
                while pj < npairs - 1 and u >= cumw[pj]:
                    pj += 1
            a = pair_a[pj]
            b = pair_b[pj]
            arm2_first = ordering_mode == ORDER_ARM2_FIRST
            if ordering_mode == ORDER_RANDOM:
                arm2_first = _u53(k0, k1, t, s_ord) >= 0.5
            u_a = _u53(k0, k1, t, s_a)
            u_b = _u53(k0, k1, t, s_b)
            if model_code == MODEL_QM or model_code == MODEL_NDV:
                # First analyzer answers 1/2 (the entangled-state marginal,
                # also the collapse narrative's literal value); the second
                # photon is linear along the first one's exit channel and
                # answers by the Malus rule.
                if not arm2_first:
                    oa = u_a < 0.5
                    alpha = a if oa else a + _HALF_PI
                    ob = u_b < _malus_prob(alpha - b)
                else:
                    ob = u_b < 0.5
                    beta = b if ob else b + _HALF_PI
                    oa = u_a < _malus_prob(beta - a)
            elif model_code == MODEL_DEFINITE_CIRCULAR:
                # A circular photon takes either exit of a linear analyzer
                # with probability 1/2, whatever the orientation.
                oa = u_a < 0.5
                ob = u_b < 0.5
            elif model_code == MODEL_LHV_SIGN:
                lam = _PI * _u53(k0, k1, t, s_emit)
                oa = u_a < (1.0 if np.cos(2.0 * (a - lam)) > 0.0 else 0.0)
                ob = u_b < (1.0 if np.cos(2.0 * (b - lam)) > 0.0 else 0.0)
            else:  # MODEL_LHV_MALUS
                lam = _PI * _u53(k0, k1, t, s_emit)
                oa = u_a < _malus_prob(a - lam)
                ob = u_b < _malus_prob(b - lam)
            pair_idx[i] = pj
            out_a[i] = np.int8(1) if oa else np.int8(-1)
            out_b[i] = np.int8(1) if ob else np.int8(-1)
        return pair_idx, out_a, out_b

    @njit(cache=True, nogil=True)
    def _qwp_numba(k0, k1, start, count, qwp_code, ordering_mode):
        det_a = np.empty(count, dtype=np.uint8)
        det_b = np.empty(count, dtype=np.uint8)
        s_ord = np.uint64(SLOT_ORDERING)
        s_emit = np.uint64(SLOT_EMISSION)
        s_a = np.uint64(SLOT_ARM_A)
        s_b = np.uint64(SLOT_ARM_B)
        for i in range(count):
            t = np.uint64(start + i)
            if qwp_code == QWP_DEFINITE_CIRCULAR:
                # Right-handed pairs clear both right-helicity analyzers with
                # certainty; left-handed pairs are blocked on both arms.
                rr = _u53(k0, k1, t, s_emit) < 0.5
                da = rr
                db = rr
            elif qwp_code == QWP_QM:
                # The first chain transmits with probability 1/2; reduction
                # leaves the partner in the state its own chain passes with
                # probability exactly 1 (or blocks exactly, on absorption).
                arm2_first = ordering_mode == ORDER_ARM2_FIRST
                if ordering_mode == ORDER_RANDOM:
                    arm2_first = _u53(k0, k1, t, s_ord) >= 0.5
                if not arm2_first:
                    da = _u53(k0, k1, t, s_a) < 0.5
                    db = da
                else:
                    db = _u53(k0, k1, t, s_b) < 0.5
                    da = db
            else:  # QWP_INDEPENDENT_HALVES
                # Collapse narrative / hidden linear polarization: each arm's
                # plate-plus-polarizer passes with probability 1/2 regardless
                # of what the other arm saw.
                da = _u53(k0, k1, t, s_a) < 0.5
                db = _u53(k0, k1, t, s_b) < 0.5
            det_a[i] = np.uint8(1) if da else np.uint8(0)
            det_b[i] = np.uint8(1) if db else np.uint8(0)
        return det_a, det_b


def _malus_prob_array(delta: np.ndarray) -> np.ndarray:
    p = np.cos(delta) ** 2
    p[p < _ZERO_PROB] = 0.0
    np.clip(p, 0.0, 1.0, out=p)
    return p


def _resolve_first_arm2(seed, trials, count, ordering_mode):
    if ordering_mode == ORDER_RANDOM:
        k0, k1 = _key_words(seed)
        x0, x1 = _philox_words_numpy(
            trials & _MASK32, trials >> _SHIFT32, np.uint64(SLOT_ORDERING), np.uint64(0), k0, k1
        )
        return _u53_from_words(x0, x1) >= 0.5
    return np.full(count, ordering_mode == ORDER_ARM2_FIRST)


def _two_channel_numpy(seed, start, count, model_code, pair_a, pair_b, cumw, ordering_mode):
    if pair_a.size > 1:
        u = _uniforms_numpy(seed, start, count, SLOT_SETTINGS)
        pair_idx = np.searchsorted(cumw, u, side="right").astype(np.int32)
        np.clip(pair_idx, 0, pair_a.size - 1, out=pair_idx)
    else:
        pair_idx = np.zeros(count, dtype=np.int32)
    a = pair_a[pair_idx]
    b = pair_b[pair_idx]
    u_a = _uniforms_numpy(seed, start, count, SLOT_ARM_A)
    u_b = _uniforms_numpy(seed, start, count, SLOT_ARM_B)
    if model_code in (MODEL_QM, MODEL_NDV):
        trials = np.arange(start, start + count, dtype=np.uint64)
        arm2_first = _resolve_first_arm2(seed, trials, count, ordering_mode)
        oa = np.empty(count, dtype=bool)
        ob = np.empty(count, dtype=bool)
        m1 = ~arm2_first
        first_plus = u_a[m1] < 0.5
        alpha = np.where(first_plus, a[m1], a[m1] + _HALF_PI)
        oa[m1] = first_plus
        ob[m1] = u_b[m1] < _malus_prob_array(alpha - b[m1])
        m2 = arm2_first
        first_plus = u_b[m2] < 0.5
        beta = np.where(first_plus, b[m2], b[m2] + _HALF_PI)
        ob[m2] = first_plus
        oa[m2] = u_a[m2] < _malus_prob_array(beta - a[m2])
    elif model_code == MODEL_DEFINITE_CIRCULAR:
        oa = u_a < 0.5
        ob = u_b < 0.5
    elif model_code == MODEL_LHV_SIGN:
        lam = _PI * _uniforms_numpy(seed, start, count, SLOT_EMISSION)
        oa = u_a < (np.cos(2.0 * (a - lam)) > 0.0).astype(np.float64)
        ob = u_b < (np.cos(2.0 * (b - lam)) > 0.0).astype(np.float64)
    elif model_code == MODEL_LHV_MALUS:
        lam = _PI * _uniforms_numpy(seed, start, count, SLOT_EMISSION)
        oa = u_a < _malus_prob_array(a - lam)
        ob = u_b < _malus_prob_array(b - lam)
    else:
        raise ValueError(f"unknown model code {model_code!r}")
    out_a = np.where(oa, 1, -1).astype(np.int8)
    out_b = np.where(ob, 1, -1).astype(np.int8)
    return pair_idx, out_a, out_b


def _qwp_numpy(seed, start, count, qwp_code, ordering_mode):
    trials = np.arange(start, start + count, dtype=np.uint64)
    if qwp_code == QWP_DEFINITE_CIRCULAR:
        rr = _uniforms_numpy(seed, start, count, SLOT_EMISSION) < 0.5
        det_a = rr
        det_b = rr.copy()
    elif qwp_code == QWP_QM:
        arm2_first = _resolve_first_arm2(seed, trials, count, ordering_mode)
        det_a = np.empty(count, dtype=bool)
        det_b = np.empty(count, dtype=bool)
        u_a = _uniforms_numpy(seed, start, count, SLOT_ARM_A)
        u_b = _uniforms_numpy(seed, start, count, SLOT_ARM_B)
        m1 = ~arm2_first
        det_a[m1] = u_a[m1] < 0.5
        det_b[m1] = det_a[m1]
        det_b[arm2_first] = u_b[arm2_first] < 0.5
        det_a[arm2_first] = det_b[arm2_first]
    elif qwp_code == QWP_INDEPENDENT_HALVES:
        det_a = _uniforms_numpy(seed, start, count, SLOT_ARM_A) < 0.5
        det_b = _uniforms_numpy(seed, start, count, SLOT_ARM_B) < 0.5
    else:
        raise ValueError(f"unknown chain response code {qwp_code!r}")
    return det_a.astype(np.uint8), det_b.astype(np.uint8)


def _malus_numpy(seed, start, count, theta):
    c = math.cos(theta)
    p = c * c
    if p < _ZERO_PROB:
        p = 0.0
    p = min(p, 1.0)
    u = _uniforms_numpy(seed, start, count, SLOT_ARM_A)
    return (u < p).astype(np.uint8)


def _use_numba() -> bool:
    return backend() == "numba"


def uniform_block(seed: int, start: int, count: int, slot: int) -> np.ndarray:
    """Uniform [0, 1) draws for trials [start, start+count) at one slot."""
    if _use_numba():
        k0, k1 = _key_words(seed)
        return _uniforms_numba(k0, k1, start, count, slot)
    return _uniforms_numpy(seed, start, count, slot)


def trial_uniforms(seed: int, trial: int, start_slot: int, count: int) -> np.ndarray:
    """Consecutive draws of one trial's stream (slots start_slot..+count)."""
    return _trial_uniforms_numpy(seed, trial, start_slot, count)


def malus_block(seed: int, start: int, count: int, theta: float) -> np.ndarray:
    """Single-photon polarizer transmissions at relative angle theta (1 = pass)."""
    if _use_numba():
        k0, k1 = _key_words(seed)
        return _malus_numba(k0, k1, start, count, theta)
    return _malus_numpy(seed, start, count, theta)


def two_channel_block(
    seed: int,
    start: int,
    count: int,
    model_code: int,
    pair_a: np.ndarray,
    pair_b: np.ndarray,
    cumw: np.ndarray,
    ordering_mode: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-trial two-channel outcomes (+1 parallel / -1 perpendicular)."""
    if _use_numba():
        k0, k1 = _key_words(seed)
        return _two_channel_numba(
            k0, k1, start, count, model_code, pair_a, pair_b, cumw, ordering_mode
        )
    return _two_channel_numpy(seed, start, count, model_code, pair_a, pair_b, cumw, ordering_mode)


def qwp_block(
    seed: int, start: int, count: int, qwp_code: int, ordering_mode: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial detection flags behind the plate-plus-polarizer chains."""
    if _use_numba():
        k0, k1 = _key_words(seed)
        return _qwp_numba(k0, k1, start, count, qwp_code, ordering_mode)
    return _qwp_numpy(seed, start, count, qwp_code, ordering_mode)


def qwp_code_for(kernel_id: str | None) -> int:
    """Chain-response class for a model's kernel id (None = custom LHV)."""
    if kernel_id == "qm":
        return QWP_QM
    if kernel_id == "definite-circular":
        return QWP_DEFINITE_CIRCULAR
    return QWP_INDEPENDENT_HALVES


def two_channel_block_lhv(
    seed: int,
    start: int,
    count: int,
    sample_fn,
    response_a,
    response_b,
    pair_a: np.ndarray,
    pair_b: np.ndarray,
    cumw: np.ndarray,
    ordering_mode: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two-channel outcomes for a custom factorized model (numpy path only).

    The model's sampler and responses are arbitrary Python callables, so this
    never routes through numba; determinism still holds because the draws are
    counter-based.
    """
    if pair_a.size > 1:
        u = _uniforms_numpy(seed, start, count, SLOT_SETTINGS)
        pair_idx = np.searchsorted(cumw, u, side="right").astype(np.int32)
        np.clip(pair_idx, 0, pair_a.size - 1, out=pair_idx)
    else:
        pair_idx = np.zeros(count, dtype=np.int32)
    lam = np.asarray(sample_fn(_uniforms_numpy(seed, start, count, SLOT_EMISSION)), dtype=float)
    p_a = np.empty(count)
    p_b = np.empty(count)
    for j in range(pair_a.size):
        mask = pair_idx == j
        if not np.any(mask):
            continue
        p_a[mask] = np.asarray(response_a(float(pair_a[j]), lam[mask]), dtype=float)
        p_b[mask] = np.asarray(response_b(float(pair_b[j]), lam[mask]), dtype=float)
    oa = _uniforms_numpy(seed, start, count, SLOT_ARM_A) < p_a
    ob = _uniforms_numpy(seed, start, count, SLOT_ARM_B) < p_b
    return pair_idx, np.where(oa, 1, -1).astype(np.int8), np.where(ob, 1, -1).astype(np.int8)
