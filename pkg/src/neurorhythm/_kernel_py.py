"""Pure-Python (numpy) simulation kernel.

Fallback for when the compiled ``_kernel`` extension is unavailable. Must stay
bit-identical to ``_kernel.pyx``: same update order and the same grouping of
every floating-point expression. The exponential goes through ``math.exp``
(the C library ``exp``) because numpy's SIMD ``exp`` can differ by one ulp.
"""

import math

import numpy as np

EXP_ARG_MAX = 20.0

_libm_exp = np.frompyfunc(math.exp, 1, 1)


def advance(*args):
    """Advance the network state in place by ``n_steps`` steps.

    Returns ``(n_spikes, bad_step, bad_neuron)``; ``bad_step`` is -1 unless a
    neuron went non-finite, in which case the run stops at that step.
    """
    # divergence is detected explicitly below, so float warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        return _advance(*args)


def _advance(
    C, gL, EL, VT, DeltaT, Vpeak, Vreset, a, b, tau_w, I_const, onset_step, ref_steps,
    noise_weight, noise_decay,
    slot_decay, slot_weight, slot_sign, slot_dst, slot_delay,
    out_ptr, out_slot,
    V, w, ref_count, I_syn, I_noise, ring,
    step0, n_steps, dt,
    noise, trace_idx, trace_V, trace_w, spike_step, spike_id,
):
    N = V.shape[0]
    S = I_syn.shape[0]
    L = ring.shape[0]
    has_noise = noise.shape[0] > 0
    n_trace = trace_idx.shape[0]
    n_spikes = 0
    zero_I = np.zeros(N)
    gLDT = gL * DeltaT
    neg_gL = -gL
    h = dt * 0.5

    def rhs_V(V, w, I_tot):
        arg = (V - VT) / DeltaT
        arg = np.where(arg > EXP_ARG_MAX, EXP_ARG_MAX, arg)
        ex = _libm_exp(arg).astype(np.float64)
        return (((neg_gL * (V - EL) + gLDT * ex) - w) + I_tot) / C

    for k in range(n_steps):
        step = step0 + k
        row = step % L

        # deliver, then decay + jump
        if S:
            counts = ring[row].astype(np.float64)
            ring[row] = 0
            I_syn[:] = I_syn * slot_decay + counts * slot_weight
            syn = np.bincount(slot_dst, weights=slot_sign * I_syn, minlength=N)
        else:
            syn = zero_I

        if has_noise:
            I_noise[:] = I_noise * noise_decay + noise[k].astype(np.float64) * noise_weight
        drive = np.where(step >= onset_step, I_const, 0.0)
        I_tot = (drive + I_noise) + syn

        refr = ref_count > 0
        run = ~refr

        # Euler predictor
        k1V = rhs_V(V, w, I_tot)
        k1w = (a * (V - EL) - w) / tau_w
        Vp = V + dt * k1V
        wp = w + dt * k1w
        bad = run & ~(np.isfinite(Vp) & np.isfinite(wp))
        # trapezoid corrector, kept where the predictor stays below Vpeak
        corr = run & (Vp < Vpeak)
        k2V = rhs_V(np.where(corr, Vp, EL), np.where(corr, wp, 0.0), I_tot)
        k2w = (a * (Vp - EL) - wp) / tau_w
        Vc = V + h * (k1V + k2V)
        wc = w + h * (k1w + k2w)
        bad |= corr & ~(np.isfinite(Vc) & np.isfinite(wc))
        V_new = np.where(corr, Vc, Vp)
        w_new = np.where(corr, wc, wp)

        # refractory hold: V pinned at Vreset, w by the same trapezoid rule
        k1h = (a * (Vreset - EL) - w) / tau_w
        k2h = (a * (Vreset - EL) - (w + dt * k1h)) / tau_w
        w_hold = w + h * (k1h + k2h)
        bad |= refr & ~np.isfinite(w_hold)
        V_new = np.where(refr, Vreset, V_new)
        w_new = np.where(refr, w_hold, w_new)

        if bad.any():
            return n_spikes, step, int(np.flatnonzero(bad)[0])

        fired = run & (V_new >= Vpeak)
        ref_count[refr] -= 1
        if fired.any():
            V_new[fired] = Vreset[fired]
            w_new[fired] = w_new[fired] + b[fired]
            ref_count[fired] = ref_steps[fired]
            ids = np.flatnonzero(fired)
            m = ids.size
            spike_step[n_spikes:n_spikes + m] = step
            spike_id[n_spikes:n_spikes + m] = ids
            n_spikes += m
            # enqueue
            starts, stops = out_ptr[ids], out_ptr[ids + 1]
            lens = stops - starts
            if lens.sum():
                edge = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(lens.sum())
                slots = out_slot[edge]
                rows = (step + 1 + slot_delay[slots]) % L
                np.add.at(ring, (rows, slots), 1)

        V[:] = V_new
        w[:] = w_new
        if n_trace:
            trace_V[k] = V[trace_idx]
            trace_w[k] = w[trace_idx]

    return n_spikes, -1, -1
