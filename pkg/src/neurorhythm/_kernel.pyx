# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernel.

Same contract and floating-point expression order as ``_kernel_py.advance``;
the two must produce bit-identical state and spike output.
"""

from libc.math cimport exp, isfinite

cdef double EXP_ARG_MAX = 20.0


cdef inline double rhs_V(double V, double w, double I_tot, double C, double gL, double EL,
                         double VT, double DeltaT) noexcept nogil:
    cdef double arg = (V - VT) / DeltaT
    if arg > EXP_ARG_MAX:
        arg = EXP_ARG_MAX
    return ((((-gL) * (V - EL) + (gL * DeltaT) * exp(arg)) - w) + I_tot) / C


def advance(
    const double[::1] C, const double[::1] gL, const double[::1] EL, const double[::1] VT,
    const double[::1] DeltaT, const double[::1] Vpeak, const double[::1] Vreset,
    const double[::1] a, const double[::1] b, const double[::1] tau_w,
    const double[::1] I_const, const long long[::1] onset_step, const int[::1] ref_steps,
    const double[::1] noise_weight, const double[::1] noise_decay,
    const double[::1] slot_decay, const double[::1] slot_weight, const double[::1] slot_sign,
    const long long[::1] slot_dst, const long long[::1] slot_delay,
    const long long[::1] out_ptr, const long long[::1] out_slot,
    double[::1] V, double[::1] w, int[::1] ref_count, double[::1] I_syn, double[::1] I_noise,
    int[:, ::1] ring,
    long long step0, long long n_steps, double dt,
    const int[:, ::1] noise, const long long[::1] trace_idx,
    double[:, ::1] trace_V, double[:, ::1] trace_w,
    long long[::1] spike_step, int[::1] spike_id,
):
    cdef Py_ssize_t N = V.shape[0]
    cdef Py_ssize_t S = I_syn.shape[0]
    cdef Py_ssize_t L = ring.shape[0]
    cdef bint has_noise = noise.shape[0] > 0
    cdef Py_ssize_t n_trace = trace_idx.shape[0]
    cdef Py_ssize_t n_spikes = 0
    cdef Py_ssize_t i, s, e, k, j
    cdef long long step, row
    cdef double Vi, wi, Vp, wp, k1V, k1w, k2V, k2w, I_tot, drive, cnt
    cdef double h = dt * 0.5
    cdef double[::1] syn
    cdef long long bad_step = -1
    cdef Py_ssize_t bad_neuron = -1

    import numpy as np
    syn = np.zeros(N)

    with nogil:
        for k in range(n_steps):
            step = step0 + k
            row = step % L

            for i in range(N):
                syn[i] = 0.0
            for s in range(S):
                cnt = <double>ring[row, s]
                ring[row, s] = 0
                I_syn[s] = I_syn[s] * slot_decay[s] + cnt * slot_weight[s]
                syn[slot_dst[s]] += slot_sign[s] * I_syn[s]

            for i in range(N):
                if has_noise:
                    I_noise[i] = I_noise[i] * noise_decay[i] + (<double>noise[k, i]) * noise_weight[i]
                drive = I_const[i] if step >= onset_step[i] else 0.0
                Vi = V[i]
                wi = w[i]
                if ref_count[i] > 0:
                    k1w = (a[i] * (Vreset[i] - EL[i]) - wi) / tau_w[i]
                    k2w = (a[i] * (Vreset[i] - EL[i]) - (wi + dt * k1w)) / tau_w[i]
                    wi = wi + h * (k1w + k2w)
                    Vi = Vreset[i]
                    ref_count[i] -= 1
                    if not isfinite(wi):
                        bad_step = step
                        bad_neuron = i
                        break
                else:
                    I_tot = (drive + I_noise[i]) + syn[i]
                    k1V = rhs_V(Vi, wi, I_tot, C[i], gL[i], EL[i], VT[i], DeltaT[i])
                    k1w = (a[i] * (Vi - EL[i]) - wi) / tau_w[i]
                    Vp = Vi + dt * k1V
                    wp = wi + dt * k1w
                    if not (isfinite(Vp) and isfinite(wp)):
                        bad_step = step
                        bad_neuron = i
                        break
                    if Vp < Vpeak[i]:
                        k2V = rhs_V(Vp, wp, I_tot, C[i], gL[i], EL[i], VT[i], DeltaT[i])
                        k2w = (a[i] * (Vp - EL[i]) - wp) / tau_w[i]
                        Vi = Vi + h * (k1V + k2V)
                        wi = wi + h * (k1w + k2w)
                        if not (isfinite(Vi) and isfinite(wi)):
                            bad_step = step
                            bad_neuron = i
                            break
                    else:
                        Vi = Vp
                        wi = wp
                    if Vi >= Vpeak[i]:
                        Vi = Vreset[i]
                        wi = wi + b[i]
                        ref_count[i] = ref_steps[i]
                        spike_step[n_spikes] = step
                        spike_id[n_spikes] = <int>i
                        n_spikes += 1
                        for e in range(out_ptr[i], out_ptr[i + 1]):
                            s = out_slot[e]
                            ring[(step + 1 + slot_delay[s]) % L, s] += 1
                V[i] = Vi
                w[i] = wi
            if bad_step >= 0:
                break

            for j in range(n_trace):
                trace_V[k, j] = V[trace_idx[j]]
                trace_w[k, j] = w[trace_idx[j]]

    return n_spikes, bad_step, bad_neuron
