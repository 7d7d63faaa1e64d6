# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled int64 twin of the reference interpreter.

Bit-for-bit identical to `model.eval_network` / `model.classify` for networks
whose intermediate values provably fit in 63-bit signed integers (the caller
checks this before packing). Edge shifts are not supported here; gadget
networks always take the pure path.
"""

from libc.stdlib cimport malloc, free

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline i64 floor_shift(i64 v, int k) nogil:
    if k == 0:
        return v
    if v >= 0:
        return v >> k
    return -((-v + ((<i64>1 << k) - 1)) >> k)


cdef inline i64 clamp_top(i64 v, i64 top) nogil:
    if v <= 0:
        return 0
    if v > top:
        return top
    return v


cdef class PackedNet:
    """Flattened network: all layer arrays concatenated, offsets per layer."""

    cdef i64[::1] weights
    cdef i64[::1] bias
    cdef int[::1] shift
    cdef i64[::1] top
    cdef long[::1] w_off      # weight offset per layer
    cdef long[::1] n_off      # neuron offset per layer (bias/shift/top)
    cdef long[::1] dims       # dims[t] = inputs of layer t; dims[n_layers] = outputs
    cdef int n_layers
    cdef long max_dim

    def __init__(self, weights, bias, shift, top, w_off, n_off, dims):
        self.weights = weights
        self.bias = bias
        self.shift = shift
        self.top = top
        self.w_off = w_off
        self.n_off = n_off
        self.dims = dims
        self.n_layers = dims.shape[0] - 1
        cdef long m = 0
        cdef int t
        for t in range(dims.shape[0]):
            if dims[t] > m:
                m = dims[t]
        self.max_dim = m

    cdef void c_forward(self, i64* cur, i64* nxt) nogil:
        # cur holds the input vector on entry and the output vector on exit;
        # both buffers must have max_dim capacity.
        cdef int t
        cdef long i, j, n_in, n_out, wo, no
        cdef i64 acc
        cdef i64* a = cur
        cdef i64* b = nxt
        cdef i64* swap
        for t in range(self.n_layers):
            n_in = self.dims[t]
            n_out = self.dims[t + 1]
            wo = self.w_off[t]
            no = self.n_off[t]
            for i in range(n_out):
                acc = self.bias[no + i]
                for j in range(n_in):
                    acc += self.weights[wo + i * n_in + j] * a[j]
                b[i] = clamp_top(floor_shift(acc, self.shift[no + i]), self.top[no + i])
            swap = a
            a = b
            b = swap
        if a != cur:
            for i in range(self.dims[self.n_layers]):
                cur[i] = a[i]

    cdef long c_classify(self, i64* cur, i64* nxt) nogil:
        self.c_forward(cur, nxt)
        cdef long best = 0
        cdef long i
        cdef long n_out = self.dims[self.n_layers]
        for i in range(1, n_out):
            if cur[i] > cur[best]:
                best = i
        return best

    def forward(self, i64[::1] x):
        """Output vector for one input (returns a fresh int64 array)."""
        cdef i64* cur = <i64*>malloc(self.max_dim * sizeof(i64))
        cdef i64* nxt = <i64*>malloc(self.max_dim * sizeof(i64))
        if cur == NULL or nxt == NULL:
            free(cur)
            free(nxt)
            raise MemoryError()
        cdef long i
        try:
            for i in range(x.shape[0]):
                cur[i] = x[i]
            with nogil:
                self.c_forward(cur, nxt)
            out = np.empty(self.dims[self.n_layers], dtype=np.int64)
            for i in range(out.shape[0]):
                out[i] = cur[i]
            return out
        finally:
            free(cur)
            free(nxt)

    def classify(self, i64[::1] x):
        cdef i64* cur = <i64*>malloc(self.max_dim * sizeof(i64))
        cdef i64* nxt = <i64*>malloc(self.max_dim * sizeof(i64))
        if cur == NULL or nxt == NULL:
            free(cur)
            free(nxt)
            raise MemoryError()
        cdef long i, label
        try:
            for i in range(x.shape[0]):
                cur[i] = x[i]
            with nogil:
                label = self.c_classify(cur, nxt)
            return label
        finally:
            free(cur)
            free(nxt)

    def find_ball_cex(self, i64[::1] lo, i64[::1] hi, long label, unsigned long long limit):
        """First input in the box (odometer order, last index fastest) whose
        predicted class differs from `label`; None if none exists.

        Raises OverflowError after visiting `limit` points without finishing.
        """
        cdef long n = lo.shape[0]
        cdef i64* x = <i64*>malloc(n * sizeof(i64))
        cdef i64* cur = <i64*>malloc(self.max_dim * sizeof(i64))
        cdef i64* nxt = <i64*>malloc(self.max_dim * sizeof(i64))
        if x == NULL or cur == NULL or nxt == NULL:
            free(x)
            free(cur)
            free(nxt)
            raise MemoryError()
        cdef long i, d
        cdef int found = 0, exhausted = 0
        cdef unsigned long long visited = 0
        try:
            for i in range(n):
                x[i] = lo[i]
            with nogil:
                while True:
                    visited += 1
                    if visited > limit:
                        break
                    for i in range(n):
                        cur[i] = x[i]
                    if self.c_classify(cur, nxt) != label:
                        found = 1
                        break
                    d = n - 1
                    while d >= 0 and x[d] == hi[d]:
                        x[d] = lo[d]
                        d -= 1
                    if d < 0:
                        exhausted = 1
                        break
                    x[d] += 1
            if found:
                out = np.empty(n, dtype=np.int64)
                for i in range(n):
                    out[i] = x[i]
                return out
            if exhausted:
                return None
            raise OverflowError("ball enumeration exceeded the point limit")
        finally:
            free(x)
            free(cur)
            free(nxt)
