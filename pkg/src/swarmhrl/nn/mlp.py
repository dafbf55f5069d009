"""Feed-forward ReLU networks with hand-written backpropagation."""

import numpy as np

HIDDEN = (128, 64, 32)
# keep squashed outputs strictly inside their declared range
_TANH_LIMIT = 1.0 - 1e-9


class Mlp:
    """Dense ReLU network with a linear or tanh-bounded output head.

    ``bounds`` is ``None`` for a linear head, or a ``(low, high)`` pair of
    arrays; each output is then ``mid + half * tanh(z)``.

    Parameters are kept in ``params`` as ``[W0, b0, W1, b1, ...]`` with
    ``W`` shaped (fan_in, fan_out).
    """

    def __init__(self, sizes, bounds=None, rng=None, out_scale=3e-3):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"bad layer sizes {sizes!r}")
        rng = rng if rng is not None else np.random.default_rng()
        self.params = []
        last = len(self.sizes) - 2
        for k, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            # He-uniform for ReLU layers, small uniform for the output layer
            limit = out_scale if k == last else np.sqrt(6.0 / fan_in)
            self.params.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))
        self.bounds = None
        if bounds is not None:
            low, high = (np.asarray(b, dtype=np.float64).reshape(-1) for b in bounds)
            if low.shape != (self.sizes[-1],) or high.shape != low.shape or np.any(high <= low):
                raise ValueError("bounds must be (low, high) with low < high per output")
            self.bounds = (low, high)

    @property
    def n_layers(self):
        return len(self.params) // 2

    def copy(self):
        other = Mlp.__new__(Mlp)
        other.sizes = self.sizes
        other.params = [p.copy() for p in self.params]
        other.bounds = None if self.bounds is None else (self.bounds[0].copy(), self.bounds[1].copy())
        return other

    def __call__(self, x):
        return self.forward(x)[0]

    def forward(self, x, pre_noise=None):
        """Return ``(output, cache)``; accepts one input vector or a batch.

        ``pre_noise`` is added to the last pre-activation, i.e. before the
        bounded squash (exploration noise that can never break the bounds).
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[-1] != self.sizes[0]:
            raise ValueError(f"expected input dim {self.sizes[0]}, got {h.shape[-1]}")
        acts = [h]
        for k in range(self.n_layers):
            z = h @ self.params[2 * k] + self.params[2 * k + 1]
            h = np.maximum(z, 0.0) if k < self.n_layers - 1 else z
            acts.append(h)
        out = h if pre_noise is None else h + pre_noise
        t = None
        if self.bounds is not None:
            low, high = self.bounds
            t = np.clip(np.tanh(out), -_TANH_LIMIT, _TANH_LIMIT)
            out = 0.5 * (low + high) + 0.5 * (high - low) * t
        cache = (acts, t, single)
        return (out[0] if single else out), cache

    def backward(self, cache, grad_out):
        """Gradients of ``sum(grad_out * output)``.

        Returns ``(grads, grad_input)`` where ``grads`` matches ``params``.
        """
        acts, t, single = cache
        g = np.asarray(grad_out, dtype=np.float64)
        g = g[None, :] if single else g
        if self.bounds is not None:
            low, high = self.bounds
            g = g * 0.5 * (high - low) * (1.0 - t * t)
        grads = [None] * len(self.params)
        for k in reversed(range(self.n_layers)):
            grads[2 * k] = acts[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.params[2 * k].T
            if k > 0:
                g = g * (acts[k] > 0.0)
        return grads, (g[0] if single else g)


def make_mlp(n_in, n_out, rng, bounds=None, hidden=HIDDEN):
    return Mlp((n_in, *hidden, n_out), bounds=bounds, rng=rng)


def sync_target(source, target, tau=None):
    """Copy (``tau is None``) or Polyak-average source parameters into target."""
    if source.sizes != target.sizes:
        raise ValueError(f"shape mismatch {source.sizes} vs {target.sizes}")
    for s, t in zip(source.params, target.params):
        if tau is None:
            t[...] = s
        else:
            t *= 1.0 - tau
            t += tau * s
    return target
