import logging

import numpy as np

log = logging.getLogger(__name__)


class Adam:
    """Bias-corrected Adam; the only thing that mutates network parameters."""

    def __init__(self, net, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in net.params]
        self.v = [np.zeros_like(p) for p in net.params]
        self.t = 0
        self.skipped = 0

    def step(self, net, grads):
        """Apply one update. Returns False (and leaves everything untouched)
        when any gradient is non-finite."""
        if not all(np.all(np.isfinite(g)) for g in grads):
            self.skipped += 1
            log.warning("non-finite gradient; Adam update skipped (%d so far)", self.skipped)
            return False
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(net.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        return True

    def state(self):
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps,
                "t": self.t, "m": self.m, "v": self.v}

    def load_state(self, state):
        for k in ("lr", "beta1", "beta2", "eps", "t"):
            setattr(self, k, state[k])
        self.m = [np.array(a) for a in state["m"]]
        self.v = [np.array(a) for a in state["v"]]
