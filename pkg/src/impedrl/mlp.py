"""Small dense networks with exact reverse-mode gradients, plus optimizers.

Parameters live in one contiguous vector per network; the per-layer weight
and bias arrays are reshaped views into it, so optimizer steps, target-net
mixing and checkpointing are single-array operations.  Activations are
restricted to smooth choices (tanh, sigmoid, identity) whose derivatives
come from the cached post-activation values, so finite-difference gradient
checks hold to tight tolerances everywhere.  dtype is configurable: float64
by default, float32 for training speed.
"""

from __future__ import annotations

import numpy as np

_ACT = {
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
    "sigmoid": (lambda z: 1.0 / (1.0 + np.exp(-z)), lambda y: y * (1.0 - y)),
    "identity": (lambda z: z, lambda y: np.ones_like(y)),
}


class Mlp:
    """Fully connected net: hidden layers share one activation, the output
    layer has its own (``tanh`` for actors bounds outputs to [-1, 1])."""

    def __init__(self, layer_sizes, hidden_activation="tanh",
                 output_activation="identity", rng=None, init_scale=1.0,
                 dtype=np.float64):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        for name in (hidden_activation, output_activation):
            if name not in _ACT:
                raise ValueError(f"unknown activation '{name}'")
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.dtype = np.dtype(dtype)
        # Flat layout: all weight matrices in layer order, then all biases,
        # matching parameters().
        shapes = [(n_in, n_out) for n_in, n_out
                  in zip(layer_sizes[:-1], layer_sizes[1:])]
        shapes += [(n_out,) for n_out in layer_sizes[1:]]
        total = sum(int(np.prod(s)) for s in shapes)
        self.flat = np.zeros(total, dtype=self.dtype)
        self.grad_flat = np.zeros(total, dtype=self.dtype)
        self.weights = []
        self.biases = []
        self.grad_weights = []
        self.grad_biases = []
        offset = 0
        for shape in shapes:
            size = int(np.prod(shape))
            p = self.flat[offset:offset + size].reshape(shape)
            g = self.grad_flat[offset:offset + size].reshape(shape)
            if len(shape) == 2:
                self.weights.append(p)
                self.grad_weights.append(g)
            else:
                self.biases.append(p)
                self.grad_biases.append(g)
            offset += size
        rng = rng or np.random.default_rng(0)
        for w in self.weights:
            bound = init_scale / np.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, w.shape)
        self._acts = None

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def _activation(self, i):
        name = (self.output_activation if i == self.n_layers - 1
                else self.hidden_activation)
        return _ACT[name]

    def forward(self, x):
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        h = x.reshape(1, -1) if squeeze else x
        if h.shape[1] != self.layer_sizes[0]:
            raise ValueError(
                f"input dimension {h.shape[1]} != {self.layer_sizes[0]}")
        acts = [h]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            f, _ = self._activation(i)
            h = f(h @ w + b)
            acts.append(h)
        self._acts = acts
        return h[0] if squeeze else h

    def backward(self, grad_output, need_param_grads=True):
        """Reverse pass for the last forward call.

        Returns the gradient with respect to the input batch; parameter
        gradients land in ``grad_flat`` (and its per-layer views) unless
        ``need_param_grads`` is False (used when only the input gradient is
        wanted, e.g. differentiating a critic with respect to the action).
        """
        if self._acts is None:
            raise RuntimeError("backward called before forward")
        g = np.asarray(grad_output, dtype=self.dtype)
        if g.ndim == 1:
            g = g.reshape(1, -1)
        for i in range(self.n_layers - 1, -1, -1):
            _, dact = self._activation(i)
            g = g * dact(self._acts[i + 1])
            if need_param_grads:
                np.matmul(self._acts[i].T, g, out=self.grad_weights[i])
                np.sum(g, axis=0, out=self.grad_biases[i])
            g = g @ self.weights[i].T
        return g

    def parameters(self):
        return self.weights + self.biases

    def gradients(self):
        return self.grad_weights + self.grad_biases

    def copy(self) -> "Mlp":
        other = Mlp(self.layer_sizes, self.hidden_activation,
                    self.output_activation, dtype=self.dtype)
        other.flat[...] = self.flat
        return other

    def get_flat(self):
        return self.flat.copy()

    def set_flat(self, flat):
        flat = np.asarray(flat)
        if flat.size != self.flat.size:
            raise ValueError("parameter vector size mismatch")
        self.flat[...] = flat


def soft_update(target: Mlp, source: Mlp, polyak: float):
    """Polyak averaging: target <- polyak * source + (1 - polyak) * target."""
    if target.layer_sizes != source.layer_sizes:
        raise ValueError("architecture mismatch")
    target.flat *= 1.0 - polyak
    target.flat += polyak * source.flat


class Sgd:
    """Plain gradient descent; exact steepest-descent steps, no momentum."""

    def __init__(self, net: Mlp, lr):
        self.lr = lr

    def step(self, net: Mlp):
        net.flat -= self.lr * net.grad_flat


class Adam:
    """Standard Adam with bias correction, on the flat parameter vector."""

    def __init__(self, net: Mlp, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros_like(net.flat)
        self.v = np.zeros_like(net.flat)
        self.t = 0

    def step(self, net: Mlp):
        g = net.grad_flat
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * g
        self.v *= b2
        self.v += (1.0 - b2) * g * g
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        net.flat -= self.lr * (self.m / c1) / (np.sqrt(self.v / c2) + self.eps)
