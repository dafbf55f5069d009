"""Versioned ``.npz`` dump of networks and optimizer moments.

Layout: a ``__header__`` entry holding UTF-8 JSON (format tag, version,
layer sizes and head bounds per network, optimizer hyper-parameters), plus
one array per parameter/moment keyed ``net/<name>/<k>`` and
``opt/<name>/{m,v}/<k>``.
"""

import io
import json

import numpy as np

from .adam import Adam
from .mlp import Mlp

FORMAT = "swarmhrl-nets"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_nets(path, nets, optimizers=None, meta=None):
    optimizers = optimizers or {}
    header = {"format": FORMAT, "version": VERSION, "meta": meta or {}, "nets": {}, "optimizers": {}}
    arrays = {}
    for name, net in nets.items():
        header["nets"][name] = {
            "sizes": list(net.sizes),
            "bounds": None if net.bounds is None else [b.tolist() for b in net.bounds],
        }
        for k, p in enumerate(net.params):
            arrays[f"net/{name}/{k}"] = p
    for name, opt in optimizers.items():
        st = opt.state()
        header["optimizers"][name] = {k: st[k] for k in ("lr", "beta1", "beta2", "eps", "t")}
        for k, (m, v) in enumerate(zip(st["m"], st["v"])):
            arrays[f"opt/{name}/m/{k}"] = m
            arrays[f"opt/{name}/v/{k}"] = v
    arrays["__header__"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_nets(path):
    """Return ``(nets, optimizer_states, meta)``."""
    with np.load(path) as data:
        if "__header__" not in data:
            raise CheckpointError(f"{path}: missing header")
        header = json.loads(bytes(data["__header__"]).decode())
        if header.get("format") != FORMAT:
            raise CheckpointError(f"{path}: not a {FORMAT} file")
        if header.get("version") != VERSION:
            raise CheckpointError(f"{path}: unsupported version {header.get('version')}")
        nets = {}
        for name, spec in header["nets"].items():
            bounds = None if spec["bounds"] is None else tuple(np.array(b) for b in spec["bounds"])
            net = Mlp(spec["sizes"], bounds=bounds, rng=np.random.default_rng(0))
            net.params = [np.array(data[f"net/{name}/{k}"]) for k in range(len(net.params))]
            nets[name] = net
        opts = {}
        for name, spec in header["optimizers"].items():
            n_params = len(nets[name].params) if name in nets else 0
            st = dict(spec)
            st["m"] = [np.array(data[f"opt/{name}/m/{k}"]) for k in range(n_params)]
            st["v"] = [np.array(data[f"opt/{name}/v/{k}"]) for k in range(n_params)]
            opts[name] = st
    return nets, opts, header.get("meta", {})


def restore_adam(net, state):
    opt = Adam(net)
    opt.load_state(state)
    return opt
