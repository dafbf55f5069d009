from .adam import Adam
from .checkpoint import CheckpointError, load_nets, restore_adam, save_nets
from .mlp import HIDDEN, Mlp, make_mlp, sync_target

__all__ = ["Adam", "CheckpointError", "HIDDEN", "Mlp", "load_nets", "make_mlp",
           "restore_adam", "save_nets", "sync_target"]
