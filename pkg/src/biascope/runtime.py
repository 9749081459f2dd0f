import os

import torch


def configure_threads() -> int:
    """Apply BIASCOPE_THREADS (0 or unset = library default) to torch."""
    n = int(os.environ.get("BIASCOPE_THREADS", "0") or 0)
    if n > 0:
        torch.set_num_threads(n)
    return torch.get_num_threads()
