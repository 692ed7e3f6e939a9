"""Tensor conventions shared by the numerical packages."""

import torch

DTYPE = torch.float64


def as_tensor(value, device: torch.device | str | None = None) -> torch.Tensor:
    """float64 view of `value`; tensors keep their autograd history"""
    if isinstance(value, torch.Tensor):
        return value.to(dtype=DTYPE, device=device) if device is not None else value.to(DTYPE)
    return torch.as_tensor(value, dtype=DTYPE, device=device)
