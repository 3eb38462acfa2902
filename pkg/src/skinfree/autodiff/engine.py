"""
Reverse-mode differentiation and Adam for skinfree.

Tensors are torch tensors and the tape is torch's define-by-run autograd
graph; this module adds the contracts the pipeline relies on: scalar-only
backward, named gradients, explicit Adam state and finite-difference checks.
"""

import dataclasses
from collections import OrderedDict
from typing import Callable, Dict, Iterable, Optional, Sequence

import numpy as np
import torch

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


def set_determinism(seed: int, threads: Optional[int] = 1):
    """
    Seed torch and pin the thread count.

    With threads=1 identical seeds give bit-identical training trajectories.
    """
    torch.manual_seed(seed)
    if threads is not None:
        torch.set_num_threads(int(threads))
    torch.use_deterministic_algorithms(True, warn_only=True)


class Tape:
    """
    Named view onto the autograd graph built during one forward pass.

    Example:
        tape = Tape({"x": x})
        loss = (tape["x"] ** 2).sum()
        grads = tape.backward(loss)
    """

    def __init__(self, params: Optional[Dict[str, torch.Tensor]] = None):
        self.params: "OrderedDict[str, torch.Tensor]" = OrderedDict()
        for name, tensor in (params or {}).items():
            self.watch(name, tensor)

    def watch(self, name: str, tensor: torch.Tensor) -> torch.Tensor:
        """Track a leaf tensor so backward returns its gradient."""
        if not tensor.requires_grad:
            tensor.requires_grad_(True)
        self.params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> torch.Tensor:
        return self.params[name]

    def backward(self, loss: torch.Tensor) -> Dict[str, torch.Tensor]:
        """
        Differentiate a scalar loss with respect to every watched tensor.

        Args:
            loss: Scalar tensor produced from the watched tensors

        Returns:
            Gradients by name; unused tensors get zeros

        Raises:
            ValueError: If loss is not a scalar
        """
        if loss.numel() != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
        tensors = list(self.params.values())
        grads = torch.autograd.grad(loss.reshape(()), tensors, allow_unused=True)
        return OrderedDict(
            (name, torch.zeros_like(t) if g is None else g)
            for (name, t), g in zip(self.params.items(), grads)
        )


@dataclasses.dataclass
class AdamState:
    """
    Adam optimizer state over a fixed list of parameters.

    Attributes:
        params: Parameters updated in place
        lr: Learning rate
        optimizer: Underlying torch.optim.Adam carrying moments and step count
    """
    params: Sequence[torch.Tensor]
    lr: float
    optimizer: torch.optim.Adam = None

    def __post_init__(self):
        self.params = list(self.params)
        if self.optimizer is None:
            self.optimizer = torch.optim.Adam(
                self.params, lr=self.lr, betas=ADAM_BETAS, eps=ADAM_EPS
            )

    @property
    def step_count(self) -> int:
        state = self.optimizer.state.get(self.params[0], {})
        step = state.get("step", 0)
        return int(step.item() if torch.is_tensor(step) else step)

    def moments(self, index: int) -> tuple:
        """(first, second) moment tensors of parameter `index`."""
        state = self.optimizer.state.get(self.params[index])
        if not state:
            zeros = torch.zeros_like(self.params[index])
            return zeros, zeros.clone()
        return state["exp_avg"], state["exp_avg_sq"]

    def state_dict(self) -> dict:
        return self.optimizer.state_dict()

    def load_state_dict(self, state: dict):
        self.optimizer.load_state_dict(state)


def adam_step(state: AdamState,
              params: Sequence[torch.Tensor],
              grads: Iterable[torch.Tensor]) -> Sequence[torch.Tensor]:
    """
    Apply one bias-corrected Adam update.

    Args:
        state: Optimizer state
        params: The parameters tracked by `state`, in the same order
        grads: Gradients in the order of `params`

    Returns:
        The updated parameters
    """
    if [id(p) for p in params] != [id(p) for p in state.params]:
        raise ValueError("parameters do not match the optimizer state")
    for p, g in zip(state.params, grads):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {tuple(g.shape)} does not match {tuple(p.shape)}")
        p.grad = g.detach().to(p.dtype).clone()
    state.optimizer.step()
    state.optimizer.zero_grad(set_to_none=True)
    return state.params


def gradient_check(fn: Callable[..., torch.Tensor],
                   *inputs,
                   eps: float = 1e-6,
                   tolerance: float = 1e-4) -> bool:
    """
    Compare analytic gradients with 64-bit central finite differences.

    Inputs are promoted to float64; the check passes when
    |analytic - numeric| <= tolerance * max(1, |numeric|) everywhere.

    Args:
        fn: Function of the inputs returning a tensor
        inputs: Tensors or array-likes differentiated by the check
        eps: Finite-difference step
        tolerance: Relative tolerance

    Returns:
        True on success

    Raises:
        torch.autograd.gradcheck.GradcheckError: On mismatch
    """
    promoted = tuple(
        torch.as_tensor(np.asarray(x) if not torch.is_tensor(x) else x)
        .detach().to(torch.float64).requires_grad_(True)
        for x in inputs
    )
    return torch.autograd.gradcheck(fn, promoted, eps=eps, atol=tolerance, rtol=tolerance)
