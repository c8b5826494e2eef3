from __future__ import annotations

from functools import cached_property

import numpy as np

from mfirl.core import ContractError, TabularMDP


class Environment:
    """Sampler plus exact model for one benchmark domain.

    Subclasses fill in ``n_states``, ``n_actions``, ``tag``, ``episodic`` and
    implement ``reset``, ``_step``, ``legal_mask`` and ``_build_model``.
    The sampler only needs the caller's RNG, so instances are shareable.
    """

    tag: str
    n_states: int
    n_actions: int
    episodic: bool = True
    action_names: tuple[str, ...] = ()

    def reset(self, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def _step(self, s: int, a: int, rng: np.random.Generator) -> tuple[int, bool]:
        raise NotImplementedError

    def legal_mask(self) -> np.ndarray:
        raise NotImplementedError

    def _build_model(self) -> TabularMDP:
        raise NotImplementedError

    @cached_property
    def legal(self) -> np.ndarray:
        mask = self.legal_mask()
        mask.setflags(write=False)
        return mask

    @cached_property
    def terminal(self) -> np.ndarray:
        return ~self.legal.any(axis=1)

    def is_terminal(self, s: int) -> bool:
        return bool(self.terminal[s])

    def legal_actions(self, s: int) -> tuple[int, ...]:
        if self.terminal[s]:
            raise ContractError(f"state {s} is terminal")
        return tuple(int(a) for a in np.flatnonzero(self.legal[s]))

    def step(self, s: int, a: int, rng: np.random.Generator) -> tuple[int, bool]:
        if not 0 <= s < self.n_states or self.terminal[s]:
            raise ContractError(f"cannot step from terminal/invalid state {s}")
        if not 0 <= a < self.n_actions or not self.legal[s, a]:
            raise ContractError(f"action {a} is illegal in state {s}")
        return self._step(s, a, rng)

    @cached_property
    def _model(self) -> TabularMDP:
        return self._build_model()

    def exact_model(self) -> TabularMDP:
        return self._model
