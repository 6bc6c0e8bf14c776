"""Partial effects Delta_it(beta, pi) and their derivatives.

Three kinds are supported, each written through the family's conditional mean F:

- binary-difference: F(eta with x_k = 1) - F(eta with x_k = 0)
- continuous-derivative: beta_k * F'(eta)
- poisson-transform: [beta_k + beta_j * H'(z)] * F'(eta), where regressor j holds
  H(z) for a transform H of the variable z (square or log1p). With
  `linear=False` the beta_k term is dropped and k must equal j.

For Poisson F' = exp, which gives the usual [beta_k + beta_j H'(z)] exp(eta).
"""

import re
from dataclasses import dataclass

import numpy as np

from twofe.classes.enum import StrEnum
from twofe.errors import InvalidSpec
from twofe.families.base import LikelihoodFamily


class EffectKind(StrEnum):
    BINARY_DIFFERENCE = "binary-difference"
    CONTINUOUS_DERIVATIVE = "continuous-derivative"
    POISSON_TRANSFORM = "poisson-transform"


class Transform(StrEnum):
    SQUARE = "square"
    LOG1P = "log1p"


@dataclass(frozen=True)
class PartialEffectSpec:
    """Which partial effect to average.

    Attributes:
        kind: Effect kind.
        k: Target regressor index (0-based).
        transform_index: Regressor holding H(z) (poisson-transform only).
        transform: The transform H (poisson-transform only).
        linear: Whether regressor k enters linearly (poisson-transform only).
    """

    kind: EffectKind
    k: int
    transform_index: int | None = None
    transform: Transform | None = None
    linear: bool = True

    @property
    def label(self) -> str:
        text = f"{self.k}:{self.kind.value}"
        if self.kind == EffectKind.POISSON_TRANSFORM:
            text += f":{self.transform_index}:{self.transform.value}"
            if not self.linear:
                text += ":nolinear"
        return text

    @classmethod
    def parse(cls, text: str) -> "PartialEffectSpec":
        """Parse `k:kind` or `k:poisson-transform:j:transform[:nolinear]`."""
        parts = [p.strip() for p in text.split(":")]
        if len(parts) < 2 or not re.fullmatch(r"\d+", parts[0]):
            raise InvalidSpec(f"effect '{text}' must look like k:kind")
        try:
            kind = EffectKind.from_value(parts[1])
        except ValueError as e:
            raise InvalidSpec(f"unknown effect kind in '{text}'") from e
        k = int(parts[0])
        if kind != EffectKind.POISSON_TRANSFORM:
            if len(parts) != 2:
                raise InvalidSpec(f"effect '{text}' takes no transform")
            return cls(kind, k)
        if len(parts) not in (4, 5) or not re.fullmatch(r"\d+", parts[2]):
            raise InvalidSpec(f"effect '{text}' must look like k:poisson-transform:j:transform")
        try:
            transform = Transform.from_value(parts[3])
        except ValueError as e:
            raise InvalidSpec(f"unknown transform in '{text}'") from e
        linear = True
        if len(parts) == 5:
            if parts[4] != "nolinear":
                raise InvalidSpec(f"unknown flag '{parts[4]}' in '{text}'")
            linear = False
        return cls(kind, k, int(parts[2]), transform, linear)

    def validate(self, n_regressors: int) -> None:
        if not 0 <= self.k < n_regressors:
            raise InvalidSpec(f"effect regressor {self.k} out of range for K={n_regressors}")
        if self.kind != EffectKind.POISSON_TRANSFORM:
            if self.transform is not None or self.transform_index is not None:
                raise InvalidSpec(f"{self.kind.value} effects take no transform")
            return
        if self.transform is None or self.transform_index is None:
            raise InvalidSpec("poisson-transform effects need a transform and its regressor")
        if not 0 <= self.transform_index < n_regressors:
            raise InvalidSpec(f"transform regressor {self.transform_index} out of range")
        if self.linear and self.transform_index == self.k:
            raise InvalidSpec("linear and transform terms must use different regressors")
        if not self.linear and self.transform_index != self.k:
            raise InvalidSpec("without a linear term the target regressor is the transform")
        if not self.linear and self.transform == Transform.SQUARE:
            raise InvalidSpec("a square transform needs the linear regressor to recover z")


@dataclass(frozen=True)
class EffectBundle:
    """Per-cell partial effect and derivatives (beta derivative on a trailing K axis)."""

    delta: np.ndarray
    d_beta: np.ndarray
    d_pi: np.ndarray
    d_pi2: np.ndarray
    d_pi3: np.ndarray


def _transform_slope(spec: PartialEffectSpec, x: np.ndarray) -> np.ndarray:
    """H'(z) with z recovered from the regressors."""
    if spec.transform == Transform.SQUARE:
        return 2.0 * x[..., spec.k]
    # log1p: the column holds log(1 + z), so H'(z) = 1 / (1 + z) = exp(-column)
    return np.exp(-x[..., spec.transform_index])


def partial_effect_bundle(
    family: LikelihoodFamily,
    spec: PartialEffectSpec,
    x: np.ndarray,
    beta: np.ndarray,
    pi: np.ndarray | float,
) -> EffectBundle:
    """Delta and its derivatives in beta and pi, cell by cell."""
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n_regressors = x.shape[-1]
    spec.validate(n_regressors)
    unit = np.eye(n_regressors)

    if spec.kind == EffectKind.BINARY_DIFFERENCE:
        x1 = x.copy()
        x0 = x.copy()
        x1[..., spec.k] = 1.0
        x0[..., spec.k] = 0.0
        m1 = family.mean_derivatives(x1 @ beta + pi)
        m0 = family.mean_derivatives(x0 @ beta + pi)
        return EffectBundle(
            delta=m1[0] - m0[0],
            d_beta=m1[1][..., None] * x1 - m0[1][..., None] * x0,
            d_pi=m1[1] - m0[1],
            d_pi2=m1[2] - m0[2],
            d_pi3=m1[3] - m0[3],
        )

    mean = family.mean_derivatives(x @ beta + pi)
    if spec.kind == EffectKind.CONTINUOUS_DERIVATIVE:
        scale = np.broadcast_to(beta[spec.k], mean[1].shape)
        d_scale = np.broadcast_to(unit[spec.k], (*mean[1].shape, n_regressors))
    else:
        slope = _transform_slope(spec, x)
        scale = beta[spec.transform_index] * slope
        d_scale = slope[..., None] * unit[spec.transform_index]
        if spec.linear:
            scale = scale + beta[spec.k]
            d_scale = d_scale + unit[spec.k]

    return EffectBundle(
        delta=scale * mean[1],
        d_beta=d_scale * mean[1][..., None] + (scale * mean[2])[..., None] * x,
        d_pi=scale * mean[2],
        d_pi2=scale * mean[3],
        d_pi3=scale * mean[4],
    )
