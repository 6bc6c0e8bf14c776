"""Likelihood families and partial effects."""

from twofe.classes.enum import StrEnum
from twofe.errors import InvalidSpec
from twofe.families.base import DerivativeBundle, IndexDerivatives, LikelihoodFamily
from twofe.families.effects import (
    EffectBundle,
    EffectKind,
    PartialEffectSpec,
    Transform,
    partial_effect_bundle,
)


class FamilyName(StrEnum):
    PROBIT = "probit"
    LOGIT = "logit"
    POISSON = "poisson"
    GAUSSIAN = "gaussian"


def get_family(name: str | FamilyName) -> LikelihoodFamily:
    """
    Factory function to get a likelihood family instance.

    Args:
        name: Family name ("probit", "logit", "poisson", "gaussian")

    Returns:
        A LikelihoodFamily instance

    Raises:
        InvalidSpec: If the name is not registered
    """
    from twofe.families.gaussian import GaussianFamily
    from twofe.families.logit import LogitFamily
    from twofe.families.poisson import PoissonFamily
    from twofe.families.probit import ProbitFamily

    families = {
        FamilyName.PROBIT.value: ProbitFamily,
        FamilyName.LOGIT.value: LogitFamily,
        FamilyName.POISSON.value: PoissonFamily,
        FamilyName.GAUSSIAN.value: GaussianFamily,
    }

    key = str(name)
    if key not in families:
        raise InvalidSpec(f"Unknown family: {key}. Available: {list(families.keys())}")

    return families[key]()


__all__ = [
    "DerivativeBundle",
    "EffectBundle",
    "EffectKind",
    "FamilyName",
    "IndexDerivatives",
    "LikelihoodFamily",
    "PartialEffectSpec",
    "Transform",
    "get_family",
    "partial_effect_bundle",
]
