"""Method taxonomy and the short labels used in result tables.

Labels: ``CC``, ``05.IMP``, ``Mean.IMP.M``, ``PbP``, ``SAEM``,
``MICE.<K>[.Y][.M].IMP[.M]``. A ``.M`` before ``IMP`` puts the mask into the
imputation models; a trailing ``.M`` appends it to the logistic design.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, fields
from enum import Enum

from ..errors import ConfigError


class Family(str, Enum):
    CC = "CC"
    CONST_IMP = "CONST_IMP"
    MEAN_IMP = "MEAN_IMP"
    PBP = "PBP"
    MICE = "MICE"
    SAEM = "SAEM"


class Fallback(str, Enum):
    MEAN_IMPUTE_GLOBAL = "MEAN_IMPUTE_GLOBAL"
    ERROR = "ERROR"


@dataclass(frozen=True)
class MethodSpec:
    family: Family
    const_value: float | None = None
    K: int | None = None
    use_mask_feature: bool = False
    use_y_in_imputation: bool = False
    use_mask_in_imputation: bool = False
    pmm_donors: int = 5
    chain_cycles: int = 10
    pbp_fallback: Fallback = Fallback.MEAN_IMPUTE_GLOBAL
    saem_iterations: int = 500
    saem_burn: int = 100
    mh_sweeps: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "pbp_fallback", Fallback(self.pbp_fallback))
        if self.family is Family.CC and self.use_mask_feature:
            raise ConfigError("complete case cannot use mask features")
        if self.family is Family.CONST_IMP and self.const_value is None:
            object.__setattr__(self, "const_value", 0.5)
        if self.K is None:
            # prediction draws for SAEM; a single imputation otherwise
            object.__setattr__(self, "K", 100 if self.family is Family.SAEM else 1)
        if self.K < 1:
            raise ConfigError("K must be at least 1")
        if self.pmm_donors < 1 or self.chain_cycles < 1:
            raise ConfigError("pmm_donors and chain_cycles must be positive")
        if not 0 <= self.saem_burn < self.saem_iterations:
            raise ConfigError("saem_burn must lie in [0, saem_iterations)")

    @property
    def name(self) -> str:
        suffix = ".M" if self.use_mask_feature else ""
        if self.family is Family.CC:
            return "CC"
        if self.family is Family.CONST_IMP:
            c = "05" if self.const_value == 0.5 else f"{self.const_value:g}"
            return f"{c}.IMP{suffix}"
        if self.family is Family.MEAN_IMP:
            return f"Mean.IMP{suffix}"
        if self.family is Family.PBP:
            return "PbP" + suffix
        if self.family is Family.SAEM:
            return "SAEM" if self.K == 100 else f"SAEM.{self.K}"
        tags = (".Y" if self.use_y_in_imputation else "") + (".M" if self.use_mask_in_imputation else "")
        return f"MICE.{self.K}{tags}.IMP{suffix}"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["family"] = self.family.value
        out["pbp_fallback"] = self.pbp_fallback.value
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "MethodSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown method keys: {sorted(unknown)}")
        return cls(**payload)


_MICE = re.compile(r"^MICE\.(?P<k>\d+)(?P<y>\.Y)?(?P<m>\.M)?\.IMP(?P<mf>\.M)?$")
_CONST = re.compile(r"^(?P<c>[-+]?\d+(?:\.\d+)?)\.IMP(?P<mf>\.M)?$")
_SAEM = re.compile(r"^SAEM(?:\.(?P<k>\d+))?$")


def parse_method(label: str) -> MethodSpec:
    """Build a MethodSpec from a table label such as ``MICE.20.Y.IMP``."""
    label = label.strip()
    if label == "CC":
        return MethodSpec(Family.CC)
    if label in ("PbP", "PBP"):
        return MethodSpec(Family.PBP)
    if label in ("Mean.IMP", "Mean.IMP.M"):
        return MethodSpec(Family.MEAN_IMP, use_mask_feature=label.endswith(".M"))
    if m := _SAEM.match(label):
        return MethodSpec(Family.SAEM, K=int(m["k"]) if m["k"] else 100)
    if m := _MICE.match(label):
        return MethodSpec(
            Family.MICE,
            K=int(m["k"]),
            use_y_in_imputation=bool(m["y"]),
            use_mask_in_imputation=bool(m["m"]),
            use_mask_feature=bool(m["mf"]),
        )
    if m := _CONST.match(label):
        c = 0.5 if m["c"] == "05" else float(m["c"])
        return MethodSpec(Family.CONST_IMP, const_value=c, use_mask_feature=bool(m["mf"]))
    raise ConfigError(f"unrecognized method label {label!r}")


def method_from_config(entry) -> MethodSpec:
    if isinstance(entry, str):
        return parse_method(entry)
    if isinstance(entry, dict):
        return MethodSpec.from_dict(entry)
    raise ConfigError(f"method entries must be labels or objects, got {type(entry).__name__}")
